#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtlb/param_set.hpp"
#include "mtlb/tensor.hpp"

namespace mtlb {

/// Two-head convolutional architecture: a shared trunk of same-padded
/// conv+relu layers feeding one 1x1 conv head per task.
struct ArchConfig {
    int64_t grid = 16;
    int64_t in_channels = 1;
    std::vector<int64_t> trunk_channels = {8, 16};
    int64_t kernel = 3;
    int64_t seg_classes = 4;
    int64_t det_classes = 2;

    void validate() const;
};

bool operator==(const ArchConfig& a, const ArchConfig& b);

/// FNV-1a over a canonical rendering; stored in snapshots to reject
/// restores into a different architecture.
uint64_t arch_hash(const ArchConfig& cfg);

/// Channel layout of the detection head output, per grid cell:
/// two objectness logits, one logit per class, then four box coordinates
/// (activated by sigmoid wherever they are consumed).
struct DetLayout {
    int64_t obj_begin = 0;
    int64_t cls_begin = 2;
    int64_t box_begin;
    int64_t channels;

    explicit DetLayout(const ArchConfig& cfg)
        : box_begin(2 + cfg.det_classes), channels(2 + cfg.det_classes + 4) {}
};

struct MtlOutputs {
    Tensor seg;  // [N, seg_classes, H, W] logits
    Tensor det;  // [N, det_channels, H, W] raw head output
};

class MtlModel {
  public:
    /// He-initialized weights (normal, std = sqrt(2 / fan_in)), zero biases,
    /// drawn from a mt19937_64 stream in fixed layer order.
    MtlModel(ArchConfig cfg, uint64_t seed);

    const ArchConfig& arch() const { return cfg_; }
    ParamSet& params() { return params_; }
    const ParamSet& params() const { return params_; }

    Tensor trunk_forward(const Tensor& input) const;
    Tensor seg_forward(const Tensor& input) const;
    Tensor det_forward(const Tensor& input) const;

    /// Weight tensor of the deepest shared layer, the probe point for
    /// gradient-norm balancing.
    const std::string& last_shared_weight_name() const { return last_shared_weight_; }

  private:
    ArchConfig cfg_;
    ParamSet params_;
    std::string last_shared_weight_;
};

MtlOutputs forward_mtl(const MtlModel& model, const Tensor& seg_input, const Tensor& det_input);

}  // namespace mtlb
