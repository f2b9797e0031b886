#pragma once

#include <map>
#include <string>
#include <vector>

#include "mtlb/tensor.hpp"

namespace mtlb {

/// Parameter partition of the two-head model: the shared trunk, one slice per
/// task head, and auxiliary trainable weighting parameters.
enum class Partition { Shared, TaskSeg, TaskDet, Weighting };

const char* partition_name(Partition p);
Partition partition_from_name(const std::string& name);

/// Which partitions an optimizer step touches.
struct PartitionFilter {
    bool shared = false;
    bool task_seg = false;
    bool task_det = false;
    bool weighting = false;

    static PartitionFilter all() { return {true, true, true, true}; }
    static PartitionFilter only(Partition p) {
        PartitionFilter f;
        f.set(p, true);
        return f;
    }
    void set(Partition p, bool v);
    bool accepts(Partition p) const;
};

/// Named, partition-tagged trainable tensors. Iteration is in name order, so
/// everything driven by it is deterministic.
class ParamSet {
  public:
    struct Entry {
        Tensor tensor;
        Partition partition;
    };

    /// Registers a parameter; the tensor is marked as requiring gradients.
    void add(const std::string& name, Tensor tensor, Partition partition);

    bool contains(const std::string& name) const;
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    Partition partition_of(const std::string& name) const;

    size_t size() const { return entries_.size(); }
    int64_t total_numel() const;
    std::vector<std::string> names() const;
    std::vector<std::string> names(const PartitionFilter& filter) const;

    /// Drops all grad buffers (has_grad becomes false everywhere).
    void clear_grads();

    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

  private:
    std::map<std::string, Entry> entries_;
};

}  // namespace mtlb
