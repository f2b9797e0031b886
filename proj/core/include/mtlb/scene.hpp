#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtlb/tensor.hpp"

namespace mtlb {

/// Axis-aligned box in cell units, top-left corner plus size.
struct BoxLabel {
    int cls = 0;
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;
};

/// One synthetic sample: a single-channel intensity grid with dense
/// segmentation labels and box annotations for the blobs.
struct Scene {
    int64_t grid = 0;
    std::vector<double> input;     // grid*grid intensities, row-major
    std::vector<int> seg_labels;   // grid*grid class ids
    std::vector<BoxLabel> boxes;
};

/// Sizing and loss shaping of one benchmark problem. The detection loss is
/// multiplied by `loss_scale_factor` to reproduce a task-scale imbalance.
struct BenchmarkConfig {
    int64_t grid = 16;
    int64_t n_train_det = 64;
    int64_t n_train_seg = 64;
    int64_t n_val = 16;
    double loss_scale_factor = 1.0;
    double coord_weight = 5.0;
    double obj_weight = 1.0;
    double cls_weight = 1.0;
    int64_t min_box_area = 3;
    uint64_t seed = 1;

    void validate() const;
};

struct Dataset {
    BenchmarkConfig config;
    std::vector<Scene> scenes;
    std::vector<int64_t> train_det;
    std::vector<int64_t> train_seg;
    std::vector<int64_t> val;
};

/// Deterministic in `config.seed`. Scenes hold a horizontal road band plus
/// one to three rectangular blobs of two types; the intensity channel encodes
/// region identity with additive Gaussian noise.
Dataset generate_dataset(const BenchmarkConfig& config);

/// [B, 1, grid, grid] batch of the scenes selected by `idx`.
Tensor make_input_batch(const Dataset& data, const std::vector<int64_t>& idx);

struct BenchPreset {
    BenchmarkConfig bench;
    int64_t epochs = 60;
};

/// Named problem sizes: "imbalanced-seg", "balanced-large", "balanced-small".
BenchPreset benchmark_preset(const std::string& name);
std::vector<std::string> preset_names();

nlohmann::json scene_to_json(const Scene& s);
Scene scene_from_json(const nlohmann::json& j);
nlohmann::json dataset_to_json(const Dataset& d);
Dataset dataset_from_json(const nlohmann::json& j);

}  // namespace mtlb
