#pragma once

#include <vector>

#include "mtlb/model.hpp"
#include "mtlb/scene.hpp"
#include "mtlb/tensor.hpp"

namespace mtlb {

/// One optimization step's worth of data for both tasks. The two sides come
/// from disjoint training splits and may differ in batch size.
struct Batch {
    Tensor seg_input;
    std::vector<const Scene*> seg_scenes;
    Tensor det_input;
    std::vector<const Scene*> det_scenes;
};

Batch make_batch(const Dataset& data, const std::vector<int64_t>& seg_idx,
                 const std::vector<int64_t>& det_idx);

/// Unweighted per-task scalar losses, still attached to the graph.
struct TaskLosses {
    Tensor seg;
    Tensor det;
};

/// Segmentation: mean cross-entropy over every cell. Detection: a YOLO-style
/// sum of box-coordinate, objectness and class terms, multiplied by the
/// configured scale factor.
TaskLosses task_losses(const MtlModel& model, const Batch& batch, const BenchmarkConfig& config);

Tensor seg_loss(const MtlModel& model, const Tensor& input,
                const std::vector<const Scene*>& scenes);
Tensor det_loss(const MtlModel& model, const Tensor& input,
                const std::vector<const Scene*>& scenes, const BenchmarkConfig& config);

}  // namespace mtlb
