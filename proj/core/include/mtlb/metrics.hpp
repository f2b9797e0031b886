#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "mtlb/model.hpp"
#include "mtlb/scene.hpp"

namespace mtlb {

/// Axis-aligned box with continuous coordinates, top-left plus size.
struct BoxF {
    double x = 0, y = 0, w = 0, h = 0;
};

double box_iou(const BoxF& a, const BoxF& b);

struct DetPrediction {
    int cls = 0;
    double conf = 0;
    BoxF box;
};

/// All-point interpolated average precision. `scored` must be sorted by
/// descending confidence; each entry marks whether that prediction matched.
double average_precision(const std::vector<std::pair<double, bool>>& scored, int64_t n_gt);

/// Geometric mean of the two task metrics; both must lie in [0, 1].
double combined_metric(double map, double miou);

/// Class-aggregated intersection-over-union across all label grids. The
/// background class 0 is excluded; any other class counted in prediction or
/// ground truth contributes. Fills `class_iou` when given.
double eval_miou(const std::vector<std::vector<int>>& pred_labels,
                 const std::vector<std::vector<int>>& gt_labels, int64_t n_classes,
                 std::map<int, double>* class_iou = nullptr);

/// Mean average precision at the given IoU threshold, over classes with at
/// least one ground-truth box. Boxes under `min_box_area` are dropped on both
/// sides before matching.
double eval_map(const std::vector<std::vector<DetPrediction>>& preds,
                const std::vector<std::vector<BoxLabel>>& gt, int64_t min_box_area,
                double iou_threshold = 0.5, std::map<int, double>* class_ap = nullptr);

/// Cells whose objectness probability exceeds 0.5, decoded into boxes.
std::vector<DetPrediction> decode_detections(const Tensor& det_out, int64_t batch_index,
                                             const ArchConfig& arch);

struct MetricReport {
    double map = 0;
    double miou = 0;
    double combined = 0;
    std::map<int, double> class_ap;
    std::map<int, double> class_iou;
};

MetricReport evaluate_model(const MtlModel& model, const Dataset& data,
                            const std::vector<int64_t>& idx);

}  // namespace mtlb
