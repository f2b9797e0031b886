#include "mtlb/losses.hpp"

#include <cmath>
#include <map>

#include "mtlb/errors.hpp"

namespace mtlb {

namespace {

struct CellTarget {
    int cls;
    double tx, ty, tw, th;
};

// YOLO-style assignment: the cell containing a box center is responsible for
// that box. Later boxes overwrite earlier ones in the same cell, matching the
// painting order of the segmentation labels.
std::map<int64_t, CellTarget> responsible_cells(const Scene& s) {
    std::map<int64_t, CellTarget> out;
    for (const BoxLabel& b : s.boxes) {
        const double cx = b.x + b.w / 2.0;
        const double cy = b.y + b.h / 2.0;
        int64_t ix = static_cast<int64_t>(std::floor(cx));
        int64_t iy = static_cast<int64_t>(std::floor(cy));
        ix = std::min(ix, s.grid - 1);
        iy = std::min(iy, s.grid - 1);
        CellTarget t;
        t.cls = b.cls;
        t.tx = cx - static_cast<double>(ix);
        t.ty = cy - static_cast<double>(iy);
        t.tw = static_cast<double>(b.w) / static_cast<double>(s.grid);
        t.th = static_cast<double>(b.h) / static_cast<double>(s.grid);
        out[iy * s.grid + ix] = t;
    }
    return out;
}

}  // namespace

Batch make_batch(const Dataset& data, const std::vector<int64_t>& seg_idx,
                 const std::vector<int64_t>& det_idx) {
    Batch b;
    b.seg_input = make_input_batch(data, seg_idx);
    b.det_input = make_input_batch(data, det_idx);
    for (int64_t i : seg_idx) b.seg_scenes.push_back(&data.scenes[static_cast<size_t>(i)]);
    for (int64_t i : det_idx) b.det_scenes.push_back(&data.scenes[static_cast<size_t>(i)]);
    return b;
}

Tensor seg_loss(const MtlModel& model, const Tensor& input,
                const std::vector<const Scene*>& scenes) {
    Tensor logits = channels_to_rows(model.seg_forward(input));
    std::vector<int> labels;
    labels.reserve(static_cast<size_t>(logits.shape()[0]));
    for (const Scene* s : scenes) labels.insert(labels.end(), s->seg_labels.begin(), s->seg_labels.end());
    return softmax_cross_entropy(logits, labels);
}

Tensor det_loss(const MtlModel& model, const Tensor& input,
                const std::vector<const Scene*>& scenes, const BenchmarkConfig& config) {
    const DetLayout layout(model.arch());
    Tensor rows = channels_to_rows(model.det_forward(input));
    const int64_t cells_per_scene = model.arch().grid * model.arch().grid;

    std::vector<int> obj_labels(static_cast<size_t>(rows.shape()[0]), 0);
    std::vector<int64_t> resp_rows;
    std::vector<int> resp_cls;
    std::vector<double> box_targets;
    for (size_t b = 0; b < scenes.size(); ++b) {
        for (const auto& [cell, t] : responsible_cells(*scenes[b])) {
            const int64_t row = static_cast<int64_t>(b) * cells_per_scene + cell;
            obj_labels[static_cast<size_t>(row)] = 1;
            resp_rows.push_back(row);
            resp_cls.push_back(t.cls);
            box_targets.insert(box_targets.end(), {t.tx, t.ty, t.tw, t.th});
        }
    }

    Tensor obj = softmax_cross_entropy(slice_cols(rows, layout.obj_begin, layout.cls_begin),
                                       obj_labels);
    Tensor total = scale(obj, config.obj_weight);

    if (!resp_rows.empty()) {
        Tensor cls_logits = gather_rows(slice_cols(rows, layout.cls_begin, layout.box_begin),
                                        resp_rows);
        Tensor cls = softmax_cross_entropy(cls_logits, resp_cls);

        Tensor box_pred = sigmoid(gather_rows(slice_cols(rows, layout.box_begin, layout.channels),
                                              resp_rows));
        Tensor target = Tensor::from_values({static_cast<int64_t>(resp_rows.size()), 4},
                                            std::move(box_targets));
        Tensor coord = scale(squared_error(box_pred, target),
                             1.0 / static_cast<double>(resp_rows.size() * 4));

        total = add(total, add(scale(cls, config.cls_weight), scale(coord, config.coord_weight)));
    }
    return scale(total, config.loss_scale_factor);
}

TaskLosses task_losses(const MtlModel& model, const Batch& batch, const BenchmarkConfig& config) {
    TaskLosses out;
    out.seg = seg_loss(model, batch.seg_input, batch.seg_scenes);
    out.det = det_loss(model, batch.det_input, batch.det_scenes, config);
    return out;
}

}  // namespace mtlb
