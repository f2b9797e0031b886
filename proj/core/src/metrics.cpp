#include "mtlb/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "mtlb/errors.hpp"

namespace mtlb {

double box_iou(const BoxF& a, const BoxF& b) {
    const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
    const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
    const double inter = ix * iy;
    const double uni = a.w * a.h + b.w * b.h - inter;
    if (uni <= 0.0) return 0.0;
    return inter / uni;
}

double average_precision(const std::vector<std::pair<double, bool>>& scored, int64_t n_gt) {
    if (n_gt <= 0) throw Error("average_precision: need at least one ground-truth box");
    if (scored.empty()) return 0.0;

    std::vector<double> precision, recall;
    int64_t tp = 0, fp = 0;
    for (const auto& [conf, hit] : scored) {
        (hit ? tp : fp) += 1;
        precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
        recall.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
    }

    // Precision envelope, then the area under the stepwise recall curve.
    for (size_t i = precision.size(); i-- > 1;)
        precision[i - 1] = std::max(precision[i - 1], precision[i]);

    double ap = 0.0, prev_r = 0.0;
    for (size_t i = 0; i < recall.size(); ++i) {
        ap += (recall[i] - prev_r) * precision[i];
        prev_r = recall[i];
    }
    return ap;
}

double combined_metric(double map, double miou) {
    if (map < 0.0 || map > 1.0 || miou < 0.0 || miou > 1.0)
        throw Error("combined_metric: inputs must lie in [0, 1]");
    return std::sqrt(map * miou);
}

double eval_miou(const std::vector<std::vector<int>>& pred_labels,
                 const std::vector<std::vector<int>>& gt_labels, int64_t n_classes,
                 std::map<int, double>* class_iou) {
    if (pred_labels.size() != gt_labels.size())
        throw Error("eval_miou: prediction / ground-truth scene counts differ");

    std::vector<int64_t> inter(static_cast<size_t>(n_classes), 0);
    std::vector<int64_t> uni(static_cast<size_t>(n_classes), 0);
    for (size_t s = 0; s < pred_labels.size(); ++s) {
        const auto& p = pred_labels[s];
        const auto& g = gt_labels[s];
        if (p.size() != g.size()) throw Error("eval_miou: label grid sizes differ");
        for (size_t i = 0; i < p.size(); ++i) {
            if (p[i] < 0 || p[i] >= n_classes || g[i] < 0 || g[i] >= n_classes)
                throw Error("eval_miou: label out of range");
            if (p[i] == g[i]) {
                inter[static_cast<size_t>(p[i])] += 1;
                uni[static_cast<size_t>(p[i])] += 1;
            } else {
                uni[static_cast<size_t>(p[i])] += 1;
                uni[static_cast<size_t>(g[i])] += 1;
            }
        }
    }

    double total = 0.0;
    int64_t counted = 0;
    for (int64_t c = 1; c < n_classes; ++c) {
        if (uni[static_cast<size_t>(c)] == 0) continue;
        const double iou = static_cast<double>(inter[static_cast<size_t>(c)]) /
                           static_cast<double>(uni[static_cast<size_t>(c)]);
        if (class_iou) (*class_iou)[static_cast<int>(c)] = iou;
        total += iou;
        counted += 1;
    }
    return counted == 0 ? 0.0 : total / static_cast<double>(counted);
}

double eval_map(const std::vector<std::vector<DetPrediction>>& preds,
                const std::vector<std::vector<BoxLabel>>& gt, int64_t min_box_area,
                double iou_threshold, std::map<int, double>* class_ap) {
    if (preds.size() != gt.size())
        throw Error("eval_map: prediction / ground-truth scene counts differ");
    const auto area_ok = [min_box_area](double w, double h) {
        return w * h >= static_cast<double>(min_box_area);
    };

    std::map<int, int64_t> gt_count;
    for (const auto& scene_gt : gt)
        for (const BoxLabel& b : scene_gt)
            if (area_ok(b.w, b.h)) gt_count[b.cls] += 1;
    if (gt_count.empty()) return 0.0;

    double ap_sum = 0.0;
    for (const auto& [cls, n_gt] : gt_count) {
        struct Cand {
            size_t scene;
            DetPrediction pred;
        };
        std::vector<Cand> cands;
        for (size_t s = 0; s < preds.size(); ++s)
            for (const DetPrediction& p : preds[s])
                if (p.cls == cls && area_ok(p.box.w, p.box.h)) cands.push_back({s, p});
        std::stable_sort(cands.begin(), cands.end(),
                         [](const Cand& a, const Cand& b) { return a.pred.conf > b.pred.conf; });

        std::vector<std::vector<bool>> matched(gt.size());
        for (size_t s = 0; s < gt.size(); ++s) matched[s].assign(gt[s].size(), false);

        std::vector<std::pair<double, bool>> scored;
        scored.reserve(cands.size());
        for (const Cand& c : cands) {
            double best_iou = 0.0;
            size_t best_idx = 0;
            bool found = false;
            const auto& scene_gt = gt[c.scene];
            for (size_t i = 0; i < scene_gt.size(); ++i) {
                const BoxLabel& g = scene_gt[i];
                if (g.cls != cls || !area_ok(g.w, g.h) || matched[c.scene][i]) continue;
                const BoxF gb{static_cast<double>(g.x), static_cast<double>(g.y),
                              static_cast<double>(g.w), static_cast<double>(g.h)};
                const double iou = box_iou(c.pred.box, gb);
                if (iou > best_iou) {
                    best_iou = iou;
                    best_idx = i;
                    found = true;
                }
            }
            const bool hit = found && best_iou >= iou_threshold;
            if (hit) matched[c.scene][best_idx] = true;
            scored.emplace_back(c.pred.conf, hit);
        }

        const double ap = average_precision(scored, n_gt);
        if (class_ap) (*class_ap)[cls] = ap;
        ap_sum += ap;
    }
    return ap_sum / static_cast<double>(gt_count.size());
}

std::vector<DetPrediction> decode_detections(const Tensor& det_out, int64_t batch_index,
                                             const ArchConfig& arch) {
    const DetLayout layout(arch);
    const Shape& sh = det_out.shape();
    if (sh.size() != 4 || sh[1] != layout.channels)
        throw ShapeError("decode_detections: unexpected head output " + shape_str(sh));
    const int64_t h = sh[2], w = sh[3];
    auto vals = det_out.values();
    const auto at = [&](int64_t c, int64_t y, int64_t x) {
        return vals[static_cast<size_t>(((batch_index * sh[1] + c) * h + y) * w + x)];
    };
    const auto sigm = [](double v) {
        return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    };

    std::vector<DetPrediction> out;
    for (int64_t y = 0; y < h; ++y) {
        for (int64_t x = 0; x < w; ++x) {
            const double o0 = at(layout.obj_begin, y, x);
            const double o1 = at(layout.obj_begin + 1, y, x);
            const double p_obj = sigm(o1 - o0);
            if (p_obj <= 0.5) continue;

            const int64_t n_cls = arch.det_classes;
            double max_logit = at(layout.cls_begin, y, x);
            int64_t best = 0;
            for (int64_t c = 1; c < n_cls; ++c) {
                const double v = at(layout.cls_begin + c, y, x);
                if (v > max_logit) {
                    max_logit = v;
                    best = c;
                }
            }
            double denom = 0.0;
            for (int64_t c = 0; c < n_cls; ++c)
                denom += std::exp(at(layout.cls_begin + c, y, x) - max_logit);
            const double p_cls = 1.0 / denom;

            const double tx = sigm(at(layout.box_begin + 0, y, x));
            const double ty = sigm(at(layout.box_begin + 1, y, x));
            const double tw = sigm(at(layout.box_begin + 2, y, x));
            const double th = sigm(at(layout.box_begin + 3, y, x));
            const double bw = tw * static_cast<double>(arch.grid);
            const double bh = th * static_cast<double>(arch.grid);

            DetPrediction p;
            p.cls = static_cast<int>(best);
            p.conf = p_obj * p_cls;
            p.box = {static_cast<double>(x) + tx - bw / 2.0,
                     static_cast<double>(y) + ty - bh / 2.0, bw, bh};
            out.push_back(p);
        }
    }
    return out;
}

MetricReport evaluate_model(const MtlModel& model, const Dataset& data,
                            const std::vector<int64_t>& idx) {
    NoGradGuard guard;
    Tensor input = make_input_batch(data, idx);
    Tensor seg_out = model.seg_forward(input);
    Tensor det_out = model.det_forward(input);

    const int64_t g = data.config.grid;
    const int64_t n_cls = model.arch().seg_classes;
    auto seg_vals = seg_out.values();

    std::vector<std::vector<int>> pred_labels, gt_labels;
    std::vector<std::vector<DetPrediction>> preds;
    std::vector<std::vector<BoxLabel>> gt_boxes;
    for (size_t b = 0; b < idx.size(); ++b) {
        const Scene& s = data.scenes[static_cast<size_t>(idx[b])];
        std::vector<int> labels(static_cast<size_t>(g * g));
        for (int64_t y = 0; y < g; ++y) {
            for (int64_t x = 0; x < g; ++x) {
                int best = 0;
                double best_v = seg_vals[static_cast<size_t>(
                    ((static_cast<int64_t>(b) * n_cls) * g + y) * g + x)];
                for (int64_t c = 1; c < n_cls; ++c) {
                    const double v = seg_vals[static_cast<size_t>(
                        ((static_cast<int64_t>(b) * n_cls + c) * g + y) * g + x)];
                    if (v > best_v) {
                        best_v = v;
                        best = static_cast<int>(c);
                    }
                }
                labels[static_cast<size_t>(y * g + x)] = best;
            }
        }
        pred_labels.push_back(std::move(labels));
        gt_labels.push_back(s.seg_labels);
        preds.push_back(decode_detections(det_out, static_cast<int64_t>(b), model.arch()));
        gt_boxes.push_back(s.boxes);
    }

    MetricReport r;
    r.miou = eval_miou(pred_labels, gt_labels, n_cls, &r.class_iou);
    r.map = eval_map(preds, gt_boxes, data.config.min_box_area, 0.5, &r.class_ap);
    r.combined = combined_metric(r.map, r.miou);
    return r;
}

}  // namespace mtlb
