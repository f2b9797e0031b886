#include "mtlb/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "mtlb/adam.hpp"
#include "mtlb/errors.hpp"
#include "mtlb/losses.hpp"
#include "mtlb/weighting.hpp"

namespace mtlb {

namespace {

// Round-robin index source: consumes a shuffled pass over the base indices
// and reshuffles whenever it runs dry, so a smaller split is recycled.
struct IndexStream {
    std::vector<int64_t> order;
    size_t pos = 0;

    void reset(const std::vector<int64_t>& base, std::mt19937_64& rng) {
        order = base;
        std::shuffle(order.begin(), order.end(), rng);
        pos = 0;
    }
    int64_t next(std::mt19937_64& rng) {
        if (pos == order.size()) {
            std::shuffle(order.begin(), order.end(), rng);
            pos = 0;
        }
        return order[pos++];
    }
};

double l2_norm(std::span<const double> xs) {
    double s = 0.0;
    for (double x : xs) s += x * x;
    return std::sqrt(s);
}

std::vector<const Scene*> scenes_of(const Dataset& data, const std::vector<int64_t>& idx) {
    std::vector<const Scene*> out;
    out.reserve(idx.size());
    for (int64_t i : idx) out.push_back(&data.scenes[static_cast<size_t>(i)]);
    return out;
}

nlohmann::json metric_report_to_json(const MetricReport& r) {
    nlohmann::json class_ap = nlohmann::json::object();
    for (const auto& [cls, ap] : r.class_ap) class_ap[std::to_string(cls)] = ap;
    nlohmann::json class_iou = nlohmann::json::object();
    for (const auto& [cls, iou] : r.class_iou) class_iou[std::to_string(cls)] = iou;
    return {{"map", r.map},
            {"miou", r.miou},
            {"combined", r.combined},
            {"class_ap", class_ap},
            {"class_iou", class_iou}};
}

}  // namespace

RunResult train(const RunConfig& cfg, const TrainOptions& opts) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const int64_t total_epochs = cfg.resolved_epochs();

    Dataset generated;
    const Dataset* data = opts.dataset;
    if (!data) {
        BenchmarkConfig bc = cfg.bench;
        bc.seed = cfg.resolved_bench_seed();
        generated = generate_dataset(bc);
        data = &generated;
    }
    if (data->config.grid != cfg.arch.grid)
        throw ConfigError("dataset grid does not match the architecture");

    MtlModel model(cfg.arch, cfg.seed);
    auto strategy = make_strategy(cfg.strategy);
    strategy->attach(model);
    AdamState adam({cfg.learning_rate, 0.9, 0.999, 1e-8});
    std::mt19937_64 order_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);

    if (opts.resume && opts.warm_weights)
        throw ConfigError("resume and warm start are mutually exclusive");
    int64_t start_epoch = 0;
    if (opts.resume) {
        restore_full(model, adam, *opts.resume);
        start_epoch = opts.resume->epoch;
        if (start_epoch > total_epochs)
            throw ConfigError("snapshot is already past the configured epoch count");
        std::istringstream is(opts.resume->rng_state);
        is >> order_rng;
        if (is.fail()) throw SnapshotError("corrupt rng state in snapshot");
    } else if (opts.warm_weights) {
        restore_weights(model, *opts.warm_weights);
    }

    const int64_t batch = cfg.batch_size;
    const auto ceil_div = [](int64_t a, int64_t b) { return (a + b - 1) / b; };
    const int64_t steps_per_epoch =
        std::max(ceil_div(static_cast<int64_t>(data->train_det.size()), batch),
                 ceil_div(static_cast<int64_t>(data->train_seg.size()), batch));

    RunResult result;
    result.config = cfg;
    IndexStream det_stream, seg_stream;

    for (int64_t epoch = start_epoch; epoch < total_epochs; ++epoch) {
        const TaskWeights ew = strategy->epoch_weights(epoch);
        const bool seg_active = ew.seg != 0.0;
        const bool det_active = ew.det != 0.0;

        // Streams advance even on fully masked epochs so that the data order
        // of an async run stays aligned with its unmasked sibling.
        det_stream.reset(data->train_det, order_rng);
        seg_stream.reset(data->train_seg, order_rng);

        double seg_loss_sum = 0.0, det_loss_sum = 0.0;
        int64_t steps_done = 0;

        for (int64_t step = 0; step < steps_per_epoch; ++step) {
            std::vector<int64_t> det_idx(static_cast<size_t>(batch));
            std::vector<int64_t> seg_idx(static_cast<size_t>(batch));
            for (auto& i : det_idx) i = det_stream.next(order_rng);
            for (auto& i : seg_idx) i = seg_stream.next(order_rng);
            if (!seg_active && !det_active) continue;

            model.params().clear_grads();
            TaskLosses losses;
            BatchLossInfo info;
            if (seg_active) {
                losses.seg = seg_loss(model, make_input_batch(*data, seg_idx),
                                      scenes_of(*data, seg_idx));
                check_finite(losses.seg, "segmentation loss");
                info.seg = losses.seg.item();
            } else {
                info.seg = std::nan("");
            }
            if (det_active) {
                losses.det = det_loss(model, make_input_batch(*data, det_idx),
                                      scenes_of(*data, det_idx), data->config);
                check_finite(losses.det, "detection loss");
                info.det = losses.det.item();
            } else {
                info.det = std::nan("");
            }

            if (strategy->wants_grad_probes()) {
                const Tensor& probe = model.params().at(model.last_shared_weight_name());
                if (seg_active) {
                    backward(losses.seg);
                    info.seg_gradnorm = l2_norm(probe.grad());
                    model.params().clear_grads();
                }
                if (det_active) {
                    backward(losses.det);
                    info.det_gradnorm = l2_norm(probe.grad());
                    model.params().clear_grads();
                }
            }

            Tensor total = strategy->combine(losses, epoch);
            check_finite(total, "total loss");
            backward(total);

            PartitionFilter filter;
            filter.shared = true;
            filter.task_seg = seg_active;
            filter.task_det = det_active;
            filter.weighting = strategy->trains_weighting_params();
            adam_step(model.params(), adam, filter);

            strategy->on_batch(info);
            if (seg_active) seg_loss_sum += info.seg;
            if (det_active) det_loss_sum += info.det;
            steps_done += 1;
        }

        strategy->on_epoch_end(epoch);

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_seg_loss =
            (seg_active && steps_done > 0) ? seg_loss_sum / static_cast<double>(steps_done)
                                           : std::nan("");
        rec.train_det_loss =
            (det_active && steps_done > 0) ? det_loss_sum / static_cast<double>(steps_done)
                                           : std::nan("");
        const TaskWeights cw = steps_done > 0 ? strategy->current_weights() : ew;
        rec.w_seg = cw.seg;
        rec.w_det = cw.det;
        rec.val = evaluate_model(model, *data, data->val);
        if (opts.on_epoch) opts.on_epoch(rec);
        result.epochs.push_back(std::move(rec));
    }

    result.final_report = result.epochs.empty() ? evaluate_model(model, *data, data->val)
                                                : result.epochs.back().val;

    if (!opts.snapshot_path.empty() || opts.capture) {
        std::ostringstream os;
        os << order_rng;
        ModelSnapshot snap = snapshot_state(model, adam, total_epochs, cfg.seed, os.str());
        if (!opts.snapshot_path.empty()) save_snapshot(snap, opts.snapshot_path);
        if (opts.capture) *opts.capture = std::move(snap);
    }

    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

nlohmann::json run_result_to_json(const RunResult& r) {
    nlohmann::json epochs = nlohmann::json::array();
    for (const EpochRecord& rec : r.epochs) {
        epochs.push_back({{"epoch", rec.epoch},
                          {"train_seg_loss", rec.train_seg_loss},
                          {"train_det_loss", rec.train_det_loss},
                          {"w_seg", rec.w_seg},
                          {"w_det", rec.w_det},
                          {"val", metric_report_to_json(rec.val)}});
    }
    return {{"config", render_run_config(r.config)},
            {"epochs", epochs},
            {"final", metric_report_to_json(r.final_report)}};
}

void write_run_result(const RunResult& r, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw Error("cannot open " + path + " for writing");
    f << run_result_to_json(r).dump(2) << "\n";
    if (!f) throw Error("short write to " + path);
}

}  // namespace mtlb
