#include "mtlb/weighting.hpp"

#include <algorithm>
#include <cmath>

#include "mtlb/errors.hpp"

namespace mtlb {

const std::vector<std::string>& strategy_ids() {
    static const std::vector<std::string> ids = {
        "none",      "handcrafted", "dynamic", "uncertainty", "gradnorm",
        "geometric", "learned",     "meta-static", "meta-async"};
    return ids;
}

void StrategyConfig::validate() const {
    const auto& ids = strategy_ids();
    if (std::find(ids.begin(), ids.end(), id) == ids.end())
        throw ConfigError("unknown weighting strategy: " + id);
    if (id == "meta-static" || id == "meta-async") {
        if (static_weights.seg <= 0.0 || static_weights.det <= 0.0)
            throw ConfigError("static task weights must be positive");
    }
    if (id == "meta-async") schedule.validate();
    if (handcrafted_window < 1) throw ConfigError("handcrafted calibration window must be positive");
    if (gradnorm_alpha < 0.0) throw ConfigError("gradnorm asymmetry must be non-negative");
    if (gradnorm_lr <= 0.0) throw ConfigError("gradnorm learning rate must be positive");
    if (gradnorm_floor <= 0.0) throw ConfigError("gradnorm weight floor must be positive");
    if (geometric_floor <= 0.0) throw ConfigError("geometric loss floor must be positive");
}

double gradnorm_objective(const std::vector<double>& norms, const std::vector<double>& targets) {
    if (norms.size() != targets.size())
        throw Error("gradnorm_objective: norm / target counts differ");
    double s = 0.0;
    for (size_t i = 0; i < norms.size(); ++i) s += std::abs(norms[i] - targets[i]);
    return s;
}

std::vector<double> gradnorm_targets(const std::vector<double>& norms,
                                     const std::vector<double>& loss_ratio, double alpha) {
    if (norms.size() != loss_ratio.size() || norms.empty())
        throw Error("gradnorm_targets: need matching non-empty norm / ratio lists");
    const double n = static_cast<double>(norms.size());
    double gbar = 0.0, rbar = 0.0;
    for (size_t i = 0; i < norms.size(); ++i) {
        gbar += norms[i];
        rbar += loss_ratio[i];
    }
    gbar /= n;
    rbar /= n;
    if (rbar <= 0.0) throw NumericError("gradnorm_targets: non-positive mean loss ratio");
    std::vector<double> out(norms.size());
    for (size_t i = 0; i < norms.size(); ++i)
        out[i] = gbar * std::pow(loss_ratio[i] / rbar, alpha);
    return out;
}

std::vector<double> renormalize_to_count(std::vector<double> weights, double floor) {
    if (weights.empty()) throw Error("renormalize_to_count: empty weight list");
    const double count = static_cast<double>(weights.size());
    for (double& w : weights) w = std::max(w, floor);
    double s = 0.0;
    for (double w : weights) s += w;
    for (double& w : weights) w *= count / s;
    double head = 0.0;
    for (size_t i = 0; i + 1 < weights.size(); ++i) head += weights[i];
    weights.back() = count - head;
    return weights;
}

namespace {

Tensor weighted_sum(const TaskLosses& losses, const TaskWeights& w) {
    const bool use_seg = w.seg != 0.0;
    const bool use_det = w.det != 0.0;
    if (use_seg && use_det) return add(scale(losses.seg, w.seg), scale(losses.det, w.det));
    if (use_seg) return scale(losses.seg, w.seg);
    if (use_det) return scale(losses.det, w.det);
    throw Error("weighted_sum: both tasks masked");
}

class NoneStrategy : public WeightingStrategy {
  public:
    const std::string& id() const override {
        static const std::string v = "none";
        return v;
    }
    TaskWeights epoch_weights(int64_t) const override { return {1.0, 1.0}; }
    Tensor combine(const TaskLosses& losses, int64_t) override { return add(losses.seg, losses.det); }
    TaskWeights current_weights() const override { return {1.0, 1.0}; }
};

// Scales segmentation by the loss ratio observed over the first few batches,
// then keeps that weight for the rest of the run.
class HandcraftedStrategy : public WeightingStrategy {
  public:
    explicit HandcraftedStrategy(int64_t window) : window_(window) {}

    const std::string& id() const override {
        static const std::string v = "handcrafted";
        return v;
    }
    TaskWeights epoch_weights(int64_t) const override { return w_; }
    Tensor combine(const TaskLosses& losses, int64_t) override { return weighted_sum(losses, w_); }
    void on_batch(const BatchLossInfo& info) override {
        if (seen_ >= window_) return;
        seg_sum_ += info.seg;
        det_sum_ += info.det;
        if (++seen_ == window_) {
            if (seg_sum_ <= 0.0)
                throw NumericError("handcrafted: non-positive segmentation loss in calibration");
            w_.seg = det_sum_ / seg_sum_;
        }
    }
    TaskWeights current_weights() const override { return w_; }

  private:
    int64_t window_;
    int64_t seen_ = 0;
    double seg_sum_ = 0.0, det_sum_ = 0.0;
    TaskWeights w_{1.0, 1.0};
};

// Re-derives the segmentation weight from the previous epoch's mean losses.
class DynamicStrategy : public WeightingStrategy {
  public:
    const std::string& id() const override {
        static const std::string v = "dynamic";
        return v;
    }
    TaskWeights epoch_weights(int64_t) const override { return w_; }
    Tensor combine(const TaskLosses& losses, int64_t) override { return weighted_sum(losses, w_); }
    void on_batch(const BatchLossInfo& info) override {
        seg_sum_ += info.seg;
        det_sum_ += info.det;
        batches_ += 1;
    }
    void on_epoch_end(int64_t) override {
        if (batches_ == 0) return;
        if (seg_sum_ <= 0.0)
            throw NumericError("dynamic: non-positive segmentation loss over epoch");
        w_.seg = det_sum_ / seg_sum_;
        seg_sum_ = det_sum_ = 0.0;
        batches_ = 0;
    }
    TaskWeights current_weights() const override { return w_; }

  private:
    TaskWeights w_{1.0, 1.0};
    double seg_sum_ = 0.0, det_sum_ = 0.0;
    int64_t batches_ = 0;
};

// Homoscedastic-uncertainty combination: each task carries a trainable
// log-variance s, contributing exp(-s) * L / 2 + s / 2.
class UncertaintyStrategy : public WeightingStrategy {
  public:
    const std::string& id() const override {
        static const std::string v = "uncertainty";
        return v;
    }
    void attach(MtlModel& model) override {
        s_seg_ = Tensor::scalar(0.0);
        s_det_ = Tensor::scalar(0.0);
        model.params().add("weighting.log_var.seg", s_seg_, Partition::Weighting);
        model.params().add("weighting.log_var.det", s_det_, Partition::Weighting);
    }
    bool trains_weighting_params() const override { return true; }
    TaskWeights epoch_weights(int64_t) const override { return current_weights(); }
    Tensor combine(const TaskLosses& losses, int64_t) override {
        if (!s_seg_.defined()) throw Error("uncertainty: strategy was not attached to a model");
        Tensor seg_term =
            add(scale(mul(exp(scale(s_seg_, -1.0)), losses.seg), 0.5), scale(s_seg_, 0.5));
        Tensor det_term =
            add(scale(mul(exp(scale(s_det_, -1.0)), losses.det), 0.5), scale(s_det_, 0.5));
        return add(seg_term, det_term);
    }
    TaskWeights current_weights() const override {
        if (!s_seg_.defined()) return {0.5, 0.5};
        return {0.5 * std::exp(-s_seg_.item()), 0.5 * std::exp(-s_det_.item())};
    }

  private:
    Tensor s_seg_, s_det_;
};

// Keeps per-task gradient magnitudes at the last shared layer near a common
// target; the weights follow sign steps on an L1 objective and are clamped
// and renormalized to sum to the task count after every batch.
class GradNormStrategy : public WeightingStrategy {
  public:
    GradNormStrategy(double alpha, double lr, double floor)
        : alpha_(alpha), lr_(lr), floor_(floor) {}

    const std::string& id() const override {
        static const std::string v = "gradnorm";
        return v;
    }
    bool wants_grad_probes() const override { return true; }
    TaskWeights epoch_weights(int64_t) const override { return {w_[0], w_[1]}; }
    Tensor combine(const TaskLosses& losses, int64_t) override {
        return weighted_sum(losses, {w_[0], w_[1]});
    }
    void on_batch(const BatchLossInfo& info) override {
        if (std::isnan(l0_seg_)) {
            if (info.seg <= 0.0 || info.det <= 0.0)
                throw NumericError("gradnorm: non-positive initial loss");
            l0_seg_ = info.seg;
            l0_det_ = info.det;
        }
        const std::vector<double> norms = {w_[0] * info.seg_gradnorm, w_[1] * info.det_gradnorm};
        const std::vector<double> ratio = {info.seg / l0_seg_, info.det / l0_det_};
        const std::vector<double> targets = gradnorm_targets(norms, ratio, alpha_);
        const double probes[2] = {info.seg_gradnorm, info.det_gradnorm};
        for (int i = 0; i < 2; ++i) {
            const double diff = norms[static_cast<size_t>(i)] - targets[static_cast<size_t>(i)];
            const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
            w_[static_cast<size_t>(i)] -= lr_ * sgn * probes[i];
        }
        w_ = renormalize_to_count(std::move(w_), floor_);
    }
    TaskWeights current_weights() const override { return {w_[0], w_[1]}; }

  private:
    double alpha_, lr_, floor_;
    std::vector<double> w_{1.0, 1.0};
    double l0_seg_ = std::nan(""), l0_det_ = std::nan("");
};

// Geometric mean of the task losses, floored before the log to stay finite.
class GeometricStrategy : public WeightingStrategy {
  public:
    explicit GeometricStrategy(double floor) : floor_(floor) {}

    const std::string& id() const override {
        static const std::string v = "geometric";
        return v;
    }
    TaskWeights epoch_weights(int64_t) const override { return {1.0, 1.0}; }
    Tensor combine(const TaskLosses& losses, int64_t) override {
        Tensor total = exp(scale(add(log(clamp_min(losses.seg, floor_)),
                                     log(clamp_min(losses.det, floor_))),
                                 0.5));
        const double t = total.item();
        eff_ = {0.5 * t / std::max(losses.seg.item(), floor_),
                0.5 * t / std::max(losses.det.item(), floor_)};
        return total;
    }
    TaskWeights current_weights() const override { return eff_; }

  private:
    double floor_;
    TaskWeights eff_{std::nan(""), std::nan("")};
};

// A single trainable logit sets the convex mix between the two losses.
class LearnedStrategy : public WeightingStrategy {
  public:
    const std::string& id() const override {
        static const std::string v = "learned";
        return v;
    }
    void attach(MtlModel& model) override {
        logit_ = Tensor::scalar(0.0);
        model.params().add("weighting.alpha_logit", logit_, Partition::Weighting);
    }
    bool trains_weighting_params() const override { return true; }
    TaskWeights epoch_weights(int64_t) const override { return current_weights(); }
    Tensor combine(const TaskLosses& losses, int64_t) override {
        if (!logit_.defined()) throw Error("learned: strategy was not attached to a model");
        Tensor a = sigmoid(logit_);
        return add(mul(a, losses.seg), mul(sub(Tensor::scalar(1.0), a), losses.det));
    }
    TaskWeights current_weights() const override {
        if (!logit_.defined()) return {0.5, 0.5};
        const double x = logit_.item();
        const double a = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
        return {a, 1.0 - a};
    }

  private:
    Tensor logit_;
};

class MetaStaticStrategy : public WeightingStrategy {
  public:
    explicit MetaStaticStrategy(TaskWeights w) : w_(w) {}

    const std::string& id() const override {
        static const std::string v = "meta-static";
        return v;
    }
    TaskWeights epoch_weights(int64_t) const override { return w_; }
    Tensor combine(const TaskLosses& losses, int64_t) override { return weighted_sum(losses, w_); }
    TaskWeights current_weights() const override { return w_; }

  private:
    TaskWeights w_;
};

class MetaAsyncStrategy : public WeightingStrategy {
  public:
    MetaAsyncStrategy(TaskWeights base, AsyncSchedule schedule)
        : base_(base), schedule_(schedule), cur_(base) {}

    const std::string& id() const override {
        static const std::string v = "meta-async";
        return v;
    }
    TaskWeights epoch_weights(int64_t epoch) const override {
        return schedule_.mask(base_, epoch);
    }
    Tensor combine(const TaskLosses& losses, int64_t epoch) override {
        cur_ = schedule_.mask(base_, epoch);
        return weighted_sum(losses, cur_);
    }
    TaskWeights current_weights() const override { return cur_; }

  private:
    TaskWeights base_;
    AsyncSchedule schedule_;
    TaskWeights cur_;
};

}  // namespace

std::unique_ptr<WeightingStrategy> make_strategy(const StrategyConfig& config) {
    config.validate();
    if (config.id == "none") return std::make_unique<NoneStrategy>();
    if (config.id == "handcrafted")
        return std::make_unique<HandcraftedStrategy>(config.handcrafted_window);
    if (config.id == "dynamic") return std::make_unique<DynamicStrategy>();
    if (config.id == "uncertainty") return std::make_unique<UncertaintyStrategy>();
    if (config.id == "gradnorm")
        return std::make_unique<GradNormStrategy>(config.gradnorm_alpha, config.gradnorm_lr,
                                                  config.gradnorm_floor);
    if (config.id == "geometric") return std::make_unique<GeometricStrategy>(config.geometric_floor);
    if (config.id == "learned") return std::make_unique<LearnedStrategy>();
    if (config.id == "meta-static")
        return std::make_unique<MetaStaticStrategy>(config.static_weights);
    if (config.id == "meta-async")
        return std::make_unique<MetaAsyncStrategy>(config.static_weights, config.schedule);
    throw ConfigError("unknown weighting strategy: " + config.id);
}

}  // namespace mtlb
