#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mtlb/losses.hpp"
#include "mtlb/model.hpp"
#include "mtlb/scheduler.hpp"
#include "mtlb/tensor.hpp"

namespace mtlb {

/// Raw per-task values observed on one training batch. Loss fields are NaN
/// for a task masked out of the current epoch; the gradient-norm probes are
/// only filled when the active strategy asks for them.
struct BatchLossInfo {
    double seg = 0;
    double det = 0;
    double seg_gradnorm = 0;
    double det_gradnorm = 0;
};

struct StrategyConfig {
    std::string id = "none";
    TaskWeights static_weights{1.0, 1.0};  // meta-static / meta-async base
    AsyncSchedule schedule{};              // meta-async only
    int64_t handcrafted_window = 10;
    double gradnorm_alpha = 1.0;
    double gradnorm_lr = 0.025;
    double gradnorm_floor = 1e-4;
    double geometric_floor = 1e-12;

    void validate() const;
};

const std::vector<std::string>& strategy_ids();

/// How the trainer turns two task losses into one optimization objective.
/// Strategies fall into two families: weight types scale the task losses by
/// scalars they maintain themselves, combiner types build a differentiable
/// expression (possibly with trainable parameters of their own).
class WeightingStrategy {
  public:
    virtual ~WeightingStrategy() = default;

    virtual const std::string& id() const = 0;

    /// Registers any trainable weighting parameters on the model.
    virtual void attach(MtlModel& model) { (void)model; }

    /// True if attach() added parameters that the main optimizer should step.
    virtual bool trains_weighting_params() const { return false; }

    /// True if on_batch expects gradient-norm probes at the last shared layer.
    virtual bool wants_grad_probes() const { return false; }

    /// Weights in force at the start of the given epoch. A zero entry means
    /// the task is masked: its loss is not computed and its head not updated.
    virtual TaskWeights epoch_weights(int64_t epoch) const = 0;

    /// Builds the total loss. Loss tensors are only defined for tasks whose
    /// epoch weight is nonzero.
    virtual Tensor combine(const TaskLosses& losses, int64_t epoch) = 0;

    /// Observes raw batch losses after the optimizer step.
    virtual void on_batch(const BatchLossInfo& info) { (void)info; }

    virtual void on_epoch_end(int64_t epoch) { (void)epoch; }

    /// Effective multiplicative weights most recently applied, for reporting.
    virtual TaskWeights current_weights() const = 0;
};

std::unique_ptr<WeightingStrategy> make_strategy(const StrategyConfig& config);

// Gradient-norm balancing pieces, exposed for direct verification.

/// L1 distance between per-task gradient norms and their targets.
double gradnorm_objective(const std::vector<double>& norms, const std::vector<double>& targets);

/// Common target for every task: mean norm scaled by the relative inverse
/// training rate raised to `alpha`. `loss_ratio` is L(t)/L(0) per task.
std::vector<double> gradnorm_targets(const std::vector<double>& norms,
                                     const std::vector<double>& loss_ratio, double alpha);

/// Clamps each weight to `floor`, then rescales so the weights sum exactly
/// to the task count (the final entry absorbs rounding).
std::vector<double> renormalize_to_count(std::vector<double> weights, double floor);

}  // namespace mtlb
