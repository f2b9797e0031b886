#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mtlb/scheduler.hpp"

namespace mtlb {

/// Ways a search variable maps onto the unit interval: linearly, through a
/// log10 transform for scale-like quantities, or by snapping to a fixed set.
enum class VarKind { Linear, Exponential, Categorical };

struct Variable {
    std::string name;
    VarKind kind = VarKind::Linear;
    double min = 0.0;
    double max = 1.0;
    std::vector<double> categories;
    bool round_to_int = false;

    void validate() const;
    /// Unit coordinate to problem value; the input is clamped into [0, 1].
    double denormalize(double u) const;
    /// Problem value to unit coordinate.
    double normalize(double v) const;
};

/// Ordered set of variables; search runs in the unit hypercube and only
/// converts to problem values at evaluation time.
class SearchSpace {
  public:
    explicit SearchSpace(std::vector<Variable> vars);

    size_t dim() const { return vars_.size(); }
    const std::vector<Variable>& variables() const { return vars_; }
    const Variable& at(size_t i) const;
    const Variable& at(const std::string& name) const;

    /// Validates dimensionality and unit bounds.
    void check_point(const std::vector<double>& point) const;

    std::map<std::string, double> applied_values(const std::vector<double>& point) const;
    std::vector<double> normalize_point(const std::map<std::string, double>& values) const;

  private:
    std::vector<Variable> vars_;
};

/// Raw task weights [0.1, 1000] x [0.1, 100] on log scales.
SearchSpace weights_space();
/// The same plus integer task periods in [1, 10] for both tasks.
SearchSpace weights_async_space();

/// Scales two positive raw weights to sum to exactly one.
TaskWeights normalize_weights(double raw_seg, double raw_det);

}  // namespace mtlb
