#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mtlb/param_set.hpp"

namespace mtlb {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// First/second moment buffers per parameter plus a single global step counter.
// Moments are lazily created the first time a parameter is updated.
class AdamState {
public:
    struct Moments {
        std::vector<double> m;
        std::vector<double> v;
    };

    explicit AdamState(AdamConfig config = {}) : config_(config) {}

    const AdamConfig& config() const { return config_; }
    int64_t step() const { return step_; }

    Moments& moments_for(const std::string& name, int64_t numel);
    bool has_moments(const std::string& name) const { return moments_.count(name) > 0; }
    const std::map<std::string, Moments>& moments() const { return moments_; }

    // Snapshot restore hooks.
    void set_step(int64_t step) { step_ = step; }
    void set_moments(const std::string& name, Moments m) { moments_[name] = std::move(m); }
    void reset();

private:
    friend void adam_step(ParamSet&, AdamState&, const PartitionFilter&);

    AdamConfig config_;
    int64_t step_ = 0;
    std::map<std::string, Moments> moments_;
};

// One bias-corrected ADAM update over the parameters selected by `filter`.
// Every selected parameter must carry a gradient; a missing gradient is a
// logic error upstream and throws. Gradients of updated parameters are
// cleared afterwards, unselected parameters are left untouched.
void adam_step(ParamSet& params, AdamState& state, const PartitionFilter& filter = PartitionFilter::all());

}  // namespace mtlb
