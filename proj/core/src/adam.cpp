#include "mtlb/adam.hpp"

#include <cmath>

#include "mtlb/errors.hpp"

namespace mtlb {

AdamState::Moments& AdamState::moments_for(const std::string& name, int64_t numel) {
    auto it = moments_.find(name);
    if (it == moments_.end()) {
        Moments m;
        m.m.assign(static_cast<size_t>(numel), 0.0);
        m.v.assign(static_cast<size_t>(numel), 0.0);
        it = moments_.emplace(name, std::move(m)).first;
    }
    if (static_cast<int64_t>(it->second.m.size()) != numel)
        throw Error("AdamState: moment size mismatch for " + name);
    return it->second;
}

void AdamState::reset() {
    step_ = 0;
    moments_.clear();
}

void adam_step(ParamSet& params, AdamState& state, const PartitionFilter& filter) {
    const AdamConfig& c = state.config_;
    state.step_ += 1;
    const double t = static_cast<double>(state.step_);
    const double bc1 = 1.0 - std::pow(c.beta1, t);
    const double bc2 = 1.0 - std::pow(c.beta2, t);

    for (auto& [name, entry] : params) {
        if (!filter.accepts(entry.partition)) continue;
        Tensor& p = entry.tensor;
        if (!p.has_grad())
            throw Error("adam_step: no gradient for selected parameter " + name);

        auto& mom = state.moments_for(name, p.numel());
        auto vals = p.mutable_values();
        auto grad = p.mutable_grad();
        for (size_t i = 0; i < vals.size(); ++i) {
            const double g = grad[i];
            mom.m[i] = c.beta1 * mom.m[i] + (1.0 - c.beta1) * g;
            mom.v[i] = c.beta2 * mom.v[i] + (1.0 - c.beta2) * g * g;
            const double mhat = mom.m[i] / bc1;
            const double vhat = mom.v[i] / bc2;
            vals[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
        }
        p.clear_grad();
    }
}

}  // namespace mtlb
