#include "mtlb/search_space.hpp"

#include <algorithm>
#include <cmath>

#include "mtlb/errors.hpp"

namespace mtlb {

void Variable::validate() const {
    if (name.empty()) throw ConfigError("search variable without a name");
    if (kind == VarKind::Categorical) {
        if (categories.empty()) throw ConfigError(name + ": categorical variable needs categories");
        return;
    }
    if (!(min < max)) throw ConfigError(name + ": bounds must satisfy min < max");
    if (kind == VarKind::Exponential && min <= 0.0)
        throw ConfigError(name + ": exponential bounds must be positive");
}

double Variable::denormalize(double u) const {
    u = std::clamp(u, 0.0, 1.0);
    double v = 0.0;
    switch (kind) {
        case VarKind::Linear:
            v = min + u * (max - min);
            break;
        case VarKind::Exponential: {
            const double lo = std::log10(min), hi = std::log10(max);
            v = std::pow(10.0, lo + u * (hi - lo));
            break;
        }
        case VarKind::Categorical: {
            const size_t n = categories.size();
            const size_t i = n == 1 ? 0
                                    : static_cast<size_t>(std::floor(
                                          u * static_cast<double>(n - 1) + 0.5));
            return categories[std::min(i, n - 1)];
        }
    }
    if (round_to_int) v = std::floor(v + 0.5);
    return v;
}

double Variable::normalize(double v) const {
    switch (kind) {
        case VarKind::Linear:
            return std::clamp((v - min) / (max - min), 0.0, 1.0);
        case VarKind::Exponential: {
            if (v <= 0.0) throw ConfigError(name + ": cannot place a non-positive value");
            const double lo = std::log10(min), hi = std::log10(max);
            return std::clamp((std::log10(v) - lo) / (hi - lo), 0.0, 1.0);
        }
        case VarKind::Categorical: {
            for (size_t i = 0; i < categories.size(); ++i)
                if (categories[i] == v)
                    return categories.size() == 1
                               ? 0.0
                               : static_cast<double>(i) / static_cast<double>(categories.size() - 1);
            throw ConfigError(name + ": value is not one of the categories");
        }
    }
    throw Error("unreachable");
}

SearchSpace::SearchSpace(std::vector<Variable> vars) : vars_(std::move(vars)) {
    if (vars_.empty()) throw ConfigError("search space needs at least one variable");
    for (const Variable& v : vars_) v.validate();
    for (size_t i = 0; i < vars_.size(); ++i)
        for (size_t j = i + 1; j < vars_.size(); ++j)
            if (vars_[i].name == vars_[j].name)
                throw ConfigError("duplicate search variable " + vars_[i].name);
}

const Variable& SearchSpace::at(size_t i) const {
    if (i >= vars_.size()) throw Error("search space index out of range");
    return vars_[i];
}

const Variable& SearchSpace::at(const std::string& name) const {
    for (const Variable& v : vars_)
        if (v.name == name) return v;
    throw Error("no search variable named " + name);
}

void SearchSpace::check_point(const std::vector<double>& point) const {
    if (point.size() != vars_.size())
        throw Error("search point dimensionality mismatch");
    for (double u : point)
        if (!(u >= 0.0 && u <= 1.0)) throw Error("search point outside the unit cube");
}

std::map<std::string, double> SearchSpace::applied_values(const std::vector<double>& point) const {
    check_point(point);
    std::map<std::string, double> out;
    for (size_t i = 0; i < vars_.size(); ++i) out[vars_[i].name] = vars_[i].denormalize(point[i]);
    return out;
}

std::vector<double> SearchSpace::normalize_point(const std::map<std::string, double>& values) const {
    std::vector<double> out;
    out.reserve(vars_.size());
    for (const Variable& v : vars_) {
        auto it = values.find(v.name);
        if (it == values.end()) throw Error("missing value for search variable " + v.name);
        out.push_back(v.normalize(it->second));
    }
    return out;
}

SearchSpace weights_space() {
    return SearchSpace({{"w_seg", VarKind::Exponential, 0.1, 1000.0, {}, false},
                        {"w_det", VarKind::Exponential, 0.1, 100.0, {}, false}});
}

SearchSpace weights_async_space() {
    return SearchSpace({{"w_seg", VarKind::Exponential, 0.1, 1000.0, {}, false},
                        {"w_det", VarKind::Exponential, 0.1, 100.0, {}, false},
                        {"nu_seg", VarKind::Linear, 1.0, 10.0, {}, true},
                        {"nu_det", VarKind::Linear, 1.0, 10.0, {}, true}});
}

TaskWeights normalize_weights(double raw_seg, double raw_det) {
    if (!(raw_seg > 0.0) || !(raw_det > 0.0))
        throw Error("normalize_weights: raw weights must be positive");
    const double seg = raw_seg / (raw_seg + raw_det);
    return {seg, 1.0 - seg};
}

}  // namespace mtlb
