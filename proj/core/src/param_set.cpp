#include "mtlb/param_set.hpp"

namespace mtlb {

const char* partition_name(Partition p) {
    switch (p) {
        case Partition::Shared: return "shared";
        case Partition::TaskSeg: return "task:seg";
        case Partition::TaskDet: return "task:det";
        case Partition::Weighting: return "weighting";
    }
    return "?";
}

Partition partition_from_name(const std::string& name) {
    if (name == "shared") return Partition::Shared;
    if (name == "task:seg") return Partition::TaskSeg;
    if (name == "task:det") return Partition::TaskDet;
    if (name == "weighting") return Partition::Weighting;
    throw ConfigError("unknown partition tag: " + name);
}

void PartitionFilter::set(Partition p, bool v) {
    switch (p) {
        case Partition::Shared: shared = v; break;
        case Partition::TaskSeg: task_seg = v; break;
        case Partition::TaskDet: task_det = v; break;
        case Partition::Weighting: weighting = v; break;
    }
}

bool PartitionFilter::accepts(Partition p) const {
    switch (p) {
        case Partition::Shared: return shared;
        case Partition::TaskSeg: return task_seg;
        case Partition::TaskDet: return task_det;
        case Partition::Weighting: return weighting;
    }
    return false;
}

void ParamSet::add(const std::string& name, Tensor tensor, Partition partition) {
    if (!tensor.defined()) throw Error("ParamSet::add: undefined tensor for " + name);
    if (entries_.count(name)) throw Error("ParamSet::add: duplicate parameter " + name);
    tensor.set_needs_grad(true);
    entries_.emplace(name, Entry{std::move(tensor), partition});
}

bool ParamSet::contains(const std::string& name) const { return entries_.count(name) > 0; }

Tensor& ParamSet::at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw Error("ParamSet: no parameter named " + name);
    return it->second.tensor;
}

const Tensor& ParamSet::at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw Error("ParamSet: no parameter named " + name);
    return it->second.tensor;
}

Partition ParamSet::partition_of(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw Error("ParamSet: no parameter named " + name);
    return it->second.partition;
}

int64_t ParamSet::total_numel() const {
    int64_t n = 0;
    for (const auto& [name, e] : entries_) n += e.tensor.numel();
    return n;
}

std::vector<std::string> ParamSet::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [name, e] : entries_) out.push_back(name);
    return out;
}

std::vector<std::string> ParamSet::names(const PartitionFilter& filter) const {
    std::vector<std::string> out;
    for (const auto& [name, e] : entries_)
        if (filter.accepts(e.partition)) out.push_back(name);
    return out;
}

void ParamSet::clear_grads() {
    for (auto& [name, e] : entries_) e.tensor.clear_grad();
}

}  // namespace mtlb
