#include "mtlb/model.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "mtlb/errors.hpp"

namespace mtlb {

void ArchConfig::validate() const {
    if (grid <= 0) throw ConfigError("arch: grid must be positive");
    if (in_channels <= 0) throw ConfigError("arch: in_channels must be positive");
    if (trunk_channels.empty()) throw ConfigError("arch: trunk_channels must be non-empty");
    for (int64_t c : trunk_channels)
        if (c <= 0) throw ConfigError("arch: trunk channel counts must be positive");
    if (kernel <= 0 || kernel % 2 == 0) throw ConfigError("arch: kernel must be odd and positive");
    if (seg_classes < 2) throw ConfigError("arch: need at least 2 segmentation classes");
    if (det_classes < 1) throw ConfigError("arch: need at least 1 detection class");
}

bool operator==(const ArchConfig& a, const ArchConfig& b) {
    return a.grid == b.grid && a.in_channels == b.in_channels &&
           a.trunk_channels == b.trunk_channels && a.kernel == b.kernel &&
           a.seg_classes == b.seg_classes && a.det_classes == b.det_classes;
}

uint64_t arch_hash(const ArchConfig& cfg) {
    std::ostringstream os;
    os << "grid=" << cfg.grid << ";in=" << cfg.in_channels << ";trunk=";
    for (size_t i = 0; i < cfg.trunk_channels.size(); ++i) {
        if (i) os << ",";
        os << cfg.trunk_channels[i];
    }
    os << ";kernel=" << cfg.kernel << ";seg=" << cfg.seg_classes << ";det=" << cfg.det_classes;
    const std::string s = os.str();

    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

namespace {

Tensor he_weight(Shape shape, std::mt19937_64& rng) {
    const int64_t fan_in = shape[1] * shape[2] * shape[3];
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    std::vector<double> vals(static_cast<size_t>(shape_numel(shape)));
    for (double& v : vals) v = dist(rng);
    return Tensor::from_values(std::move(shape), std::move(vals));
}

}  // namespace

MtlModel::MtlModel(ArchConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    std::mt19937_64 rng(seed);

    int64_t prev = cfg_.in_channels;
    for (size_t i = 0; i < cfg_.trunk_channels.size(); ++i) {
        const int64_t out = cfg_.trunk_channels[i];
        const std::string base = "trunk.conv" + std::to_string(i + 1);
        params_.add(base + ".weight", he_weight({out, prev, cfg_.kernel, cfg_.kernel}, rng),
                    Partition::Shared);
        params_.add(base + ".bias", Tensor::zeros({out}), Partition::Shared);
        if (i + 1 == cfg_.trunk_channels.size()) last_shared_weight_ = base + ".weight";
        prev = out;
    }

    params_.add("head.seg.weight", he_weight({cfg_.seg_classes, prev, 1, 1}, rng),
                Partition::TaskSeg);
    params_.add("head.seg.bias", Tensor::zeros({cfg_.seg_classes}), Partition::TaskSeg);

    const DetLayout layout(cfg_);
    params_.add("head.det.weight", he_weight({layout.channels, prev, 1, 1}, rng),
                Partition::TaskDet);
    params_.add("head.det.bias", Tensor::zeros({layout.channels}), Partition::TaskDet);
}

Tensor MtlModel::trunk_forward(const Tensor& input) const {
    const int pad = static_cast<int>((cfg_.kernel - 1) / 2);
    Tensor x = input;
    for (size_t i = 0; i < cfg_.trunk_channels.size(); ++i) {
        const std::string base = "trunk.conv" + std::to_string(i + 1);
        x = relu(conv2d(x, params_.at(base + ".weight"), params_.at(base + ".bias"), pad));
    }
    return x;
}

Tensor MtlModel::seg_forward(const Tensor& input) const {
    Tensor x = trunk_forward(input);
    return conv2d(x, params_.at("head.seg.weight"), params_.at("head.seg.bias"), 0);
}

Tensor MtlModel::det_forward(const Tensor& input) const {
    Tensor x = trunk_forward(input);
    return conv2d(x, params_.at("head.det.weight"), params_.at("head.det.bias"), 0);
}

MtlOutputs forward_mtl(const MtlModel& model, const Tensor& seg_input, const Tensor& det_input) {
    return {model.seg_forward(seg_input), model.det_forward(det_input)};
}

}  // namespace mtlb
