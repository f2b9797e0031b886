#include "mtlb/reference_tables.hpp"

#include <cmath>

#include "mtlb/errors.hpp"
#include "mtlb/metrics.hpp"
#include "mtlb/search_space.hpp"
#include "mtlb/weighting.hpp"

namespace mtlb {

const std::vector<ReferenceEntry>& reference_results() {
    static const std::vector<ReferenceEntry> rows = {
        {"kitti", "none", 0.6535, 0.8114, 0.7282},
        {"kitti", "handcrafted", 0.6289, 0.8408, 0.7272},
        {"kitti", "dynamic", 0.1736, 0.8079, 0.3745},
        {"kitti", "uncertainty", 0.6589, 0.7974, 0.7248},
        {"kitti", "gradnorm", 0.6653, 0.8080, 0.7332},
        {"kitti", "geometric", 0.5677, 0.8176, 0.6813},
        {"kitti", "learned", 0.6727, 0.8040, 0.7354},
        {"kitti", "meta-static", 0.6974, 0.8301, 0.7609},
        {"kitti", "meta-async", 0.7260, 0.8408, 0.7813},
        {"cityscapes", "none", 0.2572, 0.6356, 0.4043},
        {"cityscapes", "handcrafted", 0.2970, 0.5780, 0.4143},
        {"cityscapes", "dynamic", 0.2824, 0.5796, 0.4045},
        {"cityscapes", "uncertainty", 0.2968, 0.5646, 0.4094},
        {"cityscapes", "gradnorm", 0.2870, 0.5492, 0.3970},
        {"cityscapes", "geometric", 0.2900, 0.5819, 0.4108},
        {"cityscapes", "learned", 0.2972, 0.5573, 0.4070},
        {"cityscapes", "meta-static", 0.3091, 0.5812, 0.4239},
        {"cityscapes", "meta-async", 0.3177, 0.5815, 0.4298},
        {"woodscape", "none", 0.4643, 0.7180, 0.5774},
        {"woodscape", "handcrafted", 0.4438, 0.8107, 0.5998},
        {"woodscape", "dynamic", 0.4557, 0.8118, 0.6082},
        {"woodscape", "uncertainty", 0.4525, 0.7806, 0.5943},
        {"woodscape", "gradnorm", 0.4511, 0.8155, 0.6065},
        {"woodscape", "geometric", 0.4193, 0.8227, 0.5874},
        {"woodscape", "learned", 0.4419, 0.8227, 0.6030},
        {"woodscape", "meta-static", 0.4677, 0.8006, 0.6119},
        {"woodscape", "meta-async", 0.4862, 0.7838, 0.6173},
    };
    return rows;
}

const std::map<std::string, double>& reference_average_g() {
    static const std::map<std::string, double> avg = {
        {"none", 0.5700},      {"handcrafted", 0.5804}, {"dynamic", 0.4624},
        {"uncertainty", 0.5762}, {"gradnorm", 0.5789},  {"geometric", 0.5598},
        {"learned", 0.5818},   {"meta-static", 0.5989}, {"meta-async", 0.6095},
    };
    return avg;
}

const std::vector<ReferenceWeights>& reference_weights() {
    static const std::vector<ReferenceWeights> rows = {
        {"kitti", "meta-static", 0.8490, 0.1510, 1, 1},
        {"kitti", "meta-async", 0.9776, 0.0224, 7, 1},
        {"cityscapes", "meta-static", 0.9478, 0.0522, 1, 1},
        {"cityscapes", "meta-async", 0.8692, 0.1308, 1, 5},
        {"woodscape", "meta-static", 0.9743, 0.0257, 1, 1},
        {"woodscape", "meta-async", 0.8550, 0.1450, 1, 2},
    };
    return rows;
}

double reference_handcrafted_ratio(const std::string& dataset) {
    if (dataset == "kitti") return 70.0;
    if (dataset == "cityscapes") return 40.0;
    if (dataset == "woodscape") return 100.0;
    throw ConfigError("unknown reference dataset: " + dataset);
}

std::vector<FixtureCheck> check_reference_fixtures() {
    std::vector<FixtureCheck> checks;

    for (const ReferenceEntry& e : reference_results()) {
        FixtureCheck c;
        c.name = "combined_metric/" + e.dataset + "/" + e.strategy;
        c.expected = e.g;
        c.actual = combined_metric(e.map, e.miou);
        c.tolerance = 5e-4;
        c.pass = std::abs(c.actual - c.expected) <= c.tolerance;
        checks.push_back(c);
    }

    for (const std::string& id : strategy_ids()) {
        double sum = 0.0;
        int64_t n = 0;
        for (const ReferenceEntry& e : reference_results()) {
            if (e.strategy != id) continue;
            sum += e.g;
            n += 1;
        }
        FixtureCheck c;
        c.name = "average_g/" + id;
        c.expected = reference_average_g().at(id);
        c.actual = sum / static_cast<double>(n);
        c.tolerance = 5e-4;
        c.pass = std::abs(c.actual - c.expected) <= c.tolerance;
        checks.push_back(c);
    }

    for (const ReferenceWeights& w : reference_weights()) {
        const TaskWeights norm = normalize_weights(w.w_seg, w.w_det);
        FixtureCheck c;
        c.name = "weight_sum/" + w.dataset + "/" + w.strategy;
        c.expected = 1.0;
        c.actual = norm.seg + norm.det;
        c.tolerance = 1e-3;
        c.pass = std::abs(c.actual - c.expected) <= c.tolerance &&
                 std::abs(norm.seg - w.w_seg) <= 1e-3 && std::abs(norm.det - w.w_det) <= 1e-3;
        checks.push_back(c);
    }

    return checks;
}

}  // namespace mtlb
