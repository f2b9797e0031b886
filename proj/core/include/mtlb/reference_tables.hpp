#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mtlb {

// Published full-scale results on three automotive benchmarks (KITTI,
// Cityscapes, WoodScape), kept as arithmetic fixtures: the combined metric
// and the weight normalization must reproduce these numbers.

struct ReferenceEntry {
    std::string dataset;
    std::string strategy;
    double map;
    double miou;
    double g;
};

const std::vector<ReferenceEntry>& reference_results();

/// Per-strategy mean of the combined metric across the three datasets.
const std::map<std::string, double>& reference_average_g();

struct ReferenceWeights {
    std::string dataset;
    std::string strategy;  // meta-static or meta-async
    double w_seg;
    double w_det;
    int64_t nu_seg = 1;
    int64_t nu_det = 1;
};

const std::vector<ReferenceWeights>& reference_weights();

/// Detection-to-segmentation loss scale observed per dataset (the handcrafted
/// weight), also used to size the synthetic presets.
double reference_handcrafted_ratio(const std::string& dataset);

struct FixtureCheck {
    std::string name;
    bool pass = false;
    double expected = 0;
    double actual = 0;
    double tolerance = 0;
};

/// Recomputes every fixture: 27 combined-metric entries (tolerance 5e-4),
/// the per-strategy averages (5e-4), and the six normalized weight pairs
/// (sum within 1e-3 after a normalization round trip).
std::vector<FixtureCheck> check_reference_fixtures();

}  // namespace mtlb
