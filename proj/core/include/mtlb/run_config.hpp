#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "mtlb/evolution.hpp"
#include "mtlb/model.hpp"
#include "mtlb/scene.hpp"
#include "mtlb/weighting.hpp"

namespace mtlb {

/// Search settings for the meta subcommand: which variable space to explore
/// and how long the evolution runs.
struct MetaConfig {
    std::string space = "weights-async";  // "weights" or "weights-async"
    EsConfig es;

    void validate() const;
};

/// Everything needed to reproduce a training run. JSON in, JSON out; unknown
/// keys are rejected so typos fail loudly instead of silently using defaults.
struct RunConfig {
    std::string preset = "balanced-small";
    int64_t epochs = -1;  // -1 selects the preset default
    int64_t batch_size = 8;
    double learning_rate = 1e-4;
    uint64_t seed = 1;
    std::string out_dir;
    ArchConfig arch;
    BenchmarkConfig bench;  // bench.seed == 0 follows the run seed
    StrategyConfig strategy;
    MetaConfig meta;

    int64_t resolved_epochs() const;
    uint64_t resolved_bench_seed() const { return bench.seed != 0 ? bench.seed : seed; }
    void validate() const;
};

/// Preset sizing with everything else at defaults.
RunConfig default_run_config(const std::string& preset);

RunConfig parse_run_config(const nlohmann::json& j);
nlohmann::json render_run_config(const RunConfig& cfg);
RunConfig load_run_config(const std::string& path);

bool operator==(const RunConfig& a, const RunConfig& b);

}  // namespace mtlb
