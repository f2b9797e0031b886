#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtlb/metrics.hpp"
#include "mtlb/run_config.hpp"
#include "mtlb/snapshot.hpp"

namespace mtlb {

struct EpochRecord {
    int64_t epoch = 0;
    double train_seg_loss = 0;  // NaN when the task was masked all epoch
    double train_det_loss = 0;
    double w_seg = 0;           // strategy weights at epoch end
    double w_det = 0;
    MetricReport val;
};

struct RunResult {
    RunConfig config;
    std::vector<EpochRecord> epochs;
    MetricReport final_report;
    double wall_seconds = 0;  // reporting only, never serialized
};

struct TrainOptions {
    const ModelSnapshot* resume = nullptr;        // exact continuation
    const ModelSnapshot* warm_weights = nullptr;  // network-only transfer
    const Dataset* dataset = nullptr;             // reuse instead of generating
    std::string snapshot_path;                    // final state, written if set
    ModelSnapshot* capture = nullptr;             // final state, kept in memory
    std::function<void(const EpochRecord&)> on_epoch;
};

/// Runs the configured training. Deterministic for a given config and seed
/// under serial execution; a non-finite total loss aborts with NumericError.
RunResult train(const RunConfig& cfg, const TrainOptions& opts = {});

/// Stable serialization of a result; wall time and timestamps are excluded
/// so identical runs produce identical bytes.
nlohmann::json run_result_to_json(const RunResult& r);
void write_run_result(const RunResult& r, const std::string& path);

}  // namespace mtlb
