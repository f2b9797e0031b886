#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtlb/evolution.hpp"
#include "mtlb/run_config.hpp"
#include "mtlb/trainer.hpp"

namespace mtlb {

struct BenchRow {
    std::string strategy;
    bool ok = false;
    std::string error;
    double map = 0;
    double miou = 0;
    double combined = 0;  // always recomputed from map and miou
    double wall_seconds = 0;
};

struct BenchTable {
    std::vector<BenchRow> rows;
    double average_combined() const;  // mean over the rows that succeeded
};

/// One config per fixed (non-meta) strategy id, everything else from `base`.
std::vector<RunConfig> benchmark_matrix(const RunConfig& base);

/// Trains every config and collects final validation metrics. A failing row
/// carries its error message and leaves the others unaffected. `jobs` > 1
/// trains rows concurrently.
BenchTable run_benchmark(const std::vector<RunConfig>& matrix, int64_t jobs = 1);

std::string render_table(const BenchTable& table);
void write_table_csv(const BenchTable& table, const std::string& path);

/// Specializes `base` to one candidate: the candidate's raw weights become
/// the normalized static weights, and when the point carries per-task update
/// frequencies the strategy switches to the masked schedule.
RunConfig run_config_for_candidate(const RunConfig& base, const Candidate& cand);

struct MetaOutcome {
    SearchResult search;
    RunConfig best_config;  // base specialized to the winning candidate
    RunResult final_run;    // that config retrained from scratch, full length
};

/// Evolutionary weight search around `base`. Maintains history.ndjson,
/// curves.csv, best-model.snap and best-config.json under base.out_dir when
/// it is set; an existing history file resumes the search. Finishes with a
/// from-scratch training run of the winning configuration.
MetaOutcome run_meta(const RunConfig& base, int64_t jobs = 1);

/// Per-evaluation curve export with a fixed header: eval_index, fitness,
/// best_fitness, map, miou, w_seg, w_det, nu_seg, nu_det.
void write_curves_csv(const History& history, const std::string& path);

}  // namespace mtlb
