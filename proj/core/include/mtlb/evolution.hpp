#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "mtlb/search_space.hpp"

namespace mtlb {

/// Settings of the (mu + lambda) evolution strategy. Search runs in the unit
/// hypercube; the mutation scale adapts by the classic one-fifth success rule.
struct EsConfig {
    int64_t mu = 4;
    int64_t lambda = 4;
    double sigma0 = 0.1;
    double bias_coeff = 0.5;       // pull along the incumbent trend direction
    double tabu_distance = 0.001;  // max-norm exclusion radius around history
    int64_t tabu_retries = 100;
    double tabu_expand = 2.0;
    int64_t tabu_expansions = 3;
    int64_t max_evals = 64;
    // Evaluation budgets; zero selects the reduced default (8 full epochs,
    // warm a quarter of full). With warm_start off, offspring train from
    // scratch at the full budget instead of fine-tuning the incumbent.
    int64_t full_epochs = 0;
    int64_t warm_epochs = 0;
    bool warm_start = true;
    bool adapt_sigma = true;
    double sigma_gain = 1.22;
    double sigma_decay = 0.82;
    double sigma_min = 0.002;
    double sigma_max = 0.5;
    uint64_t seed = 0;  // the meta runner maps zero to the run seed

    void validate() const;
};

struct Candidate {
    int64_t id = 0;
    int64_t generation = 0;
    std::vector<int64_t> parent_ids;
    std::vector<double> point;               // normalized coordinates
    std::map<std::string, double> applied;   // denormalized problem values
    bool warm = false;                       // reduced-budget warm evaluation
    double fitness = 0;
    double map = 0;
    double miou = 0;
    int64_t budget_epochs = 0;
    double wall_seconds = 0;
    std::string timestamp;
    std::string warm_source;                 // snapshot the evaluation started from
};

double max_norm_distance(const std::vector<double>& a, const std::vector<double>& b);

/// Append-only log of every evaluation, persisted one JSON object per line.
class History {
  public:
    void add(Candidate c);
    const std::vector<Candidate>& records() const { return records_; }
    bool empty() const { return records_.empty(); }
    size_t size() const { return records_.size(); }

    const Candidate* find(int64_t id) const;
    /// True if the point sits closer than `dist` (max-norm) to any record.
    bool violates_tabu(const std::vector<double>& point, double dist) const;
    /// Smallest max-norm distance over all record pairs; +inf below 2 records.
    double min_pairwise_distance() const;

    void save_ndjson(const std::string& path) const;
    static History load_ndjson(const std::string& path);

  private:
    std::vector<Candidate> records_;
};

/// Trend direction from the last two distinct incumbent points, scaled to
/// unit max-norm; zero while no trend exists.
std::vector<double> estimate_gradient(const std::vector<std::vector<double>>& incumbent_points);

/// Two-parent recombination: arithmetic mean for numeric variables, a
/// uniform parent pick for categorical ones.
std::vector<double> recombine(const SearchSpace& space, const std::vector<double>& a,
                              const std::vector<double>& b, std::mt19937_64& rng);

/// Gaussian mutation around `base` with a deterministic push of
/// `bias_coeff * sigma` along `bias_dir`, clamped into the unit cube.
/// Categorical variables jump to a random other category with probability
/// `sigma` instead.
std::vector<double> mutate(const SearchSpace& space, const std::vector<double>& base,
                           const std::vector<double>& bias_dir, double sigma, double bias_coeff,
                           std::mt19937_64& rng);

struct EvalOutcome {
    double fitness = 0;
    double map = 0;
    double miou = 0;
    int64_t budget_epochs = 0;
    double wall_seconds = 0;
    std::string warm_source;
};

/// Scores one candidate. `warm` asks for the reduced-budget evaluation that
/// fine-tunes from the best model found so far instead of training fresh.
/// A throwing evaluator scores the candidate as fitness 0 and the search
/// continues.
using Evaluator = std::function<EvalOutcome(const Candidate& cand, bool warm)>;

struct SearchResult {
    Candidate best;
    History history;
};

/// Runs the search. When `prior` is non-empty the run replays its decision
/// sequence, reusing recorded outcomes instead of re-evaluating, then
/// continues where the prior run stopped. If `history_path` is non-empty the
/// history file is rewritten after every generation's evaluations. `jobs` > 1
/// evaluates a generation's fresh candidates concurrently (and gives up
/// determinism).
SearchResult run_search(const SearchSpace& space, const EsConfig& config, const Evaluator& eval,
                        const History& prior = {}, const std::string& history_path = {},
                        int64_t jobs = 1);

}  // namespace mtlb
