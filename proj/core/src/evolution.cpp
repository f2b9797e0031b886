#include "mtlb/evolution.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "mtlb/errors.hpp"

namespace mtlb {

void EsConfig::validate() const {
    if (mu < 1 || lambda < 1) throw ConfigError("search: mu and lambda must be positive");
    if (sigma0 <= 0.0) throw ConfigError("search: initial mutation scale must be positive");
    if (sigma_min <= 0.0 || sigma_max < sigma_min)
        throw ConfigError("search: invalid mutation scale bounds");
    if (bias_coeff < 0.0) throw ConfigError("search: bias coefficient must be non-negative");
    if (tabu_distance < 0.0 || tabu_retries < 1 || tabu_expand <= 1.0 || tabu_expansions < 0)
        throw ConfigError("search: invalid tabu settings");
    if (max_evals < mu) throw ConfigError("search: max_evals must cover the initial population");
    if (full_epochs < 0 || warm_epochs < 0)
        throw ConfigError("search: evaluation epoch budgets must be non-negative");
    if (sigma_gain <= 1.0 || sigma_decay <= 0.0 || sigma_decay >= 1.0)
        throw ConfigError("search: invalid mutation scale adaptation factors");
}

double max_norm_distance(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw Error("max_norm_distance: dimension mismatch");
    double d = 0.0;
    for (size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

void History::add(Candidate c) { records_.push_back(std::move(c)); }

const Candidate* History::find(int64_t id) const {
    for (const Candidate& c : records_)
        if (c.id == id) return &c;
    return nullptr;
}

bool History::violates_tabu(const std::vector<double>& point, double dist) const {
    for (const Candidate& c : records_)
        if (max_norm_distance(point, c.point) < dist) return true;
    return false;
}

double History::min_pairwise_distance() const {
    double best = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < records_.size(); ++i)
        for (size_t j = i + 1; j < records_.size(); ++j)
            best = std::min(best, max_norm_distance(records_[i].point, records_[j].point));
    return best;
}

void History::save_ndjson(const std::string& path) const {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw Error("cannot open " + path + " for writing");
    for (const Candidate& c : records_) {
        nlohmann::json j{{"id", c.id},
                         {"generation", c.generation},
                         {"parent_ids", c.parent_ids},
                         {"point", c.point},
                         {"applied", c.applied},
                         {"warm", c.warm},
                         {"fitness", c.fitness},
                         {"map", c.map},
                         {"miou", c.miou},
                         {"budget_epochs", c.budget_epochs},
                         {"wall_seconds", c.wall_seconds},
                         {"timestamp", c.timestamp},
                         {"warm_source", c.warm_source}};
        f << j.dump() << "\n";
    }
    if (!f) throw Error("short write to " + path);
}

History History::load_ndjson(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open " + path);
    History h;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        Candidate c;
        c.id = j.at("id").get<int64_t>();
        c.generation = j.at("generation").get<int64_t>();
        c.parent_ids = j.at("parent_ids").get<std::vector<int64_t>>();
        c.point = j.at("point").get<std::vector<double>>();
        c.applied = j.at("applied").get<std::map<std::string, double>>();
        c.warm = j.at("warm").get<bool>();
        c.fitness = j.at("fitness").get<double>();
        c.map = j.at("map").get<double>();
        c.miou = j.at("miou").get<double>();
        c.budget_epochs = j.value("budget_epochs", int64_t{0});
        c.wall_seconds = j.value("wall_seconds", 0.0);
        c.timestamp = j.value("timestamp", std::string{});
        c.warm_source = j.value("warm_source", std::string{});
        h.add(std::move(c));
    }
    return h;
}

std::vector<double> estimate_gradient(const std::vector<std::vector<double>>& incumbent_points) {
    if (incumbent_points.empty()) throw Error("estimate_gradient: no incumbents");
    const size_t d = incumbent_points.back().size();
    std::vector<double> dir(d, 0.0);
    if (incumbent_points.size() < 2) return dir;
    const auto& prev = incumbent_points[incumbent_points.size() - 2];
    const auto& last = incumbent_points.back();
    double m = 0.0;
    for (size_t i = 0; i < d; ++i) {
        dir[i] = last[i] - prev[i];
        m = std::max(m, std::abs(dir[i]));
    }
    if (m == 0.0) return std::vector<double>(d, 0.0);
    for (double& v : dir) v /= m;
    return dir;
}

std::vector<double> recombine(const SearchSpace& space, const std::vector<double>& a,
                              const std::vector<double>& b, std::mt19937_64& rng) {
    space.check_point(a);
    space.check_point(b);
    std::vector<double> out(a.size());
    for (size_t i = 0; i < a.size(); ++i) {
        if (space.at(i).kind == VarKind::Categorical) {
            out[i] = std::uniform_int_distribution<int>(0, 1)(rng) == 0 ? a[i] : b[i];
        } else {
            out[i] = 0.5 * (a[i] + b[i]);
        }
    }
    return out;
}

std::vector<double> mutate(const SearchSpace& space, const std::vector<double>& base,
                           const std::vector<double>& bias_dir, double sigma, double bias_coeff,
                           std::mt19937_64& rng) {
    if (base.size() != bias_dir.size() || base.size() != space.dim())
        throw Error("mutate: dimension mismatch");
    std::vector<double> out(base.size());
    for (size_t i = 0; i < out.size(); ++i) {
        const Variable& var = space.at(i);
        if (var.kind == VarKind::Categorical) {
            out[i] = base[i];
            const size_t n = var.categories.size();
            if (n > 1 && std::uniform_real_distribution<double>(0.0, 1.0)(rng) < sigma) {
                const size_t cur = static_cast<size_t>(
                    std::floor(base[i] * static_cast<double>(n - 1) + 0.5));
                size_t pick =
                    std::uniform_int_distribution<size_t>(0, n - 2)(rng);
                if (pick >= cur) pick += 1;
                out[i] = static_cast<double>(pick) / static_cast<double>(n - 1);
            }
            continue;
        }
        double v = base[i] + bias_coeff * sigma * bias_dir[i];
        if (sigma > 0.0) v += std::normal_distribution<double>(0.0, sigma)(rng);
        out[i] = std::clamp(v, 0.0, 1.0);
    }
    return out;
}

namespace {

std::string utc_now() {
    const std::time_t t =
        std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void apply_outcome(Candidate& c, const EvalOutcome& out) {
    c.fitness = out.fitness;
    c.map = out.map;
    c.miou = out.miou;
    c.budget_epochs = out.budget_epochs;
    c.wall_seconds = out.wall_seconds;
    c.warm_source = out.warm_source;
}

EvalOutcome guarded_eval(const Evaluator& eval, const Candidate& c) {
    try {
        return eval(c, c.warm);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "evaluation of candidate %lld failed, scoring 0: %s\n",
                     static_cast<long long>(c.id), e.what());
        return {};
    }
}

}  // namespace

SearchResult run_search(const SearchSpace& space, const EsConfig& config, const Evaluator& eval,
                        const History& prior, const std::string& history_path, int64_t jobs) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    const size_t dim = space.dim();

    History history;
    std::vector<std::vector<double>> reserved;  // generated points, evaluated or pending

    Candidate best;
    double best_fitness = -std::numeric_limits<double>::infinity();
    bool have_best = false;
    std::vector<std::vector<double>> incumbent_points;

    const auto note_result = [&](Candidate c) {
        if (!have_best || c.fitness > best_fitness) {
            have_best = true;
            best_fitness = c.fitness;
            best = c;
            incumbent_points.push_back(c.point);
        }
        history.add(std::move(c));
    };

    // Runs the evaluator for candidates absent from the prior history; replayed
    // candidates must regenerate at the same point or the history is stale.
    const auto evaluate_batch = [&](std::vector<Candidate>& batch) {
        std::vector<Candidate*> fresh;
        for (Candidate& c : batch) {
            if (const Candidate* rec = prior.find(c.id)) {
                if (rec->generation != c.generation || rec->warm != c.warm ||
                    max_norm_distance(rec->point, c.point) > 1e-9)
                    throw SearchError(
                        "history does not replay under this configuration; delete it or "
                        "restore the original seed and settings");
                c = *rec;
            } else {
                fresh.push_back(&c);
            }
        }
        if (static_cast<int64_t>(fresh.size()) > 1 && jobs > 1) {
            std::atomic<size_t> next{0};
            const size_t n_threads = std::min<size_t>(static_cast<size_t>(jobs), fresh.size());
            std::vector<std::thread> threads;
            for (size_t t = 0; t < n_threads; ++t) {
                threads.emplace_back([&] {
                    while (true) {
                        const size_t i = next.fetch_add(1);
                        if (i >= fresh.size()) return;
                        apply_outcome(*fresh[i], guarded_eval(eval, *fresh[i]));
                    }
                });
            }
            for (auto& t : threads) t.join();
        } else {
            for (Candidate* c : fresh) apply_outcome(*c, guarded_eval(eval, *c));
        }
        for (Candidate* c : fresh) c->timestamp = utc_now();
        for (Candidate& c : batch) note_result(std::move(c));
        if (!history_path.empty()) history.save_ndjson(history_path);
    };

    const auto tabu_ok = [&](const std::vector<double>& point) {
        for (const auto& p : reserved)
            if (max_norm_distance(point, p) < config.tabu_distance) return false;
        return true;
    };

    int64_t next_id = 0;

    // Initial population: uniform draws, trained from scratch at full budget.
    std::vector<Candidate> gen0;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int64_t i = 0; i < config.mu; ++i) {
        std::vector<double> point(dim);
        bool placed = false;
        for (int64_t attempt = 0; attempt < config.tabu_retries; ++attempt) {
            for (double& u : point) u = unit(rng);
            if (tabu_ok(point)) {
                placed = true;
                break;
            }
        }
        if (!placed) throw SearchError("could not seed the population outside the tabu radius");
        Candidate c;
        c.id = next_id++;
        c.generation = 0;
        c.point = point;
        c.applied = space.applied_values(point);
        c.warm = false;
        reserved.push_back(point);
        gen0.push_back(std::move(c));
    }
    evaluate_batch(gen0);

    // Refresh the pool from history (replay may have rewritten the records).
    std::vector<Candidate> pool;
    for (const Candidate& c : history.records()) pool.push_back(c);
    double sigma = config.sigma0;

    int64_t generation = 0;
    while (static_cast<int64_t>(history.size()) < config.max_evals) {
        generation += 1;
        const int64_t n_children = std::min<int64_t>(
            config.lambda, config.max_evals - static_cast<int64_t>(history.size()));
        const std::vector<double> bias = estimate_gradient(incumbent_points);

        std::vector<Candidate> children;
        for (int64_t k = 0; k < n_children; ++k) {
            std::uniform_int_distribution<size_t> pick_a(0, pool.size() - 1);
            const size_t ia = pick_a(rng);
            size_t ib = ia;
            if (pool.size() > 1) {
                std::uniform_int_distribution<size_t> pick_b(0, pool.size() - 2);
                ib = pick_b(rng);
                if (ib >= ia) ib += 1;
            }
            const Candidate& pa = pool[ia];
            const Candidate& pb = pool[ib];
            const std::vector<double> base = recombine(space, pa.point, pb.point, rng);

            std::vector<double> point;
            bool placed = false;
            double local_sigma = sigma;
            for (int64_t expansion = 0; expansion <= config.tabu_expansions && !placed;
                 ++expansion) {
                for (int64_t attempt = 0; attempt < config.tabu_retries; ++attempt) {
                    point = mutate(space, base, bias, local_sigma, config.bias_coeff, rng);
                    if (tabu_ok(point)) {
                        placed = true;
                        break;
                    }
                }
                if (!placed) local_sigma *= config.tabu_expand;
            }
            if (!placed) throw SearchError("tabu exclusion exhausted the mutation retry budget");

            Candidate c;
            c.id = next_id++;
            c.generation = generation;
            c.parent_ids = {pa.id, pb.id};
            c.point = point;
            c.applied = space.applied_values(point);
            c.warm = config.warm_start;
            reserved.push_back(point);
            children.push_back(std::move(c));
        }

        evaluate_batch(children);
        // evaluate_batch moved the children into the history; re-read them.
        std::vector<Candidate> evaluated(history.records().end() - children.size(),
                                         history.records().end());

        int64_t successes = 0;
        for (const Candidate& c : evaluated) {
            double parent_best = -std::numeric_limits<double>::infinity();
            for (int64_t pid : c.parent_ids) {
                const Candidate* p = history.find(pid);
                if (p) parent_best = std::max(parent_best, p->fitness);
            }
            if (c.fitness > parent_best) successes += 1;
        }

        std::vector<Candidate> merged = pool;
        merged.insert(merged.end(), evaluated.begin(), evaluated.end());
        std::sort(merged.begin(), merged.end(), [](const Candidate& a, const Candidate& b) {
            if (a.fitness != b.fitness) return a.fitness > b.fitness;
            return a.id < b.id;
        });
        merged.resize(std::min<size_t>(merged.size(), static_cast<size_t>(config.mu)));
        pool = std::move(merged);

        if (config.adapt_sigma && n_children > 0) {
            const double rate = static_cast<double>(successes) / static_cast<double>(n_children);
            if (rate > 0.2)
                sigma *= config.sigma_gain;
            else if (rate < 0.2)
                sigma *= config.sigma_decay;
            sigma = std::clamp(sigma, config.sigma_min, config.sigma_max);
        }
    }

    if (!have_best) throw SearchError("search finished without any evaluation");
    return {best, std::move(history)};
}

}  // namespace mtlb
