#include "mtlb/bench_runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "mtlb/errors.hpp"
#include "mtlb/metrics.hpp"

namespace mtlb {

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

double BenchTable::average_combined() const {
    double sum = 0;
    int64_t n = 0;
    for (const BenchRow& row : rows) {
        if (!row.ok) continue;
        sum += row.combined;
        n += 1;
    }
    return n > 0 ? sum / static_cast<double>(n) : std::nan("");
}

std::vector<RunConfig> benchmark_matrix(const RunConfig& base) {
    static const std::vector<std::string> fixed = {
        "none", "handcrafted", "dynamic", "uncertainty", "gradnorm", "geometric", "learned"};
    std::vector<RunConfig> matrix;
    matrix.reserve(fixed.size());
    for (const std::string& id : fixed) {
        RunConfig cfg = base;
        cfg.strategy.id = id;
        cfg.strategy.static_weights = TaskWeights{};
        cfg.strategy.schedule = AsyncSchedule{};
        cfg.validate();
        matrix.push_back(std::move(cfg));
    }
    return matrix;
}

BenchTable run_benchmark(const std::vector<RunConfig>& matrix, int64_t jobs) {
    for (const RunConfig& cfg : matrix) cfg.validate();
    BenchTable table;
    table.rows.resize(matrix.size());

    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (size_t i = next.fetch_add(1); i < matrix.size(); i = next.fetch_add(1)) {
            BenchRow& row = table.rows[i];
            row.strategy = matrix[i].strategy.id;
            try {
                RunResult r = train(matrix[i]);
                row.map = r.final_report.map;
                row.miou = r.final_report.miou;
                row.combined = combined_metric(row.map, row.miou);
                row.wall_seconds = r.wall_seconds;
                row.ok = true;
            } catch (const std::exception& e) {
                row.ok = false;
                row.error = e.what();
            }
        }
    };

    const size_t workers =
        std::min<size_t>(static_cast<size_t>(std::max<int64_t>(jobs, 1)), matrix.size());
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    return table;
}

std::string render_table(const BenchTable& table) {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof(line), "%-12s  %8s  %8s  %8s  %8s\n", "strategy", "mAP", "mIoU",
                  "G", "wall_s");
    os << line;
    for (const BenchRow& row : table.rows) {
        if (row.ok) {
            std::snprintf(line, sizeof(line), "%-12s  %8.4f  %8.4f  %8.4f  %8.1f\n",
                          row.strategy.c_str(), row.map, row.miou, row.combined,
                          row.wall_seconds);
            os << line;
        } else {
            std::snprintf(line, sizeof(line), "%-12s  failed: %s\n", row.strategy.c_str(),
                          row.error.c_str());
            os << line;
        }
    }
    const double avg = table.average_combined();
    if (!std::isnan(avg)) {
        std::snprintf(line, sizeof(line), "%-12s  %8s  %8s  %8.4f\n", "average", "", "", avg);
        os << line;
    }
    return os.str();
}

void write_table_csv(const BenchTable& table, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw Error("cannot open " + path + " for writing");
    f << "strategy,ok,map,miou,combined,wall_seconds,error\n";
    for (const BenchRow& row : table.rows) {
        f << csv_field(row.strategy) << ',' << (row.ok ? 1 : 0) << ',' << num(row.map) << ','
          << num(row.miou) << ',' << num(row.combined) << ',' << num(row.wall_seconds) << ','
          << csv_field(row.error) << '\n';
    }
    if (!f) throw Error("short write to " + path);
}

RunConfig run_config_for_candidate(const RunConfig& base, const Candidate& cand) {
    RunConfig cfg = base;
    const auto raw_seg = cand.applied.find("w_seg");
    const auto raw_det = cand.applied.find("w_det");
    if (raw_seg == cand.applied.end() || raw_det == cand.applied.end())
        throw ConfigError("candidate is missing the task weight variables");
    cfg.strategy.static_weights = normalize_weights(raw_seg->second, raw_det->second);
    const auto nu_seg = cand.applied.find("nu_seg");
    const auto nu_det = cand.applied.find("nu_det");
    if (nu_seg != cand.applied.end() && nu_det != cand.applied.end()) {
        cfg.strategy.id = "meta-async";
        cfg.strategy.schedule.nu_seg = round_frequency(nu_seg->second);
        cfg.strategy.schedule.nu_det = round_frequency(nu_det->second);
    }
    cfg.validate();
    return cfg;
}

void write_curves_csv(const History& history, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw Error("cannot open " + path + " for writing");
    f << "eval_index,fitness,best_fitness,map,miou,w_seg,w_det,nu_seg,nu_det\n";
    double best = -std::numeric_limits<double>::infinity();
    int64_t index = 0;
    for (const Candidate& c : history.records()) {
        best = std::max(best, c.fitness);
        TaskWeights w{std::nan(""), std::nan("")};
        const auto ws = c.applied.find("w_seg");
        const auto wd = c.applied.find("w_det");
        if (ws != c.applied.end() && wd != c.applied.end())
            w = normalize_weights(ws->second, wd->second);
        const auto ns = c.applied.find("nu_seg");
        const auto nd = c.applied.find("nu_det");
        const int64_t nu_seg = ns != c.applied.end() ? round_frequency(ns->second) : 1;
        const int64_t nu_det = nd != c.applied.end() ? round_frequency(nd->second) : 1;
        f << index << ',' << num(c.fitness) << ',' << num(best) << ',' << num(c.map) << ','
          << num(c.miou) << ',' << num(w.seg) << ',' << num(w.det) << ',' << nu_seg << ','
          << nu_det << '\n';
        index += 1;
    }
    if (!f) throw Error("short write to " + path);
}

MetaOutcome run_meta(const RunConfig& base, int64_t jobs) {
    base.validate();
    if (base.strategy.id != "meta-static" && base.strategy.id != "meta-async")
        throw ConfigError("meta search needs strategy meta-static or meta-async");

    EsConfig es = base.meta.es;
    if (es.seed == 0) es.seed = base.seed;
    if (es.full_epochs == 0) es.full_epochs = 8;
    if (es.warm_epochs == 0) es.warm_epochs = std::max<int64_t>(1, es.full_epochs / 4);
    es.validate();

    const SearchSpace space =
        base.meta.space == "weights" ? weights_space() : weights_async_space();

    BenchmarkConfig bc = base.bench;
    bc.seed = base.resolved_bench_seed();
    const Dataset data = generate_dataset(bc);

    const std::string out_dir = base.out_dir;
    std::string history_path, snap_path;
    History prior;
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        history_path = out_dir + "/history.ndjson";
        snap_path = out_dir + "/best-model.snap";
        if (std::filesystem::exists(history_path)) prior = History::load_ndjson(history_path);
    }

    // Incumbent model shared by warm evaluations. On resume it reloads from
    // disk; without the snapshot file warm candidates start from scratch
    // weights until a fresh evaluation takes the lead.
    struct Incumbent {
        std::mutex m;
        bool have = false;
        double fitness = -std::numeric_limits<double>::infinity();
        int64_t id = -1;
        ModelSnapshot snap;
    } incumbent;
    if (!prior.empty()) {
        const Candidate* top = nullptr;
        for (const Candidate& c : prior.records()) {
            if (!top || c.fitness > top->fitness || (c.fitness == top->fitness && c.id < top->id))
                top = &c;
        }
        if (top && !snap_path.empty() && std::filesystem::exists(snap_path)) {
            incumbent.snap = load_snapshot(snap_path);
            incumbent.have = true;
            incumbent.fitness = top->fitness;
            incumbent.id = top->id;
        }
    }

    Evaluator evaluator = [&](const Candidate& cand, bool warm) -> EvalOutcome {
        RunConfig cfg = run_config_for_candidate(base, cand);
        cfg.epochs = warm ? es.warm_epochs : es.full_epochs;
        cfg.out_dir.clear();

        ModelSnapshot warm_from;
        std::string source;
        if (warm) {
            std::lock_guard<std::mutex> lk(incumbent.m);
            if (incumbent.have) {
                warm_from = incumbent.snap;
                source = "candidate-" + std::to_string(incumbent.id);
            }
        }

        TrainOptions topts;
        topts.dataset = &data;
        ModelSnapshot mine;
        topts.capture = &mine;
        if (!source.empty()) topts.warm_weights = &warm_from;

        RunResult r = train(cfg, topts);
        EvalOutcome out;
        out.map = r.final_report.map;
        out.miou = r.final_report.miou;
        out.fitness = combined_metric(out.map, out.miou);
        out.budget_epochs = cfg.resolved_epochs();
        out.wall_seconds = r.wall_seconds;
        out.warm_source = source;

        std::lock_guard<std::mutex> lk(incumbent.m);
        if (!incumbent.have || out.fitness > incumbent.fitness) {
            incumbent.have = true;
            incumbent.fitness = out.fitness;
            incumbent.id = cand.id;
            incumbent.snap = std::move(mine);
            if (!snap_path.empty()) save_snapshot(incumbent.snap, snap_path);
        }
        return out;
    };

    MetaOutcome outcome;
    outcome.search = run_search(space, es, evaluator, prior, history_path, jobs);
    if (!out_dir.empty()) {
        write_curves_csv(outcome.search.history, out_dir + "/curves.csv");
    }

    outcome.best_config = run_config_for_candidate(base, outcome.search.best);
    TrainOptions final_opts;
    final_opts.dataset = &data;
    outcome.final_run = train(outcome.best_config, final_opts);
    if (!out_dir.empty()) {
        std::ofstream f(out_dir + "/best-config.json", std::ios::trunc);
        if (!f) throw Error("cannot open " + out_dir + "/best-config.json for writing");
        f << render_run_config(outcome.best_config).dump(2) << "\n";
    }
    return outcome;
}

}  // namespace mtlb
