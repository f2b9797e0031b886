#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtlb/bench_runner.hpp"
#include "mtlb/errors.hpp"

using namespace mtlb;

namespace {

RunConfig tiny_base() {
    RunConfig cfg = default_run_config("balanced-small");
    cfg.bench.n_train_det = 8;
    cfg.bench.n_train_seg = 8;
    cfg.bench.n_val = 4;
    cfg.epochs = 1;
    cfg.batch_size = 4;
    cfg.learning_rate = 0.01;
    cfg.seed = 3;
    return cfg;
}

std::string tmp_dir(const char* name) {
    std::string d = std::string("/tmp/mtlb-bench-") + name + "-" + std::to_string(::getpid());
    std::filesystem::create_directories(d);
    return d;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path);
    REQUIRE(f);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) out.push_back(line);
    return out;
}

int run_cli(const std::string& args, std::string* output = nullptr) {
    const char* bin = std::getenv("MTLB_CLI");
    REQUIRE(bin != nullptr);
    const std::string log = "/tmp/mtlb-cli-out-" + std::to_string(::getpid());
    const int rc = std::system((std::string(bin) + " " + args + " >" + log + " 2>&1").c_str());
    if (output) *output = slurp(log);
    std::remove(log.c_str());
    REQUIRE(WIFEXITED(rc));
    return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("matrix holds one config per fixed strategy") {
    RunConfig base = tiny_base();
    base.strategy.id = "meta-async";
    base.strategy.static_weights = {0.9, 0.1};
    base.strategy.schedule = {2, 1};
    std::vector<RunConfig> matrix = benchmark_matrix(base);
    REQUIRE(matrix.size() == 7);
    const std::vector<std::string> expect = {"none",     "handcrafted", "dynamic", "uncertainty",
                                             "gradnorm", "geometric",   "learned"};
    for (size_t i = 0; i < matrix.size(); ++i) {
        CHECK(matrix[i].strategy.id == expect[i]);
        CHECK(matrix[i].seed == base.seed);
        CHECK(matrix[i].epochs == base.epochs);
        // meta-only settings do not leak into the fixed rows
        CHECK(matrix[i].strategy.static_weights.seg == 1.0);
        CHECK(matrix[i].strategy.schedule.nu_seg == 1);
    }
}

TEST_CASE("benchmark runs all rows and recomputes the combined metric") {
    BenchTable table = run_benchmark(benchmark_matrix(tiny_base()));
    REQUIRE(table.rows.size() == 7);
    double sum = 0;
    for (const BenchRow& r : table.rows) {
        CHECK(r.ok);
        CHECK(r.error.empty());
        CHECK(r.combined == doctest::Approx(std::sqrt(r.map * r.miou)).epsilon(1e-12));
        sum += r.combined;
    }
    CHECK(table.average_combined() == doctest::Approx(sum / 7.0).epsilon(1e-12));

    std::string text = render_table(table);
    CHECK(text.find("none") != std::string::npos);
    CHECK(text.find("average") != std::string::npos);

    const std::string csv_path = tmp_dir("csv") + "/table.csv";
    write_table_csv(table, csv_path);
    auto lines = lines_of(slurp(csv_path));
    REQUIRE(lines.size() == 8);  // header + 7 rows
    CHECK(lines[0] == "strategy,ok,map,miou,combined,wall_seconds,error");
    CHECK(lines[1].rfind("none,1,", 0) == 0);
}

TEST_CASE("invalid configs are rejected before any training") {
    std::vector<RunConfig> matrix = benchmark_matrix(tiny_base());
    matrix[2].bench.grid = 8;  // no longer matches the arch
    CHECK_THROWS_AS(run_benchmark(matrix), ConfigError);
}

TEST_CASE("a failing row does not poison the table") {
    std::vector<RunConfig> matrix = benchmark_matrix(tiny_base());
    matrix[2].learning_rate = 1e200;  // overflows the forward pass
    matrix[2].epochs = 2;
    BenchTable table = run_benchmark(matrix);
    CHECK(!table.rows[2].ok);
    CHECK(!table.rows[2].error.empty());
    CHECK(table.rows[2].combined == 0.0);
    double sum_ok = 0;
    int n_ok = 0;
    for (size_t i = 0; i < table.rows.size(); ++i) {
        if (i == 2) continue;
        CHECK(table.rows[i].ok);
        sum_ok += table.rows[i].combined;
        n_ok += 1;
    }
    REQUIRE(n_ok == 6);
    CHECK(table.average_combined() == doctest::Approx(sum_ok / 6.0).epsilon(1e-12));

    const std::string csv_path = tmp_dir("csvfail") + "/table.csv";
    write_table_csv(table, csv_path);
    auto lines = lines_of(slurp(csv_path));
    CHECK(lines[3].rfind("dynamic,0,", 0) == 0);
}

TEST_CASE("candidates specialize the base config") {
    RunConfig base = tiny_base();
    base.strategy.id = "meta-static";

    Candidate c;
    c.applied = {{"w_seg", 30.0}, {"w_det", 10.0}};
    RunConfig cfg = run_config_for_candidate(base, c);
    CHECK(cfg.strategy.id == "meta-static");
    CHECK(cfg.strategy.static_weights.seg == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(cfg.strategy.static_weights.seg + cfg.strategy.static_weights.det == 1.0);

    c.applied = {{"w_seg", 10.0}, {"w_det", 10.0}, {"nu_seg", 2.0}, {"nu_det", 1.0}};
    cfg = run_config_for_candidate(base, c);
    CHECK(cfg.strategy.id == "meta-async");
    CHECK(cfg.strategy.schedule.nu_seg == 2);
    CHECK(cfg.strategy.schedule.nu_det == 1);
    CHECK(cfg.strategy.static_weights.seg == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("meta search runs, persists and resumes") {
    RunConfig base = tiny_base();
    base.strategy.id = "meta-async";
    base.out_dir = tmp_dir("meta");
    base.meta.space = "weights-async";
    base.meta.es.mu = 2;
    base.meta.es.lambda = 2;
    base.meta.es.max_evals = 6;
    base.meta.es.full_epochs = 1;
    base.meta.es.warm_epochs = 1;
    base.meta.es.seed = 5;

    MetaOutcome out = run_meta(base);
    CHECK(out.search.history.size() == 6);
    CHECK(out.best_config.strategy.id == "meta-async");
    CHECK(out.best_config.epochs == base.epochs);
    CHECK(out.final_run.epochs.size() == 1);
    CHECK(out.search.history.min_pairwise_distance() >= base.meta.es.tabu_distance - 1e-15);

    // warm evaluations fine-tune from the incumbent snapshot
    bool saw_warm_source = false;
    for (const Candidate& c : out.search.history.records()) {
        CHECK(c.budget_epochs == 1);
        if (c.warm && !c.warm_source.empty()) saw_warm_source = true;
    }
    CHECK(saw_warm_source);

    const std::string hist = base.out_dir + "/history.ndjson";
    const std::string curves = base.out_dir + "/curves.csv";
    CHECK(std::ifstream(hist).good());
    CHECK(std::ifstream(curves).good());
    CHECK(std::ifstream(base.out_dir + "/best-model.snap").good());
    CHECK(std::ifstream(base.out_dir + "/best-config.json").good());

    auto curve_lines = lines_of(slurp(curves));
    REQUIRE(curve_lines.size() == 7);
    CHECK(curve_lines[0] == "eval_index,fitness,best_fitness,map,miou,w_seg,w_det,nu_seg,nu_det");

    // best_fitness column is the running maximum
    double prev_best = -1.0;
    for (size_t i = 1; i < curve_lines.size(); ++i) {
        std::stringstream ss(curve_lines[i]);
        std::string cell;
        std::getline(ss, cell, ',');  // eval_index
        std::getline(ss, cell, ',');  // fitness
        std::getline(ss, cell, ',');  // best_fitness
        const double best = std::stod(cell);
        CHECK(best >= prev_best);
        prev_best = best;
    }

    // a second invocation replays the finished search without new evaluations
    MetaOutcome again = run_meta(base);
    REQUIRE(again.search.history.size() == out.search.history.size());
    for (size_t i = 0; i < out.search.history.size(); ++i) {
        const Candidate& a = out.search.history.records()[i];
        const Candidate& b = again.search.history.records()[i];
        CHECK(a.point == b.point);
        CHECK(a.fitness == b.fitness);
        CHECK(a.timestamp == b.timestamp);
    }

    CHECK_THROWS_AS(run_meta(tiny_base()), ConfigError);  // needs a meta strategy id
    std::filesystem::remove_all(base.out_dir);
}

TEST_CASE("cli invocations") {
    const std::string out = tmp_dir("cli");

    SUBCASE("fixtures pass") {
        std::string text;
        CHECK(run_cli("fixtures", &text) == 0);
        CHECK(text.find("FAIL") == std::string::npos);
        CHECK(text.find("pass") != std::string::npos);
    }

    SUBCASE("run is deterministic and writes its artifacts") {
        const std::string cfg_path = out + "/cfg.json";
        RunConfig cfg = tiny_base();
        cfg.epochs = 2;
        {
            std::ofstream f(cfg_path);
            f << render_run_config(cfg).dump(2) << "\n";
        }
        CHECK(run_cli("run --config " + cfg_path + " --out " + out + "/a") == 0);
        CHECK(run_cli("run --config " + cfg_path + " --out " + out + "/b") == 0);

        nlohmann::json ja = nlohmann::json::parse(slurp(out + "/a/result.json"));
        nlohmann::json jb = nlohmann::json::parse(slurp(out + "/b/result.json"));
        ja["config"].erase("out_dir");
        jb["config"].erase("out_dir");
        CHECK(ja == jb);
        CHECK(std::ifstream(out + "/a/model.snap").good());
    }

    SUBCASE("config errors exit with 2") {
        const std::string bad = out + "/bad.json";
        {
            std::ofstream f(bad);
            f << "{\"preset\": \"nope\"}\n";
        }
        CHECK(run_cli("run --config " + bad, nullptr) == 2);

        const std::string typo = out + "/typo.json";
        {
            std::ofstream f(typo);
            f << "{\"presett\": \"balanced-small\"}\n";
        }
        CHECK(run_cli("run --config " + typo, nullptr) == 2);
    }

    SUBCASE("numeric blowups exit with 3") {
        const std::string cfg_path = out + "/blow.json";
        RunConfig cfg = tiny_base();
        cfg.epochs = 4;
        cfg.learning_rate = 1e200;  // drives the activations past double range
        {
            std::ofstream f(cfg_path);
            f << render_run_config(cfg).dump(2) << "\n";
        }
        std::string text;
        CHECK(run_cli("run --config " + cfg_path + " --out " + out + "/blow", &text) == 3);
    }

    std::filesystem::remove_all(out);
}
