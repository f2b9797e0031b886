#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <CLI11.hpp>

#include "mtlb/bench_runner.hpp"
#include "mtlb/errors.hpp"
#include "mtlb/reference_tables.hpp"
#include "mtlb/run_config.hpp"
#include "mtlb/scene.hpp"
#include "mtlb/trainer.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string preset = "balanced-small";
    uint64_t seed = 0;
    std::string out;
    int64_t jobs = 1;
    CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_jobs) {
    auto* config = cmd->add_option("--config", args.config_path, "Run config JSON file");
    cmd->add_option("--preset", args.preset, "Problem preset for a default config")
        ->check(CLI::IsMember(mtlb::preset_names()))
        ->excludes(config);
    args.seed_opt = cmd->add_option("--seed", args.seed, "Override the run seed");
    cmd->add_option("--out", args.out, "Output directory");
    if (with_jobs)
        cmd->add_option("--jobs", args.jobs, "Parallel worker count")
            ->check(CLI::PositiveNumber);
}

// Output directory precedence: --out flag, then the config's own out_dir,
// then $MTLBENCH_OUT/<subcommand>, then out/<subcommand>.
mtlb::RunConfig load_base(const CommonArgs& args, const std::string& sub) {
    mtlb::RunConfig cfg = args.config_path.empty() ? mtlb::default_run_config(args.preset)
                                                   : mtlb::load_run_config(args.config_path);
    if (args.seed_opt != nullptr && args.seed_opt->count() > 0) cfg.seed = args.seed;
    if (!args.out.empty()) {
        cfg.out_dir = args.out;
    } else if (cfg.out_dir.empty()) {
        const char* root = std::getenv("MTLBENCH_OUT");
        cfg.out_dir = std::string(root && *root ? root : "out") + "/" + sub;
    }
    return cfg;
}

int do_run(const CommonArgs& args) {
    mtlb::RunConfig cfg = load_base(args, "run");
    std::filesystem::create_directories(cfg.out_dir);
    mtlb::TrainOptions opts;
    opts.snapshot_path = cfg.out_dir + "/model.snap";
    mtlb::RunResult r = mtlb::train(cfg, opts);
    mtlb::write_run_result(r, cfg.out_dir + "/result.json");
    std::printf("strategy %s  epochs %lld  mAP %.4f  mIoU %.4f  G %.4f  (%.1f s)\n",
                cfg.strategy.id.c_str(), static_cast<long long>(cfg.resolved_epochs()),
                r.final_report.map, r.final_report.miou, r.final_report.combined,
                r.wall_seconds);
    std::printf("wrote %s/result.json\n", cfg.out_dir.c_str());
    return 0;
}

int do_bench(const CommonArgs& args) {
    mtlb::RunConfig cfg = load_base(args, "bench");
    std::filesystem::create_directories(cfg.out_dir);
    mtlb::BenchTable table = mtlb::run_benchmark(mtlb::benchmark_matrix(cfg), args.jobs);
    std::fputs(mtlb::render_table(table).c_str(), stdout);
    mtlb::write_table_csv(table, cfg.out_dir + "/table.csv");
    std::printf("wrote %s/table.csv\n", cfg.out_dir.c_str());
    for (const mtlb::BenchRow& row : table.rows)
        if (!row.ok) return 1;
    return 0;
}

int do_meta(const CommonArgs& args) {
    mtlb::RunConfig cfg = load_base(args, "meta");
    if (args.config_path.empty() && cfg.strategy.id != "meta-static" &&
        cfg.strategy.id != "meta-async")
        cfg.strategy.id = cfg.meta.space == "weights" ? "meta-static" : "meta-async";
    std::filesystem::create_directories(cfg.out_dir);
    mtlb::MetaOutcome mo = mtlb::run_meta(cfg, args.jobs);
    mtlb::write_run_result(mo.final_run, cfg.out_dir + "/result.json");

    const mtlb::Candidate& best = mo.search.best;
    std::printf("best candidate %lld (generation %lld): fitness %.4f\n",
                static_cast<long long>(best.id), static_cast<long long>(best.generation),
                best.fitness);
    for (const auto& [name, value] : best.applied)
        std::printf("  %s = %.6g\n", name.c_str(), value);
    std::printf("final run: mAP %.4f  mIoU %.4f  G %.4f\n", mo.final_run.final_report.map,
                mo.final_run.final_report.miou, mo.final_run.final_report.combined);
    std::printf("wrote %s/{history.ndjson,curves.csv,best-config.json,result.json}\n",
                cfg.out_dir.c_str());
    return 0;
}

int do_fixtures() {
    int failed = 0;
    const auto checks = mtlb::check_reference_fixtures();
    for (const mtlb::FixtureCheck& c : checks) {
        std::printf("%-52s %s  expected %.4f  got %.6f\n", c.name.c_str(),
                    c.pass ? "pass" : "FAIL", c.expected, c.actual);
        if (!c.pass) failed += 1;
    }
    std::printf("%zu checks, %d failed\n", checks.size(), failed);
    return failed == 0 ? 0 : 1;
}

int do_export_dataset(const CommonArgs& args) {
    mtlb::RunConfig cfg = load_base(args, "dataset");
    mtlb::BenchmarkConfig bc = cfg.bench;
    bc.seed = cfg.resolved_bench_seed();
    mtlb::Dataset data = mtlb::generate_dataset(bc);
    std::filesystem::create_directories(cfg.out_dir);
    const std::string path = cfg.out_dir + "/dataset.json";
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw mtlb::Error("cannot open " + path + " for writing");
    f << mtlb::dataset_to_json(data).dump(2) << "\n";
    if (!f) throw mtlb::Error("short write to " + path);
    std::printf("wrote %s (%zu scenes)\n", path.c_str(), data.scenes.size());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Benchmark harness for multi-task loss weighting strategies"};
    app.require_subcommand(1);

    CommonArgs run_args, bench_args, meta_args, export_args;
    CLI::App* run_cmd = app.add_subcommand("run", "Train a single configuration");
    add_common(run_cmd, run_args, false);
    CLI::App* bench_cmd =
        app.add_subcommand("bench", "Train every fixed strategy and tabulate results");
    add_common(bench_cmd, bench_args, true);
    CLI::App* meta_cmd =
        app.add_subcommand("meta", "Evolutionary search over task weights and schedules");
    add_common(meta_cmd, meta_args, true);
    CLI::App* fixtures_cmd =
        app.add_subcommand("fixtures", "Recompute the published-results arithmetic checks");
    CLI::App* export_cmd =
        app.add_subcommand("export-dataset", "Generate and save a synthetic dataset");
    add_common(export_cmd, export_args, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) return do_run(run_args);
        if (bench_cmd->parsed()) return do_bench(bench_args);
        if (meta_cmd->parsed()) return do_meta(meta_args);
        if (fixtures_cmd->parsed()) return do_fixtures();
        if (export_cmd->parsed()) return do_export_dataset(export_args);
    } catch (const mtlb::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const mtlb::NumericError& e) {
        std::fprintf(stderr, "numeric abort: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
