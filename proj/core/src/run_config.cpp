#include "mtlb/run_config.hpp"

#include <fstream>

#include "mtlb/errors.hpp"

namespace mtlb {

namespace {

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok) throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
    if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

void parse_arch(const nlohmann::json& j, ArchConfig& arch) {
    check_keys(j, {"grid", "in_channels", "trunk_channels", "kernel", "seg_classes", "det_classes"},
               "arch");
    read(j, "grid", arch.grid);
    read(j, "in_channels", arch.in_channels);
    read(j, "trunk_channels", arch.trunk_channels);
    read(j, "kernel", arch.kernel);
    read(j, "seg_classes", arch.seg_classes);
    read(j, "det_classes", arch.det_classes);
}

void parse_bench(const nlohmann::json& j, BenchmarkConfig& bench) {
    check_keys(j,
               {"grid", "n_train_det", "n_train_seg", "n_val", "loss_scale_factor", "coord_weight",
                "obj_weight", "cls_weight", "min_box_area", "seed"},
               "bench");
    read(j, "grid", bench.grid);
    read(j, "n_train_det", bench.n_train_det);
    read(j, "n_train_seg", bench.n_train_seg);
    read(j, "n_val", bench.n_val);
    read(j, "loss_scale_factor", bench.loss_scale_factor);
    read(j, "coord_weight", bench.coord_weight);
    read(j, "obj_weight", bench.obj_weight);
    read(j, "cls_weight", bench.cls_weight);
    read(j, "min_box_area", bench.min_box_area);
    read(j, "seed", bench.seed);
}

void parse_strategy(const nlohmann::json& j, StrategyConfig& s) {
    check_keys(j,
               {"id", "static_weights", "schedule", "handcrafted_window", "gradnorm_alpha",
                "gradnorm_lr", "gradnorm_floor", "geometric_floor"},
               "strategy");
    read(j, "id", s.id);
    const bool meta_id = s.id == "meta-static" || s.id == "meta-async";
    if (auto it = j.find("static_weights"); it != j.end()) {
        if (!meta_id)
            throw ConfigError("static_weights only apply to meta-static and meta-async");
        check_keys(*it, {"seg", "det"}, "strategy.static_weights");
        read(*it, "seg", s.static_weights.seg);
        read(*it, "det", s.static_weights.det);
    }
    if (auto it = j.find("schedule"); it != j.end()) {
        if (s.id != "meta-async") throw ConfigError("schedule requires the meta-async strategy");
        check_keys(*it, {"nu_seg", "nu_det"}, "strategy.schedule");
        read(*it, "nu_seg", s.schedule.nu_seg);
        read(*it, "nu_det", s.schedule.nu_det);
    }
    read(j, "handcrafted_window", s.handcrafted_window);
    read(j, "gradnorm_alpha", s.gradnorm_alpha);
    read(j, "gradnorm_lr", s.gradnorm_lr);
    read(j, "gradnorm_floor", s.gradnorm_floor);
    read(j, "geometric_floor", s.geometric_floor);
}

void parse_es(const nlohmann::json& j, EsConfig& es) {
    check_keys(j,
               {"mu", "lambda", "sigma0", "bias_coeff", "tabu_distance", "tabu_retries",
                "tabu_expand", "tabu_expansions", "max_evals", "full_epochs", "warm_epochs",
                "warm_start", "adapt_sigma", "sigma_gain", "sigma_decay", "sigma_min",
                "sigma_max", "seed"},
               "meta.es");
    read(j, "mu", es.mu);
    read(j, "lambda", es.lambda);
    read(j, "sigma0", es.sigma0);
    read(j, "bias_coeff", es.bias_coeff);
    read(j, "tabu_distance", es.tabu_distance);
    read(j, "tabu_retries", es.tabu_retries);
    read(j, "tabu_expand", es.tabu_expand);
    read(j, "tabu_expansions", es.tabu_expansions);
    read(j, "max_evals", es.max_evals);
    read(j, "full_epochs", es.full_epochs);
    read(j, "warm_epochs", es.warm_epochs);
    read(j, "warm_start", es.warm_start);
    read(j, "adapt_sigma", es.adapt_sigma);
    read(j, "sigma_gain", es.sigma_gain);
    read(j, "sigma_decay", es.sigma_decay);
    read(j, "sigma_min", es.sigma_min);
    read(j, "sigma_max", es.sigma_max);
    read(j, "seed", es.seed);
}

}  // namespace

void MetaConfig::validate() const {
    if (space != "weights" && space != "weights-async")
        throw ConfigError("meta.space must be 'weights' or 'weights-async'");
    es.validate();
}

int64_t RunConfig::resolved_epochs() const {
    if (epochs >= 0) return epochs;
    return benchmark_preset(preset).epochs;
}

void RunConfig::validate() const {
    benchmark_preset(preset);
    if (epochs < -1) throw ConfigError("epochs must be -1 (preset default) or non-negative");
    if (batch_size < 1) throw ConfigError("batch_size must be positive");
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
    arch.validate();
    bench.validate();
    if (arch.grid != bench.grid)
        throw ConfigError("arch.grid and bench.grid must agree");
    strategy.validate();
    meta.validate();
}

RunConfig default_run_config(const std::string& preset) {
    RunConfig cfg;
    cfg.preset = preset;
    const BenchPreset p = benchmark_preset(preset);
    cfg.bench = p.bench;
    cfg.bench.seed = 0;
    return cfg;
}

RunConfig parse_run_config(const nlohmann::json& j) {
    check_keys(j,
               {"preset", "epochs", "batch_size", "learning_rate", "seed", "out_dir", "arch",
                "bench", "strategy", "meta"},
               "config");
    std::string preset = "balanced-small";
    read(j, "preset", preset);
    RunConfig cfg = default_run_config(preset);
    read(j, "epochs", cfg.epochs);
    read(j, "batch_size", cfg.batch_size);
    read(j, "learning_rate", cfg.learning_rate);
    read(j, "seed", cfg.seed);
    read(j, "out_dir", cfg.out_dir);
    if (auto it = j.find("arch"); it != j.end()) parse_arch(*it, cfg.arch);
    if (auto it = j.find("bench"); it != j.end()) parse_bench(*it, cfg.bench);
    if (auto it = j.find("strategy"); it != j.end()) parse_strategy(*it, cfg.strategy);
    if (auto it = j.find("meta"); it != j.end()) {
        check_keys(*it, {"space", "es"}, "meta");
        read(*it, "space", cfg.meta.space);
        if (auto es = it->find("es"); es != it->end()) parse_es(*es, cfg.meta.es);
    }
    cfg.validate();
    return cfg;
}

nlohmann::json render_run_config(const RunConfig& cfg) {
    nlohmann::json strategy{{"id", cfg.strategy.id},
                            {"handcrafted_window", cfg.strategy.handcrafted_window},
                            {"gradnorm_alpha", cfg.strategy.gradnorm_alpha},
                            {"gradnorm_lr", cfg.strategy.gradnorm_lr},
                            {"gradnorm_floor", cfg.strategy.gradnorm_floor},
                            {"geometric_floor", cfg.strategy.geometric_floor}};
    if (cfg.strategy.id == "meta-static" || cfg.strategy.id == "meta-async")
        strategy["static_weights"] = {{"seg", cfg.strategy.static_weights.seg},
                                      {"det", cfg.strategy.static_weights.det}};
    if (cfg.strategy.id == "meta-async")
        strategy["schedule"] = {{"nu_seg", cfg.strategy.schedule.nu_seg},
                                {"nu_det", cfg.strategy.schedule.nu_det}};

    return {{"preset", cfg.preset},
            {"epochs", cfg.epochs},
            {"batch_size", cfg.batch_size},
            {"learning_rate", cfg.learning_rate},
            {"seed", cfg.seed},
            {"out_dir", cfg.out_dir},
            {"arch",
             {{"grid", cfg.arch.grid},
              {"in_channels", cfg.arch.in_channels},
              {"trunk_channels", cfg.arch.trunk_channels},
              {"kernel", cfg.arch.kernel},
              {"seg_classes", cfg.arch.seg_classes},
              {"det_classes", cfg.arch.det_classes}}},
            {"bench",
             {{"grid", cfg.bench.grid},
              {"n_train_det", cfg.bench.n_train_det},
              {"n_train_seg", cfg.bench.n_train_seg},
              {"n_val", cfg.bench.n_val},
              {"loss_scale_factor", cfg.bench.loss_scale_factor},
              {"coord_weight", cfg.bench.coord_weight},
              {"obj_weight", cfg.bench.obj_weight},
              {"cls_weight", cfg.bench.cls_weight},
              {"min_box_area", cfg.bench.min_box_area},
              {"seed", cfg.bench.seed}}},
            {"strategy", strategy},
            {"meta",
             {{"space", cfg.meta.space},
              {"es",
               {{"mu", cfg.meta.es.mu},
                {"lambda", cfg.meta.es.lambda},
                {"sigma0", cfg.meta.es.sigma0},
                {"bias_coeff", cfg.meta.es.bias_coeff},
                {"tabu_distance", cfg.meta.es.tabu_distance},
                {"tabu_retries", cfg.meta.es.tabu_retries},
                {"tabu_expand", cfg.meta.es.tabu_expand},
                {"tabu_expansions", cfg.meta.es.tabu_expansions},
                {"max_evals", cfg.meta.es.max_evals},
                {"full_epochs", cfg.meta.es.full_epochs},
                {"warm_epochs", cfg.meta.es.warm_epochs},
                {"warm_start", cfg.meta.es.warm_start},
                {"adapt_sigma", cfg.meta.es.adapt_sigma},
                {"sigma_gain", cfg.meta.es.sigma_gain},
                {"sigma_decay", cfg.meta.es.sigma_decay},
                {"sigma_min", cfg.meta.es.sigma_min},
                {"sigma_max", cfg.meta.es.sigma_max},
                {"seed", cfg.meta.es.seed}}}}}};
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
    return parse_run_config(j);
}

bool operator==(const RunConfig& a, const RunConfig& b) {
    return render_run_config(a) == render_run_config(b);
}

}  // namespace mtlb
