#include "mtlb/scene.hpp"

#include <algorithm>
#include <random>

#include "mtlb/errors.hpp"

namespace mtlb {

namespace {

constexpr double kIntensity[4] = {0.1, 0.4, 0.7, 1.0};
constexpr double kNoiseStd = 0.05;

Scene generate_scene(int64_t grid, std::mt19937_64& rng) {
    Scene s;
    s.grid = grid;
    s.seg_labels.assign(static_cast<size_t>(grid * grid), 0);

    std::uniform_int_distribution<int> road_row(2, static_cast<int>(grid) - 5);
    std::uniform_int_distribution<int> road_height(2, 3);
    const int r0 = road_row(rng);
    const int rh = road_height(rng);
    for (int y = r0; y < r0 + rh; ++y)
        for (int x = 0; x < grid; ++x) s.seg_labels[static_cast<size_t>(y * grid + x)] = 1;

    std::uniform_int_distribution<int> blob_count(1, 3);
    std::uniform_int_distribution<int> blob_size(2, 5);
    std::uniform_int_distribution<int> blob_type(0, 1);
    const int n = blob_count(rng);
    for (int i = 0; i < n; ++i) {
        BoxLabel b;
        b.cls = blob_type(rng);
        b.w = blob_size(rng);
        b.h = blob_size(rng);
        b.x = std::uniform_int_distribution<int>(0, static_cast<int>(grid) - b.w)(rng);
        b.y = std::uniform_int_distribution<int>(0, static_cast<int>(grid) - b.h)(rng);
        const int seg_class = 2 + b.cls;
        for (int y = b.y; y < b.y + b.h; ++y)
            for (int x = b.x; x < b.x + b.w; ++x)
                s.seg_labels[static_cast<size_t>(y * grid + x)] = seg_class;
        s.boxes.push_back(b);
    }

    std::normal_distribution<double> noise(0.0, kNoiseStd);
    s.input.resize(s.seg_labels.size());
    for (size_t i = 0; i < s.input.size(); ++i)
        s.input[i] = kIntensity[s.seg_labels[i]] + noise(rng);
    return s;
}

}  // namespace

void BenchmarkConfig::validate() const {
    if (grid < 8) throw ConfigError("benchmark: grid must be at least 8");
    if (n_train_det < 1 || n_train_seg < 1 || n_val < 1)
        throw ConfigError("benchmark: all split sizes must be positive");
    if (loss_scale_factor <= 0.0) throw ConfigError("benchmark: loss_scale_factor must be positive");
    if (coord_weight < 0.0 || obj_weight < 0.0 || cls_weight < 0.0)
        throw ConfigError("benchmark: loss term weights must be non-negative");
    if (min_box_area < 0) throw ConfigError("benchmark: min_box_area must be non-negative");
}

Dataset generate_dataset(const BenchmarkConfig& config) {
    config.validate();
    Dataset d;
    d.config = config;
    std::mt19937_64 rng(config.seed);

    const int64_t total = config.n_train_det + config.n_train_seg + config.n_val;
    d.scenes.reserve(static_cast<size_t>(total));
    for (int64_t i = 0; i < total; ++i) d.scenes.push_back(generate_scene(config.grid, rng));

    int64_t next = 0;
    for (int64_t i = 0; i < config.n_train_det; ++i) d.train_det.push_back(next++);
    for (int64_t i = 0; i < config.n_train_seg; ++i) d.train_seg.push_back(next++);
    for (int64_t i = 0; i < config.n_val; ++i) d.val.push_back(next++);
    return d;
}

Tensor make_input_batch(const Dataset& data, const std::vector<int64_t>& idx) {
    if (idx.empty()) throw Error("make_input_batch: empty index list");
    const int64_t g = data.config.grid;
    std::vector<double> vals;
    vals.reserve(idx.size() * static_cast<size_t>(g * g));
    for (int64_t i : idx) {
        if (i < 0 || i >= static_cast<int64_t>(data.scenes.size()))
            throw Error("make_input_batch: scene index out of range");
        const Scene& s = data.scenes[static_cast<size_t>(i)];
        vals.insert(vals.end(), s.input.begin(), s.input.end());
    }
    return Tensor::from_values({static_cast<int64_t>(idx.size()), 1, g, g}, std::move(vals));
}

BenchPreset benchmark_preset(const std::string& name) {
    BenchPreset p;
    if (name == "imbalanced-seg") {
        p.bench.n_train_det = 68;
        p.bench.n_train_seg = 4;
        p.bench.n_val = 32;
        p.bench.loss_scale_factor = 70.0;
        p.epochs = 60;
    } else if (name == "balanced-large") {
        p.bench.n_train_det = 64;
        p.bench.n_train_seg = 64;
        p.bench.n_val = 16;
        p.bench.loss_scale_factor = 40.0;
        p.epochs = 60;
    } else if (name == "balanced-small") {
        p.bench.n_train_det = 16;
        p.bench.n_train_seg = 16;
        p.bench.n_val = 16;
        p.bench.loss_scale_factor = 100.0;
        p.epochs = 50;
    } else {
        throw ConfigError("unknown preset: " + name);
    }
    return p;
}

std::vector<std::string> preset_names() {
    return {"imbalanced-seg", "balanced-large", "balanced-small"};
}

nlohmann::json scene_to_json(const Scene& s) {
    nlohmann::json boxes = nlohmann::json::array();
    for (const BoxLabel& b : s.boxes)
        boxes.push_back({{"cls", b.cls}, {"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}});
    return {{"grid", s.grid}, {"input", s.input}, {"seg_labels", s.seg_labels}, {"boxes", boxes}};
}

Scene scene_from_json(const nlohmann::json& j) {
    Scene s;
    s.grid = j.at("grid").get<int64_t>();
    s.input = j.at("input").get<std::vector<double>>();
    s.seg_labels = j.at("seg_labels").get<std::vector<int>>();
    for (const auto& jb : j.at("boxes")) {
        BoxLabel b;
        b.cls = jb.at("cls").get<int>();
        b.x = jb.at("x").get<int>();
        b.y = jb.at("y").get<int>();
        b.w = jb.at("w").get<int>();
        b.h = jb.at("h").get<int>();
        s.boxes.push_back(b);
    }
    const size_t cells = static_cast<size_t>(s.grid * s.grid);
    if (s.input.size() != cells || s.seg_labels.size() != cells)
        throw ConfigError("scene: grid size does not match label buffers");
    return s;
}

nlohmann::json dataset_to_json(const Dataset& d) {
    nlohmann::json scenes = nlohmann::json::array();
    for (const Scene& s : d.scenes) scenes.push_back(scene_to_json(s));
    return {{"config",
             {{"grid", d.config.grid},
              {"n_train_det", d.config.n_train_det},
              {"n_train_seg", d.config.n_train_seg},
              {"n_val", d.config.n_val},
              {"loss_scale_factor", d.config.loss_scale_factor},
              {"coord_weight", d.config.coord_weight},
              {"obj_weight", d.config.obj_weight},
              {"cls_weight", d.config.cls_weight},
              {"min_box_area", d.config.min_box_area},
              {"seed", d.config.seed}}},
            {"scenes", scenes},
            {"train_det", d.train_det},
            {"train_seg", d.train_seg},
            {"val", d.val}};
}

Dataset dataset_from_json(const nlohmann::json& j) {
    Dataset d;
    const auto& jc = j.at("config");
    d.config.grid = jc.at("grid").get<int64_t>();
    d.config.n_train_det = jc.at("n_train_det").get<int64_t>();
    d.config.n_train_seg = jc.at("n_train_seg").get<int64_t>();
    d.config.n_val = jc.at("n_val").get<int64_t>();
    d.config.loss_scale_factor = jc.at("loss_scale_factor").get<double>();
    d.config.coord_weight = jc.at("coord_weight").get<double>();
    d.config.obj_weight = jc.at("obj_weight").get<double>();
    d.config.cls_weight = jc.at("cls_weight").get<double>();
    d.config.min_box_area = jc.at("min_box_area").get<int64_t>();
    d.config.seed = jc.at("seed").get<uint64_t>();
    d.config.validate();
    for (const auto& js : j.at("scenes")) d.scenes.push_back(scene_from_json(js));
    d.train_det = j.at("train_det").get<std::vector<int64_t>>();
    d.train_seg = j.at("train_seg").get<std::vector<int64_t>>();
    d.val = j.at("val").get<std::vector<int64_t>>();
    return d;
}

}  // namespace mtlb
