#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "mtlb/errors.hpp"
#include "mtlb/scene.hpp"

using namespace mtlb;

TEST_CASE("config validation") {
    BenchmarkConfig bad;
    bad.grid = 4;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = BenchmarkConfig{};
    bad.n_val = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = BenchmarkConfig{};
    bad.loss_scale_factor = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = BenchmarkConfig{};
    bad.coord_weight = -1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK_NOTHROW(BenchmarkConfig{}.validate());
}

TEST_CASE("generation is deterministic in the seed") {
    BenchmarkConfig cfg;
    cfg.seed = 99;
    Dataset a = generate_dataset(cfg), b = generate_dataset(cfg);
    REQUIRE(a.scenes.size() == b.scenes.size());
    for (size_t i = 0; i < a.scenes.size(); ++i) {
        CHECK(a.scenes[i].input == b.scenes[i].input);
        CHECK(a.scenes[i].seg_labels == b.scenes[i].seg_labels);
        CHECK(a.scenes[i].boxes.size() == b.scenes[i].boxes.size());
    }
    cfg.seed = 100;
    Dataset c = generate_dataset(cfg);
    bool differs = false;
    for (size_t i = 0; i < a.scenes.size() && !differs; ++i)
        differs = a.scenes[i].input != c.scenes[i].input;
    CHECK(differs);
}

TEST_CASE("splits are disjoint and cover the scene list") {
    Dataset d = generate_dataset(BenchmarkConfig{});
    std::set<int64_t> seen;
    for (int64_t i : d.train_det) seen.insert(i);
    for (int64_t i : d.train_seg) seen.insert(i);
    for (int64_t i : d.val) seen.insert(i);
    CHECK(seen.size() == d.scenes.size());
    CHECK(d.train_det.size() + d.train_seg.size() + d.val.size() == d.scenes.size());
}

TEST_CASE("scene structure") {
    BenchmarkConfig cfg;
    cfg.n_train_det = 20;
    cfg.n_train_seg = 1;
    cfg.n_val = 1;
    Dataset d = generate_dataset(cfg);
    for (const Scene& s : d.scenes) {
        CHECK(s.grid == 16);
        CHECK(s.input.size() == 256);
        CHECK(s.seg_labels.size() == 256);
        CHECK(s.boxes.size() >= 1);
        CHECK(s.boxes.size() <= 3);

        // one contiguous horizontal road band of height 2 or 3, possibly
        // partially overwritten where blobs cover it
        int road_cells = 0;
        for (int v : s.seg_labels) {
            CHECK(v >= 0);
            CHECK(v <= 3);
            if (v == 1) ++road_cells;
        }
        CHECK(road_cells >= 1);
        CHECK(road_cells <= 3 * 16);

        for (const BoxLabel& b : s.boxes) {
            CHECK(b.cls >= 0);
            CHECK(b.cls <= 1);
            CHECK(b.w >= 2);
            CHECK(b.w <= 5);
            CHECK(b.h >= 2);
            CHECK(b.h <= 5);
            CHECK(b.x >= 0);
            CHECK(b.y >= 0);
            CHECK(b.x + b.w <= 16);
            CHECK(b.y + b.h <= 16);
        }

        // the last-drawn blob is never overwritten, so its cells carry its class
        const BoxLabel& last = s.boxes.back();
        for (int y = last.y; y < last.y + last.h; ++y)
            for (int x = last.x; x < last.x + last.w; ++x)
                CHECK(s.seg_labels[static_cast<size_t>(y * 16 + x)] == 2 + last.cls);
    }
}

TEST_CASE("intensities track region identity") {
    Dataset d = generate_dataset(BenchmarkConfig{});
    const double levels[4] = {0.1, 0.4, 0.7, 1.0};
    double worst = 0.0;
    for (const Scene& s : d.scenes)
        for (size_t i = 0; i < s.input.size(); ++i)
            worst = std::max(worst, std::abs(s.input[i] - levels[s.seg_labels[i]]));
    // additive noise with std 0.05; 6 sigma bounds essentially all draws
    CHECK(worst < 0.3);
    CHECK(worst > 0.0);
}

TEST_CASE("presets") {
    BenchPreset p = benchmark_preset("imbalanced-seg");
    CHECK(p.bench.n_train_det == 68);
    CHECK(p.bench.n_train_seg == 4);
    CHECK(p.bench.n_val == 32);
    CHECK(p.bench.loss_scale_factor == 70.0);
    CHECK(p.bench.n_train_det / p.bench.n_train_seg == 17);
    CHECK(p.epochs == 60);

    p = benchmark_preset("balanced-large");
    CHECK(p.bench.n_train_det == 64);
    CHECK(p.bench.n_train_seg == 64);
    CHECK(p.bench.loss_scale_factor == 40.0);

    p = benchmark_preset("balanced-small");
    CHECK(p.bench.n_train_det == 16);
    CHECK(p.bench.loss_scale_factor == 100.0);
    CHECK(p.epochs == 50);

    CHECK_THROWS_AS(benchmark_preset("nope"), ConfigError);
    CHECK(preset_names().size() == 3);
}

TEST_CASE("input batch layout") {
    Dataset d = generate_dataset(BenchmarkConfig{});
    Tensor batch = make_input_batch(d, {0, 3});
    CHECK(batch.shape() == Shape{2, 1, 16, 16});
    auto v = batch.values();
    for (int i = 0; i < 256; ++i) {
        CHECK(v[static_cast<size_t>(i)] == d.scenes[0].input[static_cast<size_t>(i)]);
        CHECK(v[static_cast<size_t>(256 + i)] == d.scenes[3].input[static_cast<size_t>(i)]);
    }
    CHECK_THROWS_AS(make_input_batch(d, {}), Error);
    CHECK_THROWS_AS(make_input_batch(d, {9999}), Error);
}

TEST_CASE("json round trip") {
    BenchmarkConfig cfg;
    cfg.n_train_det = 3;
    cfg.n_train_seg = 2;
    cfg.n_val = 2;
    cfg.loss_scale_factor = 7.5;
    cfg.seed = 1234;
    Dataset d = generate_dataset(cfg);
    Dataset r = dataset_from_json(dataset_to_json(d));
    CHECK(r.config.seed == 1234);
    CHECK(r.config.loss_scale_factor == 7.5);
    REQUIRE(r.scenes.size() == d.scenes.size());
    for (size_t i = 0; i < d.scenes.size(); ++i) {
        CHECK(r.scenes[i].input == d.scenes[i].input);
        CHECK(r.scenes[i].seg_labels == d.scenes[i].seg_labels);
        REQUIRE(r.scenes[i].boxes.size() == d.scenes[i].boxes.size());
        for (size_t k = 0; k < d.scenes[i].boxes.size(); ++k) {
            CHECK(r.scenes[i].boxes[k].cls == d.scenes[i].boxes[k].cls);
            CHECK(r.scenes[i].boxes[k].x == d.scenes[i].boxes[k].x);
            CHECK(r.scenes[i].boxes[k].w == d.scenes[i].boxes[k].w);
        }
    }
    CHECK(r.train_det == d.train_det);
    CHECK(r.train_seg == d.train_seg);
    CHECK(r.val == d.val);
}
