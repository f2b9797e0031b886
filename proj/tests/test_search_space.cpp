#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mtlb/errors.hpp"
#include "mtlb/search_space.hpp"

using namespace mtlb;

TEST_CASE("variable validation") {
    Variable v{"x", VarKind::Linear, 2.0, 1.0, {}, false};
    CHECK_THROWS_AS(v.validate(), ConfigError);
    v = {"", VarKind::Linear, 0.0, 1.0, {}, false};
    CHECK_THROWS_AS(v.validate(), ConfigError);
    v = {"x", VarKind::Exponential, 0.0, 1.0, {}, false};
    CHECK_THROWS_AS(v.validate(), ConfigError);
    v = {"x", VarKind::Categorical, 0.0, 0.0, {}, false};
    CHECK_THROWS_AS(v.validate(), ConfigError);
    v = {"x", VarKind::Categorical, 0.0, 0.0, {1.0, 2.0}, false};
    CHECK_NOTHROW(v.validate());
}

TEST_CASE("linear mapping") {
    Variable v{"x", VarKind::Linear, -2.0, 6.0, {}, false};
    CHECK(v.denormalize(0.0) == -2.0);
    CHECK(v.denormalize(1.0) == 6.0);
    CHECK(v.denormalize(0.5) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(v.denormalize(-0.7) == -2.0);  // clamped
    CHECK(v.denormalize(1.3) == 6.0);
    CHECK(v.normalize(2.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(v.normalize(100.0) == 1.0);  // clamped
}

TEST_CASE("exponential mapping is log-uniform") {
    Variable v{"w", VarKind::Exponential, 0.1, 1000.0, {}, false};
    CHECK(v.denormalize(0.0) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(v.denormalize(1.0) == doctest::Approx(1000.0).epsilon(1e-12));
    // the geometric midpoint of the decade span: 10^((-1 + 3) / 2) = 10
    CHECK(v.denormalize(0.5) == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(v.normalize(10.0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(v.denormalize(0.25) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(v.normalize(-1.0), ConfigError);
}

TEST_CASE("integer rounding is half-up on the applied value") {
    Variable v{"nu", VarKind::Linear, 1.0, 10.0, {}, true};
    CHECK(v.denormalize(0.0) == 1.0);
    CHECK(v.denormalize(1.0) == 10.0);
    // u = 1/18 maps to 1.5 before rounding
    CHECK(v.denormalize(1.0 / 18.0) == 2.0);
    CHECK(v.denormalize(0.5) == 6.0);  // 5.5 rounds up
    CHECK(v.denormalize(0.49) == 5.0);
}

TEST_CASE("categorical snaps to the nearest entry") {
    Variable v{"k", VarKind::Categorical, 0.0, 0.0, {3.0, 5.0, 9.0}, false};
    CHECK(v.denormalize(0.0) == 3.0);
    CHECK(v.denormalize(0.5) == 5.0);
    CHECK(v.denormalize(1.0) == 9.0);
    CHECK(v.denormalize(0.2) == 3.0);
    CHECK(v.denormalize(0.3) == 5.0);
    CHECK(v.normalize(9.0) == 1.0);
    CHECK(v.normalize(5.0) == 0.5);
    CHECK_THROWS_AS(v.normalize(4.0), ConfigError);
}

TEST_CASE("round trips across kinds") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Variable lin{"a", VarKind::Linear, -3.0, 12.0, {}, false};
    Variable expv{"b", VarKind::Exponential, 0.1, 100.0, {}, false};
    for (int i = 0; i < 500; ++i) {
        const double u = unit(rng);
        CHECK(lin.normalize(lin.denormalize(u)) == doctest::Approx(u).epsilon(1e-10));
        CHECK(expv.normalize(expv.denormalize(u)) == doctest::Approx(u).epsilon(1e-10));
    }
}

TEST_CASE("space bundles variables by name and order") {
    SearchSpace space = weights_async_space();
    CHECK(space.dim() == 4);
    CHECK(space.at(0).name == "w_seg");
    CHECK(space.at("nu_det").round_to_int);
    CHECK(space.at("w_seg").max == 1000.0);
    CHECK(space.at("w_det").max == 100.0);
    CHECK_THROWS_AS(space.at(9), Error);
    CHECK_THROWS_AS(space.at("zzz"), Error);

    CHECK_THROWS_AS(space.check_point({0.5, 0.5}), Error);
    CHECK_THROWS_AS(space.check_point({0.5, 0.5, 0.5, 1.5}), Error);
    CHECK_NOTHROW(space.check_point({0.0, 1.0, 0.5, 0.25}));

    auto vals = space.applied_values({0.5, 0.5, 0.0, 1.0});
    CHECK(vals.at("w_seg") == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(vals.at("w_det") == doctest::Approx(std::sqrt(10.0)).epsilon(1e-12));
    CHECK(vals.at("nu_seg") == 1.0);
    CHECK(vals.at("nu_det") == 10.0);

    auto point = space.normalize_point(vals);
    REQUIRE(point.size() == 4);
    CHECK(point[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(point[3] == 1.0);

    CHECK_THROWS_AS(space.normalize_point({{"w_seg", 1.0}}), Error);
    CHECK_THROWS_AS(SearchSpace({}), ConfigError);
    CHECK_THROWS_AS(SearchSpace({{"x", VarKind::Linear, 0.0, 1.0, {}, false},
                                 {"x", VarKind::Linear, 0.0, 1.0, {}, false}}),
                    ConfigError);
}

TEST_CASE("weights space bounds") {
    SearchSpace space = weights_space();
    CHECK(space.dim() == 2);
    CHECK(space.at("w_seg").kind == VarKind::Exponential);
    CHECK(space.at("w_seg").min == 0.1);
    CHECK(space.at("w_det").min == 0.1);
}

TEST_CASE("weight normalization sums to one and keeps the ratio") {
    TaskWeights w = normalize_weights(3.0, 1.0);
    CHECK(w.seg == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(w.seg + w.det == 1.0);

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> raw(1e-3, 1e3);
    for (int i = 0; i < 10000; ++i) {
        const double a = raw(rng), b = raw(rng);
        TaskWeights n = normalize_weights(a, b);
        CHECK(std::abs(n.seg + n.det - 1.0) <= 1e-12);
        CHECK(n.seg / n.det == doctest::Approx(a / b).epsilon(1e-9));
    }

    CHECK_THROWS_AS(normalize_weights(0.0, 1.0), Error);
    CHECK_THROWS_AS(normalize_weights(1.0, -2.0), Error);
}
