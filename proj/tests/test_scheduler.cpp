#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <limits>
#include <numeric>

#include "mtlb/errors.hpp"
#include "mtlb/scheduler.hpp"

using namespace mtlb;

TEST_CASE("frequency rounding is half-up") {
    CHECK(round_frequency(1.0) == 1);
    CHECK(round_frequency(1.4999) == 1);
    CHECK(round_frequency(1.5) == 2);
    CHECK(round_frequency(2.5) == 3);
    CHECK(round_frequency(9.49) == 9);
    CHECK(round_frequency(0.2) == 0);
    CHECK_THROWS_AS(round_frequency(std::numeric_limits<double>::quiet_NaN()), NumericError);
    CHECK_THROWS_AS(round_frequency(std::numeric_limits<double>::infinity()), NumericError);
}

TEST_CASE("validation bounds the periods") {
    AsyncSchedule ok{1, 10};
    CHECK_NOTHROW(ok.validate());
    CHECK_THROWS_AS((AsyncSchedule{0, 1}.validate()), ConfigError);
    CHECK_THROWS_AS((AsyncSchedule{1, 11}.validate()), ConfigError);
    CHECK_THROWS_AS((AsyncSchedule{-3, 2}.validate()), ConfigError);
}

TEST_CASE("each task is active exactly lcm/nu times per window") {
    for (int64_t ns = 1; ns <= 10; ++ns) {
        for (int64_t nd = 1; nd <= 10; ++nd) {
            AsyncSchedule sch{ns, nd};
            const int64_t window = std::lcm(ns, nd);
            int64_t seg_on = 0, det_on = 0;
            for (int64_t e = 0; e < window; ++e) {
                if (sch.seg_active(e)) ++seg_on;
                if (sch.det_active(e)) ++det_on;
                TaskWeights w = sch.mask({0.6, 0.4}, e);
                CHECK(w.seg == (sch.seg_active(e) ? 0.6 : 0.0));
                CHECK(w.det == (sch.det_active(e) ? 0.4 : 0.0));
            }
            CHECK(seg_on == window / ns);
            CHECK(det_on == window / nd);
            // epoch zero always runs both tasks
            CHECK(sch.seg_active(0));
            CHECK(sch.det_active(0));
            // the pattern repeats with the window
            for (int64_t e = 0; e < window; ++e) {
                CHECK(sch.seg_active(e) == sch.seg_active(e + window));
                CHECK(sch.det_active(e) == sch.det_active(e + window));
            }
        }
    }
}

TEST_CASE("identity schedule never masks") {
    AsyncSchedule sch{1, 1};
    for (int64_t e = 0; e < 100; ++e) {
        CHECK(sch.seg_active(e));
        CHECK(sch.det_active(e));
        TaskWeights w = sch.mask({2.0, 3.0}, e);
        CHECK(w.seg == 2.0);
        CHECK(w.det == 3.0);
    }
}
