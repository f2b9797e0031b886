#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "mtlb/tensor.hpp"

using namespace mtlb;

namespace {

// Central finite differences against the backward pass. `make_loss` must
// rebuild the graph from the leaf tensors on every call so that nudged leaf
// values are picked up.
int fd_check(std::vector<Tensor> leaves, const std::function<Tensor()>& make_loss,
             double h = 1e-5, double tol = 1e-4) {
    Tensor loss = make_loss();
    REQUIRE(loss.is_scalar());
    for (Tensor& leaf : leaves) leaf.clear_grad();
    backward(loss);

    int checked = 0;
    for (Tensor& leaf : leaves) {
        REQUIRE(leaf.has_grad());
        auto grad = leaf.grad();
        auto vals = leaf.mutable_values();
        for (int64_t i = 0; i < leaf.numel(); ++i) {
            const double keep = vals[i];
            vals[i] = keep + h;
            const double up = make_loss().item();
            vals[i] = keep - h;
            const double down = make_loss().item();
            vals[i] = keep;
            const double fd = (up - down) / (2.0 * h);
            const double scale = std::max({1.0, std::abs(fd), std::abs(grad[i])});
            CHECK_MESSAGE(std::abs(grad[i] - fd) <= tol * scale,
                          "grad " << grad[i] << " vs fd " << fd << " at element " << i);
            checked += 1;
        }
    }
    return checked;
}

Tensor random_leaf(Shape shape, std::mt19937_64& rng, double lo = -2.0, double hi = 2.0,
                   double keep_away = 0.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> vals(static_cast<size_t>(shape_numel(shape)));
    for (double& v : vals) {
        do {
            v = dist(rng);
        } while (std::abs(v) < keep_away);
    }
    return Tensor::from_values(std::move(shape), std::move(vals), true);
}

}  // namespace

TEST_CASE("shape helpers") {
    CHECK(shape_numel({2, 3, 4}) == 24);
    CHECK(shape_numel({}) == 1);
    CHECK(shape_str({2, 3}) == "[2,3]");
}

TEST_CASE("construction and access") {
    Tensor z = Tensor::zeros({2, 2});
    CHECK(z.numel() == 4);
    for (double v : z.values()) CHECK(v == 0.0);

    Tensor f = Tensor::full({3}, 1.5);
    for (double v : f.values()) CHECK(v == 1.5);

    Tensor s = Tensor::scalar(4.25);
    CHECK(s.is_scalar());
    CHECK(s.item() == 4.25);

    CHECK_THROWS_AS(Tensor::from_values({2}, {1.0, 2.0, 3.0}), Error);
    CHECK(!Tensor{}.defined());
    CHECK_THROWS_AS(backward(Tensor{}), Error);
}

TEST_CASE("copies share the node") {
    Tensor a = Tensor::scalar(1.0);
    Tensor b = a;
    b.mutable_values()[0] = 9.0;
    CHECK(a.item() == 9.0);
    CHECK(a.id() == b.id());
}

TEST_CASE("forward arithmetic fixtures") {
    Tensor a = Tensor::from_values({2}, {1.0, 2.0});
    Tensor b = Tensor::from_values({2}, {10.0, 20.0});
    CHECK(add(a, b).values()[1] == 22.0);
    CHECK(sub(b, a).values()[0] == 9.0);
    CHECK(mul(a, b).values()[1] == 40.0);
    CHECK(scale(a, 3.0).values()[0] == 3.0);
    CHECK(add_scalar(a, 0.5).values()[1] == 2.5);
    CHECK(sum(b).item() == 30.0);
    CHECK(mean(b).item() == 15.0);
    CHECK(relu(Tensor::from_values({3}, {-1.0, 0.0, 2.0})).values()[0] == 0.0);
    CHECK(relu(Tensor::from_values({3}, {-1.0, 0.0, 2.0})).values()[2] == 2.0);
    CHECK(sigmoid(Tensor::scalar(0.0)).item() == doctest::Approx(0.5));
    CHECK(exp(Tensor::scalar(1.0)).item() == doctest::Approx(std::exp(1.0)));
    CHECK(log(Tensor::scalar(std::exp(2.0))).item() == doctest::Approx(2.0));
    CHECK(clamp_min(Tensor::from_values({2}, {0.5, 2.0}), 1.0).values()[0] == 1.0);
    CHECK(squared_error(a, b).item() == doctest::Approx(81.0 + 324.0));

    CHECK_THROWS_AS(add(a, Tensor::from_values({3}, {1, 2, 3})), ShapeError);
}

TEST_CASE("matmul fixture") {
    Tensor a = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b = Tensor::from_values({3, 2}, {7, 8, 9, 10, 11, 12});
    Tensor c = matmul(a, b);
    REQUIRE(c.shape() == Shape{2, 2});
    CHECK(c.values()[0] == 58.0);
    CHECK(c.values()[1] == 64.0);
    CHECK(c.values()[2] == 139.0);
    CHECK(c.values()[3] == 154.0);
    CHECK_THROWS_AS(matmul(a, a), ShapeError);
}

TEST_CASE("softmax rows sum to one") {
    Tensor t = Tensor::from_values({2, 3}, {1, 2, 3, -1, 0, 1});
    Tensor s = softmax(t);
    auto v = s.values();
    CHECK(v[0] + v[1] + v[2] == doctest::Approx(1.0));
    CHECK(v[3] + v[4] + v[5] == doctest::Approx(1.0));
    CHECK(v[2] > v[1]);
}

TEST_CASE("softmax_cross_entropy fixture") {
    // Uniform logits give -log(1/3) per row regardless of label.
    Tensor logits = Tensor::zeros({2, 3});
    Tensor loss = softmax_cross_entropy(logits, {0, 2});
    CHECK(loss.item() == doctest::Approx(std::log(3.0)));
    CHECK_THROWS_AS(softmax_cross_entropy(logits, {0}), ShapeError);
    CHECK_THROWS_AS(softmax_cross_entropy(logits, {0, 3}), Error);
}

TEST_CASE("structural op fixtures") {
    Tensor t = Tensor::from_values({1, 2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
    Tensor rows = channels_to_rows(t);
    REQUIRE(rows.shape() == Shape{4, 2});
    CHECK(rows.values()[0] == 1.0);
    CHECK(rows.values()[1] == 5.0);
    CHECK(rows.values()[6] == 4.0);
    CHECK(rows.values()[7] == 8.0);

    Tensor m = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor cols = slice_cols(m, 1, 3);
    REQUIRE(cols.shape() == Shape{2, 2});
    CHECK(cols.values()[0] == 2.0);
    CHECK(cols.values()[3] == 6.0);
    CHECK_THROWS_AS(slice_cols(m, 2, 1), Error);

    Tensor g = gather_rows(m, {1, 1, 0});
    REQUIRE(g.shape() == Shape{3, 3});
    CHECK(g.values()[0] == 4.0);
    CHECK(g.values()[8] == 3.0);
    CHECK_THROWS_AS(gather_rows(m, {2}), Error);
}

TEST_CASE("conv2d forward fixture") {
    // 3x3 all-ones kernel over a 3x3 all-ones image, padding 1: each output
    // counts the overlap size.
    Tensor img = Tensor::full({1, 1, 3, 3}, 1.0);
    Tensor w = Tensor::full({1, 1, 3, 3}, 1.0);
    Tensor b = Tensor::zeros({1});
    Tensor out = conv2d(img, w, b, 1);
    REQUIRE(out.shape() == Shape{1, 1, 3, 3});
    CHECK(out.values()[0] == 4.0);
    CHECK(out.values()[1] == 6.0);
    CHECK(out.values()[4] == 9.0);

    Tensor nopad = conv2d(img, w, b, 0);
    REQUIRE(nopad.shape() == Shape{1, 1, 1, 1});
    CHECK(nopad.values()[0] == 9.0);
}

TEST_CASE("gradients match finite differences") {
    std::mt19937_64 rng(20240811);
    int cases = 0;

    SUBCASE("add sub mul scale add_scalar") {
        for (int rep = 0; rep < 9; ++rep) {
            Tensor a = random_leaf({5, 3}, rng);
            Tensor b = random_leaf({5, 3}, rng);
            Tensor t = random_leaf({5, 3}, rng);
            cases += fd_check({a, b}, [&] {
                Tensor x = add(mul(a, b), sub(a, b));
                return squared_error(add_scalar(scale(x, 0.7), 0.3), t);
            });
        }
        CHECK(cases >= 100);
    }

    SUBCASE("matmul") {
        for (int rep = 0; rep < 4; ++rep) {
            Tensor a = random_leaf({4, 3}, rng);
            Tensor b = random_leaf({3, 5}, rng);
            cases += fd_check({a, b}, [&] { return sum(matmul(a, b)); });
        }
        CHECK(cases >= 100);
    }

    SUBCASE("conv2d") {
        Tensor target = random_leaf({2, 3, 4, 4}, rng);
        target.set_needs_grad(false);
        Tensor img = random_leaf({2, 2, 4, 4}, rng);
        Tensor w = random_leaf({3, 2, 3, 3}, rng);
        Tensor b = random_leaf({3}, rng);
        cases += fd_check({img, w, b}, [&] {
            return squared_error(conv2d(img, w, b, 1), target);
        });
        CHECK(cases >= 100);
    }

    SUBCASE("relu away from the kink") {
        for (int rep = 0; rep < 7; ++rep) {
            Tensor a = random_leaf({4, 4}, rng, -2.0, 2.0, 1e-2);
            cases += fd_check({a}, [&] { return sum(relu(a)); });
        }
        CHECK(cases >= 100);
    }

    SUBCASE("sigmoid exp log clamp_min") {
        for (int rep = 0; rep < 8; ++rep) {
            Tensor a = random_leaf({4, 4}, rng);
            cases += fd_check({a}, [&] { return sum(sigmoid(a)); });
            cases += fd_check({a}, [&] { return sum(exp(scale(a, 0.5))); });
            Tensor p = random_leaf({3, 3}, rng, 0.5, 3.0);
            cases += fd_check({p}, [&] { return sum(log(p)); });
            Tensor c = random_leaf({4, 4}, rng, -2.0, 2.0, 1e-2);
            cases += fd_check({c}, [&] { return sum(clamp_min(c, 0.0)); });
        }
        CHECK(cases >= 400);
    }

    SUBCASE("softmax and cross entropy") {
        std::uniform_int_distribution<int> lab(0, 4);
        for (int rep = 0; rep < 5; ++rep) {
            Tensor logits = random_leaf({6, 5}, rng);
            Tensor weights = random_leaf({6, 5}, rng);
            weights.set_needs_grad(false);
            cases += fd_check({logits}, [&] { return sum(mul(softmax(logits), weights)); });
            std::vector<int> labels(6);
            for (int& l : labels) l = lab(rng);
            cases += fd_check({logits}, [&] { return softmax_cross_entropy(logits, labels); });
        }
        CHECK(cases >= 100);
    }

    SUBCASE("reductions and squared error") {
        for (int rep = 0; rep < 5; ++rep) {
            Tensor a = random_leaf({5, 4}, rng);
            Tensor t = random_leaf({5, 4}, rng);
            t.set_needs_grad(false);
            cases += fd_check({a}, [&] { return mean(a); });
            cases += fd_check({a}, [&] { return squared_error(a, t); });
        }
        CHECK(cases >= 100);
    }

    SUBCASE("structural ops") {
        for (int rep = 0; rep < 4; ++rep) {
            Tensor t = random_leaf({2, 3, 3, 3}, rng);
            cases += fd_check({t}, [&] { return sum(mul(channels_to_rows(t), channels_to_rows(t))); });
            Tensor m = random_leaf({5, 4}, rng);
            cases += fd_check({m}, [&] { return sum(slice_cols(m, 1, 3)); });
            cases += fd_check({m}, [&] {
                Tensor g = gather_rows(m, {0, 2, 2, 4});
                return squared_error(g, Tensor::zeros({4, 4}));
            });
        }
        CHECK(cases >= 100);
    }
}

TEST_CASE("backward accumulates into leaves across calls") {
    Tensor a = Tensor::scalar(3.0, true);
    Tensor loss = mul(a, a);
    backward(loss);
    CHECK(a.grad()[0] == doctest::Approx(6.0));
    backward(loss);
    CHECK(a.grad()[0] == doctest::Approx(12.0));
}

TEST_CASE("interior adjoints reset between backward calls") {
    // Two backwards through a shared subexpression then one through the sum
    // must equal three independent passes on the leaf.
    Tensor a = Tensor::scalar(2.0, true);
    Tensor shared = mul(a, a);
    Tensor l1 = scale(shared, 1.0);
    Tensor l2 = scale(shared, 3.0);
    backward(l1);
    CHECK(a.grad()[0] == doctest::Approx(4.0));
    backward(l2);
    CHECK(a.grad()[0] == doctest::Approx(4.0 + 12.0));
    backward(add(l1, l2));
    CHECK(a.grad()[0] == doctest::Approx(16.0 + 16.0));
}

TEST_CASE("backward requires a scalar root") {
    Tensor a = Tensor::from_values({2}, {1.0, 2.0}, true);
    CHECK_THROWS_AS(backward(add(a, a)), Error);
}

TEST_CASE("no-grad guard suppresses graph recording") {
    Tensor a = Tensor::scalar(2.0, true);
    CHECK(grad_enabled());
    {
        NoGradGuard guard;
        CHECK(!grad_enabled());
        Tensor out = mul(a, a);
        backward(out);  // nothing recorded, so nothing flows
        CHECK(!a.has_grad());
    }
    CHECK(grad_enabled());
}

TEST_CASE("finite checks") {
    CHECK(all_finite(std::vector<double>{1.0, -2.0}));
    CHECK(!all_finite(std::vector<double>{1.0, std::nan("")}));
    Tensor bad = Tensor::from_values({2}, {1.0, std::numeric_limits<double>::infinity()});
    CHECK_THROWS_AS(check_finite(bad, "loss"), NumericError);
    CHECK_NOTHROW(check_finite(Tensor::scalar(1.0), "loss"));
}
