#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "hgr/train/lr_finder.hpp"
#include "hgr/train/optim.hpp"
#include "hgr/rng.hpp"
#include "oracles.hpp"

using namespace hgr;
using namespace hgr::train;
using hgr::test::ScalarRAdam;

namespace {

std::vector<ParamSlot<double>> slots_of(std::vector<double>& value, const std::vector<double>& grad) {
    return {ParamSlot<double>{"theta", std::span<double>(value), std::span<const double>(grad), true}};
}

class QuadraticProbe : public LrProbe {
public:
    explicit QuadraticProbe(double curvature) : L(curvature) {}
    double loss_then_step(double lr) override {
        const double loss = 0.5 * L * theta * theta;
        theta -= lr * L * theta;
        return loss;
    }
    double L;
    double theta = 1.0;
};

class ConstantProbe : public LrProbe {
public:
    double loss_then_step(double) override { return 3.0; }
};

class ExplodingProbe : public LrProbe {
public:
    double loss_then_step(double) override { return calls++ ? NAN : 1.0; }
    int calls = 0;
};

}  // namespace

TEST_CASE("rho closed form") {
    const double rinf = radam_rho_inf(0.999);
    CHECK(rinf == Catch::Approx(1999.0).epsilon(1e-12));
    for (std::uint64_t t = 1; t <= 5; ++t) {
        const double bt = std::pow(0.999, static_cast<double>(t));
        CHECK(radam_rho(t, 0.999) == Catch::Approx(rinf - 2.0 * static_cast<double>(t) * bt / (1 - bt)).epsilon(1e-12));
    }
    CHECK(radam_rho(1, 0.999) == Catch::Approx(1.0).epsilon(1e-9));
    CHECK(radam_rho(4, 0.999) <= 4.0);
    CHECK(radam_rho(5, 0.999) > 4.0);
}

TEST_CASE("RAdam on a scalar quadratic matches the oracle") {
    RAdamState<double> st(RAdamConfig{.lr = 0.1});
    ScalarRAdam oracle{.lr = 0.1};
    std::vector<double> theta{1.0}, grad{0.0};
    double ref = 1.0;
    for (int i = 0; i < 50; ++i) {
        grad[0] = 2 * theta[0];
        auto s = slots_of(theta, grad);
        radam_step(st, s);
        ref = oracle.step(ref, 2 * ref);
        CHECK(std::abs(theta[0] - ref) <= 1e-10);
    }
}

TEST_CASE("unrectified branch for the first four steps") {
    // Below rho 4 the update is lr * mhat; with a constant gradient mhat = g.
    RAdamState<double> st(RAdamConfig{.lr = 0.01});
    std::vector<double> theta{0.0}, grad{3.0};
    for (int t = 1; t <= 4; ++t) {
        auto s = slots_of(theta, grad);
        radam_step(st, s);
        CHECK(theta[0] == Catch::Approx(-0.03 * t).epsilon(1e-12));
    }
    auto s = slots_of(theta, grad);
    radam_step(st, s);
    CHECK(std::abs(theta[0] + 0.15) > 1e-6);  // step 5 is adaptive
}

TEST_CASE("Ranger on a 2-parameter quadratic matches the oracle") {
    // f = 3 x^2 + 0.5 y^2 + x y
    RAdamState<double> st(RAdamConfig{.lr = 0.05});
    std::vector<double> theta{1.0, -2.0}, grad(2);
    auto init = slots_of(theta, grad);
    auto la = lookahead_init(init, LookaheadConfig{0.5, 6});

    ScalarRAdam ox{.lr = 0.05}, oy{.lr = 0.05};
    double x = 1, y = -2, sx = 1, sy = -2;
    for (int i = 1; i <= 60; ++i) {
        grad = {6 * theta[0] + theta[1], theta[1] + theta[0]};
        auto s = slots_of(theta, grad);
        radam_step(st, s);
        lookahead_sync(s, la);

        const double gx = 6 * x + y, gy = y + x;
        x = ox.step(x, gx);
        y = oy.step(y, gy);
        if (i % 6 == 0) {
            sx += 0.5 * (x - sx);
            sy += 0.5 * (y - sy);
            x = sx;
            y = sy;
        }
        CHECK(std::abs(theta[0] - x) <= 1e-10);
        CHECK(std::abs(theta[1] - y) <= 1e-10);
    }
}

TEST_CASE("RAdam edge cases") {
    RAdamState<double> st;
    std::vector<double> theta{1.5, -2.0}, zero{0.0, 0.0};
    auto s = slots_of(theta, zero);
    radam_step(st, s);
    CHECK(theta == std::vector<double>{1.5, -2.0});

    std::vector<double> bad{0.0, NAN};
    auto sb = slots_of(theta, bad);
    const auto t_before = st.t;
    CHECK_THROWS_WITH(radam_step(st, sb), Catch::Matchers::ContainsSubstring("theta"));
    CHECK(st.t == t_before);
    CHECK(theta == std::vector<double>{1.5, -2.0});

    RAdamState<double> neg(RAdamConfig{.lr = -1});
    CHECK_THROWS(radam_step(neg, s));
}

TEST_CASE("rectified RAdam approaches Adam for large t") {
    auto run = [](bool rectify) {
        RAdamState<double> st(RAdamConfig{.lr = 1e-3, .rectify = rectify});
        st.t = 9999;
        st.m = {{0.2}};
        st.v = {{0.05}};
        std::vector<double> theta{1.0}, grad{0.3};
        auto s = slots_of(theta, grad);
        radam_step(st, s);
        return theta[0] - 1.0;
    };
    const double r = run(true), a = run(false);
    CHECK(std::abs(r - a) / std::abs(a) < 1e-3);
}

TEST_CASE("RAdam descends monotonically on a convex quadratic") {
    Rng rng(GENERATE(1u, 2u, 3u));
    std::vector<double> theta{rng.uniform(-3, 3), rng.uniform(-3, 3)}, grad(2);
    RAdamState<double> st(RAdamConfig{.lr = 1e-3});
    auto f = [&] { return 2 * theta[0] * theta[0] + 0.5 * theta[1] * theta[1]; };
    double prev = f();
    for (int i = 0; i < 100; ++i) {
        grad = {4 * theta[0], theta[1]};
        auto s = slots_of(theta, grad);
        radam_step(st, s);
        const double now = f();
        CHECK(now <= prev);
        prev = now;
    }
}

TEST_CASE("lookahead examples") {
    std::vector<double> fast{2.0}, g{0.0};
    auto s = slots_of(fast, g);

    SECTION("alpha 0.5 midpoint") {
        auto st = lookahead_init(s, {0.5, 1});
        st.slow = {{0.0}};
        CHECK(lookahead_sync(s, st));
        CHECK(fast[0] == 1.0);
        CHECK(st.slow[0][0] == 1.0);
        // A second sync with no inner step changes nothing.
        CHECK(lookahead_sync(s, st));
        CHECK(fast[0] == 1.0);
    }
    SECTION("alpha 1 follows fast") {
        auto st = lookahead_init(s, {1.0, 1});
        st.slow = {{-4.0}};
        lookahead_sync(s, st);
        CHECK(st.slow[0][0] == 2.0);
        CHECK(fast[0] == 2.0);
    }
    SECTION("alpha 0 never moves") {
        auto st = lookahead_init(s, {0.0, 1});
        st.slow = {{-4.0}};
        lookahead_sync(s, st);
        fast[0] = 9.0;
        lookahead_sync(s, st);
        CHECK(st.slow[0][0] == -4.0);
        CHECK(fast[0] == -4.0);
    }
    SECTION("only every k-th call syncs") {
        auto st = lookahead_init(s, {0.5, 6});
        for (int i = 1; i <= 12; ++i) CHECK(lookahead_sync(s, st) == (i % 6 == 0));
    }
    CHECK_THROWS(lookahead_init(s, {0.5, 0}));
}

TEST_CASE("freezing") {
    nn::Model<double> model(nn::ModelSpec::mini_conv_net(3, {2, 3, 4, 4}), 5);
    CHECK_THROWS(set_freeze(model, "conv9"));
    const auto all = set_freeze(model, model.spec().layers.front().name);
    for (bool b : all.trainable) CHECK(b);

    const auto head = set_freeze(model, "head");
    const auto before = model.parameters();
    Ranger<double> opt(model, RAdamConfig{.lr = 0.05}, LookaheadConfig{}, head);
    Rng rng(8);
    nn::Tensor<double> x({4, 3, 16, 16});
    for (auto& v : x.data) v = rng.uniform(0, 1);
    for (int i = 0; i < 20; ++i) opt.step(model, model.backward(x, {0, 1, 2, 0}));
    for (std::size_t i = 0; i < before.size(); ++i) {
        INFO(before[i].name);
        if (head.trainable[i]) CHECK_FALSE(model.parameters()[i].value == before[i].value);
        else CHECK(model.parameters()[i].value == before[i].value);
    }

    // Gradients still reach the input through the frozen layers.
    const auto g = model.backward(x, {0, 1, 2, 0});
    const double h = 1e-5;
    for (std::size_t i : {0u, 77u, 300u, 2000u}) {
        auto xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        const double fd = (model.backward(xp, {0, 1, 2, 0}).loss - model.backward(xm, {0, 1, 2, 0}).loss) / (2 * h);
        CHECK(g.input[i] == Catch::Approx(fd).epsilon(1e-4).margin(1e-10));
    }
}

TEST_CASE("learning-rate range test") {
    SECTION("quadratic surrogate stays below the stability bound") {
        for (double L : {0.5, 4.0, 100.0}) {
            QuadraticProbe p(L);
            const auto r = lr_range_test(p, {1e-7, 10, 100, 4});
            REQUIRE(r.divergence_lr);
            CHECK(r.suggested_lr < 2.0 / L);
            CHECK(std::is_sorted(r.lrs.begin(), r.lrs.end()));
            CHECK(r.lrs.size() == r.losses.size());
        }
    }
    SECTION("zero gradient never diverges") {
        ConstantProbe p;
        const auto r = lr_range_test(p, {1e-7, 10, 100, 4});
        CHECK_FALSE(r.divergence_lr);
        CHECK(r.lrs.size() == 100);
        CHECK(r.suggested_lr == Catch::Approx(std::sqrt(1e-7 * 10)));
        CHECK(r.lrs.front() == Catch::Approx(1e-7));
        CHECK(r.lrs.back() == Catch::Approx(10));
    }
    SECTION("immediate divergence") {
        ExplodingProbe p;
        CHECK_THROWS_WITH(lr_range_test(p), Catch::Matchers::ContainsSubstring("smaller"));
    }
    SECTION("bad span") {
        ConstantProbe p;
        CHECK_THROWS(lr_range_test(p, {1, 0.5, 10, 4}));
    }
}
