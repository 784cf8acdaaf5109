#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "cf3d/adam.hpp"
#include "cf3d/trainer.hpp"

using namespace cf3d;

TEST_CASE("zero gradient leaves parameters unchanged and decays moments") {
    AdamState st;
    std::vector<double> p{1.5, -2.0};
    std::vector<double> g{0.0, 0.0};
    adam_step(p, g, st, 0.1);
    CHECK(p[0] == 1.5);
    CHECK(p[1] == -2.0);

    // Preload moments, keep feeding zero gradients: first moment decays.
    st.m = {1.0, 1.0};
    st.v = {1.0, 1.0};
    double prev = st.m[0];
    for (int i = 0; i < 5; ++i) {
        adam_step(p, g, st, 0.0);
        CHECK(st.m[0] < prev);
        prev = st.m[0];
    }
}

TEST_CASE("constant-gradient run matches the hand recurrence") {
    AdamState st;
    std::vector<double> p{0.3};
    const double g = 0.7, lr = 0.05, eps = 1e-8;
    double m = 0, v = 0, x = 0.3;
    for (int t = 1; t <= 40; ++t) {
        std::vector<double> gv{g};
        adam_step(p, gv, st, lr, eps);
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        double mh = m / (1 - std::pow(0.9, t));
        double vh = v / (1 - std::pow(0.999, t));
        x -= lr * mh / (std::sqrt(vh) + eps);
        CHECK(p[0] == doctest::Approx(x).epsilon(1e-14));
        // With a constant gradient every update stays within lr.
        CHECK(std::abs(lr * mh / (std::sqrt(vh) + eps)) <= lr * (1 + 1e-9));
    }
}

TEST_CASE("adam reaches the bottom of a quadratic bowl") {
    AdamState st;
    std::vector<double> p{3.0};
    const double target = -1.25, lr = 0.01;
    int steps = 0;
    for (; steps < 2000; ++steps) {
        std::vector<double> g{p[0] - target};
        double before = p[0];
        adam_step(p, g, st, lr);
        CHECK(std::abs(p[0] - before) <= lr * (1 + 1e-9));
        if (std::abs(p[0] - target) < 1e-6) break;
    }
    CHECK(std::abs(p[0] - target) < 1e-6);
    CHECK(steps < 2000);
}

TEST_CASE("non-finite gradients abort with diagnostics") {
    AdamState st;
    std::vector<double> p{1.0};
    std::vector<double> g{std::numeric_limits<double>::quiet_NaN()};
    CHECK_THROWS_AS(adam_step(p, g, st, 0.1), std::runtime_error);
    g[0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(adam_step(p, g, st, 0.1), std::runtime_error);
}

TEST_CASE("exponential decay hits the final rate exactly and is monotone") {
    ParamGroupConfig cfg;
    cfg.lr = 1e-5;
    cfg.schedule = LrSchedule::kExpDecay;
    cfg.final_lr = 1e-6;
    cfg.total_steps = 300;
    double prev = scheduled_lr(cfg, 0);
    CHECK(prev == doctest::Approx(1e-5).epsilon(1e-14));
    for (int s = 1; s <= 300; ++s) {
        double lr = scheduled_lr(cfg, s);
        CHECK(lr < prev);
        prev = lr;
    }
    CHECK(scheduled_lr(cfg, 300) == doctest::Approx(1e-6).epsilon(1e-14));
    CHECK(scheduled_lr(cfg, 600) == doctest::Approx(1e-6).epsilon(1e-14));

    ParamGroupConfig constant;
    constant.lr = 0.5;
    CHECK(scheduled_lr(constant, 10) == 0.5);
}

TEST_CASE("pose optimizer steps all seven raw parameters") {
    OptimLrs lrs;
    lrs.pose = 1e-2;
    lrs.pose_final = 1e-3;
    lrs.pose_decay_steps = 10;
    PoseOptimizer opt(lrs);
    SE3 pose;
    PoseGradient g;
    g.q = {0.0, 1.0, 0.0, 0.0};
    g.t = {0.0, 0.0, -1.0};
    opt.step(pose, g);
    CHECK(pose.q.x < 0.0);
    CHECK(pose.t.z > 0.0);
    CHECK(pose.q.w == 1.0);  // no gradient, no movement
    CHECK(pose.t.x == 0.0);
}

TEST_CASE("cloud optimizer preserves moments across row remapping") {
    GaussianCloud c;
    c.sh_degree = 0;
    c.resize(3);
    for (size_t i = 0; i < 3; ++i) {
        c.positions[i] = {double(i), 0, 1};
        c.scales_raw[i] = {-1, -1, -1};
        c.opacities_raw[i] = 0.5;
        c.sh_of(i)[0] = {0.1, 0.1, 0.1};
    }
    CloudGradients g;
    g.resize_like(c);
    for (size_t i = 0; i < 3; ++i) g.positions[i] = {1.0, 0, 0};

    CloudOptimizer opt;
    opt.step(c, g);
    CHECK(opt.positions.m[0] != 0.0);

    // Keep rows {2, 0}, append one fresh row.
    std::vector<int> kept{2, 0};
    opt.remap_rows(kept, 1, c.sh_count());
    CHECK(opt.positions.m.size() == 9);
    CHECK(opt.positions.m[0] == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(opt.positions.m[6] == 0.0);  // appended row starts cold
}
