#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "common.hpp"
#include "sburgers/charflow.hpp"

using namespace sburgers;

TEST(Step, FreeStreamingWithoutForce) {
    const auto r = testing_util::make(testing_util::zero_spec(), 1, 0.01, 100);
    const auto pts = flow({0.2, 0.7}, *r, 0, 100);
    EXPECT_NEAR(pts.back().x, 0.2 + 0.7, 1e-12);
    EXPECT_EQ(pts.back().v, 0.7);
}

TEST(Step, BackwardInvertsForward) {
    const auto r = testing_util::make("ekms3", 2, 1e-3, 2000);
    const auto fwd = flow({0.31, -0.4}, *r, 0, 2000);
    const auto back = flow(fwd.back(), *r, 2000, 0);
    EXPECT_NEAR(back.back().x, 0.31, 1e-9);
    EXPECT_NEAR(back.back().v, -0.4, 1e-9);
    const auto one = step(step({0.9, 1.2}, *r, 7, Direction::forward), *r, 7, Direction::backward);
    EXPECT_NEAR(one.x, 0.9, 1e-14);
    EXPECT_NEAR(one.v, 1.2, 1e-14);
}

TEST(Step, SineKickByHand) {
    const double dt = 0.01;
    const auto p = BrownianPath::from_increments(dt, 0, {{0.05}});
    const Realization r(preset_spec("sine_basic"), p);
    const auto q = step({0.25, 0.0}, r, 0, Direction::forward);
    EXPECT_NEAR(q.v, 0.05, 1e-15);
    EXPECT_NEAR(q.x, 0.25 + 0.05 * dt, 1e-15);
    EXPECT_THROW(step({0.0, 0.0}, r, 1, Direction::forward), IndexError);
}

TEST(Step, ConvergesUnderRefinement) {
    // same Brownian path on nested grids; endpoint differences shrink
    const auto spec = preset_spec("ekms3");
    const std::int64_t n = 2048;
    const auto fine = sample_path(spec, 4, 1e-4, n, 0);
    const Realization ref(spec, fine);
    const auto xr = flow({0.1, 0.3}, ref, 0, n).back();
    double prev = 1e9;
    for (int f : {32, 8, 2}) {
        const Realization rc(spec, coarsen(fine, f));
        const auto xc = flow({0.1, 0.3}, rc, 0, n / f).back();
        const double err = std::abs(xc.x - xr.x) + std::abs(xc.v - xr.v);
        EXPECT_LT(err, prev);
        prev = err;
    }
}

TEST(Tangent, UnitDeterminant) {
    const auto r = testing_util::make("ekms3", 6, 1e-3, 500);
    JacobiMatrix J;
    double x = 0.4;
    PhasePoint p{x, 0.1};
    for (std::int64_t n = 0; n < 500; ++n) {
        J = jacobi_step(J, p.x, *r, n, Direction::forward);
        p = step(p, *r, n, Direction::forward);
    }
    EXPECT_NEAR(J.det(), 1.0, 1e-10);
    EXPECT_NEAR(step_tangent(0.3, *r, 3, Direction::backward).det(), 1.0, 1e-14);
}

TEST(Tangent, MatchesFiniteDifferences) {
    const auto r = testing_util::make("ekms3", 6, 1e-3, 300);
    const PhasePoint p0{0.4, 0.1};
    JacobiMatrix J;
    PhasePoint p = p0;
    for (std::int64_t n = 0; n < 300; ++n) {
        J = jacobi_step(J, p.x, *r, n, Direction::forward);
        p = step(p, *r, n, Direction::forward);
    }
    const double h = 1e-6;
    const auto dx = flow({p0.x + h, p0.v}, *r, 0, 300).back();
    const auto mx = flow({p0.x - h, p0.v}, *r, 0, 300).back();
    const auto dv = flow({p0.x, p0.v + h}, *r, 0, 300).back();
    const auto mv = flow({p0.x, p0.v - h}, *r, 0, 300).back();
    EXPECT_NEAR((dx.x - mx.x) / (2 * h), J.j11, 1e-5);
    EXPECT_NEAR((dx.v - mx.v) / (2 * h), J.j21, 1e-5);
    EXPECT_NEAR((dv.x - mv.x) / (2 * h), J.j12, 1e-5);
    EXPECT_NEAR((dv.v - mv.v) / (2 * h), J.j22, 1e-5);
}

TEST(Cocycle, ShearGrowthWithoutForce) {
    const double dt = 0.01;
    const auto r = testing_util::make(testing_util::zero_spec(), 1, dt, 500);
    for (int k : {1, 10, 100, 500}) {
        const auto res = cocycle({0.0, 0.3}, *r, 0, k, {0.0, 1.0});
        EXPECT_NEAR(res.log_growth, 0.5 * std::log1p(std::pow(k * dt, 2)), 1e-12);
    }
    const auto flat = cocycle({0.0, 0.3}, *r, 0, 500, {1.0, 0.0});
    EXPECT_NEAR(flat.log_growth, 0.0, 1e-14);
    EXPECT_NEAR(flat.direction[0], 1.0, 1e-14);
}

TEST(Cocycle, AdditiveAlongOrbit) {
    const auto r = testing_util::make("ekms3", 8, 1e-3, 2000);
    const auto pts = flow({0.6, -0.2}, *r, 0, 2000);
    Curve orbit{0, 1e-3, {}, {}};
    for (const auto& q : pts) orbit.positions.push_back(q.x);
    const auto whole = cocycle_along(orbit, *r, 0, 2000, {0.3, 0.8}, true);
    const auto a = cocycle_along(orbit, *r, 0, 1100, {0.3, 0.8});
    const auto b = cocycle_along(orbit, *r, 1100, 2000, a.direction);
    EXPECT_NEAR(whole.log_growth, a.log_growth + b.log_growth, 1e-10);
    EXPECT_EQ(whole.increments.size(), 2000u);
    EXPECT_THROW(cocycle_along(orbit, *r, 0, 10, {0.0, 0.0}), DomainError);
}
