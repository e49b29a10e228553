#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "common.hpp"
#include "sburgers/geometry.hpp"

using namespace sburgers;

namespace {

Curve line(std::int64_t start, double dt, int n, double x0, double v) {
    Curve c{start, dt, {}, {}};
    for (int i = 0; i <= n; ++i) c.positions.push_back(x0 + v * dt * i);
    return c;
}

} // namespace

TEST(Action, ZeroForcingKineticClosedForm) {
    const auto r = testing_util::make(testing_util::zero_spec(), 1, 0.01, 200);
    for (double v : {0.0, 0.3, -1.7}) {
        const auto c = line(0, 0.01, 100, 0.2, v);
        EXPECT_NEAR(action(c, *r, 0.0).value, 0.5 * v * v * 1.0, 1e-12);
        EXPECT_NEAR(action(c, *r, 0.4).value, 0.5 * (v - 0.4) * (v - 0.4), 1e-12);
    }
}

TEST(Action, SlopeCLineHasZeroKineticPart) {
    const auto r = testing_util::make(testing_util::zero_spec(), 1, 0.01, 200);
    EXPECT_NEAR(action(line(0, 0.01, 150, 0.7, 0.25), *r, 0.25).value, 0.0, 1e-14);
}

TEST(Action, TwoStepHandExpansion) {
    const auto spec = preset_spec("sine_basic");
    const double dt = 0.1;
    const auto p = BrownianPath::from_increments(dt, 0, {{0.3, -0.2}});
    const Realization r(spec, p);
    const Curve c{0, dt, {0.1, 0.15, 0.3}, {}};
    auto F = [](double x) { return -std::cos(2 * std::numbers::pi * x) / (2 * std::numbers::pi); };
    const double v0 = 0.05 / dt, v1 = 0.15 / dt;
    const double hand = 0.5 * v0 * v0 * dt + F(0.1) * 0.3 + 0.5 * v1 * v1 * dt + F(0.15) * -0.2;
    EXPECT_NEAR(action(c, r, 0.0).value, hand, 1e-14);
}

TEST(Action, AdditiveOverRandomCurves) {
    const auto r = testing_util::make("ekms3", 3, 1e-3, 400, -200);
    std::mt19937_64 gen(42);
    std::normal_distribution<double> step(0.0, 0.003);
    std::uniform_int_distribution<int> split(-199, 199);
    for (int trial = 0; trial < 100; ++trial) {
        Curve c{-200, 1e-3, {0.5}, {}};
        for (int i = 0; i < 400; ++i) c.positions.push_back(c.positions.back() + step(gen));
        EXPECT_TRUE(additivity_check(c, *r, 0.1 * (trial % 5), split(gen)));
    }
}

TEST(Action, RejectsBadWindows) {
    const auto r = testing_util::make("ekms3", 3, 1e-3, 100);
    const auto c = line(0, 1e-3, 50, 0.0, 0.0);
    EXPECT_THROW(action(c, *r, 0.0, 10, 10), IndexError);
    EXPECT_THROW(action(c, *r, 0.0, 0, 51), IndexError);
    EXPECT_THROW(action(line(0, 2e-3, 50, 0.0, 0.0), *r, 0.0), IndexError);
    EXPECT_THROW(additivity_check(c, *r, 0.0, 0), ConfigError);
    EXPECT_THROW((Curve{0, 1e-3, {0.1}, {}}).validate(), ConfigError);
}

TEST(Reconnect, IdenticalCurvesCostNothing) {
    const auto r = testing_util::make("ekms3", 5, 1e-3, 1000);
    const auto c = line(0, 1e-3, 1000, 0.3, 0.2);
    const auto rc = reconnect(c, c, *r, 0.0, 100, 600);
    EXPECT_LT(rc.delta_action, 1e-12);
    EXPECT_EQ(rc.c1_distance, 0.0);
    ASSERT_EQ(rc.curve.size(), c.size());
    for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(rc.curve.positions[i], c.positions[i], 1e-15);
}

TEST(Reconnect, FollowsBothCurvesAndRespectsBound) {
    const auto r = testing_util::make("ekms3", 5, 1e-3, 1000);
    for (double gap : {1e-4, 1e-3, 1e-2}) {
        const auto c1 = line(0, 1e-3, 1000, 0.3, 0.2);
        const auto c2 = line(0, 1e-3, 1000, 0.3 + gap, 0.2 + gap);
        const auto rc = reconnect(c1, c2, *r, 0.0, 200, 700);
        EXPECT_EQ(rc.curve.at(150), c1.at(150));
        EXPECT_EQ(rc.curve.at(800), c2.at(800));
        EXPECT_LE(rc.delta_action, rc.bound);
    }
    const auto c = line(0, 1e-3, 100, 0, 0);
    EXPECT_THROW(reconnect(c, c, *r, 0.0, 10, 11), ConfigError);
    EXPECT_THROW(reconnect(c, c, *r, 0.0, 10, 200), IndexError);
}

TEST(Circle, DistanceAndWrap) {
    EXPECT_NEAR(circle_distance(0.05, 0.95), 0.1, 1e-15);
    EXPECT_NEAR(circle_distance(3.2, -0.2), 0.4, 1e-14);
    EXPECT_EQ(circle_distance(0.5, 0.5), 0.0);
    EXPECT_NEAR(wrap01(-0.25), 0.75, 1e-15);
    EXPECT_NEAR(wrap01(7.125), 0.125, 1e-15);
    EXPECT_GE(wrap01(-1e-18), 0.0);
    EXPECT_LT(wrap01(-1e-18), 1.0);
}

TEST(Curve, CsvColumns) {
    std::ostringstream os;
    write_csv(os, line(3, 0.5, 2, 1.0, 2.0));
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "step,time,position_lifted,velocity");
    EXPECT_NE(os.str().find("4,2,2,2"), std::string::npos);
}
