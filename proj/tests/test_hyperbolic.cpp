#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "common.hpp"
#include "sburgers/hyperbolic.hpp"

using namespace sburgers;

TEST(Lyapunov, ShearOnlyWithoutForce) {
    const auto r = testing_util::make(testing_util::zero_spec(), 1, 1e-2, 12800, -6400);
    double prev = 1e9;
    for (std::int64_t T : {400, 1600, 6400}) {
        const auto rep = lyapunov(r, 64, T);
        const double t = 2.0 * static_cast<double>(T) * 1e-2;
        EXPECT_GE(rep.lambda_forward, 0.0);
        EXPECT_LE(rep.lambda_forward, std::log1p(t) / t);
        EXPECT_LT(rep.lambda_forward, prev);
        EXPECT_NEAR(rep.lambda_forward + rep.lambda_backward, 0.0, 0.05);
        prev = rep.lambda_forward;
    }
}

TEST(Lyapunov, PositiveForEkms3) {
    const auto r = testing_util::make("ekms3", 1, 1e-3, 16000, -8000);
    const auto rep = lyapunov(r, 256, 8000);
    EXPECT_GT(rep.lambda_forward, 0.0);
    EXPECT_GT(rep.forward_ci.lower, 0.0);
    EXPECT_NEAR(rep.lambda_forward + rep.lambda_backward, 0.0, 0.05);
    EXPECT_EQ(rep.window_steps, 16000);
}

TEST(Lyapunov, RejectsEmptyWindow) {
    const auto r = testing_util::make("ekms3", 1, 1e-3, 100);
    Curve c{0, 1e-3, std::vector<double>(101, 0.2), {}};
    EXPECT_THROW(lyapunov_along(c, *r, 50, 50), ConfigError);
}

TEST(UnstableDirection, AlignsWithPositionAxisWithoutForce) {
    const auto r = testing_util::make(testing_util::zero_spec(), 1, 1e-2, 3200, -3200);
    Curve orbit{-3200, 1e-2, std::vector<double>(3201, 0.3), {}};
    const auto d = unstable_direction(orbit, *r, -3200);
    EXPECT_LT(direction_angle(d, {1.0, 0.0}), 0.05);
    EXPECT_GT(d[0], 0.0);
}

TEST(UnstableDirection, Ekms3NotVerticalAndConverged) {
    const auto r = testing_util::make("ekms3", 2, 1e-3, 16000, -8000);
    const auto tsm = two_sided_minimizer(r, 256, 8000, 0.0);
    const auto a = unstable_direction(tsm.result.curve, *r, -4000);
    const auto b = unstable_direction(tsm.result.curve, *r, -8000);
    EXPECT_LT(std::abs(a[1]), 0.999);
    EXPECT_LT(direction_angle(a, b), 1e-3);
}

TEST(TangentAudit, DeterminantAndFiniteDifferences) {
    const auto r = testing_util::make("ekms3", 3, 1e-3, 10000);
    const auto a = tangent_audit({0.2, 0.5}, *r, 0, 10000);
    EXPECT_LT(a.sum_det_error, 1e-10);
    EXPECT_LT(a.max_fd_error, 1e-4);
    const auto b = tangent_audit({0.2, 0.5}, *r, 0, 10000, 1e-7);
    EXPECT_LE(b.max_fd_error, a.max_fd_error * 1.5);
}

TEST(Tangency, ZeroForcingIsDegenerate) {
    const auto rep = graph_tangency_check(constant_snapshot(64, 0, 0.0), 0.3, {1.0, 0.0}, 0.1, 3, true);
    EXPECT_TRUE(rep.degenerate);
    EXPECT_FALSE(rep.conclusive);
    EXPECT_TRUE(rep.passes());
}

TEST(Tangency, LinearProfileMatchesDirection) {
    std::vector<double> u(128);
    for (int i = 0; i < 128; ++i) u[static_cast<std::size_t>(i)] = 0.5 * ((i + 0.5) / 128 - 0.5);
    const auto s = snapshot_from_u(u, 0);
    const auto rep = graph_tangency_check(s, 0.4, {2.0, 1.0}, 0.2);
    ASSERT_TRUE(rep.conclusive);
    EXPECT_NEAR(rep.graph_slope, 0.5, 1e-9);
    EXPECT_NEAR(rep.mismatch, 0.0, 1e-9);
    const auto near = graph_tangency_check(s, 0.99, {2.0, 1.0}, 0.2); // the drop at x = 0
    EXPECT_FALSE(near.conclusive);
}

TEST(Tangency, Ekms3ProfilesFollowUnstableDirection) {
    int conclusive = 0;
    for (std::uint64_t seed : {1, 3, 4}) {
        const auto r = testing_util::make("ekms3", seed, 1e-3, 16000, -8000);
        const auto tsm = two_sided_minimizer(r, 256, 8000, 0.0);
        const auto s = one_sided_profile(r, 256, 8000).snapshot;
        const auto d = unstable_direction(tsm.result.curve, *r, -8000);
        const auto rep = graph_tangency_check(s, tsm.y0, d, default_threshold(s));
        conclusive += rep.conclusive ? 1 : 0;
        EXPECT_TRUE(rep.passes()) << seed << " mismatch " << rep.mismatch;
    }
    EXPECT_GE(conclusive, 2);
}

namespace {

struct StructureFixture {
    std::shared_ptr<const Realization> r;
    TwoSidedMinimizer tsm;
    LaxOleinikRun run;
    StructureFixture(const std::string& preset, std::uint64_t seed, std::int64_t T)
        : r(testing_util::make(preset, seed, 1e-3, 2 * T, -T)), tsm(two_sided_minimizer(r, 256, T, 0.0)),
          run(pullback(r, 256, T, 0, 0.0)) {}
};

} // namespace

TEST(ActionParam, SelfSampleAndHorizonStability) {
    StructureFixture f("ekms3", 1, 8000);
    const double eta = default_threshold(f.run.current());
    const auto a = action_parametrization(f.run, f.tsm.result.curve, -2000, eta);
    const auto b = action_parametrization(f.run, f.tsm.result.curve, -4000, eta);
    std::map<std::pair<int, int>, double> ref;
    for (const auto& m : a.samples) {
        if (m.node < 0) EXPECT_EQ(m.A_rel, 0.0);
        else ref[{m.node, static_cast<int>(m.side)}] = m.A_rel;
    }
    double worst = 0.0;
    for (const auto& m : b.samples)
        if (m.node >= 0) worst = std::max(worst, std::abs(m.A_rel - ref.at({m.node, static_cast<int>(m.side)})));
    EXPECT_LT(worst, 1e-3);
    // continuity nodes: both extreme characteristics agree
    const auto s = f.run.current();
    const auto shocks = detect_shocks(s, eta);
    int checked = 0;
    for (int i = 0; i < 256; i += 16) {
        bool near = false;
        for (const auto& sh : shocks) near = near || circle_distance(sh.position, i / 256.0) < 4.0 / 256;
        if (near) continue;
        double l = 0, rr = 0;
        for (const auto& m : a.samples)
            if (m.node == i) (m.side == Side::leftmost ? l : rr) = m.A_rel;
        EXPECT_NEAR(l, rr, 1e-9);
        EXPECT_NEAR(a.A_bar[static_cast<std::size_t>(i)], l, 1e-9);
        ++checked;
    }
    EXPECT_GT(checked, 8);
    std::ostringstream os;
    write_csv(os, a);
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "s_index,x_lifted,u,A_rel,is_shock_cut");
}

TEST(Structure, Ekms3PassesAllClauses) {
    StructureFixture f("ekms3", 1, 8000);
    auto rep = shock_structure_check(f.run, f.tsm.result.curve, -4000, default_threshold(f.run.current()));
    refine_count(rep, f.r, 256, 8000, 0.0);
    EXPECT_TRUE(rep.equal_action) << rep.max_action_gap;
    EXPECT_TRUE(rep.windings_zero);
    EXPECT_TRUE(rep.main_winding_one);
    EXPECT_TRUE(rep.count_stable);
    EXPECT_FALSE(rep.vacuous);
}

TEST(Structure, SymmetricForcingHasNoUniqueMain) {
    StructureFixture f("single_cosine", 1, 8000);
    const auto rep = shock_structure_check(f.run, f.tsm.result.curve, -4000, default_threshold(f.run.current()));
    EXPECT_FALSE(rep.main_winding_one);
    EXPECT_FALSE(rep.passes());
}

TEST(Structure, SmoothRunIsVacuous) {
    const auto r = testing_util::make(testing_util::zero_spec(), 1, 1e-3, 200, -100);
    auto run = solve(r, constant_snapshot(64, -100, 0.1), 0, 0.1);
    Curve tsm{-100, 1e-3, std::vector<double>(201, 0.0), {}};
    const auto rep = shock_structure_check(run, tsm, -50, 0.1);
    EXPECT_TRUE(rep.vacuous);
    EXPECT_TRUE(rep.passes());
}
