#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "common.hpp"
#include "sburgers/inviscid.hpp"

using namespace sburgers;

namespace {

constexpr double kPi = std::numbers::pi;

/// Hopf-Lax value for u0 = sin(2 pi x) without forcing, while characteristics
/// have not crossed: U(x, t) = U0(xi) + (x - xi)^2 / (2t), xi + t u0(xi) = x.
double hopf_lax_sine(double x, double t) {
    double xi = x;
    for (int it = 0; it < 100; ++it) {
        const double g = xi + t * std::sin(2 * kPi * xi) - x;
        xi -= g / (1.0 + 2 * kPi * t * std::cos(2 * kPi * xi));
    }
    return -std::cos(2 * kPi * xi) / (2 * kPi) + (x - xi) * (x - xi) / (2 * t);
}

Snapshot sine_data(int N, double amp = 1.0, double c = 0.0) {
    return snapshot_from_antiderivative(N, 0, [&](double x) { return c * x - amp * std::cos(2 * kPi * x) / (2 * kPi); });
}

int count_jumps(const Snapshot& s, double eta) {
    int k = 0;
    for (int i = 0; i < s.n_cells; ++i)
        if (s.u[static_cast<std::size_t>(i)] - s.u[static_cast<std::size_t>((i + 1) % s.n_cells)] > eta) ++k;
    return k;
}

} // namespace

TEST(Snapshot, ValueFunctionFromCells) {
    const auto s = snapshot_from_u({1.0, 0.0, 0.0, -1.0}, 0);
    EXPECT_EQ(s.mean_c, 0.0);
    EXPECT_EQ(s.U, (std::vector<double>{0.0, 0.25, 0.25, 0.25}));
    EXPECT_THROW(snapshot_from_u({1.0, 2.0}, 0), ConfigError);
    std::ostringstream os;
    write_csv(os, s, 0.1);
    EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "step,time,cell,x,u,U");
}

TEST(Snapshot, CoarsenedDistance) {
    const auto fine = snapshot_from_u({1, 3, 0, 0, 2, 2, 0, 0}, 0);
    const auto coarse = snapshot_from_u({2, 0, 2, 0}, 0);
    EXPECT_NEAR(l1_distance_coarsened(fine, coarse), 0.0, 1e-15);
    EXPECT_NEAR(l1_distance_coarsened(coarse, constant_snapshot(4, 0, 1.0)), 1.0, 1e-15);
}

TEST(LaxOleinik, RestStateIsStationary) {
    const auto r = testing_util::make(testing_util::zero_spec(), 1, 1e-3, 500);
    for (double c : {0.0, 0.25, -0.6}) {
        for (DpMode mode : {DpMode::semi_lagrangian, DpMode::semi_lagrangian_linear, DpMode::lattice}) {
            auto run = solve(r, constant_snapshot(64, 0, c), 500, c, {mode, false, 1});
            for (double u : run.current().u) EXPECT_NEAR(u, c, 1e-10);
        }
    }
}

TEST(LaxOleinik, StationaryShockAndRarefaction) {
    const int N = 512;
    const auto r = testing_util::make(testing_util::zero_spec(), 1, 1e-3, 100);
    std::vector<double> u(N);
    for (int i = 0; i < N; ++i) u[static_cast<std::size_t>(i)] = i < N / 2 ? 1.0 : -1.0;
    auto run = solve(r, snapshot_from_u(u, 0), 100, 0.0);
    const auto s = run.current();
    const double t = 0.1;
    for (int i = 0; i < N; ++i) {
        const double x = s.center(i);
        double expect;
        if (x < t) expect = x / t;
        else if (x < 0.5) expect = 1.0;
        else if (x < 1.0 - t) expect = -1.0;
        else expect = (x - 1.0) / t;
        if (std::abs(x - t) > 2.0 / N && std::abs(x - 1.0 + t) > 2.0 / N) {
            EXPECT_NEAR(s.u[static_cast<std::size_t>(i)], expect, 0.02) << i;
        }
    }
    EXPECT_EQ(count_jumps(s, 0.5), 1);
    EXPECT_GT(s.u[N / 2 - 1] - s.u[N / 2], 1.9);
}

TEST(LaxOleinik, SingleStepIsPotentialKick) {
    const double dt = 1e-4;
    const auto p = BrownianPath::from_increments(dt, 0, {{0.01}});
    const auto r = std::make_shared<const Realization>(preset_spec("sine_basic"), p);
    const int N = 256;
    auto run = solve(r, constant_snapshot(N, 0, 0.0), 1, 0.0);
    const auto s = run.current();
    for (int i = 0; i < N; ++i) {
        const double xa = s.node(i), xb = s.node(i + 1);
        const double kick = 0.01 * (std::cos(2 * kPi * xa) - std::cos(2 * kPi * xb)) / (2 * kPi) * N;
        EXPECT_NEAR(s.u[static_cast<std::size_t>(i)], kick, 1e-6);
    }
}

TEST(LaxOleinik, MatchesCharacteristicsBeforeCrossing) {
    const int N = 512;
    const double dt = 1e-3;
    const auto r = testing_util::make(testing_util::zero_spec(), 1, dt, 100);
    auto run = solve(r, sine_data(N), 100, 0.0);
    const auto s = run.current();
    const auto exact = snapshot_from_antiderivative(N, 100, [](double x) { return hopf_lax_sine(x, 0.1); });
    EXPECT_LT(l1_distance(s, exact), 2e-4);
}

TEST(LaxOleinik, FirstShockForms) {
    // u0 = sin(2 pi x) breaks at t = 1/(2 pi), x = 1/2
    const int N = 512;
    const double dt = 1e-3;
    const auto r = testing_util::make(testing_util::zero_spec(), 1, dt, 300);
    auto run = solve(r, sine_data(N), 0, 0.0);
    run.advance_to(130);
    EXPECT_EQ(count_jumps(run.current(), 0.2), 0);
    run.advance_to(220);
    const auto s = run.current();
    ASSERT_EQ(count_jumps(s, 0.2), 1);
    int at = 0;
    for (int i = 0; i < N; ++i)
        if (s.u[static_cast<std::size_t>(i)] - s.u[static_cast<std::size_t>((i + 1) % N)] > 0.2) at = i;
    EXPECT_NEAR(s.node(at + 1), 0.5, 2.0 / N);
}

TEST(LaxOleinik, ConservesMeanAndEntropy) {
    const auto r = testing_util::make("ekms3", 3, 1e-3, 2000);
    for (double c : {0.0, 0.3}) {
        auto run = solve(r, sine_data(256, 0.5, c), 0, c, {DpMode::semi_lagrangian, false, 1});
        for (int k = 0; k < 10; ++k) {
            run.advance_to(200 * (k + 1));
            const auto s = run.current();
            EXPECT_NEAR(s.mean(), c, 1e-12);
            EXPECT_TRUE(satisfies_entropy(s));
        }
    }
}

TEST(LaxOleinik, L1Contraction) {
    const auto r = testing_util::make("ekms3", 4, 1e-3, 3000);
    DpOptions o{DpMode::semi_lagrangian, false, 1};
    auto a = solve(r, sine_data(256, 1.0), 0, 0.0, o);
    auto b = solve(r, constant_snapshot(256, 0, 0.0), 0, 0.0, o);
    double prev = l1_distance(a.current(), b.current());
    for (int k = 1; k <= 30; ++k) {
        a.advance_to(100 * k);
        b.advance_to(100 * k);
        const double d = l1_distance(a.current(), b.current());
        EXPECT_LE(d, prev + 2e-3);
        prev = std::min(prev, d);
    }
}

TEST(LaxOleinik, LatticeModeIsOrderPreserving) {
    const auto r = testing_util::make("ekms3", 5, 1e-3, 400);
    DpOptions o{DpMode::lattice, true, 1};
    const int N = 128;
    auto lo = solve(r, sine_data(N, 0.5), 400, 0.0, o);
    // adding 0.1 * 2 pi sin(2 pi x) to u raises U by 0.1 (1 - cos(2 pi x)) >= 0
    auto hi = solve(r, sine_data(N, 0.5 + 0.1 * 2 * kPi), 400, 0.0, o);
    for (int n : {1, 50, 400})
        for (int i = 0; i < N; ++i) EXPECT_LE(lo.value(n, i * 1.0 / N), hi.value(n, i * 1.0 / N) + 1e-12);
}

TEST(LaxOleinik, LatticeChainsAreExactMinimizers) {
    const auto r = testing_util::make("ekms3", 6, 1e-3, 500);
    auto run = solve(r, sine_data(128, 0.3), 500, 0.0, {DpMode::lattice, true, 1});
    for (double x : {0.0, 0.25, 0.5, 0.75})
        for (Side side : {Side::leftmost, Side::rightmost})
            EXPECT_LT(std::abs(run.action_defect(run.backward_characteristic(x, 500, side))), 1e-9);
}

TEST(LaxOleinik, SemiLagrangianChainsNearlyConsistent) {
    const auto r = testing_util::make("ekms3", 6, 1e-3, 500);
    auto run = solve(r, sine_data(256, 0.3), 500, 0.0);
    for (double x : {0.1, 0.6})
        EXPECT_LT(std::abs(run.action_defect(run.backward_characteristic(x, 500, Side::rightmost))), 1e-3);
    EXPECT_THROW(run.backward_characteristic(0.1, 501, Side::rightmost), StateError);
    auto nohist = solve(r, sine_data(64), 10, 0.0, {DpMode::semi_lagrangian, false, 1});
    EXPECT_THROW(nohist.backward_characteristic(0.1, 10, Side::rightmost), StateError);
}

TEST(LaxOleinik, NarrowWindowIsSolverError) {
    const auto r = testing_util::make("ekms3", 1, 0.01, 10);
    const auto s = sine_data(64, 50.0);
    EXPECT_THROW(lax_oleinik_step(s.U, *r, 0, 0.0, 1), SolverError);
    EXPECT_THROW(lax_oleinik_step(s.U, *r, 0, 0.0, 257), ConfigError);
    EXPECT_THROW(solve(r, sine_data(64, 1.0, 0.2), 5, 0.0), ConfigError);
}

TEST(Entropy, FlagsRisingJumpOnly) {
    std::vector<double> u(256, 0.0);
    for (int i = 64; i < 192; ++i) u[static_cast<std::size_t>(i)] = 1.0;
    const auto s = snapshot_from_u(u, 0);
    EXPECT_FALSE(satisfies_entropy(s));
    std::vector<double> d(256);
    for (int i = 0; i < 256; ++i) d[static_cast<std::size_t>(i)] = -1.0 + i / 128.0; // smooth rise, one drop at the wrap
    EXPECT_TRUE(satisfies_entropy(snapshot_from_u(d, 0)));
    // a rising jump smeared over two cells is still a jump
    std::vector<double> m(256, 0.0);
    for (int i = 64; i < 192; ++i) m[static_cast<std::size_t>(i)] = 1.0;
    m[64] = 0.5;
    EXPECT_FALSE(satisfies_entropy(snapshot_from_u(m, 0)));
    // a steep resolved ramp ending in a shock is not
    std::vector<double> ramp(256, 0.0);
    for (int i = 101; i <= 110; ++i) ramp[static_cast<std::size_t>(i)] = ramp[static_cast<std::size_t>(i - 1)] + 0.08 + 0.002 * (i - 100);
    EXPECT_GT(ramp[110] - ramp[109], entropy_threshold(snapshot_from_u(ramp, 0)));
    EXPECT_TRUE(satisfies_entropy(snapshot_from_u(ramp, 0)));
}

TEST(Godunov, RiemannFluxes) {
    EXPECT_EQ(godunov_flux(1.0, -1.0), 0.5);
    EXPECT_EQ(godunov_flux(-1.0, 1.0), 0.0);
    EXPECT_EQ(godunov_flux(2.0, 1.0), 2.0);
    EXPECT_EQ(godunov_flux(-1.0, -2.0), 2.0);
    EXPECT_EQ(godunov_flux(0.5, 1.5), 0.125);
    EXPECT_EQ(godunov_flux(-1.5, -0.5), 0.125);
}

TEST(Godunov, ConservesMeanAndAgreesWithDp) {
    const auto r = testing_util::make("ekms3", 7, 5e-4, 2000);
    const auto u0 = sine_data(512, 0.5, 0.1);
    const auto snaps = godunov_solve(r, u0, 2000, 500);
    ASSERT_EQ(snaps.size(), 5u);
    for (const auto& s : snaps) EXPECT_NEAR(s.mean(), 0.1, 1e-12);
    auto run = solve(r, u0, 2000, 0.1, {DpMode::semi_lagrangian, false, 1});
    EXPECT_LT(l1_distance(run.current(), snaps.back()), 0.02);
}
