#pragma once

// Lyapunov exponents along the two-sided minimizer, the unstable direction and
// its tangency to the graph of the invariant profile, relative actions and the
// structural checks on shocks.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "sburgers/charflow.hpp"
#include "sburgers/errors.hpp"
#include "sburgers/geometry.hpp"
#include "sburgers/inviscid.hpp"
#include "sburgers/minimizers.hpp"
#include "sburgers/shocks.hpp"
#include "sburgers/stats.hpp"

namespace sburgers {

struct LyapunovReport {
    double lambda_forward = 0.0;
    /// Minus the backward growth rate, so that the two sum to ~0.
    double lambda_backward = 0.0;
    std::int64_t window_steps = 0;
    std::array<double, 2> direction_at_0{1.0, 0.0};
    stats::Interval forward_ci; // block bootstrap, per unit time
};

/// Exponents of the tangent cocycle along `orbit` over grid times [n0, n1].
inline LyapunovReport lyapunov_along(const Curve& orbit, const Realization& r, std::int64_t n0, std::int64_t n1,
                                     double block_time = 1.0, std::uint64_t bootstrap_seed = 0) {
    if (n1 <= n0) throw ConfigError("lyapunov: empty window");
    const double T = static_cast<double>(n1 - n0) * r.dt();
    const std::array<double, 2> v0{1.0, 1.0};
    LyapunovReport rep;
    rep.window_steps = n1 - n0;
    const auto fwd = cocycle_along(orbit, r, n0, n1, v0, true);
    const auto bwd = cocycle_along(orbit, r, n1, n0, v0);
    rep.lambda_forward = fwd.log_growth / T;
    rep.lambda_backward = -bwd.log_growth / T;
    if (orbit.covers(0) && n0 <= 0 && 0 <= n1) {
        auto to0 = cocycle_along(orbit, r, n0, 0, v0).direction;
        if (to0[0] < 0) to0 = {-to0[0], -to0[1]};
        rep.direction_at_0 = to0;
    }
    const auto block = static_cast<std::size_t>(std::llround(block_time / r.dt()));
    if (fwd.increments.size() >= 2 * block) {
        std::vector<double> rate(fwd.increments.size());
        for (std::size_t i = 0; i < rate.size(); ++i) rate[i] = fwd.increments[i] / r.dt();
        rep.forward_ci = stats::block_bootstrap_mean(rate, block, 2000, bootstrap_seed);
    } else {
        rep.forward_ci = {rep.lambda_forward, rep.lambda_forward, rep.lambda_forward};
    }
    return rep;
}

/// Exponents along the two-sided minimizer on [-T, T].
inline LyapunovReport lyapunov(std::shared_ptr<const Realization> r, int n_cells, std::int64_t T, double c = 0.0) {
    const auto tsm = two_sided_minimizer(r, n_cells, T, c);
    return lyapunov_along(tsm.result.curve, *r, -T, T, 1.0, r->path().seed());
}

/// Pushes a generic tangent vector along the orbit from `from` to `to`;
/// normalized so the position component is non-negative.
inline std::array<double, 2> unstable_direction(const Curve& orbit, const Realization& r, std::int64_t from,
                                                std::int64_t to = 0) {
    auto d = cocycle_along(orbit, r, from, to, {1.0, 1.0}).direction;
    if (d[0] < 0.0 || (d[0] == 0.0 && d[1] < 0.0)) d = {-d[0], -d[1]};
    return d;
}

inline double direction_angle(const std::array<double, 2>& a, const std::array<double, 2>& b) {
    const double c = std::abs(a[0] * b[0] + a[1] * b[1]) / (std::hypot(a[0], a[1]) * std::hypot(b[0], b[1]));
    return std::acos(std::min(1.0, c));
}

/// Per-step determinant drift and finite-difference consistency of the tangent map.
struct TangentAudit {
    double max_det_error = 0.0;
    double sum_det_error = 0.0;
    double max_fd_error = 0.0; // max entry error of (step(p + h e) - step(p)) / h
};

inline TangentAudit tangent_audit(PhasePoint p, const Realization& r, std::int64_t n0, std::int64_t n1,
                                  double h = 1e-6) {
    TangentAudit a;
    for (std::int64_t n = n0; n < n1; ++n) {
        const auto J = step_tangent(p.x, r, n, Direction::forward);
        const double e = std::abs(J.det() - 1.0);
        a.max_det_error = std::max(a.max_det_error, e);
        a.sum_det_error += e;
        const PhasePoint q = step(p, r, n, Direction::forward);
        const PhasePoint qx = step({p.x + h, p.v}, r, n, Direction::forward);
        const PhasePoint qv = step({p.x, p.v + h}, r, n, Direction::forward);
        a.max_fd_error = std::max({a.max_fd_error, std::abs((qx.x - q.x) / h - J.j11), std::abs((qv.x - q.x) / h - J.j12),
                                   std::abs((qx.v - q.v) / h - J.j21), std::abs((qv.v - q.v) / h - J.j22)});
        p = q;
    }
    return a;
}

// ---------------------------------------------------------------------------
// Graph tangency
// ---------------------------------------------------------------------------

struct TangencyReport {
    bool conclusive = false;
    bool degenerate = false;
    double graph_slope = 0.0;     // least-squares du/dx over the window
    double direction_slope = 0.0; // dv/dx of the unstable direction
    double mismatch = 0.0;
    int window_cells = 0;
    int nearest_shock_cells = -1;
    std::string note;
    bool passes(double tol = 0.1) const { return !conclusive || mismatch <= tol; }
};

/// Compares the slope of the profile around y0 with the unstable direction.
/// Inconclusive when a detected shock lies within alpha + 1 cells of y0.
inline TangencyReport graph_tangency_check(const Snapshot& profile, double y0, const std::array<double, 2>& direction,
                                           double eta, int alpha = 3, bool degenerate = false) {
    TangencyReport rep;
    rep.window_cells = alpha;
    rep.degenerate = degenerate;
    if (degenerate) {
        rep.note = "zero forcing: no unstable direction to compare";
        return rep;
    }
    const int N = profile.n_cells;
    const double y = wrap01(y0);
    const int j = std::min(N - 1, static_cast<int>(std::floor(y * N)));
    int nearest = N;
    for (const auto& s : detect_shocks(profile, eta)) {
        const double d = circle_distance(s.position, y) * N;
        nearest = std::min(nearest, static_cast<int>(std::floor(d)));
    }
    rep.nearest_shock_cells = nearest;
    if (nearest <= alpha + 1) {
        rep.note = "shock within " + std::to_string(nearest) + " cells of the minimizer";
        return rep;
    }
    if (std::abs(direction[0]) < 1e-12) {
        rep.note = "unstable direction is vertical";
        return rep;
    }
    std::vector<double> xs, us;
    for (int k = -alpha; k <= alpha; ++k) {
        xs.push_back((j + k + 0.5) / N);
        us.push_back(profile.u[static_cast<std::size_t>(((j + k) % N + N) % N)]);
    }
    rep.graph_slope = stats::linear_fit(xs, us).slope;
    rep.direction_slope = direction[1] / direction[0];
    rep.mismatch = std::abs(rep.graph_slope - rep.direction_slope);
    rep.conclusive = true;
    return rep;
}

// ---------------------------------------------------------------------------
// Relative action
// ---------------------------------------------------------------------------

struct ManifoldSample {
    int s_index = 0;
    double x_lifted = 0.0; // endpoint shifted by the winding relative to the minimizer
    double u = 0.0;
    double A_rel = 0.0;
    long winding = 0;
    int node = -1; // -1 for the two-sided minimizer sample
    Side side = Side::rightmost;
    bool is_shock_cut = false;
};

struct ActionParametrization {
    std::vector<ManifoldSample> samples; // ordered by x_lifted, then side
    std::vector<double> A_bar;           // per node: min over its characteristics
    std::int64_t window_start = 0;
    double max_neighbour_jump = 0.0; // of A_bar between continuity nodes
};

/// Action of `chain` minus that of `ref` over grid times [from, to]; `ref` is
/// shifted by the integer bringing it closest to the chain at `from`.
inline double relative_action(const Curve& chain, const Curve& ref, const Realization& r, double c, std::int64_t from,
                              std::int64_t to, long* winding = nullptr) {
    const long m = std::lround(chain.at(from) - ref.at(from));
    if (winding) *winding = m;
    return action(chain, r, c, from, to).value - action(ref, r, c, from, to).value;
}

/// Relative actions of both extreme characteristics through every node at the
/// run's current step against the two-sided minimizer `tsm`, over [window_start, now].
inline ActionParametrization action_parametrization(const LaxOleinikRun& run, const Curve& tsm,
                                                    std::int64_t window_start, double eta) {
    const std::int64_t now = run.current_step();
    if (!tsm.covers(window_start) || !tsm.covers(now)) throw ConfigError("action_parametrization: minimizer too short");
    if (window_start < run.start_step()) throw StateError("action_parametrization: window precedes the run");
    const Realization& r = run.realization();
    const int N = run.n_cells();
    const Snapshot s = run.current();
    std::vector<char> cut_left(static_cast<std::size_t>(N), 0), cut_right(static_cast<std::size_t>(N), 0);
    for (const auto& sh : detect_shocks(s, eta)) {
        cut_left[static_cast<std::size_t>(sh.left_node)] = 1;
        cut_right[static_cast<std::size_t>(sh.right_node)] = 1;
    }
    ActionParametrization ap;
    ap.window_start = window_start;
    ap.A_bar.assign(static_cast<std::size_t>(N), 0.0);
    for (int i = 0; i < N; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (Side side : {Side::leftmost, Side::rightmost}) {
            const Curve ch = run.backward_characteristic(static_cast<double>(i) / N, now, side, window_start);
            ManifoldSample m;
            m.node = i;
            m.side = side;
            m.A_rel = relative_action(ch, tsm, r, run.c(), window_start, now, &m.winding);
            m.x_lifted = static_cast<double>(i) / N - static_cast<double>(m.winding);
            m.u = ch.segment_velocity(now - 1);
            m.is_shock_cut = side == Side::leftmost ? cut_left[static_cast<std::size_t>(i)] != 0
                                                    : cut_right[static_cast<std::size_t>(i)] != 0;
            best = std::min(best, m.A_rel);
            ap.samples.push_back(m);
        }
        ap.A_bar[static_cast<std::size_t>(i)] = best;
    }
    ManifoldSample self;
    self.x_lifted = tsm.at(now) - std::floor(tsm.at(now));
    self.u = tsm.segment_velocity(now - 1);
    ap.samples.push_back(self);
    std::stable_sort(ap.samples.begin(), ap.samples.end(), [](const ManifoldSample& a, const ManifoldSample& b) {
        if (a.x_lifted != b.x_lifted) return a.x_lifted < b.x_lifted;
        return a.side == Side::leftmost && b.side == Side::rightmost;
    });
    for (std::size_t k = 0; k < ap.samples.size(); ++k) ap.samples[k].s_index = static_cast<int>(k);
    for (int i = 0; i < N; ++i) {
        const int k = (i + 1) % N;
        if (cut_left[static_cast<std::size_t>(k)] || cut_right[static_cast<std::size_t>(k)] ||
            cut_left[static_cast<std::size_t>(i)] || cut_right[static_cast<std::size_t>(i)])
            continue;
        ap.max_neighbour_jump = std::max(ap.max_neighbour_jump,
                                         std::abs(ap.A_bar[static_cast<std::size_t>(k)] - ap.A_bar[static_cast<std::size_t>(i)]));
    }
    return ap;
}

/// Columns: s_index, x_lifted, u, A_rel, is_shock_cut.
inline void write_csv(std::ostream& os, const ActionParametrization& ap) {
    os << "s_index,x_lifted,u,A_rel,is_shock_cut\n";
    os.precision(17);
    for (const auto& m : ap.samples)
        os << m.s_index << ',' << m.x_lifted << ',' << m.u << ',' << m.A_rel << ',' << (m.is_shock_cut ? 1 : 0) << '\n';
}

// ---------------------------------------------------------------------------
// Structure of the shock set
// ---------------------------------------------------------------------------

struct ShockCut {
    int shock_id = -1;
    double position = 0.0;
    double action_left = 0.0;  // extrapolated to the shock position
    double action_right = 0.0;
    long winding = 0;
    double raw_length = 0.0;
    bool is_main = false;
};

struct StructureReport {
    std::vector<ShockCut> cuts;
    double action_scale = 1.0;
    double max_action_gap = 0.0;
    bool equal_action = true;     // (i)
    bool windings_zero = true;    // (ii)
    bool main_winding_one = true; // (iii)
    int shock_count = 0;
    std::optional<int> refined_shock_count;
    bool count_stable = true; // (iv)
    bool vacuous = false;
    std::string note;
    bool passes() const { return equal_action && windings_zero && main_winding_one && count_stable; }
};

/// Clauses (i)-(iii) on the run's current step, with covered intervals taken back
/// to window_start and relative actions against `tsm`.
inline StructureReport shock_structure_check(const LaxOleinikRun& run, const Curve& tsm, std::int64_t window_start,
                                             double eta, double tol = 1e-3) {
    StructureReport rep;
    const Snapshot s = run.current();
    const auto shocks = detect_shocks(s, eta);
    rep.shock_count = static_cast<int>(shocks.size());
    if (shocks.empty()) {
        rep.vacuous = true;
        rep.note = "no shocks";
        return rep;
    }
    const std::int64_t now = run.current_step();
    const Realization& r = run.realization();
    const double dx = run.dx(), c = run.c();
    double amin = std::numeric_limits<double>::infinity(), amax = -amin;
    for (int i = 0; i < run.n_cells(); i += std::max(1, run.n_cells() / 64)) {
        const Curve ch = run.backward_characteristic(i * dx, now, Side::rightmost, window_start);
        const double a = relative_action(ch, tsm, r, c, window_start, now);
        amin = std::min(amin, a);
        amax = std::max(amax, a);
    }
    rep.action_scale = std::max(1.0, amax - amin);
    int mains = 0;
    for (const auto& sh : shocks) {
        const auto ci = covered_interval(run, sh, window_start);
        ShockCut cut;
        cut.shock_id = sh.id;
        cut.position = sh.position;
        cut.raw_length = ci.raw_length();
        cut.winding = ci.winding();
        cut.is_main = cut.raw_length >= 0.9;
        mains += cut.is_main ? 1 : 0;
        const double xl = ci.gamma_minus.at(now), xr = ci.gamma_plus.at(now);
        double z = sh.position;
        z += std::round(xl - z); // lift next to the left node
        cut.action_left = relative_action(ci.gamma_minus, tsm, r, c, window_start, now) + (sh.u_left - c) * (z - xl);
        cut.action_right = relative_action(ci.gamma_plus, tsm, r, c, window_start, now) + (sh.u_right - c) * (z - xr);
        rep.max_action_gap = std::max(rep.max_action_gap, std::abs(cut.action_left - cut.action_right));
        if (cut.is_main) rep.main_winding_one = rep.main_winding_one && std::abs(cut.raw_length - 1.0) <= dx;
        else rep.windings_zero = rep.windings_zero && cut.winding == 0;
        rep.cuts.push_back(cut);
    }
    if (mains != 1) {
        rep.main_winding_one = false;
        rep.note = mains == 0 ? "no main shock detected" : "several shocks with winding 1 (degenerate)";
    }
    rep.equal_action = rep.max_action_gap <= tol * rep.action_scale;
    return rep;
}

/// Adds clause (iv): shock count at the current step, recomputed on a grid refined
/// by `factor`, differs by at most one.
inline void refine_count(StructureReport& rep, std::shared_ptr<const Realization> r, int n_cells, std::int64_t T_back,
                         double c, int factor = 2) {
    DpOptions o;
    o.keep_history = false;
    const Snapshot fine = pullback(std::move(r), n_cells * factor, T_back, 0, c, o).current();
    rep.refined_shock_count = static_cast<int>(detect_shocks(fine, default_threshold(fine)).size());
    rep.count_stable = std::abs(*rep.refined_shock_count - rep.shock_count) <= 1;
}

} // namespace sburgers
