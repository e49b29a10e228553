#pragma once

// One-sided and two-sided minimizers from the dynamic program, the pullback
// invariant profile, crossing and velocity-bound diagnostics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <ostream>
#include <vector>

#include "sburgers/errors.hpp"
#include "sburgers/forcing.hpp"
#include "sburgers/geometry.hpp"
#include "sburgers/inviscid.hpp"
#include "sburgers/stats.hpp"

namespace sburgers {

struct MinimizerResult {
    Curve curve;
    double terminal_velocity = 0.0;
    ActionValue action;
    std::int64_t horizon_steps = 0;
    /// DP value at the endpoint; equals action.value up to the chain defect.
    double dp_value = 0.0;
    /// Zero-forcing runs have a continuum of minimizers.
    bool degenerate = false;
};

struct InvariantProfile {
    Snapshot snapshot;
    std::int64_t horizon_steps = 0;
    /// L1 distance to the profile obtained with half the horizon.
    double residual = 0.0;
};

/// DP from u = c at step at_step - T_back to at_step.
inline LaxOleinikRun pullback(std::shared_ptr<const Realization> r, int n_cells, std::int64_t T_back,
                              std::int64_t at_step, double c, DpOptions opts = {}) {
    if (T_back < 1) throw ConfigError("pullback: T_back must be >= 1 step");
    if (!r->path().covers_times(at_step - T_back, at_step))
        throw ConfigError("pullback: path does not cover [at_step - T_back, at_step]");
    return solve(std::move(r), constant_snapshot(n_cells, at_step - T_back, c), at_step, c, opts);
}

inline InvariantProfile one_sided_profile(std::shared_ptr<const Realization> r, int n_cells, std::int64_t T_back,
                                          std::int64_t at_step = 0, double c = 0.0,
                                          DpMode mode = DpMode::semi_lagrangian) {
    DpOptions opts;
    opts.mode = mode;
    opts.keep_history = false;
    InvariantProfile out;
    out.horizon_steps = T_back;
    out.snapshot = pullback(r, n_cells, T_back, at_step, c, opts).current();
    if (T_back >= 2) {
        const Snapshot half = pullback(r, n_cells, T_back / 2, at_step, c, opts).current();
        out.residual = l1_distance(out.snapshot, half);
    }
    return out;
}

/// Minimizer over curves ending at lifted x at step_end with free start at
/// step_start (zero value there).
inline MinimizerResult finite_minimizer(std::shared_ptr<const Realization> r, int n_cells, double x,
                                        std::int64_t step_end, std::int64_t step_start, double c,
                                        DpMode mode = DpMode::semi_lagrangian, Side side = Side::rightmost) {
    if (step_end <= step_start) throw ConfigError("finite_minimizer: step_end must exceed step_start");
    DpOptions opts;
    opts.mode = mode;
    auto run = pullback(r, n_cells, step_end - step_start, step_end, c, opts);
    MinimizerResult out;
    out.curve = run.backward_characteristic(x, step_end, side);
    out.horizon_steps = step_end - step_start;
    out.action = action(out.curve, *r, c);
    out.dp_value = run.value(step_end, x);
    out.terminal_velocity = out.curve.segment_velocity(step_end - 1);
    out.degenerate = r->spec().is_zero();
    return out;
}

struct TwoSidedMinimizer {
    MinimizerResult result;
    double y0 = 0.0;        // lifted position at step 0
    double velocity0 = 0.0; // incoming velocity at step 0
};

/// Free endpoints at -T and +T; returns the chain ending at the global minimum of
/// the value function at +T.
inline TwoSidedMinimizer two_sided_minimizer(std::shared_ptr<const Realization> r, int n_cells, std::int64_t T,
                                             double c, DpMode mode = DpMode::semi_lagrangian) {
    if (T < 1) throw ConfigError("two_sided_minimizer: T must be >= 1 step");
    if (!r->path().covers_times(-T, T)) throw ConfigError("two_sided_minimizer: path must cover [-T, T]");
    DpOptions opts;
    opts.mode = mode;
    auto run = pullback(r, n_cells, 2 * T, T, c, opts);
    const Snapshot end = run.current();
    const auto it = std::min_element(end.U.begin(), end.U.end());
    const double x = static_cast<double>(it - end.U.begin()) / n_cells;
    TwoSidedMinimizer out;
    out.result.curve = run.backward_characteristic(x, T, Side::rightmost);
    out.result.horizon_steps = 2 * T;
    out.result.action = action(out.result.curve, *r, c);
    out.result.dp_value = run.value(T, x);
    out.result.terminal_velocity = out.result.curve.segment_velocity(T - 1);
    out.result.degenerate = r->spec().is_zero();
    out.y0 = out.result.curve.at(0);
    out.velocity0 = out.result.curve.segment_velocity(-1);
    return out;
}

/// Local minimizer of the discrete action between fixed lifted endpoints
/// (y at step_start, x at step_end), by damped Newton on the tridiagonal
/// Euler-Lagrange system started from the straight segment.
inline MinimizerResult fixed_endpoint_minimizer(const Realization& r, double x, std::int64_t step_end, double y,
                                                std::int64_t step_start, double c = 0.0, int max_iter = 100) {
    if (step_end <= step_start) throw ConfigError("fixed_endpoint_minimizer: step_end must exceed step_start");
    if (!r.path().covers_times(step_start, step_end))
        throw ConfigError("fixed_endpoint_minimizer: path does not cover the window");
    const auto M = static_cast<std::size_t>(step_end - step_start);
    const double dt = r.dt();
    Curve cv{step_start, dt, std::vector<double>(M + 1), {}};
    for (std::size_t j = 0; j <= M; ++j) cv.positions[j] = y + (x - y) * static_cast<double>(j) / static_cast<double>(M);
    auto total = [&](const Curve& k) { return action(k, r, c).value; };
    double S = total(cv), mu = 0.0;
    std::vector<double> g(M + 1), dg(M + 1), cp(M + 1), step(M + 1);
    for (int it = 0; it < max_iter && M > 1; ++it) {
        double gnorm = 0.0;
        for (std::size_t j = 1; j < M; ++j) {
            const std::int64_t n = step_start + static_cast<std::int64_t>(j);
            const double* p = cv.positions.data();
            g[j] = (2.0 * p[j] - p[j - 1] - p[j + 1]) / dt + r.force(n, p[j]);
            dg[j] = 2.0 / dt + r.force_derivative(n, p[j]);
            gnorm = std::max(gnorm, std::abs(g[j]));
        }
        if (gnorm < 1e-12 / dt) break;
        for (;;) {
            // Thomas on diag dg + mu, off-diagonals -1/dt
            const double off = -1.0 / dt;
            double prev_c = 0.0, prev_d = 0.0;
            bool ok = true;
            for (std::size_t j = 1; j < M; ++j) {
                const double m = dg[j] + mu - off * prev_c;
                if (!(m > 0.0)) {
                    ok = false;
                    break;
                }
                cp[j] = off / m;
                step[j] = (g[j] - off * prev_d) / m;
                prev_c = cp[j];
                prev_d = step[j];
            }
            if (ok) {
                for (std::size_t j = M - 1; j-- > 1;) step[j] -= cp[j] * step[j + 1];
                Curve trial = cv;
                for (std::size_t j = 1; j < M; ++j) trial.positions[j] -= step[j];
                const double St = total(trial);
                if (St <= S) {
                    cv = std::move(trial);
                    S = St;
                    mu *= 0.25;
                    break;
                }
            }
            mu = mu == 0.0 ? 1.0 / dt : 4.0 * mu;
            if (mu > 1e12 / dt) throw SolverError("fixed_endpoint_minimizer: no descent step");
        }
    }
    MinimizerResult out;
    out.curve = std::move(cv);
    out.action = action(out.curve, r, c);
    out.dp_value = out.action.value;
    out.horizon_steps = step_end - step_start;
    out.terminal_velocity = out.curve.segment_velocity(step_end - 1);
    out.degenerate = r.spec().is_zero();
    return out;
}

struct CrossingReport {
    int crossings = 0;
    /// Approaches within `band` of the other curve that separated on the same side.
    int near_touches = 0;
    double min_distance = std::numeric_limits<double>::infinity(); // on the circle
    bool passes = true;
};

/// Counts crossings of c1 and c2 on the circle: sign changes of c1 - c2 - m for
/// every integer m, where excursions within `band` of an integer that return to
/// the same side do not count.
inline CrossingReport count_crossings(const Curve& c1, const Curve& c2, double band) {
    const std::int64_t a = std::max(c1.start_step, c2.start_step);
    const std::int64_t b = std::min(c1.end_step(), c2.end_step());
    if (a > b) throw ConfigError("crossing check: curves do not overlap in time");
    CrossingReport rep;
    bool committed = false, pending = false;
    double q = 0.0; // committed floor of the difference
    for (std::int64_t n = a; n <= b; ++n) {
        const double d = c1.at(n) - c2.at(n);
        const double near = std::abs(d - std::round(d));
        rep.min_distance = std::min(rep.min_distance, near);
        if (near <= band) {
            pending = committed;
            continue;
        }
        const double f = std::floor(d);
        if (!committed) {
            q = f;
            committed = true;
        } else if (f != q) {
            rep.crossings += static_cast<int>(std::abs(f - q));
            q = f;
        } else if (pending) {
            ++rep.near_touches;
        }
        pending = false;
    }
    rep.passes = rep.crossings <= 1;
    return rep;
}

inline CrossingReport check_no_double_intersection(const Curve& c1, const Curve& c2, double cell_width = 1.0 / 256) {
    return count_crossings(c1, c2, cell_width);
}

struct VelocityBoundReport {
    double terminal_velocity = 0.0;
    double c1 = 0.25;
    double bound = 5.0; // 20 C1
    bool within_bound = true;
    double tau = 0.0;
    double force_norm_tau = 0.0;
    bool short_horizon_gate = false; // ||F||_tau <= 1/40
    double max_speed = 0.0;
    bool within_short_bound = true; // max speed <= 2/tau when gated
    bool passes() const { return within_bound && within_short_bound; }
};

/// |v_end| <= 20 C1 with C1 over the unit window ending at the curve end; when the
/// curve is short enough that ||F||_tau <= 1/40, also max speed <= 2/tau.
inline VelocityBoundReport velocity_bound_check(const Curve& curve, const Realization& r) {
    curve.validate();
    VelocityBoundReport rep;
    const std::int64_t end = curve.end_step();
    const auto unit = static_cast<std::int64_t>(std::llround(1.0 / r.dt()));
    const std::int64_t first = std::max(r.first_step(), end - unit);
    rep.terminal_velocity = curve.segment_velocity(end - 1);
    rep.c1 = force_norm(r.spec(), r.path(), first, end).c1;
    rep.bound = 20.0 * rep.c1;
    rep.within_bound = std::abs(rep.terminal_velocity) <= rep.bound;
    rep.tau = static_cast<double>(end - curve.start_step) * r.dt();
    rep.force_norm_tau = force_norm(r.spec(), r.path(), curve.start_step, end).value;
    rep.short_horizon_gate = rep.force_norm_tau <= 1.0 / 40.0;
    rep.max_speed = curve.max_speed();
    if (rep.short_horizon_gate) rep.within_short_bound = rep.max_speed <= 2.0 / rep.tau;
    return rep;
}

/// Index of the node with the smallest velocity jump, a proxy for a continuity point.
inline int smoothest_node(const Snapshot& s) {
    int best = 0;
    double jump = std::numeric_limits<double>::infinity();
    for (int i = 0; i < s.n_cells; ++i) {
        const double j = std::abs(s.u[static_cast<std::size_t>(i)] -
                                  s.u[static_cast<std::size_t>((i - 1 + s.n_cells) % s.n_cells)]);
        if (j < jump) {
            jump = j;
            best = i;
        }
    }
    return best;
}

/// (xi(0) - xi(-T_back)) / T_back for the minimizer through a continuity point at step 0.
inline double asymptotic_slope(std::shared_ptr<const Realization> r, int n_cells, double c, std::int64_t T_back) {
    if (static_cast<double>(T_back) * r->dt() < 8.0 - 1e-9)
        throw ConfigError("asymptotic_slope: T_back must be >= 8 time units");
    auto run = pullback(r, n_cells, T_back, 0, c);
    const int i = smoothest_node(run.current());
    const Curve cv = run.backward_characteristic(static_cast<double>(i) / n_cells, 0, Side::rightmost);
    return (cv.at(0) - cv.at(-T_back)) / (static_cast<double>(T_back) * r->dt());
}

struct ContractionFit {
    double rate = 0.0; // fitted exponential decay rate per unit time, backward
    double r2 = 0.0;
    int points = 0;
};

/// Fits log(circle distance) against backward time over the steps where the
/// distance lies in (floor, 0.5).
inline ContractionFit backward_contraction(const Curve& c1, const Curve& c2, double floor = 1e-11,
                                           int stride = 10) {
    const std::int64_t a = std::max(c1.start_step, c2.start_step);
    const std::int64_t b = std::min(c1.end_step(), c2.end_step());
    std::vector<double> t, y;
    for (std::int64_t n = b; n >= a; n -= stride) {
        const double d = circle_distance(c1.at(n), c2.at(n));
        if (d <= floor) break;
        t.push_back(static_cast<double>(b - n) * c1.dt);
        y.push_back(std::log(d));
    }
    ContractionFit out;
    out.points = static_cast<int>(t.size());
    if (t.size() < 3) return out;
    const auto f = stats::linear_fit(t, y);
    out.rate = -f.slope;
    out.r2 = f.r2;
    return out;
}

/// Curve export preceded by a comment header with the action.
inline void write_csv(std::ostream& os, const MinimizerResult& m) {
    os.precision(17);
    os << "# action=" << m.action.value << " dp_value=" << m.dp_value << " terminal_velocity=" << m.terminal_velocity
       << " horizon_steps=" << m.horizon_steps << "\n";
    write_csv(os, m.curve);
}

} // namespace sburgers
