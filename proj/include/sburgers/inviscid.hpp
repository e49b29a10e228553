#pragma once

// Inviscid solvers: the Lax-Oleinik (Hopf-Lax) dynamic program for the value
// function, backward characteristics extracted from it, and an independent
// Godunov finite-volume scheme.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <ostream>
#include <span>
#include <vector>

#include "sburgers/errors.hpp"
#include "sburgers/forcing.hpp"
#include "sburgers/geometry.hpp"

namespace sburgers {

/// Velocity profile on a uniform periodic grid. Cell i spans [x_i, x_{i+1}],
/// x_i = i/n_cells; u[i] is the cell average and U[i] the value function at
/// node x_i (up to an additive constant, periodic part only).
struct Snapshot {
    int n_cells = 0;
    std::int64_t step = 0;
    std::vector<double> u;
    std::vector<double> U;
    double mean_c = 0.0;

    double dx() const { return 1.0 / n_cells; }
    double node(int i) const { return static_cast<double>(i) / n_cells; }
    double center(int i) const { return (i + 0.5) / n_cells; }
    double mean() const { return std::accumulate(u.begin(), u.end(), 0.0) / static_cast<double>(u.size()); }
    double max_abs() const {
        double m = 0.0;
        for (double v : u) m = std::max(m, std::abs(v));
        return m;
    }
};

/// Builds a snapshot from cell averages; U is reconstructed by summation.
inline Snapshot snapshot_from_u(std::vector<double> u, std::int64_t step) {
    if (u.size() < 4) throw ConfigError("snapshot: need at least 4 cells");
    Snapshot s;
    s.n_cells = static_cast<int>(u.size());
    s.step = step;
    s.u = std::move(u);
    s.mean_c = s.mean();
    s.U.assign(s.u.size(), 0.0);
    const double dx = s.dx();
    for (std::size_t i = 1; i < s.u.size(); ++i) s.U[i] = s.U[i - 1] + (s.u[i - 1] - s.mean_c) * dx;
    return s;
}

/// Cell averages of a function given by its antiderivative G: (G(x_{i+1}) - G(x_i)) / dx.
template <class Antiderivative>
Snapshot snapshot_from_antiderivative(int n_cells, std::int64_t step, Antiderivative&& G) {
    std::vector<double> u(static_cast<std::size_t>(n_cells));
    for (int i = 0; i < n_cells; ++i)
        u[static_cast<std::size_t>(i)] =
            (G(static_cast<double>(i + 1) / n_cells) - G(static_cast<double>(i) / n_cells)) * n_cells;
    return snapshot_from_u(std::move(u), step);
}

inline Snapshot constant_snapshot(int n_cells, std::int64_t step, double c) {
    return snapshot_from_u(std::vector<double>(static_cast<std::size_t>(n_cells), c), step);
}

/// sum |u1 - u2| dx
inline double l1_distance(const Snapshot& a, const Snapshot& b) {
    if (a.n_cells != b.n_cells) throw ConfigError("l1_distance: grid mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.u.size(); ++i) s += std::abs(a.u[i] - b.u[i]);
    return s * a.dx();
}

/// L1 distance between profiles on grids where one refines the other, after
/// averaging the finer one onto the coarser cells.
inline double l1_distance_coarsened(const Snapshot& a, const Snapshot& b) {
    const Snapshot& fine = a.n_cells >= b.n_cells ? a : b;
    const Snapshot& coarse = a.n_cells >= b.n_cells ? b : a;
    if (fine.n_cells % coarse.n_cells != 0) throw ConfigError("l1_distance_coarsened: grids not nested");
    const int r = fine.n_cells / coarse.n_cells;
    double s = 0.0;
    for (int i = 0; i < coarse.n_cells; ++i) {
        double avg = 0.0;
        for (int j = 0; j < r; ++j) avg += fine.u[static_cast<std::size_t>(i * r + j)];
        s += std::abs(avg / r - coarse.u[static_cast<std::size_t>(i)]);
    }
    return s * coarse.dx();
}

/// Entropy check: no upward jump between neighbouring cells larger than `eta`.
/// A rise is a jump when it is at least 45% of the rise over the surrounding
/// three cells (a resolved ramp gives about a third).
inline bool satisfies_entropy(const Snapshot& s, double eta) {
    const int N = s.n_cells;
    auto u = [&](int i) { return s.u[static_cast<std::size_t>(((i % N) + N) % N)]; };
    for (int i = 0; i < N; ++i) {
        const double d = u(i + 1) - u(i);
        if (d <= eta) continue;
        const double wide = std::max(u(i + 1) - u(i - 2), u(i + 3) - u(i));
        if (d >= 0.45 * wide) return false;
    }
    return true;
}

/// sqrt(dx) max(1, sup|u|): above the O(dx) cell differences of resolved rising
/// gradients, below any O(1) discontinuity once the grid is fine.
inline double entropy_threshold(const Snapshot& s) { return std::sqrt(s.dx()) * std::max(1.0, s.max_abs()); }

inline bool satisfies_entropy(const Snapshot& s) { return satisfies_entropy(s, entropy_threshold(s)); }

/// Columns: step, time, cell index, x, u, U.
inline void write_csv(std::ostream& os, const Snapshot& s, double dt, bool header = true) {
    if (header) os << "step,time,cell,x,u,U\n";
    os.precision(17);
    for (int i = 0; i < s.n_cells; ++i)
        os << s.step << ',' << static_cast<double>(s.step) * dt << ',' << i << ',' << s.node(i) << ','
           << s.u[static_cast<std::size_t>(i)] << ',' << s.U[static_cast<std::size_t>(i)] << '\n';
}

// ---------------------------------------------------------------------------
// Lax-Oleinik dynamic program
// ---------------------------------------------------------------------------

/// semi_lagrangian: the predecessor y ranges continuously over the lifted line and
/// the previous value function is interpolated between nodes by parabolas whose
/// curvature is minmod-limited (linear across kinks).
/// semi_lagrangian_linear: same with plain linear interpolation.
/// lattice: y ranges over nodes only (exact for lattice paths, but the velocity
/// resolution is dx/dt).
enum class DpMode { semi_lagrangian, semi_lagrangian_linear, lattice };

enum class Side { leftmost, rightmost };

namespace detail {

struct Candidate {
    double y = 0.0;
    double value = std::numeric_limits<double>::infinity();
    bool edge = false;
};

inline bool tie(double a, double b) { return std::abs(a - b) <= 1e-12 * (1.0 + std::abs(a)); }

inline double minmod(double a, double b) {
    if (a * b <= 0.0) return 0.0;
    return std::abs(a) < std::abs(b) ? a : b;
}

/// Periodic node values on the lifted line.
struct PeriodicNodes {
    std::span<const double> v;
    double at(long j) const {
        const long n = static_cast<long>(v.size());
        return v[static_cast<std::size_t>(((j % n) + n) % n)];
    }
    /// Limited second difference over cell [j, j+1], divided by dx^2 by the caller.
    double second_difference(long j) const {
        const double d0 = at(j + 1) - 2.0 * at(j) + at(j - 1);
        const double d1 = at(j + 2) - 2.0 * at(j + 1) + at(j);
        return minmod(d0, d1);
    }
};

/// Interpolant of periodic node values at lifted x.
inline double interpolate(std::span<const double> P, double x, DpMode mode) {
    const long n = static_cast<long>(P.size());
    const PeriodicNodes q{P};
    const double dx = 1.0 / static_cast<double>(n);
    const double s = x * static_cast<double>(n);
    const double fl = std::floor(s);
    const long j = static_cast<long>(fl);
    if (mode == DpMode::lattice) return q.at(std::lround(s));
    const double th = s - fl;
    double v = (1.0 - th) * q.at(j) + th * q.at(j + 1);
    if (mode == DpMode::semi_lagrangian) {
        const double a = q.second_difference(j) / (dx * dx);
        v += 0.5 * a * (th * dx) * ((th - 1.0) * dx);
    }
    return v;
}

/// Interpolant on cell [j, j+1]: q0 + s (y - y_j) + a/2 (y - y_j)(y - y_{j+1}).
struct Cell {
    double q0 = 0.0, s = 0.0, a = 0.0;
};

/// Cell coefficients computed on demand from node values.
struct LocalCells {
    PeriodicNodes Q;
    double dx;
    bool quad;
    Cell operator()(long j) const {
        const double q0 = Q.at(j);
        return {q0, (Q.at(j + 1) - q0) / dx, quad ? Q.second_difference(j) / (dx * dx) : 0.0};
    }
};

/// Cell coefficients for one period, precomputed.
struct CellTable {
    std::vector<Cell> cells;
    void build(std::span<const double> Qv, double dx, bool quad) {
        const PeriodicNodes Q{Qv};
        const LocalCells lc{Q, dx, quad};
        cells.resize(Qv.size());
        for (std::size_t j = 0; j < Qv.size(); ++j) cells[j] = lc(static_cast<long>(j));
    }
    Cell operator()(long j) const {
        const long n = static_cast<long>(cells.size());
        return cells[static_cast<std::size_t>(((j % n) + n) % n)];
    }
};

/// min over y of Q(y) + (z - y)^2 / (2 dt), y within `width` cells of z, where Q is
/// the interpolant of periodic node values on the lifted line.
template <class Cells>
Candidate minimize(const Cells& cells, double dx, double dt, double z, int width, DpMode mode, Side side) {
    Candidate best;
    long j_first = 0, j_last = 0, j_best = 0;
    auto consider = [&](double y, double v, long j) {
        if (v < best.value && !tie(v, best.value)) {
            best.y = y;
            best.value = v;
            j_best = j;
        } else if (tie(v, best.value)) {
            if ((side == Side::rightmost && y > best.y) || (side == Side::leftmost && y < best.y)) {
                best.y = y;
                j_best = j;
            }
            best.value = std::min(best.value, v);
        }
    };
    if (mode != DpMode::lattice) {
        j_first = static_cast<long>(std::floor(z / dx)) - width;
        j_last = static_cast<long>(std::floor(z / dx)) + width;
        for (long j = j_first; j <= j_last; ++j) {
            const Cell c = cells(j);
            const double y0 = static_cast<double>(j) * dx, y1 = y0 + dx;
            auto f = [&](double y) {
                const double d = z - y;
                return c.q0 + c.s * (y - y0) + 0.5 * c.a * (y - y0) * (y - y1) + d * d / (2.0 * dt);
            };
            const double curv = c.a + 1.0 / dt;
            if (curv > 0.0) {
                const double y = std::clamp((z / dt - c.s + 0.5 * c.a * (y0 + y1)) / curv, y0, y1);
                consider(y, f(y), j);
            } else {
                consider(y0, f(y0), j);
                consider(y1, f(y1), j);
            }
        }
        const double lo = static_cast<double>(j_first) * dx, hi = static_cast<double>(j_last + 1) * dx;
        best.edge = best.y <= lo + 1e-12 * dx || best.y >= hi - 1e-12 * dx;
    } else {
        j_first = static_cast<long>(std::lround(z / dx)) - width;
        j_last = static_cast<long>(std::lround(z / dx)) + width;
        for (long j = j_first; j <= j_last; ++j) {
            const double y = static_cast<double>(j) * dx;
            const double d = z - y;
            consider(y, cells(j).q0 + d * d / (2.0 * dt), j);
        }
        best.edge = j_best == j_first || j_best == j_last;
    }
    return best;
}

inline Candidate minimize_nodes(std::span<const double> Qv, double dx, double dt, double z, int width, DpMode mode,
                                Side side) {
    return minimize(LocalCells{PeriodicNodes{Qv}, dx, mode == DpMode::semi_lagrangian}, dx, dt, z, width, mode, side);
}

/// Smallest window guaranteed to contain every minimizer of Q + kinetic.
inline int safe_width(std::span<const double> Qv, double dx, double dt, DpMode mode) {
    const PeriodicNodes Q{Qv};
    const long n = static_cast<long>(Qv.size());
    double S = 0.0;
    for (long j = 0; j < n; ++j) {
        double sj = std::abs(Q.at(j + 1) - Q.at(j)) / dx;
        if (mode == DpMode::semi_lagrangian) sj += 0.5 * std::abs(Q.second_difference(j)) / dx;
        S = std::max(S, sj);
    }
    const int w = static_cast<int>(std::ceil(S * dt / dx)) + (mode == DpMode::lattice ? 2 : 1);
    return std::max(w, 1);
}

} // namespace detail

/// Search windows may cover several periods of the lifted line, up to this many.
inline constexpr int kMaxWindowPeriods = 4;

struct LaxOleinikStep {
    std::vector<double> values; // value function at time n+1 (periodic part)
    std::vector<double> argmin; // lifted predecessor position per node
    int width = 0;
};

/// One step of the dynamic program from grid time n to n+1 with mean velocity c:
/// U'(x_i) = min_y [ U(y) + Phi_n(y) + ((x_i - y)/dt - c)^2 dt/2 ].
/// Ties go to the right-most minimizer. Throws SolverError when the argmin of
/// some node sits at the edge of the `width`-cell window.
inline LaxOleinikStep lax_oleinik_step(std::span<const double> U, const Realization& r, std::int64_t n, double c,
                                       int width, DpMode mode = DpMode::semi_lagrangian) {
    const int N = static_cast<int>(U.size());
    if (width < 1 || width > kMaxWindowPeriods * N)
        throw ConfigError("lax_oleinik_step: width must lie in [1, 4 n_cells]");
    if (!r.path().contains(n)) throw IndexError("lax_oleinik_step: step outside path");
    const double dx = 1.0 / N, dt = r.dt();
    std::vector<double> Q(U.begin(), U.end());
    for (int j = 0; j < N; ++j) Q[static_cast<std::size_t>(j)] += r.potential(n, j * dx);
    LaxOleinikStep out;
    out.width = width;
    out.values.resize(static_cast<std::size_t>(N));
    out.argmin.resize(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i) {
        const auto cand = detail::minimize_nodes(Q, dx, dt, i * dx - c * dt, width, mode, Side::rightmost);
        if (cand.edge) throw SolverError("lax_oleinik_step: argmin at window edge; widen the search window");
        out.values[static_cast<std::size_t>(i)] = cand.value;
        out.argmin[static_cast<std::size_t>(i)] = cand.y;
    }
    return out;
}

struct DpOptions {
    DpMode mode = DpMode::semi_lagrangian;
    bool keep_history = true;
    /// Lower bound for the adaptive search width.
    int min_width = 1;
};

/// Iterated dynamic program with the value-function history needed to extract
/// backward characteristics. Values are anchored (U(0) subtracted) each step; the
/// removed constants are kept so true values stay available.
class LaxOleinikRun {
public:
    LaxOleinikRun(std::shared_ptr<const Realization> r, const Snapshot& u0, double c, DpOptions opts = {})
        : real_(std::move(r)), table_(*real_, u0.n_cells), opts_(opts), n_(u0.n_cells), c_(c),
          start_(u0.step), step_(u0.step) {
        if (std::abs(u0.mean() - c) > 1e-8) throw ConfigError("lax-oleinik: initial mean differs from c");
        if (!real_->path().covers_times(u0.step, u0.step)) throw IndexError("lax-oleinik: start outside path");
        cur_.resize(static_cast<std::size_t>(n_));
        const double dx = 1.0 / n_;
        cur_[0] = 0.0;
        for (int i = 1; i < n_; ++i)
            cur_[static_cast<std::size_t>(i)] = cur_[static_cast<std::size_t>(i - 1)] + (u0.u[static_cast<std::size_t>(i - 1)] - c) * dx;
        init_ = cur_;
        offset_ = 0.0;
        if (opts_.keep_history) {
            hist_.push_back(cur_);
            offsets_.push_back(0.0);
        }
    }

    const Realization& realization() const { return *real_; }
    std::shared_ptr<const Realization> realization_ptr() const { return real_; }
    int n_cells() const { return n_; }
    double dx() const { return 1.0 / n_; }
    double dt() const { return real_->dt(); }
    double c() const { return c_; }
    DpMode mode() const { return opts_.mode; }
    std::int64_t start_step() const { return start_; }
    std::int64_t current_step() const { return step_; }
    bool has_history() const { return opts_.keep_history; }
    int max_width() const { return max_width_; }

    void advance() {
        const std::int64_t n = step_;
        if (!real_->path().contains(n)) throw IndexError("lax-oleinik: path ends before step " + std::to_string(n + 1));
        const double dx = 1.0 / n_, dt = real_->dt();
        table_.potentials(n, Q_);
        for (int j = 0; j < n_; ++j) Q_[static_cast<std::size_t>(j)] += cur_[static_cast<std::size_t>(j)];
        int width = std::max(opts_.min_width, detail::safe_width(Q_, dx, dt, opts_.mode));
        if (width > kMaxWindowPeriods * n_) throw SolverError("lax-oleinik: search window exceeds 4 periods");
        next_.resize(static_cast<std::size_t>(n_));
        cells_.build(Q_, dx, opts_.mode == DpMode::semi_lagrangian);
        for (int i = 0; i < n_; ++i) {
            auto cand = detail::minimize(cells_, dx, dt, i * dx - c_ * dt, width, opts_.mode, Side::rightmost);
            while (cand.edge) {
                width *= 2;
                if (width > kMaxWindowPeriods * n_) throw SolverError("lax-oleinik: search window exceeds 4 periods");
                cand = detail::minimize(cells_, dx, dt, i * dx - c_ * dt, width, opts_.mode, Side::rightmost);
            }
            next_[static_cast<std::size_t>(i)] = cand.value;
        }
        widths_.push_back(width);
        max_width_ = std::max(max_width_, width);
        const double anchor = next_[0];
        for (double& v : next_) v -= anchor;
        offset_ += anchor;
        cur_.swap(next_);
        ++step_;
        if (opts_.keep_history) {
            hist_.push_back(cur_);
            offsets_.push_back(offset_);
        }
    }

    void advance_to(std::int64_t step) {
        while (step_ < step) advance();
    }

    Snapshot current() const { return make_snapshot(cur_, step_); }

    Snapshot snapshot(std::int64_t step) const {
        if (step == step_) return current();
        return make_snapshot(history(step), step);
    }

    /// True (unanchored) periodic value at lifted position x.
    double value(std::int64_t step, double x) const {
        const auto& P = step == step_ ? cur_ : history(step);
        const double off = step == step_ ? offset_ : offsets_[static_cast<std::size_t>(step - start_)];
        return off + interpolate(P, x);
    }

    /// Chain of minimizers ending at lifted position x at grid time `step`, back to
    /// grid time `down_to` (default: start of the run).
    Curve backward_characteristic(double x, std::int64_t step, Side side, std::int64_t down_to) const {
        if (!opts_.keep_history) throw StateError("backward characteristic: run kept no history");
        if (step > step_ || down_to < start_ || down_to > step)
            throw StateError("backward characteristic: requested window not in the table");
        Curve cv;
        cv.dt = real_->dt();
        cv.start_step = down_to;
        cv.positions.assign(static_cast<std::size_t>(step - down_to + 1), 0.0);
        cv.positions.back() = x;
        double z = x;
        for (std::int64_t m = step - 1; m >= down_to; --m) {
            z = predecessor(z, m, side);
            cv.positions[static_cast<std::size_t>(m - down_to)] = z;
        }
        return cv;
    }

    Curve backward_characteristic(double x, std::int64_t step, Side side) const {
        return backward_characteristic(x, step, side, start_);
    }

    /// Predecessor at grid time m of lifted position z at grid time m+1.
    double predecessor(double z, std::int64_t m, Side side) const {
        const auto& P = history(m);
        const double dx = 1.0 / n_, dt = real_->dt();
        std::vector<double>& Q = scratch_;
        Q.resize(static_cast<std::size_t>(n_));
        // Only the window around z is needed; fill it lazily through the table.
        const int width = m - start_ < static_cast<std::int64_t>(widths_.size())
                              ? widths_[static_cast<std::size_t>(m - start_)] + 1
                              : max_width_ + 1;
        const double zc = z - c_ * dt;
        const long base = opts_.mode == DpMode::lattice ? static_cast<long>(std::lround(zc / dx))
                                                          : static_cast<long>(std::floor(zc / dx));
        for (long j = base - width - 2; j <= base + width + 3; ++j) {
            const long jj = ((j % n_) + n_) % n_;
            Q[static_cast<std::size_t>(jj)] = P[static_cast<std::size_t>(jj)] + table_.potential(m, jj);
        }
        return detail::minimize_nodes(Q, dx, dt, zc, width, opts_.mode, side).y;
    }

    /// Value of the initial (periodic) data at lifted position y.
    double initial_value(double y) const { return interpolate(init_, y); }

    /// action(curve) + U_start(curve start) - U(curve end); zero for exact chains.
    double action_defect(const Curve& cv) const {
        const double a = action(cv, *real_, c_).value;
        const double start_val = cv.start_step == start_ ? initial_value(cv.positions.front())
                                                         : value(cv.start_step, cv.positions.front());
        return a + start_val - value(cv.end_step(), cv.positions.back());
    }

private:
    const std::vector<double>& history(std::int64_t step) const {
        if (!opts_.keep_history) throw StateError("lax-oleinik: history not kept");
        if (step < start_ || step > step_) throw StateError("lax-oleinik: step outside computed range");
        return hist_[static_cast<std::size_t>(step - start_)];
    }

    double interpolate(const std::vector<double>& P, double x) const { return detail::interpolate(P, x, opts_.mode); }

    Snapshot make_snapshot(const std::vector<double>& P, std::int64_t step) const {
        Snapshot s;
        s.n_cells = n_;
        s.step = step;
        s.mean_c = c_;
        s.U = P;
        s.u.resize(static_cast<std::size_t>(n_));
        for (int i = 0; i < n_; ++i)
            s.u[static_cast<std::size_t>(i)] =
                c_ + (P[static_cast<std::size_t>((i + 1) % n_)] - P[static_cast<std::size_t>(i)]) * n_;
        return s;
    }

    std::shared_ptr<const Realization> real_;
    NodeTable table_;
    DpOptions opts_;
    int n_;
    double c_;
    std::int64_t start_;
    std::int64_t step_;
    std::vector<double> cur_, next_, Q_, init_;
    double offset_ = 0.0;
    std::vector<std::vector<double>> hist_;
    std::vector<double> offsets_;
    std::vector<int> widths_;
    int max_width_ = 1;
    detail::CellTable cells_;
    mutable std::vector<double> scratch_;
};

/// Runs the dynamic program from u0 (at u0.step) to grid time n1.
inline LaxOleinikRun solve(std::shared_ptr<const Realization> r, const Snapshot& u0, std::int64_t n1, double c,
                           DpOptions opts = {}) {
    LaxOleinikRun run(std::move(r), u0, c, opts);
    run.advance_to(n1);
    return run;
}

// ---------------------------------------------------------------------------
// Godunov finite volumes
// ---------------------------------------------------------------------------

/// Exact Riemann flux for f(u) = u^2 / 2.
inline double godunov_flux(double ul, double ur) {
    if (ul >= ur) {
        const double s = 0.5 * (ul + ur);
        return s > 0.0 ? 0.5 * ul * ul : (s < 0.0 ? 0.5 * ur * ur : 0.5 * ul * ul);
    }
    if (ul > 0.0) return 0.5 * ul * ul;
    if (ur < 0.0) return 0.5 * ur * ur;
    return 0.0;
}

struct GodunovOptions {
    double cfl = 0.9;
    int max_substeps = 512;
};

/// Conservative transport over a time dt with CFL-limited substeps.
inline void godunov_advect(std::vector<double>& u, double dt, const GodunovOptions& opts = {}) {
    const int N = static_cast<int>(u.size());
    const double dx = 1.0 / N;
    double vmax = 0.0;
    for (double v : u) vmax = std::max(vmax, std::abs(v));
    const int sub = std::max(1, static_cast<int>(std::ceil(vmax * dt / (opts.cfl * dx))));
    if (sub > opts.max_substeps) throw SolverError("godunov: CFL violation beyond max substeps");
    const double h = dt / sub;
    std::vector<double> flux(static_cast<std::size_t>(N));
    for (int s = 0; s < sub; ++s) {
        // flux[i] at the interface between cell i-1 and cell i
        for (int i = 0; i < N; ++i)
            flux[static_cast<std::size_t>(i)] =
                godunov_flux(u[static_cast<std::size_t>((i - 1 + N) % N)], u[static_cast<std::size_t>(i)]);
        for (int i = 0; i < N; ++i)
            u[static_cast<std::size_t>(i)] -=
                h / dx * (flux[static_cast<std::size_t>((i + 1) % N)] - flux[static_cast<std::size_t>(i)]);
    }
}

/// Adds the cell-averaged kick (Phi_n(x_{i+1}) - Phi_n(x_i)) / dx; sums to zero.
inline void apply_cell_kick(std::vector<double>& u, const NodeTable& table, std::int64_t n,
                            std::vector<double>& scratch) {
    const int N = static_cast<int>(u.size());
    table.potentials(n, scratch);
    for (int i = 0; i < N; ++i)
        u[static_cast<std::size_t>(i)] +=
            (scratch[static_cast<std::size_t>((i + 1) % N)] - scratch[static_cast<std::size_t>(i)]) * N;
}

/// Kick-then-transport finite-volume stepping.
class GodunovRun {
public:
    GodunovRun(std::shared_ptr<const Realization> r, const Snapshot& u0, GodunovOptions opts = {})
        : real_(std::move(r)), table_(*real_, u0.n_cells), opts_(opts), u_(u0.u), step_(u0.step), c_(u0.mean()) {}

    void advance() {
        apply_cell_kick(u_, table_, step_, scratch_);
        godunov_advect(u_, real_->dt(), opts_);
        ++step_;
    }
    void advance_to(std::int64_t n) {
        while (step_ < n) advance();
    }
    std::int64_t current_step() const { return step_; }
    Snapshot current() const {
        Snapshot s = snapshot_from_u(u_, step_);
        s.mean_c = c_;
        return s;
    }
    double mean() const { return std::accumulate(u_.begin(), u_.end(), 0.0) / static_cast<double>(u_.size()); }

private:
    std::shared_ptr<const Realization> real_;
    NodeTable table_;
    GodunovOptions opts_;
    std::vector<double> u_, scratch_;
    std::int64_t step_;
    double c_;
};

/// Snapshots every `record_every` steps from u0.step to n1 (both ends included).
inline std::vector<Snapshot> godunov_solve(std::shared_ptr<const Realization> r, const Snapshot& u0, std::int64_t n1,
                                           int record_every = 1, GodunovOptions opts = {}) {
    GodunovRun run(std::move(r), u0, opts);
    std::vector<Snapshot> out{run.current()};
    while (run.current_step() < n1) {
        run.advance();
        if ((run.current_step() - u0.step) % record_every == 0 || run.current_step() == n1)
            out.push_back(run.current());
    }
    return out;
}

} // namespace sburgers
