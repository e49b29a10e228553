#pragma once

// Viscous Burgers: Hopf-Cole propagation of log(phi) with log-sum-exp heat
// convolution, a direct finite-volume solver, a Feynman-Kac kernel estimator and
// the zero-viscosity comparison against the inviscid invariant profile.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <ostream>
#include <vector>

#include "sburgers/errors.hpp"
#include "sburgers/forcing.hpp"
#include "sburgers/geometry.hpp"
#include "sburgers/inviscid.hpp"
#include "sburgers/minimizers.hpp"
#include "sburgers/rng.hpp"
#include "sburgers/shocks.hpp"
#include "sburgers/stats.hpp"

namespace sburgers {

struct ViscousSnapshot : Snapshot {
    double epsilon = 0.0;
};

/// log(phi) at cell centres (i + 1/2) / n_cells; periodic part only, so that
/// u = c - epsilon d/dx logphi.
struct LogHeatField {
    int n_cells = 0;
    std::int64_t step = 0;
    std::vector<double> logphi;
    double epsilon = 0.0;
    double c = 0.0;
};

/// Field whose velocity is (approximately) the given cell averages.
inline LogHeatField log_field_from_u(const Snapshot& u0, double epsilon) {
    if (!(epsilon > 0.0)) throw ConfigError("viscous: epsilon must be positive");
    LogHeatField f;
    f.n_cells = u0.n_cells;
    f.step = u0.step;
    f.epsilon = epsilon;
    f.c = u0.mean();
    f.logphi.assign(u0.u.size(), 0.0);
    const double dx = u0.dx();
    // antiderivative of u - c between centres (trapezoid)
    double P = 0.0;
    for (std::size_t i = 1; i < u0.u.size(); ++i) {
        P += 0.5 * ((u0.u[i - 1] - f.c) + (u0.u[i] - f.c)) * dx;
        f.logphi[i] = -P / epsilon;
    }
    return f;
}

/// u_i = c - epsilon (L_{i+1} - L_{i-1}) / (2 dx); the mean is c by construction.
inline ViscousSnapshot u_from_logphi(const LogHeatField& f) {
    ViscousSnapshot s;
    const int N = f.n_cells;
    s.n_cells = N;
    s.step = f.step;
    s.epsilon = f.epsilon;
    s.mean_c = f.c;
    s.u.resize(static_cast<std::size_t>(N));
    s.U.resize(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i) {
        const double lp = f.logphi[static_cast<std::size_t>((i + 1) % N)];
        const double lm = f.logphi[static_cast<std::size_t>((i - 1 + N) % N)];
        s.u[static_cast<std::size_t>(i)] = f.c - f.epsilon * (lp - lm) * N / 2.0;
        s.U[static_cast<std::size_t>(i)] = -f.epsilon * f.logphi[static_cast<std::size_t>(i)];
    }
    return s;
}

/// Normalized periodic lattice kernel whose mean and variance match the heat
/// kernel exactly: weights at offsets first..first + size - 1 (in cells).
struct HeatKernel {
    long first = 0;
    std::vector<double> log_weights;
    double mean = 0.0;
    double variance = 0.0;
    bool under_resolved = false; // sigma < dx
};

inline HeatKernel heat_kernel(double dx, double mean, double variance) {
    if (!(variance > 0.0)) throw ConfigError("heat kernel: variance must be positive");
    const double sigma = std::sqrt(variance);
    HeatKernel k;
    k.under_resolved = sigma < dx;
    const double reach = 8.0 * sigma + 2.0 * dx;
    k.first = static_cast<long>(std::floor((mean - reach) / dx));
    const long last = static_cast<long>(std::ceil((mean + reach) / dx));
    const std::size_t n = static_cast<std::size_t>(last - k.first + 1);
    std::vector<double> w(n);
    auto build = [&](double mu, double width) {
        double tot = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double y = static_cast<double>(k.first + static_cast<long>(j)) * dx - mu;
            w[j] = std::exp(-y * y / (2.0 * width * width));
            tot += w[j];
        }
        double m = 0.0, v = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            w[j] /= tot;
            m += w[j] * static_cast<double>(k.first + static_cast<long>(j)) * dx;
        }
        for (std::size_t j = 0; j < n; ++j) {
            const double y = static_cast<double>(k.first + static_cast<long>(j)) * dx - m;
            v += w[j] * y * y;
        }
        return std::pair{m, v};
    };
    double mu = mean, width = sigma;
    for (int outer = 0; outer < 30; ++outer) {
        double lo = 1e-3 * std::min(sigma, dx), hi = 2.0 * sigma + dx;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (build(mu, mid).second < variance ? lo : hi) = mid;
            if (hi - lo < 1e-15 * hi) break;
        }
        width = 0.5 * (lo + hi);
        const auto [m, v] = build(mu, width);
        if (std::abs(m - mean) <= 1e-14 * (dx + std::abs(mean)) && std::abs(v - variance) <= 1e-12 * variance) break;
        mu += mean - m;
    }
    const auto [m, v] = build(mu, width);
    k.mean = m;
    k.variance = v;
    k.log_weights.resize(n);
    for (std::size_t j = 0; j < n; ++j) k.log_weights[j] = std::log(std::max(w[j], std::numeric_limits<double>::min()));
    return k;
}

/// L'_i = log sum_k w_k exp(L_{i-k}), stabilized per output.
inline void log_convolve(std::vector<double>& L, const HeatKernel& k, std::vector<double>& scratch) {
    const long N = static_cast<long>(L.size());
    scratch.resize(L.size());
    const long K = static_cast<long>(k.log_weights.size());
    for (long i = 0; i < N; ++i) {
        double m = -std::numeric_limits<double>::infinity();
        for (long j = 0; j < K; ++j) {
            const long src = (((i - (k.first + j)) % N) + N) % N;
            m = std::max(m, k.log_weights[static_cast<std::size_t>(j)] + L[static_cast<std::size_t>(src)]);
        }
        double s = 0.0;
        for (long j = 0; j < K; ++j) {
            const long src = (((i - (k.first + j)) % N) + N) % N;
            s += std::exp(k.log_weights[static_cast<std::size_t>(j)] + L[static_cast<std::size_t>(src)] - m);
        }
        scratch[static_cast<std::size_t>(i)] = m + std::log(s);
    }
    L.swap(scratch);
}

/// Kick-then-heat stepping of log(phi): L -= Phi_n / eps, then convolution with the
/// heat kernel of variance eps dt drifted by c dt; max(L) re-anchored to 0.
class HopfColeRun {
public:
    HopfColeRun(std::shared_ptr<const Realization> r, const Snapshot& u0, double epsilon)
        : real_(std::move(r)), table_(*real_, u0.n_cells, 0.5), field_(log_field_from_u(u0, epsilon)) {
        kernel_ = heat_kernel(u0.dx(), field_.c * real_->dt(), epsilon * real_->dt());
    }

    /// True when the kernel width is below one cell (moments still matched).
    bool under_resolved() const { return kernel_.under_resolved; }
    const HeatKernel& kernel() const { return kernel_; }
    const LogHeatField& field() const { return field_; }
    std::int64_t current_step() const { return field_.step; }

    void advance() {
        table_.potentials(field_.step, phi_);
        for (std::size_t i = 0; i < phi_.size(); ++i) field_.logphi[i] -= phi_[i] / field_.epsilon;
        heat();
        ++field_.step;
    }
    void advance_to(std::int64_t n) {
        while (field_.step < n) advance();
    }
    /// Heat substep alone (no forcing, no step increment).
    void heat() {
        log_convolve(field_.logphi, kernel_, scratch_);
        const double m = *std::max_element(field_.logphi.begin(), field_.logphi.end());
        for (double& v : field_.logphi) v -= m;
    }
    ViscousSnapshot current() const { return u_from_logphi(field_); }

private:
    std::shared_ptr<const Realization> real_;
    NodeTable table_;
    LogHeatField field_;
    HeatKernel kernel_;
    std::vector<double> phi_, scratch_;
};

inline LogHeatField hopf_cole_step(LogHeatField f, const Realization& r, std::int64_t n) {
    if (!(f.epsilon > 0.0)) throw ConfigError("hopf_cole_step: epsilon must be positive");
    if (n != f.step) throw IndexError("hopf_cole_step: field is not at step n");
    const double dx = 1.0 / f.n_cells;
    for (int i = 0; i < f.n_cells; ++i) f.logphi[static_cast<std::size_t>(i)] -= r.potential(n, (i + 0.5) * dx) / f.epsilon;
    std::vector<double> scratch;
    log_convolve(f.logphi, heat_kernel(dx, f.c * r.dt(), f.epsilon * r.dt()), scratch);
    const double m = *std::max_element(f.logphi.begin(), f.logphi.end());
    for (double& v : f.logphi) v -= m;
    ++f.step;
    return f;
}

// ---------------------------------------------------------------------------
// Direct scheme
// ---------------------------------------------------------------------------

/// Solves a x_{i-1} + b x_i + a x_{i+1} = d_i periodically (constant coefficients).
inline void solve_periodic_tridiagonal(double a, double b, std::vector<double>& d) {
    const std::size_t n = d.size();
    // Sherman-Morrison on the cyclic system
    const double gamma = -b;
    std::vector<double> diag(n, b), c(n), x(n), z(n), u(n, 0.0);
    diag[0] = b - gamma;
    diag[n - 1] = b - a * a / gamma;
    u[0] = gamma;
    u[n - 1] = a;
    auto thomas = [&](const std::vector<double>& rhs, std::vector<double>& out) {
        c[0] = a / diag[0];
        out[0] = rhs[0] / diag[0];
        for (std::size_t i = 1; i < n; ++i) {
            const double m = diag[i] - a * c[i - 1];
            c[i] = a / m;
            out[i] = (rhs[i] - a * out[i - 1]) / m;
        }
        for (std::size_t i = n - 1; i-- > 0;) out[i] -= c[i] * out[i + 1];
    };
    thomas(d, x);
    thomas(u, z);
    const double fact = (x[0] + a * x[n - 1] / gamma) / (1.0 + z[0] + a * z[n - 1] / gamma);
    for (std::size_t i = 0; i < n; ++i) d[i] = x[i] - fact * z[i];
}

struct DirectViscousOptions {
    double cfl = 0.45;
    int max_substeps = 1024;
    bool second_order = true; // minmod MUSCL + SSP-RK2; else first-order Godunov
};

/// Conservative transport with the Godunov flux on (optionally reconstructed) states.
inline void muscl_advect(std::vector<double>& u, double dt, const DirectViscousOptions& o,
                         std::vector<double>& s1, std::vector<double>& s2) {
    const int N = static_cast<int>(u.size());
    const double dx = 1.0 / N;
    double vmax = 0.0;
    for (double v : u) vmax = std::max(vmax, std::abs(v));
    const int sub = std::max(1, static_cast<int>(std::ceil(vmax * dt / (o.cfl * dx))));
    if (sub > o.max_substeps) throw SolverError("direct viscous: CFL violation beyond max substeps");
    const double h = dt / sub;
    auto at = [N](const std::vector<double>& v, int i) { return v[static_cast<std::size_t>((i % N + N) % N)]; };
    auto rhs = [&](const std::vector<double>& v, std::vector<double>& out) {
        out.assign(static_cast<std::size_t>(N), 0.0);
        for (int i = 0; i < N; ++i) {
            // interface between cells i-1 and i
            double ul = at(v, i - 1), ur = at(v, i);
            if (o.second_order) {
                ul += 0.5 * detail::minmod(at(v, i - 1) - at(v, i - 2), at(v, i) - at(v, i - 1));
                ur -= 0.5 * detail::minmod(at(v, i) - at(v, i - 1), at(v, i + 1) - at(v, i));
            }
            const double F = godunov_flux(ul, ur);
            out[static_cast<std::size_t>(i)] += F / dx;
            out[static_cast<std::size_t>((i - 1 + N) % N)] -= F / dx;
        }
    };
    for (int s = 0; s < sub; ++s) {
        rhs(u, s1);
        if (!o.second_order) {
            for (int i = 0; i < N; ++i) u[static_cast<std::size_t>(i)] += h * s1[static_cast<std::size_t>(i)];
            continue;
        }
        std::vector<double> stage(u);
        for (int i = 0; i < N; ++i) stage[static_cast<std::size_t>(i)] += h * s1[static_cast<std::size_t>(i)];
        rhs(stage, s2);
        for (int i = 0; i < N; ++i)
            u[static_cast<std::size_t>(i)] =
                0.5 * (u[static_cast<std::size_t>(i)] + stage[static_cast<std::size_t>(i)] + h * s2[static_cast<std::size_t>(i)]);
    }
}

/// Per step: forcing kick, Godunov transport, implicit diffusion with coefficient eps/2.
class DirectViscousRun {
public:
    DirectViscousRun(std::shared_ptr<const Realization> r, const Snapshot& u0, double epsilon,
                     DirectViscousOptions o = {})
        : real_(std::move(r)), table_(*real_, u0.n_cells), opts_(o), u_(u0.u), step_(u0.step), eps_(epsilon),
          c_(u0.mean()) {
        if (!(epsilon > 0.0)) throw ConfigError("direct viscous: epsilon must be positive");
    }

    void advance() {
        apply_cell_kick(u_, table_, step_, s1_);
        muscl_advect(u_, real_->dt(), opts_, s1_, s2_);
        const int N = static_cast<int>(u_.size());
        const double r = 0.5 * eps_ * real_->dt() * N * N;
        solve_periodic_tridiagonal(-r, 1.0 + 2.0 * r, u_);
        ++step_;
    }
    void advance_to(std::int64_t n) {
        while (step_ < n) advance();
    }
    std::int64_t current_step() const { return step_; }
    ViscousSnapshot current() const {
        ViscousSnapshot s;
        static_cast<Snapshot&>(s) = snapshot_from_u(u_, step_);
        s.mean_c = c_;
        s.epsilon = eps_;
        return s;
    }

private:
    std::shared_ptr<const Realization> real_;
    NodeTable table_;
    DirectViscousOptions opts_;
    std::vector<double> u_, s1_, s2_;
    std::int64_t step_;
    double eps_, c_;
};

inline std::vector<ViscousSnapshot> direct_viscous_solve(std::shared_ptr<const Realization> r, const Snapshot& u0,
                                                         std::int64_t n1, double epsilon, int record_every = 1,
                                                         DirectViscousOptions o = {}) {
    DirectViscousRun run(std::move(r), u0, epsilon, o);
    std::vector<ViscousSnapshot> out{run.current()};
    while (run.current_step() < n1) {
        run.advance();
        if ((run.current_step() - u0.step) % record_every == 0 || run.current_step() == n1) out.push_back(run.current());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Feynman-Kac kernel
// ---------------------------------------------------------------------------

struct KernelEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
    double free_density = 0.0; // Gaussian bridge normalization
    /// log(estimate) computed stably from the log-weights.
    double log_estimate = 0.0;
};

/// Monte Carlo over discrete Brownian bridges (variance eps per unit time) from
/// (y, step2) to (x, step1), weight exp(-(1/eps) sum_n Phi_n(beta_n)).
inline KernelEstimate feynman_kac_kernel(const Realization& r, double x, std::int64_t step1, double y,
                                         std::int64_t step2, double epsilon, int n_samples, std::uint64_t seed) {
    if (step1 <= step2) throw ConfigError("feynman_kac: step1 must exceed step2");
    if (n_samples < 2) throw ConfigError("feynman_kac: need at least 2 samples");
    if (!(epsilon > 0.0)) throw ConfigError("feynman_kac: epsilon must be positive");
    const std::int64_t M = step1 - step2;
    const double dt = r.dt(), T = static_cast<double>(M) * dt;
    KernelEstimate out;
    out.free_density = std::exp(-(x - y) * (x - y) / (2.0 * epsilon * T)) / std::sqrt(2.0 * std::numbers::pi * epsilon * T);
    std::vector<double> logw(static_cast<std::size_t>(n_samples)), W(static_cast<std::size_t>(M + 1));
    const double sd = std::sqrt(epsilon * dt);
    for (int s = 0; s < n_samples; ++s) {
        W[0] = 0.0;
        for (std::int64_t n = 1; n <= M; ++n)
            W[static_cast<std::size_t>(n)] =
                W[static_cast<std::size_t>(n - 1)] +
                sd * rng::normal(seed, rng::Stream::feynman_kac, static_cast<std::uint64_t>(s), step2 + n);
        double a = 0.0;
        for (std::int64_t n = 0; n < M; ++n) {
            const double th = static_cast<double>(n) / static_cast<double>(M);
            const double beta = y + W[static_cast<std::size_t>(n)] - th * W[static_cast<std::size_t>(M)] + th * (x - y);
            a += r.potential(step2 + n, beta);
        }
        logw[static_cast<std::size_t>(s)] = -a / epsilon;
    }
    const double m = *std::max_element(logw.begin(), logw.end());
    std::vector<double> w(logw.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(logw[i] - m);
    const double mean = stats::mean(w), se = stats::std_error(w);
    out.estimate = out.free_density * std::exp(m) * mean;
    out.std_error = out.free_density * std::exp(m) * se;
    out.log_estimate = std::log(out.free_density) + m + std::log(mean);
    return out;
}

/// phi(x, step1) = E[phi0(x + W) exp(-(1/eps) sum_n Phi_n(x + W_n))] for c = 0, with
/// W a backward random walk of variance eps per unit time started at x and
/// log(phi0) given as a callable of the lifted position.
template <class LogPhi0>
KernelEstimate feynman_kac_solution(const Realization& r, double x, std::int64_t step1, std::int64_t step0,
                                    double epsilon, LogPhi0&& log_phi0, int n_samples, std::uint64_t seed) {
    if (step1 <= step0) throw ConfigError("feynman_kac: step1 must exceed step0");
    if (n_samples < 2) throw ConfigError("feynman_kac: need at least 2 samples");
    if (!(epsilon > 0.0)) throw ConfigError("feynman_kac: epsilon must be positive");
    const double sd = std::sqrt(epsilon * r.dt());
    std::vector<double> logw(static_cast<std::size_t>(n_samples));
    for (int s = 0; s < n_samples; ++s) {
        double beta = x, a = 0.0;
        for (std::int64_t n = step1 - 1; n >= step0; --n) {
            beta += sd * rng::normal(seed, rng::Stream::feynman_kac, static_cast<std::uint64_t>(s), n);
            a += r.potential(n, beta);
        }
        logw[static_cast<std::size_t>(s)] = -a / epsilon + log_phi0(beta);
    }
    const double m = *std::max_element(logw.begin(), logw.end());
    std::vector<double> w(logw.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(logw[i] - m);
    KernelEstimate out;
    out.free_density = 1.0;
    out.estimate = std::exp(m) * stats::mean(w);
    out.std_error = std::exp(m) * stats::std_error(w);
    out.log_estimate = m + std::log(stats::mean(w));
    return out;
}

// ---------------------------------------------------------------------------
// Zero-viscosity comparison
// ---------------------------------------------------------------------------

struct ZeroViscRow {
    double epsilon = 0.0;
    double off_shock_max_dev = 0.0;
    double off_shock_L1_dev = 0.0;
    int n_masked_cells = 0;
};

struct ZeroViscTable {
    std::vector<ZeroViscRow> rows;
    Snapshot inviscid;
    /// Each max deviation at most `slack` times the previous one, and the last
    /// strictly below the first.
    bool monotone(double slack = 1.2) const {
        for (std::size_t k = 1; k < rows.size(); ++k)
            if (rows[k].off_shock_max_dev > slack * rows[k - 1].off_shock_max_dev) return false;
        return rows.size() < 2 || rows.back().off_shock_max_dev < rows.front().off_shock_max_dev;
    }
};

/// Cells within `margin` cells of a detected shock (including the cells of the jump).
inline std::vector<char> shock_mask(const Snapshot& s, double eta, int margin) {
    const int N = s.n_cells;
    std::vector<char> mask(static_cast<std::size_t>(N), 0);
    for (const auto& sh : detect_shocks(s, eta)) {
        int lo = sh.left_node - 1, hi = sh.right_node;
        if (hi < lo) hi += N;
        for (int i = lo - margin; i <= hi + margin; ++i) mask[static_cast<std::size_t>((i % N + N) % N)] = 1;
    }
    return mask;
}

inline ZeroViscRow compare_off_shock(const Snapshot& viscous, const Snapshot& inviscid, const std::vector<char>& mask,
                                     double epsilon) {
    ZeroViscRow row;
    row.epsilon = epsilon;
    for (int i = 0; i < inviscid.n_cells; ++i) {
        if (mask[static_cast<std::size_t>(i)]) {
            ++row.n_masked_cells;
            continue;
        }
        const double d = std::abs(viscous.u[static_cast<std::size_t>(i)] - inviscid.u[static_cast<std::size_t>(i)]);
        row.off_shock_max_dev = std::max(row.off_shock_max_dev, d);
        row.off_shock_L1_dev += d * inviscid.dx();
    }
    return row;
}

inline ZeroViscTable zero_visc_compare(std::shared_ptr<const Realization> r, int n_cells, const std::vector<double>& eps_list,
                                       std::int64_t T_back, double c = 0.0, int margin = 5) {
    for (std::size_t k = 1; k < eps_list.size(); ++k)
        if (!(eps_list[k] < eps_list[k - 1])) throw ConfigError("zero_visc_compare: eps_list must decrease");
    DpOptions o;
    o.keep_history = false;
    ZeroViscTable t;
    t.inviscid = pullback(r, n_cells, T_back, 0, c, o).current();
    const auto mask = shock_mask(t.inviscid, default_threshold(t.inviscid), margin);
    for (double eps : eps_list) {
        HopfColeRun hc(r, constant_snapshot(n_cells, -T_back, c), eps);
        hc.advance_to(0);
        t.rows.push_back(compare_off_shock(hc.current(), t.inviscid, mask, eps));
    }
    return t;
}

/// Columns: epsilon, off_shock_max_dev, off_shock_L1_dev, n_masked_cells.
inline void write_csv(std::ostream& os, const ZeroViscTable& t) {
    os << "epsilon,off_shock_max_dev,off_shock_L1_dev,n_masked_cells\n";
    os.precision(17);
    for (const auto& r : t.rows)
        os << r.epsilon << ',' << r.off_shock_max_dev << ',' << r.off_shock_L1_dev << ',' << r.n_masked_cells << '\n';
}

} // namespace sburgers
