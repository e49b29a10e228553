#pragma once

// Curves on the cylinder (lifted positions, winding kept), the discrete
// action functional and curve reconnection.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <vector>

#include "sburgers/errors.hpp"
#include "sburgers/forcing.hpp"

namespace sburgers {

/// Positions at grid times start_step, start_step+1, ... on the universal cover.
struct Curve {
    std::int64_t start_step = 0;
    double dt = 0.0;
    std::vector<double> positions;
    std::vector<double> velocities; // optional, one per position

    std::int64_t end_step() const { return start_step + static_cast<std::int64_t>(positions.size()) - 1; }
    std::size_t size() const { return positions.size(); }
    bool covers(std::int64_t n) const { return n >= start_step && n <= end_step(); }
    double at(std::int64_t n) const {
        if (!covers(n)) throw IndexError("curve: time index outside curve");
        return positions[static_cast<std::size_t>(n - start_step)];
    }
    /// (x_{n+1} - x_n) / dt for the segment starting at grid time n.
    double segment_velocity(std::int64_t n) const { return (at(n + 1) - at(n)) / dt; }
    double max_speed() const {
        double v = 0.0;
        for (std::size_t i = 0; i + 1 < positions.size(); ++i)
            v = std::max(v, std::abs(positions[i + 1] - positions[i]) / dt);
        return v;
    }

    void validate() const {
        if (positions.size() < 2) throw ConfigError("curve: needs at least two positions");
        if (!(dt > 0.0)) throw ConfigError("curve: dt must be positive");
        for (double x : positions)
            if (!std::isfinite(x)) throw ConfigError("curve: non-finite position");
    }

    /// Sub-curve on grid times [a, b].
    Curve slice(std::int64_t a, std::int64_t b) const {
        if (a < start_step || b > end_step() || a > b) throw IndexError("curve: slice outside curve");
        Curve c{a, dt, {positions.begin() + (a - start_step), positions.begin() + (b - start_step) + 1}, {}};
        if (!velocities.empty())
            c.velocities.assign(velocities.begin() + (a - start_step), velocities.begin() + (b - start_step) + 1);
        return c;
    }
};

struct ActionValue {
    double value = 0.0;
    double mean_velocity_c = 0.0;
    std::int64_t first = 0; // grid time
    std::int64_t last = 0;  // grid time
};

/// sum_n [ ((x_{n+1} - x_n)/dt - c)^2 dt/2 + Phi_n(x_n) ] over grid times [first, last].
/// The potential is taken at the left end of each segment (Ito sum), which makes
/// the Euler-Lagrange equations of this sum the kick-drift integrator.
inline ActionValue action(const Curve& curve, const Realization& r, double c, std::int64_t first,
                          std::int64_t last) {
    if (std::abs(curve.dt - r.dt()) > 1e-15 * r.dt()) throw IndexError("action: curve dt differs from path dt");
    if (first < curve.start_step || last > curve.end_step() || first >= last)
        throw IndexError("action: window outside curve");
    if (first < r.first_step() || last > r.end_step()) throw IndexError("action: window outside path");
    const double dt = curve.dt;
    double s = 0.0;
    for (std::int64_t n = first; n < last; ++n) {
        const double x0 = curve.at(n), x1 = curve.at(n + 1);
        const double v = (x1 - x0) / dt - c;
        s += 0.5 * v * v * dt + r.potential(n, x0);
    }
    return {s, c, first, last};
}

inline ActionValue action(const Curve& curve, const Realization& r, double c) {
    return action(curve, r, c, curve.start_step, curve.end_step());
}

/// Checks A[first,last] = A[first,split] + A[split,last] to 1e-12 relative.
inline bool additivity_check(const Curve& curve, const Realization& r, double c, std::int64_t split) {
    if (split <= curve.start_step || split >= curve.end_step())
        throw ConfigError("additivity_check: split must leave two non-empty windows");
    const double full = action(curve, r, c).value;
    const double left = action(curve, r, c, curve.start_step, split).value;
    const double right = action(curve, r, c, split, curve.end_step()).value;
    const double scale = std::max({1.0, std::abs(full), std::abs(left) + std::abs(right)});
    return std::abs(full - (left + right)) <= 1e-12 * scale;
}

/// Distance on the circle R/Z.
inline double circle_distance(double x, double y) {
    double d = std::fmod(x - y, 1.0);
    if (d < 0) d += 1.0;
    return std::min(d, 1.0 - d);
}

/// Wraps a lifted coordinate into [0, 1).
inline double wrap01(double x) {
    double w = x - std::floor(x);
    return w >= 1.0 ? 0.0 : w;
}

struct Reconnection {
    Curve curve;
    /// max(|A(c1) - A(r)|, |A(c2) - A(r)|) over the window.
    double delta_action = 0.0;
    /// K ||c1 - c2||_{C^1} (1 + T) (1 + V)
    double bound = 0.0;
    double c1_distance = 0.0; // ||c1 - c2||_{C^1} on the window
    double constant = 0.0;    // K
};

/// Blends c1 into c2 linearly over grid times [first, last]; the returned curve
/// follows c1 before the window and c2 after it.
inline Reconnection reconnect(const Curve& c1, const Curve& c2, const Realization& r, double c,
                              std::int64_t first, std::int64_t last) {
    if (last - first < 2) throw ConfigError("reconnect: window must span at least 2 steps");
    if (!c1.covers(first) || !c1.covers(last) || !c2.covers(first) || !c2.covers(last))
        throw IndexError("reconnect: window outside curves");
    const double dt = c1.dt;
    const std::int64_t a = std::max(c1.start_step, c2.start_step);
    const std::int64_t b = std::min(c1.end_step(), c2.end_step());
    Reconnection out;
    out.curve.start_step = a;
    out.curve.dt = dt;
    for (std::int64_t n = a; n <= b; ++n) {
        double x;
        if (n <= first) x = c1.at(n);
        else if (n >= last) x = c2.at(n);
        else {
            const double th = static_cast<double>(n - first) / static_cast<double>(last - first);
            x = (1.0 - th) * c1.at(n) + th * c2.at(n);
        }
        out.curve.positions.push_back(x);
    }
    const double ar = action(out.curve, r, c, first, last).value;
    out.delta_action = std::max(std::abs(action(c1, r, c, first, last).value - ar),
                                std::abs(action(c2, r, c, first, last).value - ar));

    const double T = static_cast<double>(last - first) * dt;
    double D = 0.0, V = 0.0;
    for (std::int64_t n = first; n <= last; ++n) {
        D = std::max(D, std::abs(c1.at(n) - c2.at(n)));
        if (n < last) {
            D = std::max(D, std::abs((c1.at(n + 1) - c2.at(n + 1)) - (c1.at(n) - c2.at(n))) / dt);
            V = std::max({V, std::abs(c1.segment_velocity(n)), std::abs(c2.segment_velocity(n))});
        }
    }
    // Kinetic part: |dv| <= D (1 + 1/T); potential part via summation by parts
    // against the Brownian excursion M on the window.
    double M = 0.0;
    const auto& spec = r.spec();
    for (std::int64_t n = first; n <= last; ++n) {
        double s = 0.0;
        for (std::size_t k = 0; k < spec.size(); ++k)
            s += spec.modes[k].potential_cr_norm(2) *
                 std::abs(r.path().cumulative(k, n) - r.path().cumulative(k, first));
        M = std::max(M, s);
    }
    V += std::abs(c);
    out.constant = std::max(1.0, D * (1.0 + 1.0 / T) / 2.0) + 2.0 * M;
    out.c1_distance = D;
    out.bound = out.constant * D * (1.0 + T) * (1.0 + V);
    return out;
}

/// Columns: step, time, position_lifted, velocity.
inline void write_csv(std::ostream& os, const Curve& c) {
    os << "step,time,position_lifted,velocity\n";
    os.precision(17);
    for (std::size_t i = 0; i < c.positions.size(); ++i) {
        const std::int64_t n = c.start_step + static_cast<std::int64_t>(i);
        double v;
        if (!c.velocities.empty()) v = c.velocities[i];
        else if (i + 1 < c.positions.size()) v = (c.positions[i + 1] - c.positions[i]) / c.dt;
        else v = (c.positions[i] - c.positions[i - 1]) / c.dt;
        os << n << ',' << static_cast<double>(n) * c.dt << ',' << c.positions[i] << ',' << v << '\n';
    }
}

} // namespace sburgers
