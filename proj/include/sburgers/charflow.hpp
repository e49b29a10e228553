#pragma once

// Characteristics dx = v dt, dv = sum_k f_k(x) dB_k integrated by kick-then-drift
// (symplectic Euler), and the 2x2 tangent cocycle of that map.

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "sburgers/errors.hpp"
#include "sburgers/forcing.hpp"
#include "sburgers/geometry.hpp"

namespace sburgers {

struct PhasePoint {
    double x = 0.0; // lifted position
    double v = 0.0;
};

enum class Direction { forward, backward };

struct JacobiMatrix {
    double j11 = 1.0, j12 = 0.0, j21 = 0.0, j22 = 1.0;

    double det() const { return j11 * j22 - j12 * j21; }
    friend JacobiMatrix operator*(const JacobiMatrix& a, const JacobiMatrix& b) {
        return {a.j11 * b.j11 + a.j12 * b.j21, a.j11 * b.j12 + a.j12 * b.j22,
                a.j21 * b.j11 + a.j22 * b.j21, a.j21 * b.j12 + a.j22 * b.j22};
    }
    std::array<double, 2> apply(const std::array<double, 2>& v) const {
        return {j11 * v[0] + j12 * v[1], j21 * v[0] + j22 * v[1]};
    }
};

/// Forward: maps the state at grid time n to n+1 (v' = v + kick(x), x' = x + v' dt).
/// Backward: exact inverse of step n, mapping time n+1 to n.
inline PhasePoint step(PhasePoint p, const Realization& r, std::int64_t n, Direction dir) {
    if (!r.path().contains(n)) throw IndexError("charflow step: step outside path");
    const double dt = r.dt();
    if (dir == Direction::forward) {
        const double v = p.v + r.force(n, p.x);
        return {p.x + v * dt, v};
    }
    const double x = p.x - p.v * dt;
    return {x, p.v - r.force(n, x)};
}

/// States at grid times n0, n0±1, ..., n1.
inline std::vector<PhasePoint> flow(PhasePoint p, const Realization& r, std::int64_t n0, std::int64_t n1) {
    std::vector<PhasePoint> out;
    out.reserve(static_cast<std::size_t>(std::abs(n1 - n0)) + 1);
    out.push_back(p);
    if (n1 >= n0) {
        for (std::int64_t n = n0; n < n1; ++n) out.push_back(p = step(p, r, n, Direction::forward));
    } else {
        for (std::int64_t n = n0 - 1; n >= n1; --n) out.push_back(p = step(p, r, n, Direction::backward));
    }
    return out;
}

/// Tangent matrix of step n at position x (x is the position at grid time n).
inline JacobiMatrix step_tangent(double x, const Realization& r, std::int64_t n, Direction dir) {
    if (!r.path().contains(n)) throw IndexError("jacobi step: step outside path");
    const double b = r.force_derivative(n, x);
    const double dt = r.dt();
    if (dir == Direction::forward) return {1.0 + b * dt, dt, b, 1.0};
    return {1.0, -dt, -b, 1.0 + b * dt};
}

inline JacobiMatrix jacobi_step(const JacobiMatrix& J, double x, const Realization& r, std::int64_t n,
                                Direction dir) {
    return step_tangent(x, r, n, dir) * J;
}

struct CocycleResult {
    double log_growth = 0.0;
    std::array<double, 2> direction{1.0, 0.0};
    /// Per-step log norm increments, in propagation order.
    std::vector<double> increments;
};

/// Pushes `v_init` along the positions of `orbit` from grid time n0 to n1
/// (either direction), renormalizing every step.
inline CocycleResult cocycle_along(const Curve& orbit, const Realization& r, std::int64_t n0, std::int64_t n1,
                                   std::array<double, 2> v_init, bool keep_increments = false) {
    double norm = std::hypot(v_init[0], v_init[1]);
    if (!(norm > 0.0)) throw DomainError("cocycle: initial vector must be nonzero");
    if (!orbit.covers(n0) || !orbit.covers(n1)) throw IndexError("cocycle: orbit does not cover window");
    std::array<double, 2> v{v_init[0] / norm, v_init[1] / norm};
    CocycleResult out;
    if (keep_increments) out.increments.reserve(static_cast<std::size_t>(std::abs(n1 - n0)));
    auto push = [&](const JacobiMatrix& M) {
        v = M.apply(v);
        const double g = std::hypot(v[0], v[1]);
        v[0] /= g;
        v[1] /= g;
        out.log_growth += std::log(g);
        if (keep_increments) out.increments.push_back(std::log(g));
    };
    if (n1 >= n0) {
        for (std::int64_t n = n0; n < n1; ++n) push(step_tangent(orbit.at(n), r, n, Direction::forward));
    } else {
        for (std::int64_t n = n0 - 1; n >= n1; --n) push(step_tangent(orbit.at(n), r, n, Direction::backward));
    }
    out.direction = v;
    return out;
}

/// Cocycle along the kick-drift orbit of p0.
inline CocycleResult cocycle(PhasePoint p0, const Realization& r, std::int64_t n0, std::int64_t n1,
                             std::array<double, 2> v_init) {
    if (!(std::hypot(v_init[0], v_init[1]) > 0.0)) throw DomainError("cocycle: initial vector must be nonzero");
    const auto pts = flow(p0, r, n0, n1);
    Curve orbit;
    orbit.dt = r.dt();
    orbit.start_step = std::min(n0, n1);
    orbit.positions.resize(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const std::size_t j = n1 >= n0 ? i : pts.size() - 1 - i;
        orbit.positions[j] = pts[i].x;
    }
    return cocycle_along(orbit, r, n0, n1, v_init);
}

} // namespace sburgers
