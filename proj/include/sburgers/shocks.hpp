#pragma once

// Shock detection on grid profiles, covered intervals from extreme backward
// characteristics, shock genealogy, the main shock and collision statistics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sburgers/errors.hpp"
#include "sburgers/forcing.hpp"
#include "sburgers/geometry.hpp"
#include "sburgers/inviscid.hpp"
#include "sburgers/minimizers.hpp"
#include "sburgers/stats.hpp"

namespace sburgers {

struct ShockRecord {
    int id = -1;
    std::int64_t step = 0;
    int cell = 0; // left cell of the steepest interface
    /// Nodes bounding the smeared jump: the last node of the left state and the
    /// first node of the right state.
    int left_node = 0;
    int right_node = 0;
    double position = 0.0; // in [0, 1)
    double u_left = 0.0;
    double u_right = 0.0;
    std::vector<int> parents;
    std::int64_t birth_step = 0;

    double strength() const { return u_left - u_right; }
};

/// Default threshold: 5 dx times the velocity scale (at least 1).
inline double default_threshold(const Snapshot& s) { return 5.0 * s.dx() * std::max(1.0, s.max_abs()); }

/// Interfaces with u_i - u_{i+1} > eta, grouped into runs of adjacent flagged
/// interfaces. Positions follow the equal-area rule inside each run.
inline std::vector<ShockRecord> detect_shocks(const Snapshot& s, double eta) {
    if (!(eta > 0.0)) throw ConfigError("detect_shocks: threshold must be positive");
    const int N = s.n_cells;
    auto u = [&](long i) { return s.u[static_cast<std::size_t>(((i % N) + N) % N)]; };
    std::vector<char> flag(static_cast<std::size_t>(N));
    bool any = false, all = true;
    for (int i = 0; i < N; ++i) {
        flag[static_cast<std::size_t>(i)] = u(i) - u(i + 1) > eta;
        any = any || flag[static_cast<std::size_t>(i)];
        all = all && flag[static_cast<std::size_t>(i)];
    }
    std::vector<ShockRecord> out;
    if (!any || all) return out;
    // start scanning just after an unflagged interface so runs do not wrap
    int start = 0;
    while (flag[static_cast<std::size_t>(start)]) ++start;
    const double dx = s.dx();
    for (int k = 1; k <= N; ++k) {
        const int i0 = (start + k) % N;
        if (!flag[static_cast<std::size_t>(i0)] || flag[static_cast<std::size_t>((i0 - 1 + N) % N)]) continue;
        long i1 = i0;
        while (flag[static_cast<std::size_t>((i1 + 1) % N)]) ++i1;
        ShockRecord r;
        r.step = s.step;
        r.birth_step = s.step;
        r.u_left = u(i0);
        r.u_right = u(i1 + 1);
        double steep = -1.0;
        for (long i = i0; i <= i1; ++i)
            if (u(i) - u(i + 1) > steep) {
                steep = u(i) - u(i + 1);
                r.cell = static_cast<int>(i % N);
            }
        r.left_node = (i0 + 1) % N;
        r.right_node = static_cast<int>((i1 + 1) % N);
        // cells i0..i1+1 span [x_{i0}, x_{i1+2}]
        double mass = 0.0;
        for (long i = i0; i <= i1 + 1; ++i) mass += u(i) * dx;
        const double xa = i0 * dx, xb = static_cast<double>(i1 + 2) * dx;
        double z = (mass - r.u_right * xb + r.u_left * xa) / (r.u_left - r.u_right);
        z = std::clamp(z, xa, xb);
        r.position = wrap01(z);
        out.push_back(r);
    }
    std::sort(out.begin(), out.end(), [](const ShockRecord& a, const ShockRecord& b) { return a.position < b.position; });
    for (std::size_t k = 0; k < out.size(); ++k) out[k].id = static_cast<int>(k);
    return out;
}

struct CoveredInterval {
    int shock_id = -1;
    std::int64_t base_step = 0;
    double left = 0.0;  // gamma^-(t1), lifted
    double right = 0.0; // gamma^+(t1), lifted
    Curve gamma_minus;
    Curve gamma_plus;

    double raw_length() const { return right - left; }
    double length() const { return std::clamp(right - left, 0.0, 1.0); }
    /// Integer part of the lifted displacement across the interval.
    long winding() const { return std::lround(right - left); }
    /// Whether circle point x lies in the interval.
    bool contains(double x) const {
        if (raw_length() >= 1.0) return true;
        const double y = left + wrap01(x - left);
        return y >= left && y <= right;
    }
};

/// Leftmost characteristic from the left node and rightmost characteristic from
/// the right node, followed back to base_step. The right node is lifted so the
/// pair brackets the jump.
inline CoveredInterval covered_interval(const LaxOleinikRun& run, const ShockRecord& shock, std::int64_t base_step) {
    if (!run.has_history()) throw StateError("covered_interval: run kept no history");
    if (base_step < run.start_step() || base_step > shock.step)
        throw StateError("covered_interval: base step outside the stored tables");
    const double dx = run.dx();
    const double xl = shock.left_node * dx;
    double xr = shock.right_node * dx;
    if (xr < xl) xr += 1.0;
    CoveredInterval ci;
    ci.shock_id = shock.id;
    ci.base_step = base_step;
    ci.gamma_minus = run.backward_characteristic(xl, shock.step, Side::leftmost, base_step);
    ci.gamma_plus = run.backward_characteristic(xr, shock.step, Side::rightmost, base_step);
    ci.left = ci.gamma_minus.at(base_step);
    ci.right = ci.gamma_plus.at(base_step);
    return ci;
}

/// Largest overlap between distinct covered intervals (0 when disjoint).
inline double max_overlap(const std::vector<CoveredInterval>& cis) {
    double worst = 0.0;
    for (std::size_t a = 0; a < cis.size(); ++a)
        for (std::size_t b = a + 1; b < cis.size(); ++b) {
            const auto& p = cis[a];
            const auto& q = cis[b];
            for (int m = -1; m <= 1; ++m) {
                const double lo = std::max(p.left, q.left + m), hi = std::min(p.right, q.right + m);
                worst = std::max(worst, hi - lo);
            }
        }
    return worst;
}

// ---------------------------------------------------------------------------
// Genealogy
// ---------------------------------------------------------------------------

struct ShockTrack {
    enum class End { alive, merged, vanished };
    int id = -1;
    std::int64_t birth_step = 0;
    std::int64_t last_step = 0;
    std::vector<int> parents;
    std::vector<double> positions; // unwrapped
    std::vector<double> strengths;
    End end = End::alive;
    int merged_into = -1;
};

struct MergeEvent {
    std::int64_t step = 0;
    std::vector<int> parents;
    int child = -1;
};

struct Genealogy {
    std::vector<ShockTrack> tracks;
    std::vector<MergeEvent> merges;
    int births = 0;
    int vanishings = 0;
    int continuations = 0;
    std::vector<std::string> warnings;
    double max_abs_u = 0.0;

    std::vector<int> alive() const {
        std::vector<int> ids;
        for (const auto& t : tracks)
            if (t.end == ShockTrack::End::alive) ids.push_back(t.id);
        return ids;
    }

    /// Largest |dz/dt| over every track.
    double max_track_speed(double dt) const {
        double v = 0.0;
        for (const auto& t : tracks)
            for (std::size_t i = 1; i < t.positions.size(); ++i)
                v = std::max(v, std::abs(t.positions[i] - t.positions[i - 1]) / dt);
        return v;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["nodes"] = nlohmann::json::array();
        for (const auto& t : tracks) {
            const char* end = t.end == ShockTrack::End::alive ? "alive"
                              : t.end == ShockTrack::End::merged ? "merged"
                                                                 : "vanished";
            j["nodes"].push_back({{"id", t.id},
                                  {"birth_step", t.birth_step},
                                  {"last_step", t.last_step},
                                  {"position", t.positions.empty() ? 0.0 : wrap01(t.positions.back())},
                                  {"u_left_minus_u_right", t.strengths.empty() ? 0.0 : t.strengths.back()},
                                  {"parents", t.parents},
                                  {"end", end}});
        }
        j["edges"] = nlohmann::json::array();
        for (const auto& m : merges)
            for (int p : m.parents) j["edges"].push_back({{"from", p}, {"to", m.child}, {"step", m.step}});
        j["births"] = births;
        j["vanishings"] = vanishings;
        j["warnings"] = warnings;
        return j;
    }
};

/// Single-pass tracker: each shock of the new snapshot inherits the nearest
/// shocks of the previous one within the speed bound.
class GenealogyBuilder {
public:
    GenealogyBuilder(double eta, double dt) : eta_(eta), dt_(dt) {}

    void add(const Snapshot& s) {
        auto shocks = detect_shocks(s, eta_);
        g_.max_abs_u = std::max(g_.max_abs_u, s.max_abs());
        const double reach = (s.max_abs() + 1.0) * dt_ + 2.0 * s.dx();
        std::vector<std::vector<int>> heirs(shocks.size());
        for (int tid : active_) {
            const auto& t = g_.tracks[static_cast<std::size_t>(tid)];
            const double z = wrap01(t.positions.back());
            int best = -1;
            double bd = reach;
            for (std::size_t k = 0; k < shocks.size(); ++k) {
                const double d = circle_distance(z, shocks[k].position);
                if (d <= bd) {
                    bd = d;
                    best = static_cast<int>(k);
                }
            }
            if (best >= 0) heirs[static_cast<std::size_t>(best)].push_back(tid);
            else {
                g_.tracks[static_cast<std::size_t>(tid)].end = ShockTrack::End::vanished;
                ++g_.vanishings;
            }
        }
        std::vector<int> next;
        for (std::size_t k = 0; k < shocks.size(); ++k) {
            const auto& sh = shocks[k];
            const auto& from = heirs[k];
            if (from.size() == 1) {
                auto& t = g_.tracks[static_cast<std::size_t>(from[0])];
                const double prev = t.positions.back();
                t.positions.push_back(prev + unwrap(sh.position - wrap01(prev)));
                t.strengths.push_back(sh.strength());
                t.last_step = s.step;
                next.push_back(t.id);
                ++g_.continuations;
                continue;
            }
            ShockTrack t;
            t.id = static_cast<int>(g_.tracks.size());
            t.birth_step = s.step;
            t.last_step = s.step;
            t.parents = from;
            t.positions.push_back(sh.position);
            t.strengths.push_back(sh.strength());
            if (from.empty()) {
                if (started_) ++g_.births;
            } else {
                for (int p : from) {
                    g_.tracks[static_cast<std::size_t>(p)].end = ShockTrack::End::merged;
                    g_.tracks[static_cast<std::size_t>(p)].merged_into = t.id;
                }
                g_.merges.push_back({s.step, from, t.id});
            }
            next.push_back(t.id);
            g_.tracks.push_back(std::move(t));
        }
        active_ = std::move(next);
        started_ = true;
    }

    const Genealogy& result() const { return g_; }

private:
    static double unwrap(double d) { return d - std::round(d); }

    double eta_, dt_;
    Genealogy g_;
    std::vector<int> active_;
    bool started_ = false;
};

inline Genealogy track_genealogy(const std::vector<Snapshot>& snaps, double eta, double dt) {
    GenealogyBuilder b(eta, dt);
    for (const auto& s : snaps) b.add(s);
    return b.result();
}

/// Fraction of snapshots having a detected shock within `radius` of each site.
inline std::vector<double> shock_occupancy(const std::vector<Snapshot>& snaps, const std::vector<double>& sites,
                                           double radius, std::optional<double> eta = std::nullopt) {
    if (snaps.empty()) throw DomainError("shock_occupancy: no snapshots");
    std::vector<double> hits(sites.size(), 0.0);
    for (const auto& s : snaps) {
        const auto shocks = detect_shocks(s, eta.value_or(default_threshold(s)));
        for (std::size_t k = 0; k < sites.size(); ++k)
            for (const auto& sh : shocks)
                if (circle_distance(sh.position, sites[k]) <= radius) {
                    hits[k] += 1.0;
                    break;
                }
    }
    for (double& h : hits) h /= static_cast<double>(snaps.size());
    return hits;
}

// ---------------------------------------------------------------------------
// Main shock
// ---------------------------------------------------------------------------

struct MainShock {
    ShockRecord shock;
    CoveredInterval interval;
    std::vector<CoveredInterval> all; // every step-`at` shock, same base step
};

/// The unique shock at the run's current step whose covered interval at the run's
/// start step has length >= min_length.
inline MainShock main_shock(const LaxOleinikRun& run, double eta, double min_length = 0.9) {
    const Snapshot s = run.current();
    const auto shocks = detect_shocks(s, eta);
    MainShock out;
    std::vector<std::size_t> qualifying;
    for (std::size_t k = 0; k < shocks.size(); ++k) {
        out.all.push_back(covered_interval(run, shocks[k], run.start_step()));
        if (out.all.back().raw_length() >= min_length) qualifying.push_back(k);
    }
    if (qualifying.size() > 1)
        throw DegeneracyError("main_shock: " + std::to_string(qualifying.size()) + " shocks share the cover");
    if (qualifying.empty()) {
        // several shocks splitting the circle between them with none dominant
        double total = 0.0;
        for (const auto& ci : out.all) total += ci.length();
        if (out.all.size() >= 2 && total >= min_length)
            throw DegeneracyError("main_shock: cover split among " + std::to_string(out.all.size()) + " shocks");
        throw HorizonTooShortError("main_shock: no shock covers " + std::to_string(min_length) +
                                   " of the circle; lengthen T_back");
    }
    out.shock = shocks[qualifying[0]];
    out.interval = out.all[qualifying[0]];
    return out;
}

inline MainShock main_shock(std::shared_ptr<const Realization> r, int n_cells, std::int64_t at_step,
                            std::int64_t T_back, double c = 0.0, std::optional<double> eta = std::nullopt,
                            double min_length = 0.9) {
    auto run = pullback(std::move(r), n_cells, T_back, at_step, c);
    return main_shock(run, eta.value_or(default_threshold(run.current())), min_length);
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

struct MergeEstimate {
    stats::Interval probability;
    std::int64_t merged = 0;
    std::int64_t trials = 0;
};

/// Whether x1 and x2 at step n0 have entered a common shock by step n0 + tau_steps,
/// starting from u = c at n0.
inline bool points_merge(std::shared_ptr<const Realization> r, int n_cells, double x1, double x2, std::int64_t n0,
                         std::int64_t tau_steps, double c = 0.0) {
    if (circle_distance(x1, x2) == 0.0) return true;
    auto run = solve(std::move(r), constant_snapshot(n_cells, n0, c), n0 + tau_steps, c);
    const Snapshot s = run.current();
    for (const auto& sh : detect_shocks(s, default_threshold(s))) {
        const auto ci = covered_interval(run, sh, n0);
        if (ci.contains(x1) && ci.contains(x2)) {
            // both points must sit on one arc of the interval
            const double a = ci.left + wrap01(x1 - ci.left), b = ci.left + wrap01(x2 - ci.left);
            if (a <= ci.right && b <= ci.right) return true;
        }
    }
    return false;
}

inline MergeEstimate merge_probability(const ForcingSpec& spec, const std::vector<std::uint64_t>& seeds, double x1,
                                       double x2, double tau, int n_cells = 256, double dt = 1e-3) {
    if (seeds.size() < 100) throw ConfigError("merge_probability: need at least 100 seeds");
    const auto steps = static_cast<std::int64_t>(std::llround(tau / dt));
    MergeEstimate out;
    for (auto seed : seeds) {
        auto r = std::make_shared<const Realization>(spec, sample_path(spec, seed, dt, steps, 0));
        out.merged += points_merge(r, n_cells, x1, x2, 0, steps) ? 1 : 0;
        ++out.trials;
    }
    out.probability = stats::wilson(out.merged, out.trials);
    return out;
}

struct AbsorptionSeries {
    std::vector<double> lag;     // t0 - t1, time units
    std::vector<double> deficit; // 1 - l(t1)
};

/// 1 - l(t1) of the main shock at the run's current step, at base steps every
/// `stride` steps back to the start of the run.
inline AbsorptionSeries absorption_series(const LaxOleinikRun& run, const ShockRecord& main, std::int64_t stride) {
    AbsorptionSeries s;
    const auto ci = covered_interval(run, main, run.start_step());
    for (std::int64_t t1 = run.current_step() - stride; t1 >= run.start_step(); t1 -= stride) {
        s.lag.push_back(static_cast<double>(run.current_step() - t1) * run.dt());
        s.deficit.push_back(1.0 - (ci.gamma_plus.at(t1) - ci.gamma_minus.at(t1)));
    }
    return s;
}

struct AbsorptionFit {
    double rate = 0.0;      // C1_hat: decay rate of the median deficit
    double prefactor = 0.0; // K1_hat
    double r2 = 0.0;
    double slope = 0.0; // of log(1 - l) against lag
    int points = 0;
    int seeds_used = 0;
};

/// Fits log(median deficit) against lag over lags where the median exceeds floor.
inline AbsorptionFit fit_absorption(const std::vector<AbsorptionSeries>& series, double floor = 1e-10) {
    AbsorptionFit f;
    if (series.empty()) throw DomainError("absorption fit: no series");
    const std::size_t n = series.front().lag.size();
    std::vector<double> x, y;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> col;
        for (const auto& s : series)
            if (i < s.deficit.size()) col.push_back(s.deficit[i]);
        const double m = stats::median(col);
        if (!(m > floor)) break;
        x.push_back(series.front().lag[i]);
        y.push_back(std::log(m));
    }
    f.points = static_cast<int>(x.size());
    f.seeds_used = static_cast<int>(series.size());
    if (x.size() < 3) throw DomainError("absorption fit: fewer than 3 usable lags");
    const auto lf = stats::linear_fit(x, y);
    f.slope = lf.slope;
    f.rate = -lf.slope;
    f.prefactor = std::exp(lf.intercept);
    f.r2 = lf.r2;
    return f;
}

/// Main-shock absorption series per seed, fitted on the ensemble median.
inline AbsorptionFit absorption_rate_fit(const ForcingSpec& spec, const std::vector<std::uint64_t>& seeds,
                                         double horizon, int n_cells = 256, double dt = 1e-3, double sample_every = 0.05) {
    if (horizon < 8.0 - 1e-12) throw ConfigError("absorption_rate_fit: horizon must be >= 8 time units");
    if (spec.is_zero()) throw ConfigError("absorption_rate_fit: zero forcing has no shocks to absorb");
    const auto H = static_cast<std::int64_t>(std::llround(horizon / dt));
    const auto stride = static_cast<std::int64_t>(std::llround(sample_every / dt));
    std::vector<AbsorptionSeries> all;
    for (auto seed : seeds) {
        auto r = std::make_shared<const Realization>(spec, sample_path(spec, seed, dt, H, -H));
        auto run = pullback(r, n_cells, H, 0, 0.0);
        try {
            const auto ms = main_shock(run, default_threshold(run.current()));
            all.push_back(absorption_series(run, ms.shock, stride));
        } catch (const CheckError&) {
            continue;
        }
    }
    return fit_absorption(all);
}

} // namespace sburgers
