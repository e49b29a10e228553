#pragma once

// Run configuration, experiment drivers, manifests and the ensemble statistics
// (ergodicity comparison, mollification sweep, invariant-profile sampler).

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "sburgers/errors.hpp"
#include "sburgers/forcing.hpp"
#include "sburgers/hyperbolic.hpp"
#include "sburgers/inviscid.hpp"
#include "sburgers/minimizers.hpp"
#include "sburgers/shocks.hpp"
#include "sburgers/stats.hpp"
#include "sburgers/viscous.hpp"

#ifndef SBURGERS_VERSION
#define SBURGERS_VERSION "0.1.0"
#endif

namespace sburgers {

inline constexpr const char* kCodeVersion = SBURGERS_VERSION;

inline const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names{"profile",         "mainshock",   "lyapunov", "structure",
                                                "viscous_compare", "merge_stats", "mollify",  "ensemble",
                                                "ergodicity"};
    return names;
}

/// Times are in time units, converted to steps with dt.
struct RunConfig {
    std::string experiment = "profile";
    std::string forcing = "ekms3"; // preset name or "modes = [...]" text
    double amplitude_scale = 1.0;
    std::vector<std::uint64_t> seeds{1};
    double dt = 1e-3;
    int n_cells = 256;
    double c = 0.0;
    double T_back = 8.0;
    double T_forward = 1.0;
    std::optional<double> eta;
    int search_width = 1; // lower bound of the adaptive DP window
    std::string dp_mode = "semi_lagrangian";
    std::vector<double> eps_list{0.1, 0.05, 0.025};
    int n_samples = 400;
    std::vector<double> delta_list{16.0, 8.0, 4.0, 2.0}; // multiples of dt
    double x1 = 0.125;
    double x2 = 0.875;
    double tau = 1.0;
    int n_absorption_seeds = 10;
    double burn_in = 8.0;
    double T_long = 32.0;
    int n_ensemble = 32;
    bool with_lyapunov = false;
    std::string out_dir = "out";
    int workers = 1;

    std::int64_t steps(double t) const { return static_cast<std::int64_t>(std::llround(t / dt)); }

    ForcingSpec forcing_spec() const {
        ForcingSpec s = forcing.find("modes") != std::string::npos ? forcing_from_text(forcing) : preset_spec(forcing);
        return scaled(std::move(s), amplitude_scale);
    }

    DpMode mode() const {
        if (dp_mode == "semi_lagrangian") return DpMode::semi_lagrangian;
        if (dp_mode == "semi_lagrangian_linear") return DpMode::semi_lagrangian_linear;
        if (dp_mode == "lattice") return DpMode::lattice;
        throw ConfigError("config field 'dp_mode': unknown mode '" + dp_mode + "'");
    }

    DpOptions dp_options(bool keep_history) const {
        DpOptions o;
        o.mode = mode();
        o.keep_history = keep_history;
        o.min_width = search_width;
        return o;
    }

    void validate() const {
        auto fail = [](const std::string& field, const std::string& why) {
            throw ConfigError("config field '" + field + "': " + why);
        };
        if (std::find(experiment_names().begin(), experiment_names().end(), experiment) == experiment_names().end())
            fail("experiment", "unknown experiment '" + experiment + "'");
        try {
            forcing_spec().validate();
        } catch (const ConfigError& e) {
            fail("forcing", e.what());
        }
        if (!std::isfinite(amplitude_scale) || amplitude_scale < 0.0) fail("amplitude_scale", "must be finite and >= 0");
        if (seeds.empty()) fail("seeds", "must not be empty");
        if (!(dt > 0.0) || dt > 0.1) fail("dt", "must lie in (0, 0.1]");
        if (n_cells < 8) fail("n_cells", "must be >= 8");
        if (!std::isfinite(c)) fail("c", "must be finite");
        if (!(T_back > 0.0) || steps(T_back) < 1) fail("T_back", "must be at least one step");
        if (!(T_forward > 0.0)) fail("T_forward", "must be positive");
        if (eta && !(*eta > 0.0)) fail("eta", "must be positive");
        if (search_width < 1) fail("search_width", "must be >= 1");
        mode();
        if (eps_list.empty()) fail("eps_list", "must not be empty");
        for (std::size_t k = 0; k < eps_list.size(); ++k) {
            if (!(eps_list[k] > 0.0)) fail("eps_list", "entries must be positive");
            if (k && !(eps_list[k] < eps_list[k - 1])) fail("eps_list", "must be decreasing");
        }
        if (n_samples < 1) fail("n_samples", "must be positive");
        if (delta_list.size() < 3) fail("delta_list", "needs at least 3 entries");
        for (std::size_t k = 0; k < delta_list.size(); ++k) {
            if (!(delta_list[k] >= 1.0)) fail("delta_list", "entries must be >= 1 (multiples of dt)");
            if (k && !(delta_list[k] < delta_list[k - 1])) fail("delta_list", "must be decreasing");
        }
        if (!std::isfinite(x1) || !std::isfinite(x2)) fail("x1", "positions must be finite");
        if (!(tau > 0.0)) fail("tau", "must be positive");
        if (n_absorption_seeds < 1) fail("n_absorption_seeds", "must be positive");
        if (!(burn_in >= 0.0)) fail("burn_in", "must be >= 0");
        if (!(T_long > 0.0)) fail("T_long", "must be positive");
        if (n_ensemble < 1) fail("n_ensemble", "must be positive");
        if (out_dir.empty()) fail("out_dir", "must not be empty");
        if (workers < 1) fail("workers", "must be >= 1");
    }
};

inline nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j{{"experiment", c.experiment},
                     {"forcing", c.forcing},
                     {"amplitude_scale", c.amplitude_scale},
                     {"seeds", c.seeds},
                     {"dt", c.dt},
                     {"n_cells", c.n_cells},
                     {"c", c.c},
                     {"T_back", c.T_back},
                     {"T_forward", c.T_forward},
                     {"eta", nullptr},
                     {"search_width", c.search_width},
                     {"dp_mode", c.dp_mode},
                     {"eps_list", c.eps_list},
                     {"n_samples", c.n_samples},
                     {"delta_list", c.delta_list},
                     {"x1", c.x1},
                     {"x2", c.x2},
                     {"tau", c.tau},
                     {"n_absorption_seeds", c.n_absorption_seeds},
                     {"burn_in", c.burn_in},
                     {"T_long", c.T_long},
                     {"n_ensemble", c.n_ensemble},
                     {"with_lyapunov", c.with_lyapunov},
                     {"out_dir", c.out_dir},
                     {"workers", c.workers}};
    if (c.eta) j["eta"] = *c.eta;
    return j;
}

/// Missing fields keep their defaults; unknown or mistyped fields are errors.
inline RunConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    RunConfig c;
    const nlohmann::json known = to_json(c);
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.contains(it.key())) throw ConfigError("config field '" + it.key() + "': unknown field");
    auto get = [&](const char* key, auto& dst) {
        if (!j.contains(key)) return;
        try {
            j.at(key).get_to(dst);
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(std::string("config field '") + key + "': wrong type");
        }
    };
    get("experiment", c.experiment);
    get("forcing", c.forcing);
    get("amplitude_scale", c.amplitude_scale);
    get("seeds", c.seeds);
    get("dt", c.dt);
    get("n_cells", c.n_cells);
    get("c", c.c);
    get("T_back", c.T_back);
    get("T_forward", c.T_forward);
    if (j.contains("eta") && !j.at("eta").is_null()) {
        double e = 0.0;
        get("eta", e);
        c.eta = e;
    }
    get("search_width", c.search_width);
    get("dp_mode", c.dp_mode);
    get("eps_list", c.eps_list);
    get("n_samples", c.n_samples);
    get("delta_list", c.delta_list);
    get("x1", c.x1);
    get("x2", c.x2);
    get("tau", c.tau);
    get("n_absorption_seeds", c.n_absorption_seeds);
    get("burn_in", c.burn_in);
    get("T_long", c.T_long);
    get("n_ensemble", c.n_ensemble);
    get("with_lyapunov", c.with_lyapunov);
    get("out_dir", c.out_dir);
    get("workers", c.workers);
    c.validate();
    return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    return config_from_json(j);
}

/// FNV-1a of the canonical (key-sorted) JSON text.
inline std::string config_hash(const RunConfig& c) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : to_json(c).dump()) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
}

/// Path covering grid times [-steps(T_back + extra_back), steps(max(T_back, T_forward))].
inline std::shared_ptr<const Realization> make_realization(const RunConfig& c, std::uint64_t seed,
                                                           double extra_back = 0.0) {
    const ForcingSpec spec = c.forcing_spec();
    const std::int64_t first = -c.steps(c.T_back + extra_back);
    const std::int64_t last = c.steps(std::max(c.T_back, c.T_forward));
    return std::make_shared<const Realization>(spec, sample_path(spec, seed, c.dt, last - first, first));
}

/// Runs fn(i) for i in [0, n) on `workers` threads; the first exception is rethrown.
inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex m;
    std::vector<std::thread> pool;
    for (int w = 0; w < std::min<int>(workers, static_cast<int>(n)); ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lk(m);
                    if (!err) err = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

// ---------------------------------------------------------------------------
// Ergodicity
// ---------------------------------------------------------------------------

struct ObservableComparison {
    std::string name;
    double time_average = 0.0;
    double time_se = 0.0;
    double ensemble_average = 0.0;
    double ensemble_se = 0.0;
    double z = 0.0;
};

struct ErgodicityReport {
    std::vector<ObservableComparison> observables;
    std::vector<ObservableComparison> control; // ensemble without burn-in
    double control_burn_in = 0.0;
    bool passes = true;
    bool control_inflated = false;
    nlohmann::json to_json() const {
        auto rows = [](const std::vector<ObservableComparison>& v) {
            nlohmann::json a = nlohmann::json::array();
            for (const auto& o : v)
                a.push_back({{"name", o.name},
                             {"time_average", o.time_average},
                             {"time_se", o.time_se},
                             {"ensemble_average", o.ensemble_average},
                             {"ensemble_se", o.ensemble_se},
                             {"z", o.z}});
            return a;
        };
        return {{"observables", rows(observables)},
                {"control", rows(control)},
                {"control_burn_in", control_burn_in},
                {"passes", passes},
                {"control_inflated", control_inflated}};
    }
};

/// Spatial mean of u^2 and the detected shock count.
inline std::array<double, 2> bounded_observables(const Snapshot& s, std::optional<double> eta) {
    double q = 0.0;
    for (double v : s.u) q += v * v;
    return {q / s.n_cells, static_cast<double>(detect_shocks(s, eta.value_or(default_threshold(s))).size())};
}

/// Denominator floored at 1e-12 max(|a|, |b|).
inline double z_score(double a, double sa, double b, double sb) {
    const double s = std::max(std::hypot(sa, sb), 1e-12 * std::max(std::abs(a), std::abs(b)));
    if (s == 0.0) return a == b ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), a - b);
    return (a - b) / s;
}

/// Time average along one trajectory (seeds[0], from u = c at 0, after burn-in,
/// batch means over 2-unit blocks) against the ensemble at a fixed time over seeds
/// seeds[0]+1 .. seeds[0]+n_seeds. The control repeats the ensemble with a
/// 0.02-unit burn-in.
inline ErgodicityReport ergodicity_check(const RunConfig& cfg, double T_long, int n_seeds) {
    if (T_long < 32.0 - 1e-9) throw ConfigError("ergodicity: T_long must be >= 32 time units");
    if (n_seeds < 32) throw ConfigError("ergodicity: n_seeds must be >= 32");
    const ForcingSpec spec = cfg.forcing_spec();
    const std::int64_t burn = cfg.steps(cfg.burn_in), total = burn + cfg.steps(T_long);
    const std::int64_t every = std::max<std::int64_t>(1, cfg.steps(0.05));
    const std::int64_t block = cfg.steps(2.0) / every;
    const std::uint64_t s0 = cfg.seeds.front();

    std::array<std::vector<double>, 2> series;
    {
        auto r = std::make_shared<const Realization>(spec, sample_path(spec, s0, cfg.dt, total, 0));
        LaxOleinikRun run(r, constant_snapshot(cfg.n_cells, 0, cfg.c), cfg.c, cfg.dp_options(false));
        for (std::int64_t n = burn; n <= total; n += every) {
            run.advance_to(n);
            const auto o = bounded_observables(run.current(), cfg.eta);
            for (int k = 0; k < 2; ++k) series[static_cast<std::size_t>(k)].push_back(o[static_cast<std::size_t>(k)]);
        }
    }
    auto ensemble = [&](double burn_time) {
        std::vector<std::array<double, 2>> obs(static_cast<std::size_t>(n_seeds));
        const std::int64_t steps = std::max<std::int64_t>(1, cfg.steps(burn_time));
        parallel_for(obs.size(), cfg.workers, [&](std::size_t i) {
            auto r = std::make_shared<const Realization>(spec, sample_path(spec, s0 + 1 + i, cfg.dt, steps, -steps));
            obs[i] = bounded_observables(pullback(r, cfg.n_cells, steps, 0, cfg.c, cfg.dp_options(false)).current(),
                                         cfg.eta);
        });
        return obs;
    };
    const char* names[2] = {"mean_u2", "shock_count"};
    auto compare = [&](const std::vector<std::array<double, 2>>& obs) {
        std::vector<ObservableComparison> out;
        for (std::size_t k = 0; k < 2; ++k) {
            ObservableComparison c;
            c.name = names[k];
            const auto& x = series[k];
            std::vector<double> bm;
            for (std::size_t b = 0; b + static_cast<std::size_t>(block) <= x.size(); b += static_cast<std::size_t>(block))
                bm.push_back(stats::mean(std::span(x).subspan(b, static_cast<std::size_t>(block))));
            c.time_average = stats::mean(x);
            c.time_se = stats::std_error(bm);
            std::vector<double> e;
            for (const auto& o : obs) e.push_back(o[k]);
            c.ensemble_average = stats::mean(e);
            c.ensemble_se = stats::std_error(e);
            c.z = z_score(c.time_average, c.time_se, c.ensemble_average, c.ensemble_se);
            out.push_back(c);
        }
        return out;
    };
    ErgodicityReport rep;
    rep.observables = compare(ensemble(cfg.burn_in));
    rep.control_burn_in = 0.02;
    rep.control = compare(ensemble(rep.control_burn_in));
    for (const auto& o : rep.observables) rep.passes = rep.passes && std::abs(o.z) < 3.0;
    for (const auto& o : rep.control) rep.control_inflated = rep.control_inflated || std::abs(o.z) >= 3.0;
    return rep;
}

// ---------------------------------------------------------------------------
// Mollification
// ---------------------------------------------------------------------------

struct MollifyRow {
    double delta = 0.0; // time units
    double sup_error = 0.0;
};

struct MollifyTable {
    std::vector<MollifyRow> rows;
    double exponent = 0.0; // slope of log error against log delta
    double r2 = 0.0;
    bool monotone = false;
    bool passes() const { return monotone && exponent >= 0.3; }
};

/// True value function at step 0 on the nodes, from U = 0 at -T_back.
inline std::vector<double> value_at_nodes(std::shared_ptr<const Realization> r, const RunConfig& cfg) {
    auto run = pullback(std::move(r), cfg.n_cells, cfg.steps(cfg.T_back), 0, cfg.c, cfg.dp_options(false));
    std::vector<double> v(static_cast<std::size_t>(cfg.n_cells));
    for (int i = 0; i < cfg.n_cells; ++i) v[static_cast<std::size_t>(i)] = run.value(0, static_cast<double>(i) / cfg.n_cells);
    return v;
}

/// Sup-norm distance between value functions driven by the mollified and the raw
/// path, averaged over cfg.seeds; deltas are in multiples of dt.
inline MollifyTable mollification_convergence(const RunConfig& cfg, const std::vector<double>& delta_list) {
    if (delta_list.size() < 3) throw ConfigError("mollification: need at least 3 deltas");
    for (std::size_t k = 0; k < delta_list.size(); ++k) {
        if (!(delta_list[k] >= 1.0)) throw ConfigError("mollification: deltas must be >= dt");
        if (k && !(delta_list[k] < delta_list[k - 1])) throw ConfigError("mollification: deltas must decrease");
    }
    const std::size_t S = cfg.seeds.size(), K = delta_list.size();
    std::vector<double> err(S * K, 0.0);
    parallel_for(S, cfg.workers, [&](std::size_t s) {
        const auto base = make_realization(cfg, cfg.seeds[s]);
        const auto ref = value_at_nodes(base, cfg);
        for (std::size_t k = 0; k < K; ++k) {
            auto r = std::make_shared<const Realization>(base->spec(), mollify(base->path(), delta_list[k] * cfg.dt));
            const auto v = value_at_nodes(r, cfg);
            double e = 0.0;
            for (std::size_t i = 0; i < v.size(); ++i) e = std::max(e, std::abs(v[i] - ref[i]));
            err[s * K + k] = e;
        }
    });
    MollifyTable t;
    for (std::size_t k = 0; k < K; ++k) {
        double m = 0.0;
        for (std::size_t s = 0; s < S; ++s) m += err[s * K + k];
        t.rows.push_back({delta_list[k] * cfg.dt, m / static_cast<double>(S)});
    }
    t.monotone = true;
    for (std::size_t k = 1; k < t.rows.size(); ++k) t.monotone = t.monotone && t.rows[k].sup_error < t.rows[k - 1].sup_error;
    std::vector<double> x, y;
    for (const auto& row : t.rows)
        if (row.sup_error > 0.0) {
            x.push_back(std::log(row.delta));
            y.push_back(std::log(row.sup_error));
        }
    if (x.size() >= 2) {
        const auto f = stats::linear_fit(x, y);
        t.exponent = f.slope;
        t.r2 = f.r2;
    }
    return t;
}

// ---------------------------------------------------------------------------
// Invariant sampler
// ---------------------------------------------------------------------------

struct SeedRecord {
    std::uint64_t seed = 0;
    int shock_count = 0;
    std::optional<double> main_shock_position;
    std::optional<double> lambda;
    double mean_u = 0.0;
    double var_u = 0.0;
    double skew_u = 0.0;
    bool merged = false;
    double invariance_l1 = 0.0;

    nlohmann::json to_json() const {
        nlohmann::json j{{"seed", seed},       {"shock_count", shock_count}, {"main_shock_position", nullptr},
                         {"lambda", nullptr},  {"mean_u", mean_u},           {"var_u", var_u},
                         {"skew_u", skew_u},   {"merged", merged},           {"invariance_l1", invariance_l1}};
        if (main_shock_position) j["main_shock_position"] = *main_shock_position;
        if (lambda) j["lambda"] = *lambda;
        return j;
    }
};

struct Aggregate {
    int n = 0;
    double mean = 0.0;
    double se = 0.0;
    double lower = 0.0; // normal 95% interval
    double upper = 0.0;
};

struct EnsembleSummary {
    std::vector<SeedRecord> records;
    std::map<std::string, Aggregate> aggregates;
    double max_invariance_l1 = 0.0;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["records"] = nlohmann::json::array();
        for (const auto& r : records) j["records"].push_back(r.to_json());
        for (const auto& [k, a] : aggregates)
            j["aggregates"][k] = {{"n", a.n}, {"mean", a.mean}, {"se", a.se}, {"lower", a.lower}, {"upper", a.upper}};
        j["max_invariance_l1"] = max_invariance_l1;
        return j;
    }
};

/// Aggregates computed only from the per-seed records.
inline std::map<std::string, Aggregate> aggregate_records(const std::vector<SeedRecord>& recs) {
    std::map<std::string, std::vector<double>> cols;
    for (const auto& r : recs) {
        cols["shock_count"].push_back(r.shock_count);
        if (r.main_shock_position) cols["main_shock_position"].push_back(*r.main_shock_position);
        if (r.lambda) cols["lambda"].push_back(*r.lambda);
        cols["mean_u"].push_back(r.mean_u);
        cols["var_u"].push_back(r.var_u);
        cols["skew_u"].push_back(r.skew_u);
        cols["merged"].push_back(r.merged ? 1.0 : 0.0);
    }
    std::map<std::string, Aggregate> out;
    for (const auto& [k, v] : cols) {
        Aggregate a;
        a.n = static_cast<int>(v.size());
        a.mean = stats::mean(v);
        a.se = stats::std_error(v);
        a.lower = a.mean - 1.959963984540054 * a.se;
        a.upper = a.mean + 1.959963984540054 * a.se;
        out[k] = a;
    }
    return out;
}

/// Evolves the step -tau profile forward tau steps and returns its L1 distance
/// to the directly computed step-0 profile (both from u = c at -T_back).
inline double invariance_identity(std::shared_ptr<const Realization> r, const RunConfig& cfg, std::int64_t tau_steps) {
    const std::int64_t T = cfg.steps(cfg.T_back);
    if (tau_steps < 1 || tau_steps >= T) throw ConfigError("invariance: tau must lie in (0, T_back)");
    const auto o = cfg.dp_options(false);
    auto run = solve(r, constant_snapshot(cfg.n_cells, -T, cfg.c), -tau_steps, cfg.c, o);
    const Snapshot mid = run.current();
    run.advance_to(0);
    const Snapshot direct = run.current();
    const Snapshot evolved = solve(r, mid, 0, cfg.c, o).current();
    return l1_distance(direct, evolved);
}

inline SeedRecord sample_seed(const RunConfig& cfg, std::uint64_t seed) {
    auto r = make_realization(cfg, seed);
    SeedRecord rec;
    rec.seed = seed;
    const std::int64_t T = cfg.steps(cfg.T_back);
    auto run = pullback(r, cfg.n_cells, T, 0, cfg.c, cfg.dp_options(true));
    const Snapshot s = run.current();
    const double eta = cfg.eta.value_or(default_threshold(s));
    rec.shock_count = static_cast<int>(detect_shocks(s, eta).size());
    try {
        rec.main_shock_position = main_shock(run, eta).shock.position;
    } catch (const CheckError&) {
    }
    rec.mean_u = stats::mean(s.u);
    double m2 = 0.0, m3 = 0.0;
    for (double v : s.u) {
        m2 += (v - rec.mean_u) * (v - rec.mean_u);
        m3 += std::pow(v - rec.mean_u, 3);
    }
    m2 /= s.n_cells;
    m3 /= s.n_cells;
    rec.var_u = m2;
    rec.skew_u = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
    if (!r->spec().is_zero()) {
        const auto tau = std::min(cfg.steps(cfg.tau), r->end_step());
        rec.merged = points_merge(r, cfg.n_cells, cfg.x1, cfg.x2, 0, tau, cfg.c);
    }
    if (cfg.with_lyapunov) rec.lambda = lyapunov(r, cfg.n_cells, T, cfg.c).lambda_forward;
    rec.invariance_l1 = invariance_identity(r, cfg, std::max<std::int64_t>(1, T / 2));
    return rec;
}

inline EnsembleSummary invariant_sampler(const RunConfig& cfg, int n_seeds) {
    if (n_seeds < 8) throw ConfigError("invariant_sampler: n_seeds must be >= 8");
    EnsembleSummary e;
    e.records.resize(static_cast<std::size_t>(n_seeds));
    parallel_for(e.records.size(), cfg.workers, [&](std::size_t i) {
        const std::uint64_t seed = i < cfg.seeds.size() ? cfg.seeds[i] : cfg.seeds.back() + (i - cfg.seeds.size() + 1);
        e.records[i] = sample_seed(cfg, seed);
    });
    e.aggregates = aggregate_records(e.records);
    for (const auto& r : e.records) e.max_invariance_l1 = std::max(e.max_invariance_l1, r.invariance_l1);
    return e;
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

struct ExperimentResult {
    std::vector<std::filesystem::path> manifests;
    nlohmann::json summary;
    int check_failures = 0;
};

namespace detail {

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write '" + p.string() + "'");
    out << text;
}

inline void write_json(const std::filesystem::path& p, const nlohmann::json& j) { write_text(p, j.dump(2) + "\n"); }

template <class F>
std::string to_csv(F&& f) {
    std::ostringstream os;
    f(os);
    return os.str();
}

struct SeedOutput {
    nlohmann::json result;
    std::vector<std::string> files; // relative to out_dir
    bool check_failed = false;
};

inline SeedOutput run_seed(const RunConfig& cfg, std::uint64_t seed) {
    namespace fs = std::filesystem;
    const fs::path root = cfg.out_dir;
    const std::string dir = cfg.experiment + "/seed_" + std::to_string(seed) + "/";
    SeedOutput out;
    auto emit = [&](const std::string& name, const std::string& text) {
        write_text(root / (dir + name), text);
        out.files.push_back(dir + name);
    };
    auto r = make_realization(cfg, seed);
    const std::int64_t T = cfg.steps(cfg.T_back);
    nlohmann::json& res = out.result;
    res["seed"] = seed;
    if (cfg.experiment == "profile") {
        const auto p = one_sided_profile(r, cfg.n_cells, T, 0, cfg.c, cfg.mode());
        emit("profile.csv", to_csv([&](std::ostream& os) { write_csv(os, p.snapshot, cfg.dt); }));
        res["residual_half_horizon"] = p.residual;
        res["shock_count"] = detect_shocks(p.snapshot, cfg.eta.value_or(default_threshold(p.snapshot))).size();
    } else if (cfg.experiment == "mainshock") {
        auto run = pullback(r, cfg.n_cells, T, 0, cfg.c, cfg.dp_options(true));
        const double eta = cfg.eta.value_or(default_threshold(run.current()));
        try {
            const auto ms = main_shock(run, eta);
            res["status"] = "found";
            res["position"] = ms.shock.position;
            res["u_left"] = ms.shock.u_left;
            res["u_right"] = ms.shock.u_right;
            res["covered_left"] = ms.interval.left;
            res["covered_right"] = ms.interval.right;
            res["covered_length"] = ms.interval.raw_length();
            emit("gamma_minus.csv", to_csv([&](std::ostream& os) { write_csv(os, ms.interval.gamma_minus); }));
            emit("gamma_plus.csv", to_csv([&](std::ostream& os) { write_csv(os, ms.interval.gamma_plus); }));
        } catch (const DegeneracyError& e) {
            res["status"] = "degenerate";
            res["message"] = e.what();
            out.check_failed = true;
        } catch (const HorizonTooShortError& e) {
            res["status"] = "horizon_too_short";
            res["message"] = e.what();
            out.check_failed = true;
        }
    } else if (cfg.experiment == "lyapunov") {
        const auto rep = lyapunov(r, cfg.n_cells, T, cfg.c);
        res["lambda_forward"] = rep.lambda_forward;
        res["lambda_backward"] = rep.lambda_backward;
        res["sum"] = rep.lambda_forward + rep.lambda_backward;
        res["forward_ci"] = {rep.forward_ci.lower, rep.forward_ci.upper};
        res["direction_at_0"] = rep.direction_at_0;
        res["window_steps"] = rep.window_steps;
        out.check_failed = !(rep.forward_ci.lower > 0.0);
    } else if (cfg.experiment == "structure") {
        const auto tsm = two_sided_minimizer(r, cfg.n_cells, T, cfg.c, cfg.mode());
        auto run = pullback(r, cfg.n_cells, T, 0, cfg.c, cfg.dp_options(true));
        const double eta = cfg.eta.value_or(default_threshold(run.current()));
        auto rep = shock_structure_check(run, tsm.result.curve, -T / 2, eta);
        refine_count(rep, r, cfg.n_cells, T, cfg.c);
        const auto ap = action_parametrization(run, tsm.result.curve, -T / 2, eta);
        emit("action.csv", to_csv([&](std::ostream& os) { write_csv(os, ap); }));
        res["shock_count"] = rep.shock_count;
        res["refined_shock_count"] = rep.refined_shock_count.value_or(-1);
        res["max_action_gap"] = rep.max_action_gap;
        res["action_scale"] = rep.action_scale;
        res["equal_action"] = rep.equal_action;
        res["windings_zero"] = rep.windings_zero;
        res["main_winding_one"] = rep.main_winding_one;
        res["count_stable"] = rep.count_stable;
        res["note"] = rep.note;
        out.check_failed = !rep.passes();
    } else if (cfg.experiment == "viscous_compare") {
        const auto t = zero_visc_compare(r, cfg.n_cells, cfg.eps_list, T, cfg.c);
        emit("viscous_compare.csv", to_csv([&](std::ostream& os) { write_csv(os, t); }));
        res["monotone"] = t.monotone();
        out.check_failed = !t.monotone();
    } else {
        throw ConfigError("config field 'experiment': '" + cfg.experiment + "' is not a per-seed experiment");
    }
    return out;
}

inline nlohmann::json manifest(const RunConfig& cfg, std::uint64_t seed, const std::vector<std::string>& files,
                               double wall) {
    return {{"config", to_json(cfg)},
            {"config_hash", config_hash(cfg)},
            {"seed", seed},
            {"dt", cfg.dt},
            {"n_cells", cfg.n_cells},
            {"t_origin", -cfg.steps(cfg.T_back)},
            {"code_version", kCodeVersion},
            {"results", files},
            {"wall_time_s", wall}};
}

inline std::vector<std::uint64_t> seed_range(const RunConfig& cfg, std::size_t n) {
    std::vector<std::uint64_t> s(cfg.seeds.begin(), cfg.seeds.begin() + static_cast<long>(std::min(n, cfg.seeds.size())));
    while (s.size() < n) s.push_back(s.back() + 1);
    return s;
}

} // namespace detail

/// Executes the named experiment, writing CSV/JSON artifacts and manifests under
/// cfg.out_dir. Data files depend only on the configuration.
inline ExperimentResult run_experiment(const RunConfig& cfg) {
    namespace fs = std::filesystem;
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    auto wall = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
    const fs::path root = cfg.out_dir;
    ExperimentResult res;
    const std::string& e = cfg.experiment;
    auto single = [&](const std::string& name, const nlohmann::json& body, bool failed,
                      std::vector<std::string> files = {}) {
        detail::write_json(root / e / name, body);
        files.insert(files.begin(), e + "/" + name);
        const fs::path mp = root / e / "manifest.json";
        detail::write_json(mp, detail::manifest(cfg, cfg.seeds.front(), files, wall()));
        res.manifests.push_back(mp);
        res.summary = body;
        res.check_failures += failed ? 1 : 0;
    };
    if (e == "merge_stats") {
        const auto spec = cfg.forcing_spec();
        const auto seeds = detail::seed_range(cfg, std::max<std::size_t>(cfg.seeds.size(), static_cast<std::size_t>(cfg.n_samples)));
        const auto est = merge_probability(spec, seeds, cfg.x1, cfg.x2, cfg.tau, cfg.n_cells, cfg.dt);
        nlohmann::json body{{"merged", est.merged},
                            {"trials", est.trials},
                            {"probability", est.probability.estimate},
                            {"wilson_lower", est.probability.lower},
                            {"wilson_upper", est.probability.upper}};
        bool failed = !(est.probability.lower > 0.0);
        if (!spec.is_zero()) {
            const auto fit = absorption_rate_fit(spec, detail::seed_range(cfg, static_cast<std::size_t>(cfg.n_absorption_seeds)),
                                                 std::max(8.0, cfg.T_back), cfg.n_cells, cfg.dt);
            body["absorption"] = {{"rate", fit.rate},   {"prefactor", fit.prefactor}, {"slope", fit.slope},
                                  {"r2", fit.r2},       {"points", fit.points},       {"seeds_used", fit.seeds_used}};
            failed = failed || !(fit.slope < 0.0 && fit.r2 > 0.8);
        }
        single("merge.json", body, failed);
        return res;
    }
    if (e == "mollify") {
        const auto t = mollification_convergence(cfg, cfg.delta_list);
        detail::write_text(root / e / "mollify.csv", detail::to_csv([&](std::ostream& os) {
                               os.precision(17);
                               os << "delta,sup_error\n";
                               for (const auto& row : t.rows) os << row.delta << ',' << row.sup_error << '\n';
                           }));
        single("mollify.json", {{"exponent", t.exponent}, {"r2", t.r2}, {"monotone", t.monotone}, {"passes", t.passes()}},
               !t.passes(), {e + "/mollify.csv"});
        return res;
    }
    if (e == "ergodicity") {
        const auto rep = ergodicity_check(cfg, cfg.T_long, cfg.n_ensemble);
        single("ergodicity.json", rep.to_json(), !rep.passes);
        return res;
    }
    if (e == "ensemble") {
        const auto summary = invariant_sampler(cfg, std::max<int>(8, static_cast<int>(cfg.seeds.size())));
        std::vector<std::string> files;
        for (const auto& rec : summary.records) {
            const std::string rel = e + "/seed_" + std::to_string(rec.seed) + "/record.json";
            detail::write_json(root / rel, rec.to_json());
            files.push_back(rel);
        }
        single("summary.json", summary.to_json(), summary.max_invariance_l1 >= 1e-6, files);
        return res;
    }
    std::vector<detail::SeedOutput> outs(cfg.seeds.size());
    parallel_for(outs.size(), cfg.workers, [&](std::size_t i) {
        const auto t1 = std::chrono::steady_clock::now();
        outs[i] = detail::run_seed(cfg, cfg.seeds[i]);
        const std::string rel = e + "/seed_" + std::to_string(cfg.seeds[i]) + "/result.json";
        detail::write_json(root / rel, outs[i].result);
        outs[i].files.insert(outs[i].files.begin(), rel);
        const double w = std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
        detail::write_json(root / (e + "/seed_" + std::to_string(cfg.seeds[i]) + "/manifest.json"),
                           detail::manifest(cfg, cfg.seeds[i], outs[i].files, w));
    });
    res.summary = nlohmann::json::array();
    for (std::size_t i = 0; i < outs.size(); ++i) {
        res.manifests.push_back(root / (e + "/seed_" + std::to_string(cfg.seeds[i]) + "/manifest.json"));
        res.summary.push_back(outs[i].result);
        res.check_failures += outs[i].check_failed ? 1 : 0;
    }
    return res;
}

} // namespace sburgers
