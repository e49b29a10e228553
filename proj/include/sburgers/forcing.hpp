#pragma once

// Random forcing F(x,t) = sum_k F_k(x) dB_k(t) built from harmonic potentials,
// seeded Brownian increments, box mollification and force norms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sburgers/errors.hpp"
#include "sburgers/rng.hpp"

namespace sburgers {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// One harmonic potential F(x) = amplitude * cos(2 pi f (x + phase)) / (2 pi f),
/// so that f(x) = F'(x) = -amplitude * sin(2 pi f (x + phase)).
struct Mode {
    double amplitude = 1.0;
    int frequency = 1;
    double phase = 0.0;

    double wavenumber() const { return kTwoPi * frequency; }
    double potential(double x) const {
        return amplitude * std::cos(wavenumber() * (x + phase)) / wavenumber();
    }
    double force(double x) const { return -amplitude * std::sin(wavenumber() * (x + phase)); }
    double force_derivative(double x) const {
        return -amplitude * wavenumber() * std::cos(wavenumber() * (x + phase));
    }
    /// max_{0<=j<=r} sup |F^{(j)}|, closed form for a pure harmonic.
    double potential_cr_norm(int r) const {
        const double k = wavenumber();
        double best = 0.0;
        for (int j = 0; j <= r; ++j) best = std::max(best, std::pow(k, j - 1));
        return std::abs(amplitude) * best;
    }
    /// C^r norm of the force f = F'.
    double force_cr_norm(int r) const {
        const double k = wavenumber();
        double best = 0.0;
        for (int j = 0; j <= r; ++j) best = std::max(best, std::pow(k, j));
        return std::abs(amplitude) * best;
    }
    friend bool operator==(const Mode&, const Mode&) = default;
};

struct ForcingSpec {
    std::vector<Mode> modes;
    /// Declared constant C in ||f_k||_{C^r} <= C / k^2; unchecked when absent.
    std::optional<double> decay_constant;
    int regularity = 3;

    std::size_t size() const { return modes.size(); }

    /// Sum of F_k(x) weighted by per-mode increments.
    double potential(double x, const std::vector<double>& weights) const {
        double s = 0.0;
        for (std::size_t k = 0; k < modes.size(); ++k) s += modes[k].potential(x) * weights[k];
        return s;
    }

    bool is_zero() const {
        return std::all_of(modes.begin(), modes.end(), [](const Mode& m) { return m.amplitude == 0.0; });
    }

    /// Throws ConfigError on violated invariants.
    void validate() const {
        if (modes.empty()) throw ConfigError("forcing: at least one mode is required");
        for (std::size_t k = 0; k < modes.size(); ++k) {
            const Mode& m = modes[k];
            if (m.frequency < 1) throw ConfigError("forcing: mode frequency must be >= 1");
            if (!(m.phase >= 0.0 && m.phase < 1.0)) throw ConfigError("forcing: phase must lie in [0,1)");
            if (!std::isfinite(m.amplitude)) throw ConfigError("forcing: amplitude must be finite");
            if (std::abs(mean_of_potential(k)) >= 1e-12)
                throw ConfigError("forcing: potential has nonzero mean");
            if (decay_constant) {
                const double kk = static_cast<double>(k + 1);
                if (m.force_cr_norm(regularity) > *decay_constant / (kk * kk))
                    throw ConfigError("forcing: mode violates the declared C/k^2 decay");
            }
        }
    }

    /// Trapezoidal mean over [0,1]; exact for harmonics below the sample count.
    double mean_of_potential(std::size_t k) const {
        constexpr int n = 256;
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += modes[k].potential(static_cast<double>(i) / n);
        return s / n;
    }

    friend bool operator==(const ForcingSpec&, const ForcingSpec&) = default;
};

/// Amplitude used by the named presets for the potential F_k itself:
/// F_k(x) = cos(2 pi (x + x_k)) with unit coefficient.
inline constexpr double kPresetAmplitude = kTwoPi;

inline ForcingSpec preset_spec(std::string_view name) {
    ForcingSpec spec;
    if (name == "ekms3") {
        for (double phase : {0.0, 0.17, 0.41}) spec.modes.push_back({kPresetAmplitude, 1, phase});
    } else if (name == "single_cosine") {
        spec.modes.push_back({kPresetAmplitude, 1, 0.0});
    } else if (name == "sine_basic") {
        // F = -cos(2 pi x) / (2 pi), f = sin(2 pi x)
        spec.modes.push_back({-1.0, 1, 0.0});
    } else {
        throw ConfigError("unknown forcing preset '" + std::string(name) + "'");
    }
    return spec;
}

/// Same modes with every amplitude multiplied by `factor`.
inline ForcingSpec scaled(ForcingSpec spec, double factor) {
    for (auto& m : spec.modes) m.amplitude *= factor;
    return spec;
}

// ---------------------------------------------------------------------------
// Plain-text section:  modes = [{amp = 1, freq = 1, phase = 0.17}, ...]
// ---------------------------------------------------------------------------

inline std::string to_text(const ForcingSpec& spec) {
    std::ostringstream os;
    os.precision(17);
    os << "modes = [";
    for (std::size_t k = 0; k < spec.modes.size(); ++k) {
        const Mode& m = spec.modes[k];
        if (k) os << ", ";
        os << "{amp = " << m.amplitude << ", freq = " << m.frequency << ", phase = " << m.phase << "}";
    }
    os << "]";
    if (spec.decay_constant) os << "\ndecay = " << *spec.decay_constant;
    return os.str();
}

inline ForcingSpec forcing_from_text(const std::string& text) {
    static const std::regex modes_re(R"(modes\s*=\s*\[([^\]]*)\])");
    static const std::regex item_re(R"(\{([^}]*)\})");
    static const std::regex kv_re(R"((\w+)\s*=\s*([-+0-9.eE]+))");
    static const std::regex decay_re(R"(decay\s*=\s*([-+0-9.eE]+))");
    std::smatch m;
    if (!std::regex_search(text, m, modes_re)) throw ConfigError("forcing text: missing 'modes = [...]'");
    const std::string body = m[1];
    ForcingSpec spec;
    for (std::sregex_iterator it(body.begin(), body.end(), item_re), end; it != end; ++it) {
        const std::string item = (*it)[1];
        std::map<std::string, std::string> kv;
        for (std::sregex_iterator jt(item.begin(), item.end(), kv_re); jt != end; ++jt)
            kv[(*jt)[1]] = (*jt)[2];
        for (const char* key : {"amp", "freq", "phase"})
            if (!kv.count(key)) throw ConfigError(std::string("forcing text: mode without '") + key + "'");
        try {
            spec.modes.push_back({std::stod(kv["amp"]), std::stoi(kv["freq"]), std::stod(kv["phase"])});
        } catch (const std::exception&) {
            throw ConfigError("forcing text: malformed number in '" + item + "'");
        }
    }
    if (std::regex_search(text, m, decay_re)) spec.decay_constant = std::stod(m[1]);
    spec.validate();
    return spec;
}

// ---------------------------------------------------------------------------
// Brownian increments
// ---------------------------------------------------------------------------

/// Increments dB_{k,n} for steps n in [t_origin, t_origin + n_steps); step n
/// covers the time interval [n dt, (n+1) dt].
class BrownianPath {
public:
    BrownianPath() = default;

    /// Wraps explicit increments; rows are modes.
    static BrownianPath from_increments(double dt, std::int64_t t_origin,
                                        std::vector<std::vector<double>> rows,
                                        std::uint64_t seed = 0) {
        if (!(dt > 0.0)) throw ConfigError("path: dt must be positive");
        if (rows.empty() || rows.front().empty()) throw ConfigError("path: empty increment table");
        BrownianPath p;
        p.seed_ = seed;
        p.dt_ = dt;
        p.t_origin_ = t_origin;
        p.n_steps_ = static_cast<std::int64_t>(rows.front().size());
        p.n_modes_ = rows.size();
        p.incr_.reserve(p.n_modes_ * static_cast<std::size_t>(p.n_steps_));
        for (const auto& r : rows) {
            if (static_cast<std::int64_t>(r.size()) != p.n_steps_) throw ConfigError("path: ragged table");
            p.incr_.insert(p.incr_.end(), r.begin(), r.end());
        }
        p.base_.assign(p.n_modes_, 0.0);
        p.build_cumulative();
        return p;
    }

    std::uint64_t seed() const { return seed_; }
    double dt() const { return dt_; }
    std::int64_t n_steps() const { return n_steps_; }
    std::int64_t t_origin() const { return t_origin_; }
    std::int64_t first_step() const { return t_origin_; }
    /// One past the last step.
    std::int64_t end_step() const { return t_origin_ + n_steps_; }
    std::size_t n_modes() const { return n_modes_; }
    double mollify_width() const { return mollify_width_; }

    bool contains(std::int64_t n) const { return n >= first_step() && n < end_step(); }
    /// True when grid times a..b (inclusive) are all inside the path.
    bool covers_times(std::int64_t a, std::int64_t b) const {
        return a >= first_step() && b <= end_step() && a <= b;
    }

    double increment(std::size_t k, std::int64_t n) const {
        check_step(n);
        return incr_[k * static_cast<std::size_t>(n_steps_) + static_cast<std::size_t>(n - t_origin_)];
    }

    /// B_k at grid time n, n in [first_step, end_step]; B_k(t_origin) = base.
    double cumulative(std::size_t k, std::int64_t n) const {
        if (n < first_step() || n > end_step()) throw IndexError("path: time index out of range");
        return cum_[k * static_cast<std::size_t>(n_steps_ + 1) + static_cast<std::size_t>(n - t_origin_)];
    }

    void check_step(std::int64_t n) const {
        if (!contains(n)) throw IndexError("path: step " + std::to_string(n) + " outside [" +
                                           std::to_string(first_step()) + ", " +
                                           std::to_string(end_step()) + ")");
    }

    friend bool operator==(const BrownianPath& a, const BrownianPath& b) {
        return a.seed_ == b.seed_ && a.dt_ == b.dt_ && a.t_origin_ == b.t_origin_ &&
               a.n_steps_ == b.n_steps_ && a.incr_ == b.incr_ && a.base_ == b.base_;
    }

private:
    friend BrownianPath sample_path(const ForcingSpec&, std::uint64_t, double, std::int64_t, std::int64_t);
    friend BrownianPath mollify(const BrownianPath&, double);
    friend BrownianPath coarsen(const BrownianPath&, int);

    void build_cumulative() {
        cum_.assign(n_modes_ * static_cast<std::size_t>(n_steps_ + 1), 0.0);
        for (std::size_t k = 0; k < n_modes_; ++k) {
            double* c = &cum_[k * static_cast<std::size_t>(n_steps_ + 1)];
            const double* d = &incr_[k * static_cast<std::size_t>(n_steps_)];
            c[0] = base_[k];
            for (std::int64_t m = 0; m < n_steps_; ++m) c[m + 1] = c[m] + d[m];
        }
    }

    std::uint64_t seed_ = 0;
    double dt_ = 0.0;
    std::int64_t t_origin_ = 0;
    std::int64_t n_steps_ = 0;
    std::size_t n_modes_ = 0;
    double mollify_width_ = 0.0;
    std::vector<double> incr_;
    std::vector<double> base_;
    std::vector<double> cum_;
};

/// dB_{k,n} = sqrt(dt) * Z(seed, k, n).
inline BrownianPath sample_path(const ForcingSpec& spec, std::uint64_t seed, double dt,
                                std::int64_t n_steps, std::int64_t t_origin) {
    if (!(dt > 0.0)) throw ConfigError("sample_path: dt must be positive");
    if (n_steps < 1) throw ConfigError("sample_path: n_steps must be >= 1");
    if (spec.modes.empty()) throw ConfigError("sample_path: spec has no modes");
    BrownianPath p;
    p.seed_ = seed;
    p.dt_ = dt;
    p.t_origin_ = t_origin;
    p.n_steps_ = n_steps;
    p.n_modes_ = spec.modes.size();
    p.incr_.resize(p.n_modes_ * static_cast<std::size_t>(n_steps));
    const double sd = std::sqrt(dt);
    for (std::size_t k = 0; k < p.n_modes_; ++k)
        for (std::int64_t m = 0; m < n_steps; ++m)
            p.incr_[k * static_cast<std::size_t>(n_steps) + static_cast<std::size_t>(m)] =
                sd * rng::normal(seed, rng::Stream::brownian, k, t_origin + m);
    p.base_.assign(p.n_modes_, 0.0);
    p.build_cumulative();
    return p;
}

/// Same path on a grid `factor` times coarser: increments summed in blocks, with
/// step n of the result covering fine steps [factor n, factor (n+1)). The origin
/// must be divisible by `factor`.
inline BrownianPath coarsen(const BrownianPath& path, int factor) {
    if (factor < 1) throw ConfigError("coarsen: factor must be >= 1");
    if (path.t_origin() % factor != 0 || path.n_steps() % factor != 0)
        throw ConfigError("coarsen: origin and length must be multiples of the factor");
    BrownianPath out;
    out.seed_ = path.seed_;
    out.dt_ = path.dt_ * factor;
    out.t_origin_ = path.t_origin_ / factor;
    out.n_steps_ = path.n_steps_ / factor;
    out.n_modes_ = path.n_modes_;
    out.incr_.assign(out.n_modes_ * static_cast<std::size_t>(out.n_steps_), 0.0);
    for (std::size_t k = 0; k < out.n_modes_; ++k)
        for (std::int64_t m = 0; m < out.n_steps_; ++m) {
            double s = 0.0;
            for (int j = 0; j < factor; ++j) s += path.increment(k, path.t_origin_ + m * factor + j);
            out.incr_[k * static_cast<std::size_t>(out.n_steps_) + static_cast<std::size_t>(m)] = s;
        }
    out.base_ = path.base_;
    out.build_cumulative();
    return out;
}

/// Per-step velocity kick sum_k f_k(x) dB_{k,n}, by direct summation.
inline double eval_force(const ForcingSpec& spec, const BrownianPath& path, double x, std::int64_t n) {
    path.check_step(n);
    double s = 0.0;
    for (std::size_t k = 0; k < spec.modes.size(); ++k) s += spec.modes[k].force(x) * path.increment(k, n);
    return s;
}

/// Box average of the cumulative path over `w = round(delta/dt)` grid points.
/// Even widths sit half a step to the right; ends are extended linearly.
inline BrownianPath mollify(const BrownianPath& path, double delta) {
    if (!(delta >= path.dt() * (1.0 - 1e-9))) throw ConfigError("mollify: delta must be >= dt");
    const auto w = static_cast<std::int64_t>(std::llround(delta / path.dt()));
    const std::int64_t h = (w - 1) / 2;
    const std::int64_t L = path.n_steps();
    BrownianPath out = path;
    out.mollify_width_ = static_cast<double>(w) * path.dt();
    for (std::size_t k = 0; k < path.n_modes(); ++k) {
        auto B = [&](std::int64_t m) {
            const std::int64_t t0 = path.first_step();
            if (m < 0) return path.cumulative(k, t0) + static_cast<double>(m) * path.increment(k, t0);
            if (m > L)
                return path.cumulative(k, t0 + L) + static_cast<double>(m - L) * path.increment(k, t0 + L - 1);
            return path.cumulative(k, t0 + m);
        };
        std::vector<double> smooth(static_cast<std::size_t>(L + 1));
        // running window sum
        double s = 0.0;
        for (std::int64_t j = 0; j < w; ++j) s += B(-h + j);
        smooth[0] = s / static_cast<double>(w);
        for (std::int64_t m = 1; m <= L; ++m) {
            s += B(m - h + w - 1) - B(m - h - 1);
            smooth[static_cast<std::size_t>(m)] = s / static_cast<double>(w);
        }
        if (w == 1) continue;
        for (std::int64_t m = 0; m < L; ++m)
            out.incr_[k * static_cast<std::size_t>(L) + static_cast<std::size_t>(m)] =
                smooth[static_cast<std::size_t>(m + 1)] - smooth[static_cast<std::size_t>(m)];
        out.base_[k] = smooth[0];
    }
    out.build_cumulative();
    return out;
}

/// max over modes and grid times of |B^a_k - B^b_k|.
inline double sup_deviation(const BrownianPath& a, const BrownianPath& b) {
    if (a.first_step() != b.first_step() || a.end_step() != b.end_step() || a.n_modes() != b.n_modes())
        throw ConfigError("sup_deviation: paths differ in shape");
    double d = 0.0;
    for (std::size_t k = 0; k < a.n_modes(); ++k)
        for (std::int64_t n = a.first_step(); n <= a.end_step(); ++n)
            d = std::max(d, std::abs(a.cumulative(k, n) - b.cumulative(k, n)));
    return d;
}

// ---------------------------------------------------------------------------
// Force norms
// ---------------------------------------------------------------------------

struct ForceNorm {
    /// max_s sum_k ||F_k||_{C^3} |B_k(s) - B_k(end)| over the window.
    double value = 0.0;
    /// 1/4 + max_s sum_k ||F_k||_{C^2} |B_k(s) - B_k(end)|.
    double c1 = 0.25;
    std::int64_t first = 0;
    std::int64_t last = 0;
};

/// Grid times first..last (inclusive), anchored at `last`. Grows monotonically
/// as `first` moves back with the anchor fixed.
inline ForceNorm force_norm(const ForcingSpec& spec, const BrownianPath& path, std::int64_t first,
                            std::int64_t last) {
    if (first >= last) throw ConfigError("force_norm: empty window");
    if (!path.covers_times(first, last)) throw IndexError("force_norm: window outside path");
    ForceNorm out;
    out.first = first;
    out.last = last;
    std::vector<double> c3(spec.size()), c2(spec.size());
    for (std::size_t k = 0; k < spec.size(); ++k) {
        c3[k] = spec.modes[k].potential_cr_norm(3);
        c2[k] = spec.modes[k].potential_cr_norm(2);
    }
    double best3 = 0.0, best2 = 0.0;
    for (std::int64_t s = first; s <= last; ++s) {
        double a3 = 0.0, a2 = 0.0;
        for (std::size_t k = 0; k < spec.size(); ++k) {
            const double d = std::abs(path.cumulative(k, s) - path.cumulative(k, last));
            a3 += c3[k] * d;
            a2 += c2[k] * d;
        }
        best3 = std::max(best3, a3);
        best2 = std::max(best2, a2);
    }
    out.value = best3;
    out.c1 = 0.25 + best2;
    return out;
}

// ---------------------------------------------------------------------------
// Realization: spec + path with per-step potentials grouped by frequency
// ---------------------------------------------------------------------------

/// Immutable pairing of a spec with one path. Per step the potential collapses to
/// sum_f C_{f,n} cos(2 pi f x) + S_{f,n} sin(2 pi f x).
class Realization {
public:
    Realization(ForcingSpec spec, BrownianPath path) : spec_(std::move(spec)), path_(std::move(path)) {
        if (spec_.size() != path_.n_modes()) throw ConfigError("realization: mode count mismatch");
        for (const Mode& m : spec_.modes)
            if (std::find(freqs_.begin(), freqs_.end(), m.frequency) == freqs_.end())
                freqs_.push_back(m.frequency);
        const std::size_t nf = freqs_.size();
        coef_.assign(2 * nf * static_cast<std::size_t>(path_.n_steps()), 0.0);
        for (std::int64_t n = path_.first_step(); n < path_.end_step(); ++n) {
            double* c = row(n);
            for (std::size_t k = 0; k < spec_.size(); ++k) {
                const Mode& m = spec_.modes[k];
                const auto fi = static_cast<std::size_t>(
                    std::find(freqs_.begin(), freqs_.end(), m.frequency) - freqs_.begin());
                const double a = m.amplitude / m.wavenumber() * path_.increment(k, n);
                const double ph = m.wavenumber() * m.phase;
                c[2 * fi] += a * std::cos(ph);
                c[2 * fi + 1] -= a * std::sin(ph);
            }
        }
    }

    const ForcingSpec& spec() const { return spec_; }
    const BrownianPath& path() const { return path_; }
    double dt() const { return path_.dt(); }
    std::int64_t first_step() const { return path_.first_step(); }
    std::int64_t end_step() const { return path_.end_step(); }
    const std::vector<int>& frequencies() const { return freqs_; }

    /// Phi_n(x) = sum_k F_k(x) dB_{k,n}
    double potential(std::int64_t n, double x) const { return eval<0>(n, x); }
    /// Phi_n'(x) = sum_k f_k(x) dB_{k,n}
    double force(std::int64_t n, double x) const { return eval<1>(n, x); }
    /// Phi_n''(x) = sum_k f_k'(x) dB_{k,n}
    double force_derivative(std::int64_t n, double x) const { return eval<2>(n, x); }

    /// (C_f, S_f) coefficients of step n for frequency index fi.
    std::pair<double, double> coefficients(std::int64_t n, std::size_t fi) const {
        const double* c = row(n);
        return {c[2 * fi], c[2 * fi + 1]};
    }

private:
    const double* row(std::int64_t n) const {
        path_.check_step(n);
        return &coef_[2 * freqs_.size() * static_cast<std::size_t>(n - path_.first_step())];
    }
    double* row(std::int64_t n) {
        return &coef_[2 * freqs_.size() * static_cast<std::size_t>(n - path_.first_step())];
    }

    template <int D>
    double eval(std::int64_t n, double x) const {
        const double* c = row(n);
        double s = 0.0;
        for (std::size_t fi = 0; fi < freqs_.size(); ++fi) {
            const double k = kTwoPi * freqs_[fi];
            const double cs = std::cos(k * x), sn = std::sin(k * x);
            if constexpr (D == 0) s += c[2 * fi] * cs + c[2 * fi + 1] * sn;
            else if constexpr (D == 1) s += k * (-c[2 * fi] * sn + c[2 * fi + 1] * cs);
            else s += -k * k * (c[2 * fi] * cs + c[2 * fi + 1] * sn);
        }
        return s;
    }

    ForcingSpec spec_;
    BrownianPath path_;
    std::vector<int> freqs_;
    std::vector<double> coef_;
};

/// Cached cos/sin tables of every forcing frequency on a uniform periodic grid
/// x_i = (i + offset) / n_cells, for fast per-step potentials at nodes.
class NodeTable {
public:
    NodeTable(const Realization& r, int n_cells, double offset = 0.0)
        : real_(&r), n_(n_cells), offset_(offset) {
        const auto& f = r.frequencies();
        cos_.resize(f.size() * static_cast<std::size_t>(n_cells));
        sin_.resize(cos_.size());
        for (std::size_t fi = 0; fi < f.size(); ++fi)
            for (int i = 0; i < n_cells; ++i) {
                const double x = (i + offset) / n_cells;
                cos_[fi * n_ + i] = std::cos(kTwoPi * f[fi] * x);
                sin_[fi * n_ + i] = std::sin(kTwoPi * f[fi] * x);
            }
    }

    int n_cells() const { return n_; }
    double offset() const { return offset_; }

    /// Phi_n at node i (any integer; wrapped).
    double potential(std::int64_t n, long i) const {
        const long j = ((i % n_) + n_) % n_;
        double s = 0.0;
        for (std::size_t fi = 0; fi < real_->frequencies().size(); ++fi) {
            const auto [c, sn] = real_->coefficients(n, fi);
            s += c * cos_[fi * n_ + j] + sn * sin_[fi * n_ + j];
        }
        return s;
    }

    void potentials(std::int64_t n, std::vector<double>& out) const {
        out.assign(static_cast<std::size_t>(n_), 0.0);
        for (std::size_t fi = 0; fi < real_->frequencies().size(); ++fi) {
            const auto [c, sn] = real_->coefficients(n, fi);
            const double* ct = &cos_[fi * n_];
            const double* st = &sin_[fi * n_];
            for (int i = 0; i < n_; ++i) out[static_cast<std::size_t>(i)] += c * ct[i] + sn * st[i];
        }
    }

private:
    const Realization* real_;
    int n_;
    double offset_;
    std::vector<double> cos_, sin_;
};

} // namespace sburgers
