#pragma once

// Small statistics helpers: moments, least squares, Wilson intervals and a
// moving-block bootstrap driven by the counter-based generator.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "sburgers/errors.hpp"
#include "sburgers/rng.hpp"

namespace sburgers::stats {

inline double mean(std::span<const double> x) {
    if (x.empty()) throw DomainError("mean of empty sample");
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Unbiased sample variance.
inline double variance(std::span<const double> x) {
    if (x.size() < 2) return 0.0;
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size() - 1);
}

inline double std_error(std::span<const double> x) {
    return x.size() < 2 ? 0.0 : std::sqrt(variance(x) / static_cast<double>(x.size()));
}

inline double median(std::vector<double> x) {
    if (x.empty()) throw DomainError("median of empty sample");
    const std::size_t h = x.size() / 2;
    std::nth_element(x.begin(), x.begin() + static_cast<long>(h), x.end());
    double m = x[h];
    if (x.size() % 2 == 0) m = 0.5 * (m + *std::max_element(x.begin(), x.begin() + static_cast<long>(h)));
    return m;
}

inline double quantile(std::vector<double> x, double q) {
    if (x.empty()) throw DomainError("quantile of empty sample");
    std::sort(x.begin(), x.end());
    const double pos = q * static_cast<double>(x.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, x.size() - 1);
    return x[lo] + (pos - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

/// Ordinary least squares y = intercept + slope x.
inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw DomainError("linear_fit: need >= 2 paired points");
    const double mx = mean(x), my = mean(y);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw DomainError("linear_fit: degenerate abscissae");
    LinearFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    return f;
}

struct Interval {
    double estimate = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

/// Wilson score interval for k successes out of n.
inline Interval wilson(std::int64_t k, std::int64_t n, double z = 1.959963984540054) {
    if (n <= 0) throw DomainError("wilson: n must be positive");
    const double p = static_cast<double>(k) / static_cast<double>(n);
    const double nn = static_cast<double>(n);
    const double den = 1.0 + z * z / nn;
    const double centre = (p + z * z / (2.0 * nn)) / den;
    const double half = z * std::sqrt(p * (1.0 - p) / nn + z * z / (4.0 * nn * nn)) / den;
    return {p, std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

/// Percentile bootstrap of the mean over non-overlapping blocks of `block` samples.
inline Interval block_bootstrap_mean(std::span<const double> x, std::size_t block, int n_resamples,
                                     std::uint64_t seed, double level = 0.95) {
    if (block == 0 || x.size() < 2 * block) throw DomainError("bootstrap: need at least two blocks");
    const std::size_t nb = x.size() / block;
    std::vector<double> bm(nb);
    for (std::size_t b = 0; b < nb; ++b) bm[b] = mean(x.subspan(b * block, block));
    std::vector<double> res(static_cast<std::size_t>(n_resamples));
    for (int r = 0; r < n_resamples; ++r) {
        double s = 0.0;
        for (std::size_t j = 0; j < nb; ++j) {
            const double u = rng::uniform(seed, rng::Stream::bootstrap, static_cast<std::uint64_t>(r),
                                          static_cast<std::int64_t>(j));
            s += bm[std::min(nb - 1, static_cast<std::size_t>(u * static_cast<double>(nb)))];
        }
        res[static_cast<std::size_t>(r)] = s / static_cast<double>(nb);
    }
    const double a = (1.0 - level) / 2.0;
    return {mean(bm), quantile(res, a), quantile(res, 1.0 - a)};
}

} // namespace sburgers::stats
