#pragma once

#include <cstddef>
#include <vector>

namespace aqr {

// Sorted knot values at levels j/K of an empirical distribution. knots[0] and
// knots[K] are the sample minimum and maximum.
struct QuantileProfile {
    std::vector<double> knots; // size level_count + 1, non-decreasing
    int level_count = 0;       // K >= 1
    long sample_count = 0;     // n >= 1 samples used to build the profile

    double min() const { return knots.front(); }
    double max() const { return knots.back(); }
};

// Empirical CDF backed by an ascending sample vector.
struct Ecdf {
    std::vector<double> sorted_samples;

    long size() const { return static_cast<long>(sorted_samples.size()); }
};

// Validates invariants; throws std::invalid_argument on violation. Used when a
// profile is assembled from parts (deserialization, tests) rather than computed.
QuantileProfile make_profile(std::vector<double> knots, long sample_count);

// Empirical quantiles at levels j/K, j = 0..K, using linear interpolation between
// order statistics at position (n-1)*u. With this rule knots land exactly on
// samples whenever (n-1)*j is divisible by K, and the end knots are min/max.
QuantileProfile compute_quantile_profile(const std::vector<double>& samples, int K);

Ecdf make_ecdf(std::vector<double> samples);

// (number of samples <= x) / n
double ecdf_eval(const Ecdf& e, double x);

// Piecewise-linear interpolation through the knots; exact at u = j/K.
double interpolate_quantile(const QuantileProfile& profile, double u);

} // namespace aqr
