#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "aqr/corruption.hpp"
#include "aqr/net.hpp"

namespace aqr {

struct MseReport {
    std::vector<double> per_neuron;
    double total = 0.0;
    long n_eval = 0;
};

// Density bounds of a source marginal: 0 < f_min <= f(x) <= f_max, |f'| <= lipschitz.
struct RegularityConstants {
    double f_min = 0.0;
    double f_max = 0.0;
    double lipschitz_density = 0.0;
};

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::vector<std::pair<double, double>> points; // (log x, log y)
};

// Per-column mean squared difference; total is the sum over columns.
MseReport mse_against_reference(const Matrix& adapted, const Matrix& reference);

// sqrt(log(2/delta) / (2n)) — the uniform empirical-CDF concentration radius.
double dkw_epsilon(long n, double delta);

// Three-term finite-sample error bound:
//   3 (L / (8 f_min^3))^2 K^-4 + (3/f_min^2) eps(delta,n_S)^2 + (3/f_min^2) eps(delta,n_T)^2
double theorem1_bound(const RegularityConstants& c, int K, long n_S, long n_T, double delta);

// Ordinary least squares on (ln x, ln y). r_squared is 1 for a constant series.
RateFit fit_loglog_rate(const std::vector<double>& xs, const std::vector<double>& ys);

// Sup over a uniform grid of |H(u) - piecewise-linear interpolant of H through
// the exact knots H(j/K)|. grid >= 10*K evaluation intervals.
double discretization_gap(const std::function<double(double)>& exact_quantile, int K,
                          int grid);

// Small-batch percentile deviation experiment: a reference profile from
// reference_n draws, then `trials` profiles from small_n draws each;
// deviations[level][trial] = small-batch knot - reference knot. Trial 0 shares
// the reference stream, so equal sample counts reproduce the reference exactly.
struct TailDeviationResult {
    int K = 0;
    long reference_n = 0;
    long small_n = 0;
    long trials = 0;
    std::vector<std::vector<double>> deviations; // (K+1) x trials
};

TailDeviationResult tail_deviation_experiment(long reference_n, long small_n, long trials,
                                              const SourceSpec& dist, int K,
                                              std::uint64_t rng_seed);

// One finite-sample recalibration trial on a synthetic scalar channel: source
// profile from n_source draws, target sample of n_target corrupted fresh draws,
// and the mean squared recovery error on n_eval further corrupted draws.
// `interpolated_cdf` selects the estimator: false runs the shipped knot-to-knot
// transform; true composes the K-knot source interpolant with the full target
// empirical CDF (the form the finite-sample analysis bounds).
double channel_recalibration_mse(const Marginal& marginal, const CorruptionSpec& corruption,
                                 int K, long n_source, long n_target, long n_eval,
                                 std::uint64_t seed, bool interpolated_cdf = true);

// Regularity constants of a standard normal truncated to [lo, hi], computed in
// closed form from the normal pdf.
RegularityConstants truncated_normal_constants(double lo, double hi);

} // namespace aqr
