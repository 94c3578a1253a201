#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "aqr/quantile.hpp"

namespace aqr {

// ---------------------------------------------------------------------------
// Normal-distribution helpers
// ---------------------------------------------------------------------------

// Standard normal CDF via erfc; accurate over the full double range.
double normal_cdf(double x);

// Inverse standard normal CDF. Acklam's rational initializer followed by two
// Halley refinement steps against the erfc-based CDF; absolute error is far
// below 1e-9 on [1e-7, 1-1e-7]. Throws std::domain_error outside (0,1).
double probit(double p);

// ---------------------------------------------------------------------------
// Tail calibration strategies
// ---------------------------------------------------------------------------

enum class TailStrategy {
    Standard,
    AverageSampleTails,
    NotCalibrated,
    Clipping,
    GaussianEstimation,
    IntervalEstimation,
};

const char* to_string(TailStrategy s);
TailStrategy tail_strategy_from_string(const std::string& name);

// Calibrated replacement for a distribution's extreme knots, obtained by
// averaging per-batch minima and maxima over repeated sampling.
struct SampledTailEstimate {
    double low = 0.0;
    double high = 0.0;
    long batch_size = 0;
    long repeats = 0;
};

struct GaussianFit {
    double mean = 0.0;
    double std = 0.0; // >= 0
};

// Per-rule parameters that cannot be derived from the two quantile profiles.
struct StandardTail {};
struct NotCalibratedTail {};
struct ClippingTail {};
struct AverageSampleTailsRule {
    double low = 0.0;  // calibrated source p_0
    double high = 0.0; // calibrated source p_K
};
struct GaussianEstimationTail {
    GaussianFit source;
    GaussianFit target;
    long source_count = 0; // plotting-position sample size per side
    long target_count = 0;
};
struct IntervalEstimationTail {
    double source_std = 0.0;
    double target_std = 0.0;
};

using TailRule = std::variant<StandardTail, AverageSampleTailsRule, NotCalibratedTail,
                              ClippingTail, GaussianEstimationTail, IntervalEstimationTail>;

TailStrategy strategy_of(const TailRule& rule);

// Everything a tail rule may consult when remapping an extreme value. The
// percentile anchors generalize p_0/p_1/p_99/p_100 to knots {0, 1, K-1, K}.
struct TailContext {
    int level_count = 0; // K of the profiles
    double source_p0 = 0, source_p1 = 0, source_p99 = 0, source_p100 = 0;
    double target_p0 = 0, target_p1 = 0, target_p99 = 0, target_p100 = 0;
    double source_std = 0, target_std = 0;       // interval estimation
    GaussianFit gaussian_source, gaussian_target; // gaussian estimation
    long source_count = 0, target_count = 0;      // gaussian plotting positions
    double calibrated_low = 0, calibrated_high = 0; // average sample tails
};

// Assembles the context for one (source profile, target profile, rule) triple.
TailContext make_tail_context(const QuantileProfile& source, const QuantileProfile& target,
                              const TailRule& rule);

// Remaps a value that fell into the extreme segments (x < target_p1 or
// x >= target_p99). Throws std::runtime_error("tail context mismatch") when the
// context is inconsistent with the rule.
double apply_tail_rule(double x, const TailRule& rule, const TailContext& ctx);

// Draws `repeats` batches of `batch_size` from `samples` (with replacement by
// default) and averages the per-batch minima and maxima. Deterministic per seed.
SampledTailEstimate calibrate_average_sample_tails(const std::vector<double>& samples,
                                                   long batch_size, long repeats,
                                                   std::uint64_t rng_seed,
                                                   bool with_replacement = true);

// Theoretical extreme quantiles of a fitted Gaussian at the expected-order-statistic
// levels 1/(n+1) and n/(n+1); the literal 0th/100th percentiles are infinite.
std::pair<double, double> gaussian_tail_quantiles(double mean, double std, long n);

} // namespace aqr
