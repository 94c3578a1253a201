#include "aqr/tails.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "aqr/rng.hpp"

namespace aqr {

namespace {

constexpr double kSqrt2 = 1.4142135623730950488016887242097;
constexpr double kSqrt2Pi = 2.5066282746310005024157652848110;

// Acklam's rational approximation for the inverse normal CDF (~1.15e-9 relative
// error); two Halley steps below push it to machine precision.
double probit_initial(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;

    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
               (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

} // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double probit(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::domain_error("probit undefined");
    double x = probit_initial(p);
    for (int i = 0; i < 2; ++i) {
        const double err = normal_cdf(x) - p;
        const double u = err * kSqrt2Pi * std::exp(0.5 * x * x);
        x -= u / (1.0 + 0.5 * x * u); // Halley step
    }
    return x;
}

const char* to_string(TailStrategy s) {
    switch (s) {
    case TailStrategy::Standard: return "standard";
    case TailStrategy::AverageSampleTails: return "average_sample_tails";
    case TailStrategy::NotCalibrated: return "not_calibrated";
    case TailStrategy::Clipping: return "clipping";
    case TailStrategy::GaussianEstimation: return "gaussian_estimation";
    case TailStrategy::IntervalEstimation: return "interval_estimation";
    }
    return "standard";
}

TailStrategy tail_strategy_from_string(const std::string& name) {
    if (name == "standard") return TailStrategy::Standard;
    if (name == "average_sample_tails") return TailStrategy::AverageSampleTails;
    if (name == "not_calibrated") return TailStrategy::NotCalibrated;
    if (name == "clipping") return TailStrategy::Clipping;
    if (name == "gaussian_estimation") return TailStrategy::GaussianEstimation;
    if (name == "interval_estimation") return TailStrategy::IntervalEstimation;
    throw std::invalid_argument("unknown tail strategy: " + name);
}

TailStrategy strategy_of(const TailRule& rule) {
    return std::visit(
        [](const auto& r) -> TailStrategy {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, StandardTail>) return TailStrategy::Standard;
            else if constexpr (std::is_same_v<T, AverageSampleTailsRule>)
                return TailStrategy::AverageSampleTails;
            else if constexpr (std::is_same_v<T, NotCalibratedTail>)
                return TailStrategy::NotCalibrated;
            else if constexpr (std::is_same_v<T, ClippingTail>) return TailStrategy::Clipping;
            else if constexpr (std::is_same_v<T, GaussianEstimationTail>)
                return TailStrategy::GaussianEstimation;
            else return TailStrategy::IntervalEstimation;
        },
        rule);
}

TailContext make_tail_context(const QuantileProfile& source, const QuantileProfile& target,
                              const TailRule& rule) {
    const int K = source.level_count;
    TailContext ctx;
    ctx.level_count = K;
    ctx.source_p0 = source.knots.front();
    ctx.source_p1 = source.knots[1];
    ctx.source_p99 = source.knots[static_cast<std::size_t>(K) - 1];
    ctx.source_p100 = source.knots.back();
    ctx.target_p0 = target.knots.front();
    ctx.target_p1 = target.knots[1];
    ctx.target_p99 = target.knots[static_cast<std::size_t>(K) - 1];
    ctx.target_p100 = target.knots.back();

    if (const auto* r = std::get_if<AverageSampleTailsRule>(&rule)) {
        ctx.calibrated_low = r->low;
        ctx.calibrated_high = r->high;
    } else if (const auto* g = std::get_if<GaussianEstimationTail>(&rule)) {
        ctx.gaussian_source = g->source;
        ctx.gaussian_target = g->target;
        ctx.source_count = g->source_count;
        ctx.target_count = g->target_count;
    } else if (const auto* iv = std::get_if<IntervalEstimationTail>(&rule)) {
        ctx.source_std = iv->source_std;
        ctx.target_std = iv->target_std;
    }
    return ctx;
}

namespace {

void validate_context(const TailRule& rule, const TailContext& ctx) {
    const bool anchors_ok =
        ctx.source_p0 <= ctx.source_p1 && ctx.source_p1 <= ctx.source_p99 &&
        ctx.source_p99 <= ctx.source_p100 && ctx.target_p0 <= ctx.target_p1 &&
        ctx.target_p1 <= ctx.target_p99 && ctx.target_p99 <= ctx.target_p100;
    if (!anchors_ok)
        throw std::runtime_error("tail context mismatch: percentile anchors out of order");

    switch (strategy_of(rule)) {
    case TailStrategy::AverageSampleTails:
        if (!(std::isfinite(ctx.calibrated_low) && std::isfinite(ctx.calibrated_high)) ||
            ctx.calibrated_low > ctx.calibrated_high)
            throw std::runtime_error("tail context mismatch: calibrated tails");
        break;
    case TailStrategy::GaussianEstimation:
        if (ctx.gaussian_source.std < 0 || ctx.gaussian_target.std < 0 ||
            ctx.source_count < 2 || ctx.target_count < 2 || ctx.level_count < 2)
            throw std::runtime_error("tail context mismatch: gaussian fit");
        break;
    case TailStrategy::IntervalEstimation:
        if (ctx.source_std < 0 || ctx.target_std < 0)
            throw std::runtime_error("tail context mismatch: negative std");
        break;
    default:
        break;
    }
}

// Affine map through the anchor pair (t_lo, t_hi) -> (s_lo, s_hi); a zero-width
// target segment sends everything to the left source anchor.
double segment_map(double x, double t_lo, double t_hi, double s_lo, double s_hi) {
    const double dt = t_hi - t_lo;
    if (dt <= 0.0)
        return s_lo;
    return s_lo + (x - t_lo) * ((s_hi - s_lo) / dt);
}

} // namespace

double apply_tail_rule(double x, const TailRule& rule, const TailContext& ctx) {
    validate_context(rule, ctx);
    const bool low = x < ctx.target_p1;
    if (!low && !(x >= ctx.target_p99))
        throw std::invalid_argument("apply_tail_rule: interior value");

    switch (strategy_of(rule)) {
    case TailStrategy::Standard:
        return low ? segment_map(x, ctx.target_p0, ctx.target_p1, ctx.source_p0, ctx.source_p1)
                   : segment_map(x, ctx.target_p99, ctx.target_p100, ctx.source_p99,
                                 ctx.source_p100);
    case TailStrategy::AverageSampleTails:
        return low ? segment_map(x, ctx.target_p0, ctx.target_p1, ctx.calibrated_low,
                                 ctx.source_p1)
                   : segment_map(x, ctx.target_p99, ctx.target_p100, ctx.source_p99,
                                 ctx.calibrated_high);
    case TailStrategy::NotCalibrated:
        return x;
    case TailStrategy::Clipping:
        // Threshold to the target boundary, then through the segment boundary so the
        // output lands at the source-side percentile.
        return low ? ctx.source_p1 : ctx.source_p99;
    case TailStrategy::GaussianEstimation: {
        const double K = static_cast<double>(ctx.level_count);
        if (low) {
            const double p_lo_s = 1.0 / (static_cast<double>(ctx.source_count) + 1.0);
            const double p_lo_t = 1.0 / (static_cast<double>(ctx.target_count) + 1.0);
            const double q0s = ctx.gaussian_source.mean + ctx.gaussian_source.std * probit(p_lo_s);
            const double q1s = ctx.gaussian_source.mean + ctx.gaussian_source.std * probit(1.0 / K);
            const double q0t = ctx.gaussian_target.mean + ctx.gaussian_target.std * probit(p_lo_t);
            const double q1t = ctx.gaussian_target.mean + ctx.gaussian_target.std * probit(1.0 / K);
            return segment_map(x, q0t, q1t, q0s, q1s);
        }
        const double p_hi_s =
            static_cast<double>(ctx.source_count) / (static_cast<double>(ctx.source_count) + 1.0);
        const double p_hi_t =
            static_cast<double>(ctx.target_count) / (static_cast<double>(ctx.target_count) + 1.0);
        const double q99s =
            ctx.gaussian_source.mean + ctx.gaussian_source.std * probit((K - 1.0) / K);
        const double q100s = ctx.gaussian_source.mean + ctx.gaussian_source.std * probit(p_hi_s);
        const double q99t =
            ctx.gaussian_target.mean + ctx.gaussian_target.std * probit((K - 1.0) / K);
        const double q100t = ctx.gaussian_target.mean + ctx.gaussian_target.std * probit(p_hi_t);
        // The upper branch is anchored at the stored (empirical) p_99 of the source.
        const double dt = q100t - q99t;
        if (dt <= 0.0)
            return ctx.source_p99;
        return ctx.source_p99 + (x - q99t) * ((q100s - q99s) / dt);
    }
    case TailStrategy::IntervalEstimation:
        if (ctx.target_std <= 0.0)
            return low ? ctx.source_p0 : ctx.source_p99;
        if (low)
            return (x - ctx.target_p0) / ctx.target_std * ctx.source_std + ctx.source_p0;
        return (x - ctx.target_p99) / ctx.target_std * ctx.source_std + ctx.source_p99;
    }
    return x;
}

SampledTailEstimate calibrate_average_sample_tails(const std::vector<double>& samples,
                                                   long batch_size, long repeats,
                                                   std::uint64_t rng_seed,
                                                   bool with_replacement) {
    const long n = static_cast<long>(samples.size());
    if (batch_size < 2)
        throw std::invalid_argument("batch_size must be >= 2");
    if (repeats < 1)
        throw std::invalid_argument("repeats must be >= 1");
    if (batch_size > n)
        throw std::invalid_argument("batch exceeds population");

    std::mt19937_64 gen(rng_seed);
    double min_sum = 0.0;
    double max_sum = 0.0;

    std::vector<std::size_t> pool;
    if (!with_replacement) {
        pool.resize(static_cast<std::size_t>(n));
        std::iota(pool.begin(), pool.end(), std::size_t{0});
    }

    for (long r = 0; r < repeats; ++r) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        if (with_replacement) {
            for (long b = 0; b < batch_size; ++b) {
                const double v = samples[uniform_index(gen, static_cast<std::size_t>(n))];
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        } else {
            // Partial Fisher-Yates to draw a batch without replacement.
            for (long b = 0; b < batch_size; ++b) {
                const std::size_t pick =
                    static_cast<std::size_t>(b) +
                    uniform_index(gen, static_cast<std::size_t>(n - b));
                std::swap(pool[static_cast<std::size_t>(b)], pool[pick]);
                const double v = samples[pool[static_cast<std::size_t>(b)]];
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
        min_sum += lo;
        max_sum += hi;
    }

    SampledTailEstimate est;
    est.low = min_sum / static_cast<double>(repeats);
    est.high = max_sum / static_cast<double>(repeats);
    est.batch_size = batch_size;
    est.repeats = repeats;
    return est;
}

std::pair<double, double> gaussian_tail_quantiles(double mean, double std, long n) {
    if (n < 2)
        throw std::invalid_argument("gaussian_tail_quantiles requires n >= 2");
    if (std < 0.0)
        throw std::invalid_argument("gaussian_tail_quantiles requires std >= 0");
    const double p_lo = 1.0 / (static_cast<double>(n) + 1.0);
    const double z = probit(p_lo); // negative; upper level is symmetric
    return {mean + std * z, mean - std * z};
}

} // namespace aqr
