#include "aqr/theory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "aqr/quantile.hpp"
#include "aqr/rng.hpp"
#include "aqr/tails.hpp"
#include "aqr/transform.hpp"

namespace aqr {

MseReport mse_against_reference(const Matrix& adapted, const Matrix& reference) {
    if (adapted.rows != reference.rows || adapted.cols != reference.cols)
        throw std::invalid_argument("shape mismatch");
    MseReport report;
    report.n_eval = static_cast<long>(adapted.rows);
    report.per_neuron.resize(adapted.cols, 0.0);
    for (std::size_t c = 0; c < adapted.cols; ++c) {
        double acc = 0.0;
        for (std::size_t r = 0; r < adapted.rows; ++r) {
            const double d = adapted(r, c) - reference(r, c);
            acc += d * d;
        }
        report.per_neuron[c] = acc / static_cast<double>(adapted.rows);
        report.total += report.per_neuron[c];
    }
    return report;
}

double dkw_epsilon(long n, double delta) {
    if (n < 1)
        throw std::invalid_argument("dkw_epsilon requires n >= 1");
    if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("dkw_epsilon requires delta in (0,1)");
    return std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(n)));
}

double theorem1_bound(const RegularityConstants& c, int K, long n_S, long n_T, double delta) {
    if (!(c.f_min > 0.0))
        throw std::invalid_argument("theorem1_bound requires f_min > 0");
    if (K < 1)
        throw std::invalid_argument("theorem1_bound requires K >= 1");
    const double k4 = std::pow(static_cast<double>(K), -4.0);
    const double first = c.lipschitz_density / (8.0 * c.f_min * c.f_min * c.f_min);
    const double eps_s = dkw_epsilon(n_S, delta);
    const double eps_t = dkw_epsilon(n_T, delta);
    const double inv_f2 = 3.0 / (c.f_min * c.f_min);
    return 3.0 * first * first * k4 + inv_f2 * eps_s * eps_s + inv_f2 * eps_t * eps_t;
}

RateFit fit_loglog_rate(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 3)
        throw std::invalid_argument("fit_loglog_rate requires >= 3 pairs");
    RateFit fit;
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!(xs[i] > 0.0) || !(ys[i] > 0.0))
            throw std::invalid_argument("fit_loglog_rate requires strictly positive values");
        fit.points.emplace_back(std::log(xs[i]), std::log(ys[i]));
        sx += fit.points.back().first;
        sy += fit.points.back().second;
    }
    const double n = static_cast<double>(xs.size());
    const double mx = sx / n;
    const double my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (const auto& [x, y] : fit.points) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if (sxx == 0.0)
        throw std::invalid_argument("fit_loglog_rate requires distinct x values");
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (syy == 0.0) {
        fit.r_squared = 1.0; // constant series is fit exactly by slope 0
    } else {
        double ss_res = 0.0;
        for (const auto& [x, y] : fit.points) {
            const double e = y - (fit.intercept + fit.slope * x);
            ss_res += e * e;
        }
        fit.r_squared = 1.0 - ss_res / syy;
    }
    return fit;
}

double discretization_gap(const std::function<double(double)>& exact_quantile, int K,
                          int grid) {
    if (K < 1)
        throw std::invalid_argument("discretization_gap requires K >= 1");
    if (grid < 10 * K)
        throw std::invalid_argument("discretization_gap requires grid >= 10*K");

    std::vector<double> knots(static_cast<std::size_t>(K) + 1);
    for (int j = 0; j <= K; ++j)
        knots[static_cast<std::size_t>(j)] =
            exact_quantile(static_cast<double>(j) / static_cast<double>(K));

    double sup = 0.0;
    for (int i = 0; i <= grid; ++i) {
        const double u = static_cast<double>(i) / static_cast<double>(grid);
        const double t = u * K;
        int j = std::min(static_cast<int>(t), K - 1);
        const double frac = t - j;
        const auto uj = static_cast<std::size_t>(j);
        const double interp = knots[uj] + frac * (knots[uj + 1] - knots[uj]);
        sup = std::max(sup, std::abs(exact_quantile(u) - interp));
    }
    return sup;
}

TailDeviationResult tail_deviation_experiment(long reference_n, long small_n, long trials,
                                              const SourceSpec& dist, int K,
                                              std::uint64_t rng_seed) {
    if (trials < 1)
        throw std::invalid_argument("tail_deviation_experiment requires trials >= 1");
    const Marginal& marginal = dist.marginals.front();

    auto reference_sample =
        sample_marginal(marginal, static_cast<std::size_t>(reference_n), derive_seed(rng_seed, 0));
    const auto reference = compute_quantile_profile(reference_sample, K);

    TailDeviationResult result;
    result.K = K;
    result.reference_n = reference_n;
    result.small_n = small_n;
    result.trials = trials;
    result.deviations.assign(static_cast<std::size_t>(K) + 1,
                             std::vector<double>(static_cast<std::size_t>(trials), 0.0));

    for (long t = 0; t < trials; ++t) {
        auto sample = sample_marginal(marginal, static_cast<std::size_t>(small_n),
                                      derive_seed(rng_seed, static_cast<std::uint64_t>(t)));
        const auto profile = compute_quantile_profile(sample, K);
        for (int j = 0; j <= K; ++j)
            result.deviations[static_cast<std::size_t>(j)][static_cast<std::size_t>(t)] =
                profile.knots[static_cast<std::size_t>(j)] -
                reference.knots[static_cast<std::size_t>(j)];
    }
    return result;
}

double channel_recalibration_mse(const Marginal& marginal, const CorruptionSpec& corruption,
                                 int K, long n_source, long n_target, long n_eval,
                                 std::uint64_t seed, bool interpolated_cdf) {
    auto source = sample_marginal(marginal, static_cast<std::size_t>(n_source),
                                  derive_seed(seed, 11));
    auto target_clean = sample_marginal(marginal, static_cast<std::size_t>(n_target),
                                        derive_seed(seed, 23));
    auto eval_clean = sample_marginal(marginal, static_cast<std::size_t>(n_eval),
                                      derive_seed(seed, 37));

    const auto source_profile = compute_quantile_profile(source, K);

    std::vector<double> target(target_clean.size());
    for (std::size_t i = 0; i < target.size(); ++i)
        target[i] = corrupt(corruption, target_clean[i]);

    double acc = 0.0;
    if (interpolated_cdf) {
        const auto target_ecdf = make_ecdf(target);
        const double n = static_cast<double>(target_ecdf.size());
        for (std::size_t i = 0; i < eval_clean.size(); ++i) {
            const double z = corrupt(corruption, eval_clean[i]);
            // Clamp to the open interval so the interpolant's end knots are used
            // rather than an out-of-range level.
            double u = ecdf_eval(target_ecdf, z);
            u = std::min(u, (n - 0.5) / n);
            const double recovered = interpolate_quantile(source_profile, u);
            const double d = recovered - eval_clean[i];
            acc += d * d;
        }
    } else {
        const auto target_profile = compute_quantile_profile(target, K);
        const TailRule rule = StandardTail{};
        for (std::size_t i = 0; i < eval_clean.size(); ++i) {
            const double z = corrupt(corruption, eval_clean[i]);
            const double recovered = piecewise_transform(z, target_profile, source_profile, rule);
            const double d = recovered - eval_clean[i];
            acc += d * d;
        }
    }
    return acc / static_cast<double>(n_eval);
}

RegularityConstants truncated_normal_constants(double lo, double hi) {
    if (!(lo < hi))
        throw std::invalid_argument("truncated_normal_constants requires lo < hi");
    const auto phi = [](double x) {
        return std::exp(-0.5 * x * x) / 2.5066282746310005024157652848110;
    };
    const double z = normal_cdf(hi) - normal_cdf(lo);
    RegularityConstants c;

    // f(x) = phi(x)/Z is unimodal at 0; extremes sit at interval endpoints.
    c.f_min = phi(std::max(std::abs(lo), std::abs(hi))) / z;
    c.f_max = (lo <= 0.0 && hi >= 0.0) ? phi(0.0) / z
                                       : phi(std::min(std::abs(lo), std::abs(hi))) / z;

    // |f'(x)| = |x| phi(x) / Z; the candidate maximizers are the endpoints and
    // the interior stationary points x = +/-1 when the interval contains them.
    std::vector<double> candidates = {lo, hi};
    if (lo <= 1.0 && 1.0 <= hi)
        candidates.push_back(1.0);
    if (lo <= -1.0 && -1.0 <= hi)
        candidates.push_back(-1.0);
    double best = 0.0;
    for (double x : candidates)
        best = std::max(best, std::abs(x) * phi(x));
    c.lipschitz_density = best / z;
    return c;
}

} // namespace aqr
