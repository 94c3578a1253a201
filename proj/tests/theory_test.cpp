#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "aqr/adaptation.hpp"
#include "aqr/quantile.hpp"
#include "aqr/rng.hpp"
#include "aqr/tails.hpp"
#include "aqr/theory.hpp"
#include "oracles.hpp"

using namespace aqr;

TEST_CASE("mse report basics") {
    Matrix a(3, 2), b(3, 2);
    const auto zero = mse_against_reference(a, b);
    CHECK(zero.total == 0.0);
    CHECK(zero.per_neuron == std::vector<double>{0.0, 0.0});

    Matrix ones(5, 3);
    for (auto& v : ones.data)
        v = 1.0;
    Matrix zeros(5, 3);
    const auto unit = mse_against_reference(ones, zeros);
    CHECK(unit.per_neuron == std::vector<double>{1.0, 1.0, 1.0});
    CHECK(unit.total == doctest::Approx(3.0));
    CHECK(unit.n_eval == 5);

    Matrix bad(4, 3);
    CHECK_THROWS_WITH_AS(mse_against_reference(ones, bad), "shape mismatch",
                         std::invalid_argument);
}

TEST_CASE("dkw radius closed form") {
    CHECK(dkw_epsilon(5000, 0.05) == doctest::Approx(0.019206).epsilon(5e-4));
    CHECK(dkw_epsilon(1, 2.0 * std::exp(-2.0)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(dkw_epsilon(4 * 1234, 0.3) == doctest::Approx(dkw_epsilon(1234, 0.3) / 2).epsilon(1e-12));
    CHECK_THROWS_AS(dkw_epsilon(0, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(dkw_epsilon(10, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(dkw_epsilon(10, 1.0), std::invalid_argument);
}

TEST_CASE("three-term bound arithmetic") {
    RegularityConstants c;
    c.f_min = 1.0;
    c.f_max = 1.0;
    c.lipschitz_density = 8.0;
    const double delta = 2.0 * std::exp(-2.0); // log(2/delta) = 2
    CHECK(theorem1_bound(c, 1, 1, 1, delta) == doctest::Approx(9.0).epsilon(1e-12));

    c.lipschitz_density = 0.0;
    CHECK(theorem1_bound(c, 1, 1000000000L, 1000000000L, 0.1) < 1e-6);

    c.lipschitz_density = 8.0;
    const double b1 = theorem1_bound(c, 2, 1000000000L, 1000000000L, 0.1);
    const double b2 = theorem1_bound(c, 4, 1000000000L, 1000000000L, 0.1);
    CHECK(b1 / b2 == doctest::Approx(16.0).epsilon(1e-6));

    c.f_min = 0.0;
    CHECK_THROWS_AS(theorem1_bound(c, 1, 10, 10, 0.1), std::invalid_argument);
}

TEST_CASE("log-log fits recover power laws") {
    std::vector<double> xs = {1, 2, 4, 8, 16};
    std::vector<double> quartic(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
        quartic[i] = std::pow(xs[i], -4.0);
    const auto f4 = fit_loglog_rate(xs, quartic);
    CHECK(f4.slope == doctest::Approx(-4.0).epsilon(1e-12));
    CHECK(f4.r_squared == doctest::Approx(1.0).epsilon(1e-12));

    const auto flat = fit_loglog_rate(xs, {3, 3, 3, 3, 3});
    CHECK(flat.slope == doctest::Approx(0.0));
    CHECK(flat.r_squared == 1.0);

    std::mt19937_64 gen(3);
    std::vector<double> noisy(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
        noisy[i] = 5.0 / xs[i] * (1.0 + 0.01 * (2 * uniform01(gen) - 1));
    const auto f1 = fit_loglog_rate(xs, noisy);
    CHECK(f1.slope > -1.1);
    CHECK(f1.slope < -0.9);

    CHECK_THROWS_AS(fit_loglog_rate({1, 2}, {1, 2}), std::invalid_argument);
    CHECK_THROWS_AS(fit_loglog_rate({1, 2, 3}, {1, -2, 3}), std::invalid_argument);
}

TEST_CASE("discretization gap: affine is exact, quadratic is tight") {
    const auto affine = [](double u) { return 3.0 * u - 1.0; };
    CHECK(discretization_gap(affine, 7, 100) <= 1e-15); // exact up to rounding

    const auto square = [](double u) { return u * u; };
    // (||H''||/8) K^-2 = (2/8)(1/4) = 1/16, met exactly at segment midpoints
    CHECK(discretization_gap(square, 2, 20) == 0.0625);

    CHECK_THROWS_AS(discretization_gap(square, 4, 10), std::invalid_argument);
}

TEST_CASE("truncated-normal gaps stay under the lemma bound") {
    const auto c = truncated_normal_constants(-2.0, 2.0);
    const double z = oracle::normal_cdf(2.0) - oracle::normal_cdf(-2.0);
    CHECK(c.f_min == doctest::Approx(oracle::normal_pdf(2.0) / z).epsilon(1e-12));
    CHECK(c.f_max == doctest::Approx(oracle::normal_pdf(0.0) / z).epsilon(1e-12));
    CHECK(c.lipschitz_density == doctest::Approx(oracle::normal_pdf(1.0) / z).epsilon(1e-12));

    const auto H = [](double u) { return oracle::truncated_normal_quantile(-2.0, 2.0, u); };
    const double h_pp = c.lipschitz_density / (c.f_min * c.f_min * c.f_min);
    for (int K : {8, 16, 32, 64, 128}) {
        const double gap = discretization_gap(H, K, 12 * K);
        CHECK(gap <= h_pp / 8.0 / (static_cast<double>(K) * K));
    }
}

TEST_CASE("error decomposition is an exact identity") {
    // practical = interpolated source quantiles composed with the target ecdf;
    // the two declared error terms must sum to the total at every point.
    GaussianSampler g(5);
    std::vector<double> source(4000), target(4000);
    for (auto& v : source)
        v = g();
    for (auto& v : target)
        v = g() * 1.4 + 0.3;
    const int K = 32;
    const auto profile = compute_quantile_profile(source, K);
    const auto ecdf = make_ecdf(target);
    const auto H = [](double u) { return oracle::probit_bisect(std::clamp(u, 1e-9, 1 - 1e-9)); };
    const auto F_q = [](double z) { return oracle::normal_cdf((z - 0.3) / 1.4); };

    std::mt19937_64 gen(6);
    for (int i = 0; i < 400; ++i) {
        const double z = (uniform01(gen) - 0.5) * 8.0;
        const double u_hat = std::clamp(ecdf_eval(ecdf, z), 1e-6, 1.0 - 1e-6);
        const double practical = interpolate_quantile(profile, u_hat);
        const double oracle_value = H(F_q(z));
        const double quantile_term = practical - H(u_hat);
        const double cdf_term = H(u_hat) - oracle_value;
        const double total = practical - oracle_value;
        CHECK(total == doctest::Approx(quantile_term + cdf_term).epsilon(1e-12));
    }
}

TEST_CASE("empirical interpolant stays within the worst knot error") {
    GaussianSampler g(8);
    std::vector<double> sample(3000);
    for (auto& v : sample)
        v = g();
    const int K = 25;
    const auto empirical = compute_quantile_profile(sample, K);
    const auto H = [](double u) { return oracle::probit_bisect(std::clamp(u, 1e-12, 1 - 1e-12)); };

    double max_knot_err = 0.0;
    std::vector<double> exact_knots(static_cast<std::size_t>(K) + 1);
    for (int j = 0; j <= K; ++j) {
        const double u = std::clamp(j / static_cast<double>(K), 1e-4, 1 - 1e-4);
        exact_knots[static_cast<std::size_t>(j)] = H(u);
        max_knot_err = std::max(max_knot_err,
                                std::abs(empirical.knots[static_cast<std::size_t>(j)] -
                                         exact_knots[static_cast<std::size_t>(j)]));
    }
    const auto exact_profile = make_profile(exact_knots, empirical.sample_count);
    double sup = 0.0;
    for (int i = 0; i <= 4000; ++i) {
        const double u = i / 4000.0;
        sup = std::max(sup, std::abs(interpolate_quantile(empirical, u) -
                                     interpolate_quantile(exact_profile, u)));
    }
    CHECK(sup <= max_knot_err + 1e-12);
}

TEST_CASE("small-batch deviation replays the reference with shared seeds") {
    const auto spec = make_source_spec({StandardNormalMarginal{}}, 1);
    const auto result = tail_deviation_experiment(4000, 4000, 1, spec, 50, 9);
    for (const auto& level : result.deviations)
        for (double dev : level)
            CHECK(dev == 0.0);
}

TEST_CASE("small batches overestimate the minimum and underestimate the maximum") {
    const auto spec = make_source_spec({StandardNormalMarginal{}}, 1);
    const auto result = tail_deviation_experiment(10000, 128, 20, spec, 100, 17);
    auto mean_of = [&](int level) {
        const auto& v = result.deviations[static_cast<std::size_t>(level)];
        double acc = 0;
        for (double d : v)
            acc += d;
        return acc / static_cast<double>(v.size());
    };
    CHECK(mean_of(0) > 0.0);
    CHECK(mean_of(100) < 0.0);
    // interior levels deviate far less than the extremes
    auto mean_abs = [&](int level) {
        const auto& v = result.deviations[static_cast<std::size_t>(level)];
        double acc = 0;
        for (double d : v)
            acc += std::abs(d);
        return acc / static_cast<double>(v.size());
    };
    CHECK(mean_abs(50) < mean_abs(0));
    CHECK(mean_abs(50) < mean_abs(100));
}

TEST_CASE("affine-baseline population residual on the cubic channel") {
    // z = s + s^3 of a standard normal: the moment-matching map leaves a fixed
    // residual. Quadrature puts it near 0.295, comfortably above the 0.1 floor.
    const double sigma_t = std::sqrt(22.0); // E[(s + s^3)^2] = 1 + 6 + 15
    const double residual = oracle::gauss_expect(0.0, 1.0, [&](double s) {
        const double recovered = (s + s * s * s) / sigma_t;
        return (recovered - s) * (recovered - s);
    });
    CHECK(residual == doctest::Approx(6.4774 / 22.0).epsilon(1e-3));
    CHECK(residual >= 0.1);

    // finite-sample check at n = 100000
    GaussianSampler g(23);
    const long n = 100000;
    double mean = 0;
    std::vector<double> z(static_cast<std::size_t>(n)), s(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
        s[static_cast<std::size_t>(i)] = g();
        z[static_cast<std::size_t>(i)] =
            s[static_cast<std::size_t>(i)] + std::pow(s[static_cast<std::size_t>(i)], 3);
        mean += z[static_cast<std::size_t>(i)];
    }
    mean /= static_cast<double>(n);
    double var = 0;
    for (double v : z)
        var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    double mse = 0;
    for (long i = 0; i < n; ++i) {
        const double rec = ttn_transform(z[static_cast<std::size_t>(i)], 0.0, 1.0, mean, sd);
        const double d = rec - s[static_cast<std::size_t>(i)];
        mse += d * d;
    }
    mse /= static_cast<double>(n);
    CHECK(mse >= 0.1);
}

TEST_CASE("channel recalibration error shrinks with n") {
    const Marginal m = TruncatedNormalMarginal{-2.5, 2.5};
    const auto g = cubic_corruption(1.0, 0.4);
    const double coarse = channel_recalibration_mse(m, g, 64, 500, 500, 2000, 3);
    const double fine = channel_recalibration_mse(m, g, 64, 50000, 50000, 2000, 3);
    CHECK(fine < coarse);
    CHECK(fine < 0.01);
}
