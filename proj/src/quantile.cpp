#include "aqr/quantile.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aqr {

QuantileProfile make_profile(std::vector<double> knots, long sample_count) {
    if (knots.size() < 2)
        throw std::invalid_argument("profile needs at least two knots");
    if (sample_count < 1)
        throw std::invalid_argument("profile sample_count must be >= 1");
    for (std::size_t j = 0; j < knots.size(); ++j) {
        if (!std::isfinite(knots[j]))
            throw std::invalid_argument("non-finite input");
        if (j > 0 && knots[j] < knots[j - 1])
            throw std::invalid_argument("profile knots must be non-decreasing");
    }
    QuantileProfile p;
    p.level_count = static_cast<int>(knots.size()) - 1;
    p.sample_count = sample_count;
    p.knots = std::move(knots);
    return p;
}

QuantileProfile compute_quantile_profile(const std::vector<double>& samples, int K) {
    if (samples.size() < 2)
        throw std::invalid_argument("insufficient samples");
    if (K < 1)
        throw std::invalid_argument("K must be >= 1");
    for (double v : samples)
        if (!std::isfinite(v))
            throw std::invalid_argument("non-finite input");

    std::vector<double> sorted(samples);
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();

    QuantileProfile p;
    p.level_count = K;
    p.sample_count = static_cast<long>(n);
    p.knots.resize(static_cast<std::size_t>(K) + 1);
    for (int j = 0; j <= K; ++j) {
        // Order-statistic position (n-1) * j/K, computed as an exact integer
        // product so that knots land on samples whenever the position is integral.
        const double pos = static_cast<double>(j) * static_cast<double>(n - 1) /
                           static_cast<double>(K);
        const auto lo = static_cast<std::size_t>(pos);
        if (lo + 1 >= n) {
            p.knots[static_cast<std::size_t>(j)] = sorted[n - 1];
            continue;
        }
        const double frac = pos - static_cast<double>(lo);
        p.knots[static_cast<std::size_t>(j)] =
            sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
    }
    // Guard against rounding in the interpolation ever breaking monotonicity.
    for (int j = 1; j <= K; ++j) {
        auto& k = p.knots;
        if (k[static_cast<std::size_t>(j)] < k[static_cast<std::size_t>(j) - 1])
            k[static_cast<std::size_t>(j)] = k[static_cast<std::size_t>(j) - 1];
    }
    return p;
}

Ecdf make_ecdf(std::vector<double> samples) {
    if (samples.empty())
        throw std::invalid_argument("insufficient samples");
    for (double v : samples)
        if (!std::isfinite(v))
            throw std::invalid_argument("non-finite input");
    std::sort(samples.begin(), samples.end());
    return Ecdf{std::move(samples)};
}

double ecdf_eval(const Ecdf& e, double x) {
    const auto& s = e.sorted_samples;
    const auto count = std::upper_bound(s.begin(), s.end(), x) - s.begin();
    return static_cast<double>(count) / static_cast<double>(s.size());
}

double interpolate_quantile(const QuantileProfile& profile, double u) {
    if (!(u >= 0.0 && u <= 1.0))
        throw std::invalid_argument("level out of range");
    const int K = profile.level_count;
    const double t = u * K;
    int j = static_cast<int>(t);
    if (j >= K) // u == 1 (or rounding) pins the last knot exactly
        return profile.knots.back();
    const double frac = t - j;
    const auto uj = static_cast<std::size_t>(j);
    return profile.knots[uj] + frac * (profile.knots[uj + 1] - profile.knots[uj]);
}

} // namespace aqr
