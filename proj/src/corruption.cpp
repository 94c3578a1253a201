#include "aqr/corruption.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "aqr/rng.hpp"
#include "aqr/tails.hpp"

namespace aqr {

CorruptionSpec affine_corruption(double a, double b) {
    if (!(a > 0.0))
        throw std::invalid_argument("affine corruption requires a > 0");
    return CorruptionSpec{AffineCorruption{a, b}};
}

CorruptionSpec cubic_corruption(double scale, double alpha) {
    if (!(scale > 0.0) || alpha < 0.0)
        throw std::invalid_argument("cubic corruption requires scale > 0 and alpha >= 0");
    return CorruptionSpec{CubicMonotoneCorruption{scale, alpha}};
}

CorruptionSpec tanh_warp_corruption(double gain, double amplitude) {
    if (!(gain > 0.0))
        throw std::invalid_argument("tanh warp requires gain > 0");
    // g'(t) = 1 + amplitude * gain * sech^2(gain t) >= 1 + amplitude * gain
    if (!(1.0 + amplitude * gain > 0.0))
        throw std::invalid_argument("tanh warp requires 1 + amplitude * gain > 0");
    return CorruptionSpec{TanhWarpCorruption{gain, amplitude}};
}

CorruptionSpec compose_corruption(std::vector<CorruptionSpec> stages) {
    if (stages.empty())
        throw std::invalid_argument("compose corruption needs at least one stage");
    return CorruptionSpec{ComposeCorruption{std::move(stages)}};
}

double corrupt(const CorruptionSpec& spec, double x) {
    return std::visit(
        [x](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, AffineCorruption>) {
                return m.a * x + m.b;
            } else if constexpr (std::is_same_v<T, CubicMonotoneCorruption>) {
                return m.scale * x + m.alpha * x * x * x;
            } else if constexpr (std::is_same_v<T, TanhWarpCorruption>) {
                return x + m.amplitude * std::tanh(m.gain * x);
            } else {
                double v = x;
                for (const auto& stage : m.stages)
                    v = corrupt(stage, v);
                return v;
            }
        },
        spec.map);
}

double invert(const CorruptionSpec& spec, double y, double tol) {
    if (!(tol > 0.0))
        throw std::invalid_argument("invert requires tol > 0");
    if (!std::isfinite(y))
        throw std::invalid_argument("invert requires finite y");

    if (const auto* aff = std::get_if<AffineCorruption>(&spec.map))
        return (y - aff->b) / aff->a;

    // Bracket the root, expanding outward; corrupt() is strictly increasing.
    double lo = y - 1.0, hi = y + 1.0;
    double step = 1.0;
    while (corrupt(spec, lo) > y) {
        lo -= step;
        step *= 2.0;
    }
    step = 1.0;
    while (corrupt(spec, hi) < y) {
        hi += step;
        step *= 2.0;
    }
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double v = corrupt(spec, mid);
        if (std::abs(v - y) <= tol && hi - lo <= tol)
            return mid;
        if (v < y)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

SourceSpec make_source_spec(std::vector<Marginal> marginals, std::uint64_t rng_seed) {
    if (marginals.empty())
        throw std::invalid_argument("source spec needs at least one marginal");
    for (const auto& m : marginals) {
        if (const auto* t = std::get_if<TruncatedNormalMarginal>(&m)) {
            if (!(t->lo < t->hi))
                throw std::invalid_argument("truncated normal requires lo < hi");
        } else if (const auto* u = std::get_if<UniformMarginal>(&m)) {
            if (!(u->lo < u->hi))
                throw std::invalid_argument("uniform interval requires lo < hi");
        } else if (const auto* g = std::get_if<GaussianMixtureMarginal>(&m)) {
            if (g->weights.empty() || g->weights.size() != g->means.size() ||
                g->weights.size() != g->stds.size())
                throw std::invalid_argument("mixture component arrays must match");
            double sum = 0.0;
            for (double w : g->weights) {
                if (!(w > 0.0))
                    throw std::invalid_argument("mixture weights must be positive");
                sum += w;
            }
            if (std::abs(sum - 1.0) > 1e-9)
                throw std::invalid_argument("mixture weights must sum to 1");
            for (double s : g->stds)
                if (!(s > 0.0))
                    throw std::invalid_argument("mixture stds must be positive");
        }
    }
    return SourceSpec{std::move(marginals), rng_seed};
}

std::vector<double> sample_marginal(const Marginal& marginal, std::size_t n,
                                    std::uint64_t seed) {
    std::vector<double> out(n);
    GaussianSampler gauss(seed);
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, StandardNormalMarginal>) {
                for (auto& v : out)
                    v = gauss();
            } else if constexpr (std::is_same_v<T, TruncatedNormalMarginal>) {
                // Inverse-CDF sampling keeps the truncation exact.
                const double flo = normal_cdf(m.lo);
                const double fhi = normal_cdf(m.hi);
                auto& gen = gauss.engine();
                for (auto& v : out)
                    v = probit(flo + uniform01(gen) * (fhi - flo));
            } else if constexpr (std::is_same_v<T, UniformMarginal>) {
                auto& gen = gauss.engine();
                for (auto& v : out)
                    v = m.lo + uniform01(gen) * (m.hi - m.lo);
            } else {
                auto& gen = gauss.engine();
                for (auto& v : out) {
                    const double u = uniform01(gen);
                    double acc = 0.0;
                    std::size_t pick = m.weights.size() - 1;
                    for (std::size_t c = 0; c < m.weights.size(); ++c) {
                        acc += m.weights[c];
                        if (u < acc) {
                            pick = c;
                            break;
                        }
                    }
                    v = m.means[pick] + m.stds[pick] * gauss();
                }
            }
        },
        marginal);
    return out;
}

Matrix sample_source(const SourceSpec& spec, std::size_t n) {
    if (n < 1)
        throw std::invalid_argument("sample_source requires n >= 1");
    const std::size_t d = spec.marginals.size();
    Matrix out(n, d);
    for (std::size_t j = 0; j < d; ++j) {
        auto column = sample_marginal(spec.marginals[j], n, derive_seed(spec.rng_seed, j));
        for (std::size_t r = 0; r < n; ++r)
            out(r, j) = column[r];
    }
    return out;
}

} // namespace aqr
