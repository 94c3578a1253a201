#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "aqr/net.hpp"

namespace aqr {

// Strictly increasing scalar maps modeling per-neuron domain shift at the
// pre-activation. Constructors enforce strict monotonicity on all of R.
struct AffineCorruption {
    double a = 1.0; // > 0
    double b = 0.0;
};

// g(t) = scale * t + alpha * t^3
struct CubicMonotoneCorruption {
    double scale = 1.0; // > 0
    double alpha = 0.0; // >= 0
};

// g(t) = t + amplitude * tanh(gain * t); g'(t) >= 1 + amplitude * gain > 0
struct TanhWarpCorruption {
    double gain = 1.0; // > 0
    double amplitude = 0.0;
};

struct CorruptionSpec;

struct ComposeCorruption {
    std::vector<CorruptionSpec> stages; // applied first to last
};

struct CorruptionSpec {
    std::variant<AffineCorruption, CubicMonotoneCorruption, TanhWarpCorruption,
                 ComposeCorruption>
        map;
};

CorruptionSpec affine_corruption(double a, double b);
CorruptionSpec cubic_corruption(double scale, double alpha);
CorruptionSpec tanh_warp_corruption(double gain, double amplitude);
CorruptionSpec compose_corruption(std::vector<CorruptionSpec> stages);

double corrupt(const CorruptionSpec& spec, double x);

// Monotone inversion: |corrupt(spec, result) - y| <= tol. Affine maps invert in
// closed form; everything else uses bisection with automatic bracket expansion.
double invert(const CorruptionSpec& spec, double y, double tol);

// ---------------------------------------------------------------------------
// Synthetic source data
// ---------------------------------------------------------------------------

struct StandardNormalMarginal {};
struct TruncatedNormalMarginal {
    double lo = -2.0;
    double hi = 2.0;
};
struct UniformMarginal {
    double lo = 0.0;
    double hi = 1.0;
};
struct GaussianMixtureMarginal {
    std::vector<double> weights; // positive, sum to 1
    std::vector<double> means;
    std::vector<double> stds;
};

using Marginal = std::variant<StandardNormalMarginal, TruncatedNormalMarginal,
                              UniformMarginal, GaussianMixtureMarginal>;

struct SourceSpec {
    std::vector<Marginal> marginals; // one per input dimension
    std::uint64_t rng_seed = 1;
};

SourceSpec make_source_spec(std::vector<Marginal> marginals, std::uint64_t rng_seed);

// n x d matrix of draws; column j uses an independent stream derived from
// (rng_seed, j), so results are deterministic per seed.
Matrix sample_source(const SourceSpec& spec, std::size_t n);

// Single scalar stream of marginal draws, for channel-level experiments.
std::vector<double> sample_marginal(const Marginal& marginal, std::size_t n,
                                    std::uint64_t seed);

} // namespace aqr
