#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "aqr/adaptation.hpp"
#include "aqr/corruption.hpp"
#include "aqr/net.hpp"
#include "aqr/theory.hpp"

namespace aqr {

// Configuration and validation problems; the CLI maps these to exit code 1.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ExperimentKind {
    Setup,
    Adapt,
    TheoryRates,
    TailAblation,
    TailDeviation,
    KdeDemo,
    Granularity,
};

const char* to_string(ExperimentKind k);
ExperimentKind experiment_from_string(const std::string& name);

struct NetworkConfig {
    std::size_t d = 3;
    std::size_t m = 8;
    std::size_t depth = 1;
    Activation activation = Activation::leaky_relu(0.1);
    std::uint64_t seed = 7;
};

enum class SourceKind { StandardNormal, TruncatedNormal, Uniform, GaussianMixture };

struct SourceConfig {
    SourceKind kind = SourceKind::StandardNormal;
    double lo = -2.0, hi = 2.0;
    std::vector<double> weights{0.5, 0.5};
    std::vector<double> means{-2.0, 2.0};
    std::vector<double> stds{0.5, 0.5};

    Marginal marginal() const;
};

enum class CorruptionKind { Affine, Cubic, TanhWarp };

struct CorruptionConfig {
    CorruptionKind kind = CorruptionKind::Cubic;
    double a = 1.5, b = 0.2;          // affine
    double scale = 1.0, alpha = 0.2;  // cubic
    double gain = 1.0, amplitude = 0.5; // tanh warp
    double channel_step = 0.1; // per-channel increment of alpha / b / amplitude

    CorruptionSpec for_channel(std::size_t channel) const;
};

struct RunConfig {
    long source_n = 10000;
    long eval_n = 8192;
    long trials = 10;
    std::vector<long> eval_batches{128, 512};
    std::vector<int> granularity_levels{10, 100};
};

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::KdeDemo;
    AdaptationConfig adaptation;
    NetworkConfig network;
    SourceConfig source;
    CorruptionConfig corruption;
    RunConfig run;
    std::string statistics_path; // optional input for `adapt`
    std::string output_dir = "out";
    std::uint64_t master_seed = 1;
};

// Parses the sectioned key = value format, applies defaults, and validates.
// Throws ConfigError with line/field context.
ExperimentConfig parse_config(const std::string& path);

// Runs the configured experiment, writing CSV/SVG artifacts plus a manifest
// into cfg.output_dir. Returns the artifact names (manifest included).
std::vector<std::string> run_experiment(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Synthetic-testbed plumbing shared by experiments and the acceptance suite
// ---------------------------------------------------------------------------

using HookCorruptions = std::map<std::string, std::vector<CorruptionSpec>>;

// Per-channel corruption applied to a pre-activation column.
ChannelTransform corruption_transform(const std::vector<CorruptionSpec>& per_channel);

struct TestbedRun {
    std::vector<HookCapture> reference;      // clean forward captures
    std::map<std::string, Matrix> adapted;   // post-interception pre-activations per hook
    Matrix output;
};

// Clean reference pass plus a corrupted pass with per-hook adapters (which see
// already-corrupted columns). Adapters may be empty to observe raw corruption.
TestbedRun run_testbed(const Network& net, const Matrix& inputs,
                       const HookCorruptions& corruption,
                       const std::map<std::string, ChannelTransform>& adapters);

enum class AdaptMethod { None, Aqr, Ttn };

ChannelTransform aqr_adapter(const SourceStatistics& stats, const std::string& hook_id);
ChannelTransform ttn_adapter(const SourceStatistics& stats, const std::string& hook_id);

// Post-activation (hidden-value) mean squared error of the adapted pass against
// the clean reference, per neuron across all hooks.
MseReport hidden_mse(const Network& net, const TestbedRun& run);

// Convenience wrapper: corrupt every hooked channel, adapt with the chosen
// method at the policy-selected hooks, and measure hidden-value recovery.
MseReport testbed_hidden_mse(const Network& net, const SourceStatistics& stats,
                             const Matrix& inputs, const HookCorruptions& corruption,
                             AdaptMethod method);

// Per-channel corruption specs for every hook of a network.
HookCorruptions make_hook_corruptions(const Network& net, const CorruptionConfig& cfg);

} // namespace aqr
