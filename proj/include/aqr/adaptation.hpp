#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aqr/net.hpp"
#include "aqr/quantile.hpp"
#include "aqr/tails.hpp"

namespace aqr {

struct ChannelStatistics {
    QuantileProfile profile;
    double mean = 0.0;
    double std = 0.0; // population convention (divide by n)
    std::optional<SampledTailEstimate> calibrated_tails;
};

struct HookStatistics {
    std::string hook_id;
    std::vector<ChannelStatistics> channels;
};

// Frozen setup-phase artifact: per-hook, per-channel quantile profiles plus the
// moment summaries used by the affine baseline and the tail strategies.
struct SourceStatistics {
    int version = 1;
    int K = 0;
    long n_source = 0;
    TailStrategy tail_strategy = TailStrategy::AverageSampleTails;
    LayerPolicy layer_policy = LayerPolicy::All;
    std::vector<HookStatistics> hooks; // depth order

    const HookStatistics* find_hook(const std::string& hook_id) const;
};

struct AdaptationConfig {
    int K = 100; // 100 intervals = 101 knots
    TailStrategy tail_strategy = TailStrategy::AverageSampleTails;
    LayerPolicy layer_policy = LayerPolicy::All;
    long batch_size = 128;
    long tail_batch = 100;
    long tail_repeats = 1000;
    std::uint64_t rng_seed = 1;
};

struct AdaptDiagnostics {
    std::map<std::string, std::vector<QuantileProfile>> target_profiles; // per hook, per channel
    std::vector<std::string> warnings;
};

struct AdaptResult {
    Matrix output;
    AdaptDiagnostics diagnostics;
};

// One-time pass of source data through the frozen network: pools pre-activations
// per channel across all batches and records profiles, moments, and (for the
// average-sample-tails strategy) calibrated tail estimates.
SourceStatistics setup_phase(const Network& net, const std::vector<Matrix>& source_batches,
                             const AdaptationConfig& cfg);

// Episodic adaptation of one batch: target percentiles are computed from the batch
// itself at each selected hook, values are recalibrated against the stored source
// profile, and deeper layers see already-adapted activations. `corruption` maps are
// applied at hooks before the adaptation step and model the domain shift of the
// synthetic testbed.
AdaptResult adapt_batch(const Network& net, const SourceStatistics& stats,
                        const Matrix& batch, const Interceptors& corruption = {});

// Builds the per-channel recalibration interceptor used by adapt_batch. `pre`
// runs on the raw column first (corruption in the synthetic testbed).
ChannelTransform make_aqr_interceptor(const HookStatistics& hook_stats, int K,
                                      TailStrategy strategy, long n_source,
                                      AdaptDiagnostics* diagnostics,
                                      std::string hook_id,
                                      ChannelTransform pre = nullptr);

// Affine moment matching: mu_S + sigma_S * (x - mu_T) / sigma_T.
double ttn_transform(double x, double mean_source, double std_source, double mean_target,
                     double std_target);

// Population quantile map composed with the population target CDF; exact on
// synthetic distributions with closed-form components.
double oracle_aqr(double z, const std::function<double(double)>& source_quantile,
                  const std::function<double(double)>& target_cdf);

// Versioned JSON document with a content checksum; floating-point values survive
// a save/load round trip bit-exactly.
void save_statistics(const SourceStatistics& stats, const std::string& path);
SourceStatistics load_statistics(const std::string& path);

} // namespace aqr
