#include "aqr/adaptation.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "aqr/hash.hpp"
#include "aqr/rng.hpp"
#include "aqr/transform.hpp"

namespace aqr {

const HookStatistics* SourceStatistics::find_hook(const std::string& hook_id) const {
    for (const auto& h : hooks)
        if (h.hook_id == hook_id)
            return &h;
    return nullptr;
}

namespace {

std::pair<double, double> moments(const std::vector<double>& values) {
    double mean = 0.0;
    for (double v : values)
        mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values)
        var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    return {mean, std::sqrt(var)};
}

} // namespace

SourceStatistics setup_phase(const Network& net, const std::vector<Matrix>& source_batches,
                             const AdaptationConfig& cfg) {
    if (cfg.K < 1)
        throw std::invalid_argument("K must be >= 1");
    std::size_t total_rows = 0;
    for (const auto& b : source_batches)
        total_rows += b.rows;
    const std::size_t needed =
        std::max(static_cast<std::size_t>(cfg.K) + 1, static_cast<std::size_t>(cfg.tail_batch));
    if (total_rows < needed)
        throw std::invalid_argument("insufficient source rows");

    // Pool pre-activation columns per hook across all batches.
    std::map<std::string, std::vector<std::vector<double>>> pooled;
    for (const auto& batch : source_batches) {
        auto result = forward(net, batch);
        for (const auto& capture : result.captures) {
            auto& channels = pooled[capture.hook_id];
            channels.resize(capture.pre_activations.cols);
            for (std::size_t c = 0; c < capture.pre_activations.cols; ++c) {
                auto column = channel_samples(capture, c);
                auto& sink = channels[c];
                sink.insert(sink.end(), column.begin(), column.end());
            }
        }
    }

    SourceStatistics stats;
    stats.K = cfg.K;
    stats.n_source = static_cast<long>(total_rows);
    stats.tail_strategy = cfg.tail_strategy;
    stats.layer_policy = cfg.layer_policy;

    std::size_t hook_index = 0;
    for (const auto& hook_id : net.hook_ids()) {
        HookStatistics hs;
        hs.hook_id = hook_id;
        const auto& channels = pooled.at(hook_id);
        for (std::size_t c = 0; c < channels.size(); ++c) {
            ChannelStatistics cs;
            cs.profile = compute_quantile_profile(channels[c], cfg.K);
            std::tie(cs.mean, cs.std) = moments(channels[c]);
            if (cfg.tail_strategy == TailStrategy::AverageSampleTails) {
                cs.calibrated_tails = calibrate_average_sample_tails(
                    channels[c], cfg.tail_batch, cfg.tail_repeats,
                    derive_seed(cfg.rng_seed, hook_index * 4096 + c));
            }
            hs.channels.push_back(std::move(cs));
        }
        stats.hooks.push_back(std::move(hs));
        ++hook_index;
    }
    return stats;
}

ChannelTransform make_aqr_interceptor(const HookStatistics& hook_stats, int K,
                                      TailStrategy strategy, long n_source,
                                      AdaptDiagnostics* diagnostics, std::string hook_id,
                                      ChannelTransform pre) {
    return [&hook_stats, K, strategy, n_source, diagnostics, hook_id = std::move(hook_id),
            pre = std::move(pre)](std::size_t channel, std::span<double> values) {
        if (pre)
            pre(channel, values);

        const ChannelStatistics& cs = hook_stats.channels.at(channel);
        std::vector<double> column(values.begin(), values.end());
        QuantileProfile target = compute_quantile_profile(column, K);

        TailRule rule;
        switch (strategy) {
        case TailStrategy::Standard:
            rule = StandardTail{};
            break;
        case TailStrategy::AverageSampleTails: {
            if (!cs.calibrated_tails)
                throw std::runtime_error("tail context mismatch: calibrated tails missing");
            rule = AverageSampleTailsRule{cs.calibrated_tails->low, cs.calibrated_tails->high};
            break;
        }
        case TailStrategy::NotCalibrated:
            rule = NotCalibratedTail{};
            break;
        case TailStrategy::Clipping:
            rule = ClippingTail{};
            break;
        case TailStrategy::GaussianEstimation: {
            auto [mean_t, std_t] = moments(column);
            // Both fitted curves are evaluated at the source-sized plotting
            // positions; per-side sizes would let the reconstructed extreme
            // intervals diverge by orders of magnitude at small batches.
            rule = GaussianEstimationTail{GaussianFit{cs.mean, cs.std},
                                          GaussianFit{mean_t, std_t}, n_source, n_source};
            break;
        }
        case TailStrategy::IntervalEstimation: {
            auto [mean_t, std_t] = moments(column);
            (void)mean_t;
            rule = IntervalEstimationTail{cs.std, std_t};
            break;
        }
        }

        auto adapted = batch_transform(column, target, cs.profile, rule);
        std::copy(adapted.begin(), adapted.end(), values.begin());
        if (diagnostics)
            diagnostics->target_profiles[hook_id].push_back(std::move(target));
    };
}

AdaptResult adapt_batch(const Network& net, const SourceStatistics& stats, const Matrix& batch,
                        const Interceptors& corruption) {
    if (batch.rows < 2)
        throw std::invalid_argument("cannot estimate target quantiles");

    AdaptResult result;
    if (batch.rows <= static_cast<std::size_t>(stats.K))
        result.diagnostics.warnings.push_back("quantile undersampling: batch rows <= K");

    const auto selected = select_hooks(net, stats.layer_policy);
    const std::set<std::string> selected_set(selected.begin(), selected.end());

    Interceptors interceptors;
    for (const auto& hook_id : net.hook_ids()) {
        ChannelTransform pre;
        if (auto it = corruption.find(hook_id); it != corruption.end())
            pre = it->second;
        if (selected_set.count(hook_id)) {
            const HookStatistics* hs = stats.find_hook(hook_id);
            if (!hs)
                throw std::invalid_argument("statistics missing hook: " + hook_id);
            interceptors[hook_id] =
                make_aqr_interceptor(*hs, stats.K, stats.tail_strategy, stats.n_source,
                                     &result.diagnostics, hook_id, std::move(pre));
        } else if (pre) {
            interceptors[hook_id] = std::move(pre);
        }
    }

    auto fw = forward(net, batch, interceptors);
    result.output = std::move(fw.output);
    return result;
}

double ttn_transform(double x, double mean_source, double std_source, double mean_target,
                     double std_target) {
    if (!(std_target > 0.0))
        throw std::invalid_argument("degenerate target");
    return mean_source + std_source * (x - mean_target) / std_target;
}

double oracle_aqr(double z, const std::function<double(double)>& source_quantile,
                  const std::function<double(double)>& target_cdf) {
    return source_quantile(target_cdf(z));
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

nlohmann::json payload_json(const SourceStatistics& stats) {
    nlohmann::json hooks = nlohmann::json::array();
    for (const auto& h : stats.hooks) {
        nlohmann::json channels = nlohmann::json::array();
        for (const auto& c : h.channels) {
            nlohmann::json jc;
            jc["knots"] = c.profile.knots;
            jc["sample_count"] = c.profile.sample_count;
            jc["mean"] = c.mean;
            jc["std"] = c.std;
            if (c.calibrated_tails) {
                jc["calibrated_low"] = c.calibrated_tails->low;
                jc["calibrated_high"] = c.calibrated_tails->high;
                jc["tail_batch"] = c.calibrated_tails->batch_size;
                jc["tail_repeats"] = c.calibrated_tails->repeats;
            }
            channels.push_back(std::move(jc));
        }
        hooks.push_back({{"hook_id", h.hook_id}, {"channels", std::move(channels)}});
    }
    nlohmann::json payload;
    payload["K"] = stats.K;
    payload["n_source"] = stats.n_source;
    payload["tail_strategy"] = to_string(stats.tail_strategy);
    payload["layer_policy"] = to_string(stats.layer_policy);
    payload["hooks"] = std::move(hooks);
    return payload;
}

} // namespace

void save_statistics(const SourceStatistics& stats, const std::string& path) {
    nlohmann::json payload = payload_json(stats);
    nlohmann::json doc;
    doc["version"] = stats.version;
    doc["checksum"] = sha256_hex(payload.dump());
    doc["payload"] = std::move(payload);

    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write statistics file: " + path);
    out << doc.dump(2) << '\n';
    if (!out)
        throw std::runtime_error("cannot write statistics file: " + path);
}

SourceStatistics load_statistics(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("malformed statistics file: cannot open " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception&) {
        throw std::runtime_error("malformed statistics file");
    }

    try {
        if (!doc.is_object() || !doc.contains("version"))
            throw std::runtime_error("malformed statistics file");
        const int version = doc.at("version").get<int>();
        if (version != 1)
            throw std::runtime_error("unsupported version");
        if (!doc.contains("checksum") || !doc.contains("payload"))
            throw std::runtime_error("malformed statistics file");
        const auto& payload = doc.at("payload");
        if (sha256_hex(payload.dump()) != doc.at("checksum").get<std::string>())
            throw std::runtime_error("statistics checksum failure");

        SourceStatistics stats;
        stats.version = version;
        stats.K = payload.at("K").get<int>();
        stats.n_source = payload.at("n_source").get<long>();
        stats.tail_strategy = tail_strategy_from_string(payload.at("tail_strategy"));
        stats.layer_policy = layer_policy_from_string(payload.at("layer_policy"));
        for (const auto& jh : payload.at("hooks")) {
            HookStatistics hs;
            hs.hook_id = jh.at("hook_id").get<std::string>();
            for (const auto& jc : jh.at("channels")) {
                ChannelStatistics cs;
                cs.profile = make_profile(jc.at("knots").get<std::vector<double>>(),
                                          jc.at("sample_count").get<long>());
                cs.mean = jc.at("mean").get<double>();
                cs.std = jc.at("std").get<double>();
                if (jc.contains("calibrated_low")) {
                    SampledTailEstimate est;
                    est.low = jc.at("calibrated_low").get<double>();
                    est.high = jc.at("calibrated_high").get<double>();
                    est.batch_size = jc.at("tail_batch").get<long>();
                    est.repeats = jc.at("tail_repeats").get<long>();
                    cs.calibrated_tails = est;
                }
                if (cs.profile.level_count != stats.K)
                    throw std::runtime_error("malformed statistics file: K mismatch");
                hs.channels.push_back(std::move(cs));
            }
            stats.hooks.push_back(std::move(hs));
        }
        return stats;
    } catch (const nlohmann::json::exception&) {
        throw std::runtime_error("malformed statistics file");
    }
}

} // namespace aqr
