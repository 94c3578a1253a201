#include "aqr/experiments.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "aqr/quantile.hpp"
#include "aqr/report.hpp"
#include "aqr/rng.hpp"
#include "aqr/transform.hpp"

namespace aqr {

const char* to_string(ExperimentKind k) {
    switch (k) {
    case ExperimentKind::Setup: return "setup";
    case ExperimentKind::Adapt: return "adapt";
    case ExperimentKind::TheoryRates: return "theory-rates";
    case ExperimentKind::TailAblation: return "tail-ablation";
    case ExperimentKind::TailDeviation: return "tail-deviation";
    case ExperimentKind::KdeDemo: return "kde-demo";
    case ExperimentKind::Granularity: return "granularity";
    }
    return "kde-demo";
}

ExperimentKind experiment_from_string(const std::string& name) {
    if (name == "setup") return ExperimentKind::Setup;
    if (name == "adapt") return ExperimentKind::Adapt;
    if (name == "theory-rates") return ExperimentKind::TheoryRates;
    if (name == "tail-ablation") return ExperimentKind::TailAblation;
    if (name == "tail-deviation") return ExperimentKind::TailDeviation;
    if (name == "kde-demo") return ExperimentKind::KdeDemo;
    if (name == "granularity") return ExperimentKind::Granularity;
    throw ConfigError("unknown experiment: " + name);
}

Marginal SourceConfig::marginal() const {
    switch (kind) {
    case SourceKind::StandardNormal: return StandardNormalMarginal{};
    case SourceKind::TruncatedNormal: return TruncatedNormalMarginal{lo, hi};
    case SourceKind::Uniform: return UniformMarginal{lo, hi};
    case SourceKind::GaussianMixture: return GaussianMixtureMarginal{weights, means, stds};
    }
    return StandardNormalMarginal{};
}

CorruptionSpec CorruptionConfig::for_channel(std::size_t channel) const {
    const double step = channel_step * static_cast<double>(channel);
    switch (kind) {
    case CorruptionKind::Affine: return affine_corruption(a, b + step);
    case CorruptionKind::Cubic: return cubic_corruption(scale, alpha + step);
    case CorruptionKind::TanhWarp: return tanh_warp_corruption(gain, amplitude + step);
    }
    return cubic_corruption(scale, alpha);
}

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

namespace {

struct RawValue {
    std::string text;
    int line = 0;
    mutable bool consumed = false;
};

using RawSection = std::map<std::string, RawValue>;
using RawConfig = std::map<std::string, RawSection>;

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b])))
        ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1])))
        --e;
    return s.substr(b, e - b);
}

RawConfig read_raw(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file: " + path);

    RawConfig raw;
    std::string section; // "" is the top-level section
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto pos = line.find('#'); pos != std::string::npos)
            line.erase(pos);
        const std::string stripped = trim(line);
        if (stripped.empty())
            continue;
        if (stripped.front() == '[') {
            if (stripped.back() != ']')
                throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
            section = trim(stripped.substr(1, stripped.size() - 2));
            continue;
        }
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty())
            throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        auto& sec = raw[section];
        if (sec.count(key))
            throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key +
                              "' in section [" + section + "]");
        sec[key] = RawValue{value, line_no, false};
    }
    return raw;
}

struct Reader {
    const RawConfig& raw;

    const RawValue* find(const std::string& section, const std::string& key) const {
        auto sec = raw.find(section);
        if (sec == raw.end())
            return nullptr;
        auto it = sec->second.find(key);
        if (it == sec->second.end())
            return nullptr;
        it->second.consumed = true;
        return &it->second;
    }

    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) const {
        const RawValue* v = find(section, key);
        return v ? v->text : fallback;
    }

    double get_double(const std::string& section, const std::string& key, double fallback) const {
        const RawValue* v = find(section, key);
        if (!v)
            return fallback;
        try {
            std::size_t used = 0;
            const double d = std::stod(v->text, &used);
            if (used != v->text.size())
                throw std::invalid_argument("trailing characters");
            return d;
        } catch (const std::exception&) {
            throw ConfigError("line " + std::to_string(v->line) + ": field '" + key +
                              "' expects a number, got '" + v->text + "'");
        }
    }

    long get_long(const std::string& section, const std::string& key, long fallback) const {
        const RawValue* v = find(section, key);
        if (!v)
            return fallback;
        try {
            std::size_t used = 0;
            const long l = std::stol(v->text, &used);
            if (used != v->text.size())
                throw std::invalid_argument("trailing characters");
            return l;
        } catch (const std::exception&) {
            throw ConfigError("line " + std::to_string(v->line) + ": field '" + key +
                              "' expects an integer, got '" + v->text + "'");
        }
    }

    std::vector<double> get_list(const std::string& section, const std::string& key,
                                 std::vector<double> fallback) const {
        const RawValue* v = find(section, key);
        if (!v)
            return fallback;
        std::vector<double> values;
        std::stringstream ss(v->text);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty())
                continue;
            try {
                values.push_back(std::stod(item));
            } catch (const std::exception&) {
                throw ConfigError("line " + std::to_string(v->line) + ": field '" + key +
                                  "' expects a comma-separated number list");
            }
        }
        if (values.empty())
            throw ConfigError("line " + std::to_string(v->line) + ": field '" + key +
                              "' expects a non-empty list");
        return values;
    }

    void check_all_consumed() const {
        for (const auto& [section, sec] : raw)
            for (const auto& [key, v] : sec)
                if (!v.consumed)
                    throw ConfigError("line " + std::to_string(v.line) + ": unknown key '" + key +
                                      "' in section [" + section + "]");
    }
};

} // namespace

ExperimentConfig parse_config(const std::string& path) {
    const RawConfig raw = read_raw(path);
    const Reader r{raw};

    ExperimentConfig cfg;
    {
        const RawValue* v = r.find("", "experiment");
        if (!v)
            throw ConfigError("config must name an experiment (experiment = ...)");
        cfg.experiment = experiment_from_string(v->text);
    }
    cfg.statistics_path = r.get_string("", "statistics", "");
    cfg.output_dir = r.get_string("", "output_dir", cfg.output_dir);
    cfg.master_seed = static_cast<std::uint64_t>(r.get_long("", "master_seed", 1));

    cfg.network.d = static_cast<std::size_t>(r.get_long("network", "d", 3));
    cfg.network.m = static_cast<std::size_t>(r.get_long("network", "m", 8));
    cfg.network.depth = static_cast<std::size_t>(r.get_long("network", "depth", 1));
    cfg.network.seed = static_cast<std::uint64_t>(r.get_long("network", "seed", 7));
    {
        const std::string act = r.get_string("network", "activation", "leaky_relu");
        const double slope = r.get_double("network", "leaky_slope", 0.1);
        if (act == "identity")
            cfg.network.activation = Activation::identity();
        else if (act == "tanh")
            cfg.network.activation = Activation::tanh();
        else if (act == "leaky_relu") {
            if (!(slope > 0.0))
                throw ConfigError("leaky_slope must be > 0");
            cfg.network.activation = Activation::leaky_relu(slope);
        } else
            throw ConfigError("unknown activation: " + act);
    }
    if (cfg.network.d < 1 || cfg.network.m < 1 || cfg.network.depth < 1)
        throw ConfigError("network dimensions must be >= 1");

    cfg.adaptation.K = static_cast<int>(r.get_long("adaptation", "K", 100));
    if (cfg.adaptation.K < 1)
        throw ConfigError("K must be >= 1");
    cfg.adaptation.tail_batch = r.get_long("adaptation", "tail_batch", 100);
    cfg.adaptation.tail_repeats = r.get_long("adaptation", "tail_repeats", 1000);
    if (cfg.adaptation.tail_batch < 2 || cfg.adaptation.tail_repeats < 1)
        throw ConfigError("tail_batch must be >= 2 and tail_repeats >= 1");
    try {
        cfg.adaptation.tail_strategy = tail_strategy_from_string(
            r.get_string("adaptation", "tail_strategy", "average_sample_tails"));
        cfg.adaptation.layer_policy =
            layer_policy_from_string(r.get_string("adaptation", "layer_policy", "all"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    cfg.adaptation.batch_size = r.get_long("adaptation", "batch_size", 128);
    if (cfg.adaptation.batch_size < 2)
        throw ConfigError("batch_size must be >= 2");

    {
        const std::string kind = r.get_string("source", "kind", "standard_normal");
        if (kind == "standard_normal")
            cfg.source.kind = SourceKind::StandardNormal;
        else if (kind == "truncated_normal")
            cfg.source.kind = SourceKind::TruncatedNormal;
        else if (kind == "uniform")
            cfg.source.kind = SourceKind::Uniform;
        else if (kind == "gaussian_mixture")
            cfg.source.kind = SourceKind::GaussianMixture;
        else
            throw ConfigError("unknown source kind: " + kind);
        cfg.source.lo = r.get_double("source", "lo", cfg.source.lo);
        cfg.source.hi = r.get_double("source", "hi", cfg.source.hi);
        cfg.source.weights = r.get_list("source", "weights", cfg.source.weights);
        cfg.source.means = r.get_list("source", "means", cfg.source.means);
        cfg.source.stds = r.get_list("source", "stds", cfg.source.stds);
        if ((cfg.source.kind == SourceKind::TruncatedNormal ||
             cfg.source.kind == SourceKind::Uniform) &&
            !(cfg.source.lo < cfg.source.hi))
            throw ConfigError("source requires lo < hi");
        if (cfg.source.kind == SourceKind::GaussianMixture) {
            try {
                make_source_spec({cfg.source.marginal()}, 1); // runs mixture validation
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
        }
    }

    {
        const std::string kind = r.get_string("corruption", "kind", "cubic");
        if (kind == "affine")
            cfg.corruption.kind = CorruptionKind::Affine;
        else if (kind == "cubic")
            cfg.corruption.kind = CorruptionKind::Cubic;
        else if (kind == "tanh_warp")
            cfg.corruption.kind = CorruptionKind::TanhWarp;
        else
            throw ConfigError("unknown corruption kind: " + kind);
        cfg.corruption.a = r.get_double("corruption", "a", cfg.corruption.a);
        cfg.corruption.b = r.get_double("corruption", "b", cfg.corruption.b);
        cfg.corruption.scale = r.get_double("corruption", "scale", cfg.corruption.scale);
        cfg.corruption.alpha = r.get_double("corruption", "alpha", cfg.corruption.alpha);
        cfg.corruption.gain = r.get_double("corruption", "gain", cfg.corruption.gain);
        cfg.corruption.amplitude = r.get_double("corruption", "amplitude", cfg.corruption.amplitude);
        cfg.corruption.channel_step =
            r.get_double("corruption", "channel_step", cfg.corruption.channel_step);
        try {
            for (std::size_t c = 0; c < cfg.network.m; ++c)
                cfg.corruption.for_channel(c);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("corruption invalid: ") + e.what());
        }
    }

    cfg.run.source_n = r.get_long("run", "source_n", 10000);
    cfg.run.eval_n = r.get_long("run", "eval_n", 8192);
    cfg.run.trials = r.get_long("run", "trials", 10);
    if (cfg.run.trials < 1)
        throw ConfigError("trials must be >= 1");
    if (cfg.run.source_n < std::max<long>(cfg.adaptation.K + 1, cfg.adaptation.tail_batch))
        throw ConfigError("source_n too small for K and tail_batch");
    {
        auto batches = r.get_list("run", "eval_batches", {128, 512});
        cfg.run.eval_batches.clear();
        for (double b : batches) {
            if (b < 2)
                throw ConfigError("eval_batches entries must be >= 2");
            cfg.run.eval_batches.push_back(static_cast<long>(b));
        }
        auto levels = r.get_list("run", "granularity_levels", {10, 100});
        cfg.run.granularity_levels.clear();
        for (double k : levels) {
            if (k < 1)
                throw ConfigError("K must be >= 1");
            cfg.run.granularity_levels.push_back(static_cast<int>(k));
        }
    }

    r.check_all_consumed();
    return cfg;
}

// ---------------------------------------------------------------------------
// Testbed plumbing
// ---------------------------------------------------------------------------

ChannelTransform corruption_transform(const std::vector<CorruptionSpec>& per_channel) {
    return [per_channel](std::size_t channel, std::span<double> values) {
        const CorruptionSpec& spec = per_channel.at(channel);
        for (double& v : values)
            v = corrupt(spec, v);
    };
}

TestbedRun run_testbed(const Network& net, const Matrix& inputs,
                       const HookCorruptions& corruption,
                       const std::map<std::string, ChannelTransform>& adapters) {
    TestbedRun run;
    run.reference = forward(net, inputs).captures;

    // Pre-size the adapted sinks so the interceptor lambdas can capture stable pointers.
    for (const auto& layer : net.layers)
        if (layer.hook_id)
            run.adapted[*layer.hook_id] = Matrix(inputs.rows, layer.out_dim());

    Interceptors interceptors;
    for (const auto& layer : net.layers) {
        if (!layer.hook_id)
            continue;
        const std::string& hook = *layer.hook_id;
        ChannelTransform pre;
        if (auto it = corruption.find(hook); it != corruption.end())
            pre = corruption_transform(it->second);
        ChannelTransform adapt;
        if (auto it = adapters.find(hook); it != adapters.end())
            adapt = it->second;
        Matrix* sink = &run.adapted.at(hook);
        interceptors[hook] = [pre, adapt, sink](std::size_t c, std::span<double> values) {
            if (pre)
                pre(c, values);
            if (adapt)
                adapt(c, values);
            for (std::size_t r = 0; r < values.size(); ++r)
                (*sink)(r, c) = values[r];
        };
    }

    run.output = forward(net, inputs, interceptors).output;
    return run;
}

ChannelTransform aqr_adapter(const SourceStatistics& stats, const std::string& hook_id) {
    const HookStatistics* hs = stats.find_hook(hook_id);
    if (!hs)
        throw std::invalid_argument("statistics missing hook: " + hook_id);
    return make_aqr_interceptor(*hs, stats.K, stats.tail_strategy, stats.n_source, nullptr,
                                hook_id);
}

ChannelTransform ttn_adapter(const SourceStatistics& stats, const std::string& hook_id) {
    const HookStatistics* hs = stats.find_hook(hook_id);
    if (!hs)
        throw std::invalid_argument("statistics missing hook: " + hook_id);
    return [hs](std::size_t channel, std::span<double> values) {
        const ChannelStatistics& cs = hs->channels.at(channel);
        double mean = 0.0;
        for (double v : values)
            mean += v;
        mean /= static_cast<double>(values.size());
        double var = 0.0;
        for (double v : values)
            var += (v - mean) * (v - mean);
        const double sd = std::sqrt(var / static_cast<double>(values.size()));
        for (double& v : values)
            v = ttn_transform(v, cs.mean, cs.std, mean, sd);
    };
}

MseReport hidden_mse(const Network& net, const TestbedRun& run) {
    MseReport report;
    report.n_eval = 0;
    for (const auto& capture : run.reference) {
        const LayerSpec* layer = nullptr;
        for (const auto& l : net.layers)
            if (l.hook_id && *l.hook_id == capture.hook_id)
                layer = &l;
        if (!layer)
            continue;
        const Matrix& adapted_pre = run.adapted.at(capture.hook_id);
        report.n_eval = static_cast<long>(adapted_pre.rows);
        for (std::size_t c = 0; c < adapted_pre.cols; ++c) {
            double acc = 0.0;
            for (std::size_t r = 0; r < adapted_pre.rows; ++r) {
                const double d = layer->activation(adapted_pre(r, c)) -
                                 layer->activation(capture.pre_activations(r, c));
                acc += d * d;
            }
            report.per_neuron.push_back(acc / static_cast<double>(adapted_pre.rows));
            report.total += report.per_neuron.back();
        }
    }
    return report;
}

MseReport testbed_hidden_mse(const Network& net, const SourceStatistics& stats,
                             const Matrix& inputs, const HookCorruptions& corruption,
                             AdaptMethod method) {
    std::map<std::string, ChannelTransform> adapters;
    if (method != AdaptMethod::None) {
        for (const auto& hook : select_hooks(net, stats.layer_policy))
            adapters[hook] =
                method == AdaptMethod::Aqr ? aqr_adapter(stats, hook) : ttn_adapter(stats, hook);
    }
    return hidden_mse(net, run_testbed(net, inputs, corruption, adapters));
}

HookCorruptions make_hook_corruptions(const Network& net, const CorruptionConfig& cfg) {
    HookCorruptions out;
    for (const auto& layer : net.layers) {
        if (!layer.hook_id)
            continue;
        std::vector<CorruptionSpec> specs;
        for (std::size_t c = 0; c < layer.out_dim(); ++c)
            specs.push_back(cfg.for_channel(c));
        out[*layer.hook_id] = std::move(specs);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Experiment runners
// ---------------------------------------------------------------------------

namespace {

struct MomentSummary {
    double mean = 0, std = 0, skewness = 0, kurtosis = 0;
};

MomentSummary moment_summary(const std::vector<double>& v) {
    MomentSummary m;
    const double n = static_cast<double>(v.size());
    for (double x : v)
        m.mean += x;
    m.mean /= n;
    double m2 = 0, m3 = 0, m4 = 0;
    for (double x : v) {
        const double d = x - m.mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    m.std = std::sqrt(m2);
    m.skewness = m3 / (m2 * m.std);
    m.kurtosis = m4 / (m2 * m2);
    return m;
}

std::vector<double> kde_curve(const std::vector<double>& sample, const std::vector<double>& grid) {
    std::vector<double> sorted(sample);
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    const auto m = moment_summary(sorted);
    const double q1 = sorted[static_cast<std::size_t>(0.25 * (n - 1))];
    const double q3 = sorted[static_cast<std::size_t>(0.75 * (n - 1))];
    double bw = 0.9 * std::min(m.std, (q3 - q1) / 1.34) * std::pow(n, -0.2);
    if (!(bw > 0.0))
        bw = std::max(m.std, 1e-3);

    std::vector<double> density(grid.size(), 0.0);
    const double norm = 1.0 / (n * bw * 2.5066282746310005024157652848110);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        double acc = 0.0;
        for (double x : sorted) {
            const double z = (grid[i] - x) / bw;
            if (std::abs(z) < 8.0)
                acc += std::exp(-0.5 * z * z);
        }
        density[i] = acc * norm;
    }
    return density;
}

SourceSpec input_spec(const ExperimentConfig& cfg, std::uint64_t seed) {
    std::vector<Marginal> marginals;
    for (std::size_t j = 0; j < cfg.network.d; ++j)
        marginals.push_back(cfg.source.marginal());
    return make_source_spec(std::move(marginals), seed);
}

SourceStatistics build_statistics(const ExperimentConfig& cfg, const Network& net,
                                  std::uint64_t stream) {
    const auto inputs =
        sample_source(input_spec(cfg, derive_seed(cfg.master_seed, stream)),
                      static_cast<std::size_t>(cfg.run.source_n));
    AdaptationConfig acfg = cfg.adaptation;
    acfg.rng_seed = derive_seed(cfg.master_seed, stream + 1);
    return setup_phase(net, {inputs}, acfg);
}

std::vector<std::string> run_setup(const ExperimentConfig& cfg);
std::vector<std::string> run_adapt(const ExperimentConfig& cfg);
std::vector<std::string> run_theory_rates(const ExperimentConfig& cfg);
std::vector<std::string> run_tail_ablation(const ExperimentConfig& cfg);
std::vector<std::string> run_tail_deviation(const ExperimentConfig& cfg);
std::vector<std::string> run_kde_demo(const ExperimentConfig& cfg);
std::vector<std::string> run_granularity(const ExperimentConfig& cfg);

std::vector<std::string> setup_summary_rows(const SourceStatistics& stats,
                                            const ExperimentConfig& cfg,
                                            std::vector<std::string>& files);

} // namespace

std::vector<std::string> run_experiment(const ExperimentConfig& cfg) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.output_dir, ec);
    if (ec)
        throw std::runtime_error("cannot create output dir: " + cfg.output_dir);

    std::vector<std::string> files;
    switch (cfg.experiment) {
    case ExperimentKind::Setup: files = run_setup(cfg); break;
    case ExperimentKind::Adapt: files = run_adapt(cfg); break;
    case ExperimentKind::TheoryRates: files = run_theory_rates(cfg); break;
    case ExperimentKind::TailAblation: files = run_tail_ablation(cfg); break;
    case ExperimentKind::TailDeviation: files = run_tail_deviation(cfg); break;
    case ExperimentKind::KdeDemo: files = run_kde_demo(cfg); break;
    case ExperimentKind::Granularity: files = run_granularity(cfg); break;
    }

    write_manifest(files, cfg.output_dir);
    files.push_back("manifest.csv");
    return files;
}

namespace {

std::vector<std::string> setup_summary_rows(const SourceStatistics& stats,
                                            const ExperimentConfig& cfg,
                                            std::vector<std::string>& files) {
    CsvReport summary;
    summary.header = {"hook", "channel", "mean", "std", "p0", "p1", "p_mid", "p99", "p100",
                      "calibrated_low", "calibrated_high"};
    summary.path = cfg.output_dir + "/setup_summary.csv";
    for (const auto& hook : stats.hooks) {
        for (std::size_t c = 0; c < hook.channels.size(); ++c) {
            const auto& cs = hook.channels[c];
            const auto& k = cs.profile.knots;
            std::vector<std::string> row = {
                hook.hook_id,
                csv_long(static_cast<long>(c)),
                csv_double(cs.mean),
                csv_double(cs.std),
                csv_double(k.front()),
                csv_double(k[1]),
                csv_double(k[k.size() / 2]),
                csv_double(k[k.size() - 2]),
                csv_double(k.back()),
                cs.calibrated_tails ? csv_double(cs.calibrated_tails->low) : std::string(),
                cs.calibrated_tails ? csv_double(cs.calibrated_tails->high) : std::string(),
            };
            summary.rows.push_back(std::move(row));
        }
    }
    emit_csv(summary);
    files.push_back("setup_summary.csv");
    return files;
}

std::vector<std::string> run_setup(const ExperimentConfig& cfg) {
    std::vector<std::string> files;
    const Network net = build_mlp(cfg.network.d, cfg.network.m, cfg.network.depth,
                                  cfg.network.activation, cfg.network.seed);
    const SourceStatistics stats = build_statistics(cfg, net, 10);
    save_statistics(stats, cfg.output_dir + "/statistics.json");
    files.push_back("statistics.json");
    setup_summary_rows(stats, cfg, files);
    return files;
}

std::vector<std::string> run_adapt(const ExperimentConfig& cfg) {
    std::vector<std::string> files;
    const Network net = build_mlp(cfg.network.d, cfg.network.m, cfg.network.depth,
                                  cfg.network.activation, cfg.network.seed);

    SourceStatistics stats;
    if (!cfg.statistics_path.empty()) {
        stats = load_statistics(cfg.statistics_path);
    } else {
        stats = build_statistics(cfg, net, 10);
        save_statistics(stats, cfg.output_dir + "/statistics.json");
        // Always adapt against the reloaded file so the on-disk artifact is what runs.
        stats = load_statistics(cfg.output_dir + "/statistics.json");
        files.push_back("statistics.json");
    }

    const HookCorruptions corruption = make_hook_corruptions(net, cfg.corruption);

    CsvReport mse_csv;
    mse_csv.header = {"batch_size", "neuron", "mse"};
    mse_csv.path = cfg.output_dir + "/adapt_mse.csv";
    CsvReport summary;
    summary.header = {"batch_size", "total_mse", "n_eval"};
    summary.path = cfg.output_dir + "/adapt_summary.csv";

    std::size_t stream = 40;
    for (long batch : cfg.run.eval_batches) {
        const auto inputs = sample_source(input_spec(cfg, derive_seed(cfg.master_seed, stream++)),
                                          static_cast<std::size_t>(batch));
        const MseReport report = testbed_hidden_mse(net, stats, inputs, corruption,
                                                    AdaptMethod::Aqr);
        for (std::size_t n = 0; n < report.per_neuron.size(); ++n)
            mse_csv.rows.push_back({csv_long(batch), csv_long(static_cast<long>(n)),
                                    csv_double(report.per_neuron[n])});
        summary.rows.push_back({csv_long(batch), csv_double(report.total),
                                csv_long(report.n_eval)});
    }
    emit_csv(mse_csv);
    emit_csv(summary);
    files.push_back("adapt_mse.csv");
    files.push_back("adapt_summary.csv");
    return files;
}

std::vector<std::string> run_theory_rates(const ExperimentConfig& cfg) {
    std::vector<std::string> files;
    const Marginal marginal = cfg.source.marginal();
    const CorruptionSpec g = cfg.corruption.for_channel(0);

    const std::vector<int> k_sweep = {8, 16, 32, 64, 128};
    const std::vector<long> n_sweep = {500, 2000, 8000, 32000};
    const long n_big = 200000;
    const int k_big = 128;

    auto mean_mse = [&](int K, long n_s, long n_t, std::uint64_t stream) {
        double acc = 0.0;
        for (long t = 0; t < cfg.run.trials; ++t)
            acc += channel_recalibration_mse(
                marginal, g, K, n_s, n_t, cfg.run.eval_n,
                derive_seed(cfg.master_seed, stream * 4096 + static_cast<std::uint64_t>(t)));
        return acc / static_cast<double>(cfg.run.trials);
    };

    Series series_k{"K sweep", {}, {}, ""};
    Series series_ns{"n_source sweep", {}, {}, ""};
    Series series_nt{"n_target sweep", {}, {}, ""};

    CsvReport k_csv{{"K", "mean_mse"}, {}, cfg.output_dir + "/rates_k.csv"};
    std::uint64_t stream = 1;
    for (int K : k_sweep) {
        const double mse = mean_mse(K, n_big, n_big, stream++);
        series_k.xs.push_back(K);
        series_k.ys.push_back(mse);
        k_csv.rows.push_back({csv_long(K), csv_double(mse)});
    }
    CsvReport ns_csv{{"n_source", "mean_mse"}, {}, cfg.output_dir + "/rates_n_source.csv"};
    for (long n : n_sweep) {
        const double mse = mean_mse(k_big, n, n_big, stream++);
        series_ns.xs.push_back(static_cast<double>(n));
        series_ns.ys.push_back(mse);
        ns_csv.rows.push_back({csv_long(n), csv_double(mse)});
    }
    CsvReport nt_csv{{"n_target", "mean_mse"}, {}, cfg.output_dir + "/rates_n_target.csv"};
    for (long n : n_sweep) {
        const double mse = mean_mse(k_big, n_big, n, stream++);
        series_nt.xs.push_back(static_cast<double>(n));
        series_nt.ys.push_back(mse);
        nt_csv.rows.push_back({csv_long(n), csv_double(mse)});
    }

    const RateFit fit_k = fit_loglog_rate(series_k.xs, series_k.ys);
    const RateFit fit_ns = fit_loglog_rate(series_ns.xs, series_ns.ys);
    const RateFit fit_nt = fit_loglog_rate(series_nt.xs, series_nt.ys);

    CsvReport summary{{"sweep", "slope", "r_squared"}, {}, cfg.output_dir + "/rates_summary.csv"};
    summary.rows.push_back({"K", csv_double(fit_k.slope), csv_double(fit_k.r_squared)});
    summary.rows.push_back({"n_source", csv_double(fit_ns.slope), csv_double(fit_ns.r_squared)});
    summary.rows.push_back({"n_target", csv_double(fit_nt.slope), csv_double(fit_nt.r_squared)});

    emit_csv(k_csv);
    emit_csv(ns_csv);
    emit_csv(nt_csv);
    emit_csv(summary);
    files.insert(files.end(),
                 {"rates_k.csv", "rates_n_source.csv", "rates_n_target.csv", "rates_summary.csv"});

    PlotSpec plot;
    plot.title = "Finite-sample recalibration error";
    plot.x_label = "swept parameter (K or n)";
    plot.y_label = "mean squared error";
    plot.log_x = true;
    plot.log_y = true;
    emit_svg_lines({series_k, series_ns, series_nt}, plot, cfg.output_dir + "/rates.svg");
    files.push_back("rates.svg");
    return files;
}

const TailStrategy kAllStrategies[] = {
    TailStrategy::Standard,          TailStrategy::AverageSampleTails,
    TailStrategy::NotCalibrated,     TailStrategy::Clipping,
    TailStrategy::GaussianEstimation, TailStrategy::IntervalEstimation,
};

std::vector<std::string> run_tail_ablation(const ExperimentConfig& cfg) {
    std::vector<std::string> files;
    const Network net = build_mlp(cfg.network.d, cfg.network.m, cfg.network.depth,
                                  cfg.network.activation, cfg.network.seed);
    const HookCorruptions corruption = make_hook_corruptions(net, cfg.corruption);

    // strategy x batch -> totals over trials
    std::map<std::pair<int, long>, std::vector<double>> totals;

    for (long trial = 0; trial < cfg.run.trials; ++trial) {
        ExperimentConfig trial_cfg = cfg;
        trial_cfg.adaptation.tail_strategy = TailStrategy::AverageSampleTails;
        const SourceStatistics base = build_statistics(
            trial_cfg, net, 100 + static_cast<std::uint64_t>(trial) * 8);
        for (std::size_t bi = 0; bi < cfg.run.eval_batches.size(); ++bi) {
            const long batch = cfg.run.eval_batches[bi];
            const auto inputs = sample_source(
                input_spec(cfg, derive_seed(cfg.master_seed,
                                            5000 + static_cast<std::uint64_t>(trial) * 64 + bi)),
                static_cast<std::size_t>(batch));
            for (std::size_t si = 0; si < 6; ++si) {
                SourceStatistics stats = base;
                stats.tail_strategy = kAllStrategies[si];
                const MseReport report =
                    testbed_hidden_mse(net, stats, inputs, corruption, AdaptMethod::Aqr);
                totals[{static_cast<int>(si), batch}].push_back(report.total);
            }
        }
    }

    CsvReport csv{{"strategy", "batch_size", "mean_total_mse", "sd_total_mse", "trials"},
                  {},
                  cfg.output_dir + "/tail_ablation.csv"};
    std::vector<Series> series;
    for (long batch : cfg.run.eval_batches)
        series.push_back(Series{"batch " + std::to_string(batch), {}, {}, ""});
    for (std::size_t si = 0; si < 6; ++si) {
        for (std::size_t bi = 0; bi < cfg.run.eval_batches.size(); ++bi) {
            const long batch = cfg.run.eval_batches[bi];
            const auto& v = totals.at({static_cast<int>(si), batch});
            const double mean = std::accumulate(v.begin(), v.end(), 0.0) /
                                static_cast<double>(v.size());
            double var = 0.0;
            for (double x : v)
                var += (x - mean) * (x - mean);
            const double sd = std::sqrt(var / static_cast<double>(v.size()));
            csv.rows.push_back({to_string(kAllStrategies[si]), csv_long(batch), csv_double(mean),
                                csv_double(sd), csv_long(static_cast<long>(v.size()))});
            series[bi].xs.push_back(static_cast<double>(si));
            series[bi].ys.push_back(mean);
        }
    }
    emit_csv(csv);
    files.push_back("tail_ablation.csv");

    PlotSpec plot;
    plot.title = "Tail strategy ablation (strategy index order: standard, average, "
                 "not-calibrated, clipping, gaussian, interval)";
    plot.x_label = "strategy index";
    plot.y_label = "mean total MSE";
    plot.log_y = true;
    emit_svg_lines(series, plot, cfg.output_dir + "/tail_ablation.svg");
    files.push_back("tail_ablation.svg");
    return files;
}

std::vector<std::string> run_tail_deviation(const ExperimentConfig& cfg) {
    std::vector<std::string> files;
    const SourceSpec spec = make_source_spec({cfg.source.marginal()}, cfg.master_seed);
    const long small_n = cfg.run.eval_batches.front();
    const auto result = tail_deviation_experiment(cfg.run.source_n, small_n, cfg.run.trials,
                                                  spec, cfg.adaptation.K,
                                                  derive_seed(cfg.master_seed, 7));

    CsvReport csv{{"level", "mean_dev", "min_dev", "q1_dev", "median_dev", "q3_dev", "max_dev"},
                  {},
                  cfg.output_dir + "/tail_deviation.csv"};
    std::vector<BoxSummary> boxes;
    const int K = result.K;
    for (int j = 0; j <= K; ++j) {
        std::vector<double> devs = result.deviations[static_cast<std::size_t>(j)];
        std::sort(devs.begin(), devs.end());
        const double n = static_cast<double>(devs.size());
        const double mean = std::accumulate(devs.begin(), devs.end(), 0.0) / n;
        auto pick = [&](double q) {
            return devs[static_cast<std::size_t>(q * (n - 1))];
        };
        csv.rows.push_back({csv_long(j), csv_double(mean), csv_double(devs.front()),
                            csv_double(pick(0.25)), csv_double(pick(0.5)), csv_double(pick(0.75)),
                            csv_double(devs.back())});
        const int stride = std::max(1, K / 10);
        if (j % stride == 0 || j == K)
            boxes.push_back(BoxSummary{static_cast<double>(j), devs.front(), pick(0.25),
                                       pick(0.5), pick(0.75), devs.back()});
    }
    emit_csv(csv);
    files.push_back("tail_deviation.csv");

    PlotSpec plot;
    plot.title = "Small-batch percentile deviation from reference";
    plot.x_label = "percentile level";
    plot.y_label = "deviation";
    emit_svg_boxes(boxes, plot, cfg.output_dir + "/tail_deviation.svg");
    files.push_back("tail_deviation.svg");
    return files;
}

std::vector<std::string> run_kde_demo(const ExperimentConfig& cfg) {
    std::vector<std::string> files;
    const Marginal marginal = cfg.source.marginal();
    const CorruptionSpec g = cfg.corruption.for_channel(0);

    const auto src = sample_marginal(marginal, static_cast<std::size_t>(cfg.run.source_n),
                                     derive_seed(cfg.master_seed, 1));
    const auto tgt_clean = sample_marginal(marginal, static_cast<std::size_t>(cfg.run.eval_n),
                                           derive_seed(cfg.master_seed, 2));
    std::vector<double> tgt(tgt_clean.size());
    for (std::size_t i = 0; i < tgt.size(); ++i)
        tgt[i] = corrupt(g, tgt_clean[i]);

    const int K = cfg.adaptation.K;
    const auto source_profile = compute_quantile_profile(src, K);
    const auto target_profile = compute_quantile_profile(tgt, K);

    TailRule rule = StandardTail{};
    const auto src_m = moment_summary(src);
    const auto tgt_m = moment_summary(tgt);
    switch (cfg.adaptation.tail_strategy) {
    case TailStrategy::Standard: break;
    case TailStrategy::AverageSampleTails: {
        const auto est = calibrate_average_sample_tails(src, cfg.adaptation.tail_batch,
                                                        cfg.adaptation.tail_repeats,
                                                        derive_seed(cfg.master_seed, 3));
        rule = AverageSampleTailsRule{est.low, est.high};
        break;
    }
    case TailStrategy::NotCalibrated: rule = NotCalibratedTail{}; break;
    case TailStrategy::Clipping: rule = ClippingTail{}; break;
    case TailStrategy::GaussianEstimation:
        rule = GaussianEstimationTail{GaussianFit{src_m.mean, src_m.std},
                                      GaussianFit{tgt_m.mean, tgt_m.std}, cfg.run.source_n,
                                      cfg.run.source_n};
        break;
    case TailStrategy::IntervalEstimation:
        rule = IntervalEstimationTail{src_m.std, tgt_m.std};
        break;
    }

    const auto aqr_adapted = batch_transform(tgt, target_profile, source_profile, rule);
    std::vector<double> ttn_adapted(tgt.size());
    for (std::size_t i = 0; i < tgt.size(); ++i)
        ttn_adapted[i] = ttn_transform(tgt[i], src_m.mean, src_m.std, tgt_m.mean, tgt_m.std);

    const std::vector<std::pair<std::string, const std::vector<double>*>> sets = {
        {"source", &src}, {"corrupted", &tgt}, {"ttn", &ttn_adapted}, {"aqr", &aqr_adapted}};

    CsvReport moments{{"series", "mean", "std", "skewness", "kurtosis"},
                      {},
                      cfg.output_dir + "/kde_moments.csv"};
    double lo = src.front(), hi = src.front();
    for (const auto& [name, data] : sets) {
        const auto m = moment_summary(*data);
        moments.rows.push_back({name, csv_double(m.mean), csv_double(m.std),
                                csv_double(m.skewness), csv_double(m.kurtosis)});
        for (double v : *data) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    emit_csv(moments);
    files.push_back("kde_moments.csv");

    const double pad = 0.05 * (hi - lo);
    std::vector<double> grid(201);
    for (std::size_t i = 0; i < grid.size(); ++i)
        grid[i] = lo - pad + (hi - lo + 2 * pad) * static_cast<double>(i) / 200.0;

    CsvReport curves{{"x", "source", "corrupted", "ttn", "aqr"},
                     {},
                     cfg.output_dir + "/kde_curves.csv"};
    std::vector<Series> series;
    std::vector<std::vector<double>> densities;
    for (const auto& [name, data] : sets) {
        densities.push_back(kde_curve(*data, grid));
        series.push_back(Series{name, grid, densities.back(), ""});
    }
    for (std::size_t i = 0; i < grid.size(); ++i)
        curves.rows.push_back({csv_double(grid[i]), csv_double(densities[0][i]),
                               csv_double(densities[1][i]), csv_double(densities[2][i]),
                               csv_double(densities[3][i])});
    emit_csv(curves);
    files.push_back("kde_curves.csv");

    PlotSpec plot;
    plot.title = "Shape preservation under recalibration";
    plot.x_label = "value";
    plot.y_label = "density";
    emit_svg_lines(series, plot, cfg.output_dir + "/kde_demo.svg");
    files.push_back("kde_demo.svg");
    return files;
}

std::vector<std::string> run_granularity(const ExperimentConfig& cfg) {
    std::vector<std::string> files;
    const Network net = build_mlp(cfg.network.d, cfg.network.m, cfg.network.depth,
                                  cfg.network.activation, cfg.network.seed);
    const HookCorruptions corruption = make_hook_corruptions(net, cfg.corruption);
    const long batch = cfg.run.eval_batches.back();

    CsvReport csv{{"K", "trial", "total_mse"}, {}, cfg.output_dir + "/granularity.csv"};
    for (int K : cfg.run.granularity_levels) {
        ExperimentConfig kcfg = cfg;
        kcfg.adaptation.K = K;
        for (long trial = 0; trial < cfg.run.trials; ++trial) {
            // Paired seeds: the same source and eval draws back every K.
            const SourceStatistics stats =
                build_statistics(kcfg, net, 200 + static_cast<std::uint64_t>(trial) * 4);
            const auto inputs = sample_source(
                input_spec(cfg, derive_seed(cfg.master_seed,
                                            9000 + static_cast<std::uint64_t>(trial))),
                static_cast<std::size_t>(batch));
            const MseReport report =
                testbed_hidden_mse(net, stats, inputs, corruption, AdaptMethod::Aqr);
            csv.rows.push_back({csv_long(K), csv_long(trial), csv_double(report.total)});
        }
    }
    emit_csv(csv);
    files.push_back("granularity.csv");
    return files;
}

} // namespace

} // namespace aqr
