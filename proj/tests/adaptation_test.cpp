#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "aqr/adaptation.hpp"
#include "aqr/experiments.hpp"
#include "aqr/rng.hpp"
#include "aqr/transform.hpp"
#include "oracles.hpp"

using namespace aqr;

namespace {

SourceSpec normal_spec(std::size_t d, std::uint64_t seed) {
    std::vector<Marginal> marginals(d, StandardNormalMarginal{});
    return make_source_spec(std::move(marginals), seed);
}

Network identity_1x1() {
    LayerSpec hidden;
    hidden.weights = Matrix(1, 1);
    hidden.weights(0, 0) = 1.0;
    hidden.bias = {0.0};
    hidden.activation = Activation::identity();
    hidden.hook_id = "h1";
    LayerSpec readout;
    readout.weights = Matrix(1, 1);
    readout.weights(0, 0) = 1.0;
    readout.bias = {0.0};
    readout.activation = Activation::identity();
    return make_network({hidden, readout}, 1);
}

bool stats_equal(const SourceStatistics& a, const SourceStatistics& b) {
    if (a.K != b.K || a.n_source != b.n_source || a.tail_strategy != b.tail_strategy ||
        a.layer_policy != b.layer_policy || a.hooks.size() != b.hooks.size())
        return false;
    for (std::size_t h = 0; h < a.hooks.size(); ++h) {
        if (a.hooks[h].hook_id != b.hooks[h].hook_id ||
            a.hooks[h].channels.size() != b.hooks[h].channels.size())
            return false;
        for (std::size_t c = 0; c < a.hooks[h].channels.size(); ++c) {
            const auto& ca = a.hooks[h].channels[c];
            const auto& cb = b.hooks[h].channels[c];
            if (ca.profile.knots != cb.profile.knots ||
                ca.profile.sample_count != cb.profile.sample_count || ca.mean != cb.mean ||
                ca.std != cb.std || ca.calibrated_tails.has_value() != cb.calibrated_tails.has_value())
                return false;
            if (ca.calibrated_tails &&
                (ca.calibrated_tails->low != cb.calibrated_tails->low ||
                 ca.calibrated_tails->high != cb.calibrated_tails->high))
                return false;
        }
    }
    return true;
}

} // namespace

TEST_CASE("setup produces one profile per channel") {
    const Network net = build_one_hidden_mlp(3, 4, Activation::leaky_relu(0.1), 2);
    const auto inputs = sample_source(normal_spec(3, 5), 10000);
    AdaptationConfig cfg;
    cfg.rng_seed = 3;
    const auto stats = setup_phase(net, {inputs}, cfg);
    REQUIRE(stats.hooks.size() == 1);
    REQUIRE(stats.hooks[0].channels.size() == 4);
    for (const auto& c : stats.hooks[0].channels) {
        CHECK(c.profile.knots.size() == 101);
        CHECK(c.profile.sample_count == 10000);
        CHECK(c.std > 0.0);
        REQUIRE(c.calibrated_tails.has_value());
        CHECK(c.calibrated_tails->low <= c.calibrated_tails->high);
    }
    CHECK(stats.n_source == 10000);
}

TEST_CASE("setup is deterministic for fixed seed and data") {
    const Network net = build_one_hidden_mlp(2, 3, Activation::tanh(), 7);
    const auto inputs = sample_source(normal_spec(2, 8), 2000);
    AdaptationConfig cfg;
    cfg.rng_seed = 9;
    const auto a = setup_phase(net, {inputs}, cfg);
    const auto b = setup_phase(net, {inputs}, cfg);
    CHECK(stats_equal(a, b));
}

TEST_CASE("setup rejects too little source data") {
    const Network net = build_one_hidden_mlp(2, 3, Activation::tanh(), 7);
    const auto inputs = sample_source(normal_spec(2, 8), 50);
    AdaptationConfig cfg; // K = 100 needs at least 101 rows
    CHECK_THROWS_WITH_AS(setup_phase(net, {inputs}, cfg), "insufficient source rows",
                         std::invalid_argument);
}

TEST_CASE("identity channel profiles match exact normal quantiles") {
    const Network net = identity_1x1();
    const auto inputs = sample_source(normal_spec(1, 77), 40000);
    AdaptationConfig cfg;
    cfg.rng_seed = 78;
    const auto stats = setup_phase(net, {inputs}, cfg);
    const auto& knots = stats.hooks[0].channels[0].profile.knots;
    for (int j = 1; j < 100; ++j) {
        const double exact = oracle::probit_bisect(j / 100.0);
        CHECK(std::abs(knots[static_cast<std::size_t>(j)] - exact) < 0.05);
    }
}

TEST_CASE("adaptation in the identity regime barely moves the output") {
    const Network net = build_one_hidden_mlp(3, 8, Activation::leaky_relu(0.1), 99);
    const auto src = sample_source(normal_spec(3, 1), 20000);
    AdaptationConfig cfg;
    cfg.rng_seed = 5;
    const auto stats = setup_phase(net, {src}, cfg);

    const auto batch = sample_source(normal_spec(3, 777), 4096);
    const auto plain = forward(net, batch);
    const auto adapted = adapt_batch(net, stats, batch);
    double dev = 0.0;
    for (std::size_t r = 0; r < batch.rows; ++r)
        dev += std::abs(adapted.output(r, 0) - plain.output(r, 0));
    CHECK(dev / static_cast<double>(batch.rows) < 0.05);
    CHECK(adapted.diagnostics.warnings.empty());
    CHECK(adapted.diagnostics.target_profiles.at("h1").size() == 8);
}

TEST_CASE("affine corruption is recovered to high accuracy") {
    // This is also the regime where the affine baseline succeeds.
    const Network net = build_mlp(2, 2, 1, Activation::leaky_relu(0.1), 123);
    const auto src = sample_source(normal_spec(2, 2), 100000);
    AdaptationConfig cfg;
    cfg.rng_seed = 6;
    const auto stats = setup_phase(net, {src}, cfg);
    HookCorruptions corruption;
    corruption["h1"] = {affine_corruption(1.2, 0.3), affine_corruption(1.3, 0.2)};
    for (std::uint64_t seed : {31u, 32u, 33u}) {
        const auto inputs = sample_source(normal_spec(2, seed), 8192);
        const auto aqr = testbed_hidden_mse(net, stats, inputs, corruption, AdaptMethod::Aqr);
        CHECK(aqr.total < 1e-3);
        const auto ttn = testbed_hidden_mse(net, stats, inputs, corruption, AdaptMethod::Ttn);
        CHECK(ttn.total < 1e-3);
    }
}

TEST_CASE("tiny batches run with an undersampling warning") {
    const Network net = build_one_hidden_mlp(2, 3, Activation::leaky_relu(0.1), 4);
    const auto src = sample_source(normal_spec(2, 5), 2000);
    AdaptationConfig cfg;
    cfg.rng_seed = 6;
    const auto stats = setup_phase(net, {src}, cfg);

    const auto two_rows = sample_source(normal_spec(2, 7), 2);
    const auto result = adapt_batch(net, stats, two_rows);
    REQUIRE(!result.diagnostics.warnings.empty());
    CHECK(result.diagnostics.warnings.front().find("quantile undersampling") !=
          std::string::npos);

    const auto one_row = sample_source(normal_spec(2, 8), 1);
    CHECK_THROWS_WITH_AS(adapt_batch(net, stats, one_row), "cannot estimate target quantiles",
                         std::invalid_argument);
}

TEST_CASE("adaptation is stateless across batches") {
    const Network net = build_one_hidden_mlp(2, 4, Activation::leaky_relu(0.1), 11);
    const auto src = sample_source(normal_spec(2, 12), 4000);
    AdaptationConfig cfg;
    cfg.rng_seed = 13;
    const auto stats = setup_phase(net, {src}, cfg);

    const auto batch_a = sample_source(normal_spec(2, 14), 256);
    const auto batch_b = sample_source(normal_spec(2, 15), 256);
    const auto first = adapt_batch(net, stats, batch_a);
    adapt_batch(net, stats, batch_b); // interleaved episode
    const auto second = adapt_batch(net, stats, batch_a);
    CHECK(first.output.data == second.output.data);
}

TEST_CASE("top-half policy leaves shallow hooks unadapted") {
    const Network net = build_mlp(2, 3, 2, Activation::leaky_relu(0.1), 21);
    const auto src = sample_source(normal_spec(2, 22), 4000);
    AdaptationConfig cfg;
    cfg.layer_policy = LayerPolicy::TopHalf;
    cfg.rng_seed = 23;
    const auto stats = setup_phase(net, {src}, cfg);
    CHECK(select_hooks(net, stats.layer_policy) == std::vector<std::string>{"h2"});

    CorruptionConfig ccfg;
    ccfg.kind = CorruptionKind::Affine;
    ccfg.a = 1.4;
    ccfg.b = 0.2;
    ccfg.channel_step = 0.0;
    const auto corruption = make_hook_corruptions(net, ccfg);
    const auto inputs = sample_source(normal_spec(2, 24), 512);

    std::map<std::string, ChannelTransform> adapters;
    for (const auto& hook : select_hooks(net, stats.layer_policy))
        adapters[hook] = aqr_adapter(stats, hook);
    const auto run = run_testbed(net, inputs, corruption, adapters);

    // h1 was corrupted but not adapted: its recorded values are exactly the
    // corrupted pre-activations.
    const auto& raw_h1 = run.reference[0].pre_activations;
    const auto& seen_h1 = run.adapted.at("h1");
    const auto spec = affine_corruption(1.4, 0.2);
    for (std::size_t i = 0; i < raw_h1.data.size(); ++i)
        CHECK(seen_h1.data[i] == doctest::Approx(corrupt(spec, raw_h1.data[i])).epsilon(1e-12));
}

TEST_CASE("adapted interior quantiles align with the stored source knots") {
    const Network net = build_one_hidden_mlp(2, 4, Activation::leaky_relu(0.1), 31);
    const auto src = sample_source(normal_spec(2, 32), 20000);
    AdaptationConfig cfg;
    cfg.K = 20;
    cfg.tail_strategy = TailStrategy::Standard;
    cfg.rng_seed = 33;
    const auto stats = setup_phase(net, {src}, cfg);

    CorruptionConfig ccfg;
    ccfg.kind = CorruptionKind::Cubic;
    ccfg.scale = 1.0;
    ccfg.alpha = 0.4;
    ccfg.channel_step = 0.1;
    const auto corruption = make_hook_corruptions(net, ccfg);
    const auto inputs = sample_source(normal_spec(2, 34), 512);

    std::map<std::string, ChannelTransform> adapters{{"h1", aqr_adapter(stats, "h1")}};
    const auto run = run_testbed(net, inputs, corruption, adapters);
    const auto& adapted = run.adapted.at("h1");

    for (std::size_t c = 0; c < 4; ++c) {
        std::vector<double> column(adapted.rows);
        for (std::size_t r = 0; r < adapted.rows; ++r)
            column[r] = adapted(r, c);
        const auto profile = compute_quantile_profile(column, 20);
        const auto& source_knots = stats.hooks[0].channels[c].profile.knots;
        for (int j = 1; j < 20; ++j) {
            const double segment =
                source_knots[static_cast<std::size_t>(j + 1)] -
                source_knots[static_cast<std::size_t>(j - 1)];
            CHECK(std::abs(profile.knots[static_cast<std::size_t>(j)] -
                           source_knots[static_cast<std::size_t>(j)]) <= segment);
        }
    }
}

TEST_CASE("ttn transform arithmetic") {
    CHECK(ttn_transform(3.0, 7.0, 2.0, 3.0, 5.0) == 7.0);
    CHECK(ttn_transform(5.0, 0.0, 1.0, 3.0, 2.0) == doctest::Approx(1.0));
    CHECK(ttn_transform(1.234, 0.5, 1.5, 0.5, 1.5) == doctest::Approx(1.234));
    CHECK_THROWS_WITH_AS(ttn_transform(1.0, 0.0, 1.0, 0.0, 0.0), "degenerate target",
                         std::invalid_argument);
}

TEST_CASE("ttn matches source moments exactly on samples") {
    GaussianSampler g(41);
    std::vector<double> z(5000);
    for (auto& v : z)
        v = 2.5 * g() + 1.0;
    double mean = 0;
    for (double v : z)
        mean += v;
    mean /= static_cast<double>(z.size());
    double var = 0;
    for (double v : z)
        var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(z.size()));

    const double mu_s = -0.7, sd_s = 0.4;
    double new_mean = 0;
    for (double v : z)
        new_mean += ttn_transform(v, mu_s, sd_s, mean, sd);
    new_mean /= static_cast<double>(z.size());
    double new_var = 0;
    for (double v : z) {
        const double t = ttn_transform(v, mu_s, sd_s, mean, sd) - new_mean;
        new_var += t * t;
    }
    const double new_sd = std::sqrt(new_var / static_cast<double>(z.size()));
    CHECK(new_mean == doctest::Approx(mu_s).epsilon(1e-12));
    CHECK(new_sd == doctest::Approx(sd_s).epsilon(1e-12));
}

TEST_CASE("oracle recovery composes exact distribution functions") {
    const auto source_quantile = [](double u) { return probit(u); };

    SUBCASE("identical distributions give the identity") {
        const auto target_cdf = [](double z) { return normal_cdf(z); };
        for (double z = -4.0; z <= 4.0; z += 0.5)
            CHECK(std::abs(oracle_aqr(z, source_quantile, target_cdf) - z) < 1e-9);
    }

    SUBCASE("cubic pushforward is inverted exactly") {
        const auto target_cdf = [](double z) { return normal_cdf(std::cbrt(z)); };
        GaussianSampler g(51);
        for (int i = 0; i < 200; ++i) {
            const double s = g();
            const double corrupted = s * s * s;
            CHECK(std::abs(oracle_aqr(corrupted, source_quantile, target_cdf) - s) < 1e-8);
        }
    }

    SUBCASE("gaussian-to-gaussian reduces to the affine map") {
        const auto target_cdf = [](double z) { return normal_cdf((z - 3.0) / 2.0); };
        for (double z = -5.0; z <= 11.0; z += 0.5)
            CHECK(oracle_aqr(z, source_quantile, target_cdf) ==
                  doctest::Approx((z - 3.0) / 2.0).epsilon(1e-9));
    }
}

TEST_CASE("oracle recovery coincides with the affine baseline on gaussians") {
    const double mu_s = 0.8, sd_s = 1.3, mu_t = 3.0, sd_t = 2.0;
    const auto source_quantile = [&](double u) { return mu_s + sd_s * probit(u); };
    const auto target_cdf = [&](double z) { return normal_cdf((z - mu_t) / sd_t); };
    for (int i = 0; i <= 200; ++i) {
        const double z = mu_t - 4 * sd_t + 8 * sd_t * i / 200.0;
        const double via_oracle = oracle_aqr(z, source_quantile, target_cdf);
        const double via_ttn = ttn_transform(z, mu_s, sd_s, mu_t, sd_t);
        CHECK(std::abs(via_oracle - via_ttn) <= 1e-9);
    }
}

TEST_CASE("statistics survive a save/load round trip bit-exactly") {
    const Network net = build_mlp(2, 3, 2, Activation::leaky_relu(0.1), 61);
    const auto src = sample_source(normal_spec(2, 62), 3000);
    AdaptationConfig cfg;
    cfg.rng_seed = 63;
    const auto stats = setup_phase(net, {src}, cfg);

    const std::string path = "roundtrip_stats.json";
    save_statistics(stats, path);
    const auto loaded = load_statistics(path);
    CHECK(stats_equal(stats, loaded));
    std::remove(path.c_str());
}

TEST_CASE("malformed and tampered statistics files are rejected") {
    const Network net = build_one_hidden_mlp(2, 2, Activation::identity(), 71);
    const auto src = sample_source(normal_spec(2, 72), 500);
    AdaptationConfig cfg;
    cfg.K = 10;
    cfg.tail_strategy = TailStrategy::Standard;
    cfg.rng_seed = 73;
    const auto stats = setup_phase(net, {src}, cfg);
    const std::string path = "tamper_stats.json";
    save_statistics(stats, path);

    std::string text;
    {
        std::ifstream in(path);
        std::stringstream buf;
        buf << in.rdbuf();
        text = buf.str();
    }

    SUBCASE("truncated file") {
        std::ofstream out(path, std::ios::binary);
        out << text.substr(0, text.size() / 2);
        out.close();
        CHECK_THROWS_AS(load_statistics(path), std::runtime_error);
    }

    SUBCASE("unsupported version") {
        auto pos = text.find("\"version\": 1");
        REQUIRE(pos != std::string::npos);
        text.replace(pos, 12, "\"version\": 2");
        std::ofstream out(path, std::ios::binary);
        out << text;
        out.close();
        CHECK_THROWS_WITH_AS(load_statistics(path), "unsupported version", std::runtime_error);
    }

    SUBCASE("checksum failure after payload tampering") {
        auto pos = text.find("\"n_source\": 500");
        REQUIRE(pos != std::string::npos);
        text.replace(pos, 15, "\"n_source\": 501");
        std::ofstream out(path, std::ios::binary);
        out << text;
        out.close();
        CHECK_THROWS_WITH_AS(load_statistics(path), "statistics checksum failure",
                             std::runtime_error);
    }

    std::remove(path.c_str());
}
