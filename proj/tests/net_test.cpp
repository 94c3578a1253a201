#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "aqr/net.hpp"
#include "aqr/rng.hpp"

using namespace aqr;

namespace {

Matrix single_column(const std::vector<double>& values) {
    Matrix m(values.size(), 1);
    for (std::size_t r = 0; r < values.size(); ++r)
        m(r, 0) = values[r];
    return m;
}

} // namespace

TEST_CASE("one-hidden identity mlp is an affine scalar map") {
    const Network net = build_one_hidden_mlp(1, 1, Activation::identity(), 4);
    const double w1 = net.layers[0].weights(0, 0);
    const double b1 = net.layers[0].bias[0];
    const double w2 = net.layers[1].weights(0, 0);
    const double b2 = net.layers[1].bias[0];
    const auto result = forward(net, single_column({0.0, 1.0, -2.5}));
    for (std::size_t r = 0; r < 3; ++r) {
        const double x = std::vector<double>{0.0, 1.0, -2.5}[r];
        CHECK(result.output(r, 0) == doctest::Approx(w2 * (w1 * x + b1) + b2).epsilon(1e-14));
    }
}

TEST_CASE("hidden capture has one channel per unit") {
    const Network net = build_one_hidden_mlp(3, 8, Activation::tanh(), 5);
    Matrix batch(4, 3);
    const auto result = forward(net, batch);
    REQUIRE(result.captures.size() == 1);
    CHECK(result.captures[0].hook_id == "h1");
    CHECK(result.captures[0].pre_activations.cols == 8);
    CHECK(result.captures[0].pre_activations.rows == 4);
}

TEST_CASE("weight initialization is deterministic per seed") {
    const Network a = build_mlp(3, 8, 2, Activation::leaky_relu(0.1), 11);
    const Network b = build_mlp(3, 8, 2, Activation::leaky_relu(0.1), 11);
    const Network c = build_mlp(3, 8, 2, Activation::leaky_relu(0.1), 12);
    CHECK(a.layers[0].weights.data == b.layers[0].weights.data);
    CHECK(a.layers[1].bias == b.layers[1].bias);
    CHECK(a.layers[0].weights.data != c.layers[0].weights.data);
}

TEST_CASE("activations are strictly increasing") {
    std::mt19937_64 gen(9);
    const Activation acts[] = {Activation::identity(), Activation::leaky_relu(0.07),
                               Activation::tanh()};
    for (const auto& act : acts) {
        for (int i = 0; i < 300; ++i) {
            const double x = (uniform01(gen) - 0.5) * 12.0;
            const double y = x + uniform01(gen) * 3.0 + 1e-9;
            CHECK(act(x) < act(y));
        }
    }
    CHECK_THROWS_AS(Activation::leaky_relu(0.0), std::invalid_argument);
    CHECK_THROWS_AS(Activation::leaky_relu(-0.5), std::invalid_argument);
}

TEST_CASE("forward with identity interceptors equals plain forward") {
    const Network net = build_mlp(2, 5, 2, Activation::leaky_relu(0.2), 21);
    Matrix batch(16, 2);
    std::mt19937_64 gen(22);
    for (auto& v : batch.data)
        v = uniform01(gen) - 0.5;

    const auto plain = forward(net, batch);
    Interceptors identity_taps;
    for (const auto& id : net.hook_ids())
        identity_taps[id] = [](std::size_t, std::span<double>) {};
    const auto tapped = forward(net, batch, identity_taps);
    CHECK(plain.output.data == tapped.output.data);
}

TEST_CASE("zeroing the only hidden hook forces the readout constant") {
    const Network net = build_one_hidden_mlp(3, 4, Activation::identity(), 33);
    Matrix batch(8, 3);
    std::mt19937_64 gen(34);
    for (auto& v : batch.data)
        v = uniform01(gen) * 2 - 1;
    Interceptors zero;
    zero["h1"] = [](std::size_t, std::span<double> v) {
        for (auto& x : v)
            x = 0.0;
    };
    const auto result = forward(net, batch, zero);
    const double readout_bias = net.layers[1].bias[0];
    for (std::size_t r = 0; r < batch.rows; ++r)
        CHECK(result.output(r, 0) == doctest::Approx(readout_bias).epsilon(1e-14));
}

TEST_CASE("unknown interceptor hooks are rejected") {
    const Network net = build_one_hidden_mlp(2, 3, Activation::identity(), 1);
    Matrix batch(4, 2);
    Interceptors bad;
    bad["nope"] = [](std::size_t, std::span<double>) {};
    CHECK_THROWS_AS(forward(net, batch, bad), std::invalid_argument);
}

TEST_CASE("channel_samples handles single-row batches") {
    const Network net = build_one_hidden_mlp(2, 3, Activation::identity(), 77);
    Matrix batch(1, 2);
    batch(0, 0) = 0.4;
    batch(0, 1) = -0.9;
    const auto result = forward(net, batch);
    CHECK(channel_samples(result.captures[0], 2).size() == 1);
}

TEST_CASE("channel_samples extracts columns and validates the index") {
    HookCapture capture;
    capture.hook_id = "h1";
    capture.pre_activations = Matrix(2, 2);
    capture.pre_activations(0, 0) = 1;
    capture.pre_activations(0, 1) = 2;
    capture.pre_activations(1, 0) = 3;
    capture.pre_activations(1, 1) = 4;
    CHECK(channel_samples(capture, 1) == std::vector<double>{2, 4});
    CHECK_THROWS_AS(channel_samples(capture, 2), std::out_of_range);
}

TEST_CASE("pooling two batches concatenates columns") {
    const Network net = build_one_hidden_mlp(2, 3, Activation::identity(), 2);
    Matrix b1(128, 2), b2(128, 2);
    std::mt19937_64 gen(3);
    for (auto& v : b1.data)
        v = uniform01(gen);
    for (auto& v : b2.data)
        v = uniform01(gen);
    auto c1 = channel_samples(forward(net, b1).captures[0], 0);
    auto c2 = channel_samples(forward(net, b2).captures[0], 0);
    c1.insert(c1.end(), c2.begin(), c2.end());
    CHECK(c1.size() == 256);
}

TEST_CASE("layer policy selects the upper half by depth") {
    auto hooks_of = [](std::size_t depth, LayerPolicy policy) {
        const Network net = build_mlp(2, 3, depth, Activation::tanh(), 6);
        return select_hooks(net, policy);
    };
    CHECK(hooks_of(1, LayerPolicy::TopHalf) == std::vector<std::string>{"h1"});
    CHECK(hooks_of(4, LayerPolicy::TopHalf) == std::vector<std::string>{"h3", "h4"});
    CHECK(hooks_of(5, LayerPolicy::TopHalf) == std::vector<std::string>{"h3", "h4", "h5"});
    CHECK(hooks_of(4, LayerPolicy::All) ==
          std::vector<std::string>{"h1", "h2", "h3", "h4"});
}

TEST_CASE("interception changes only strictly deeper captures") {
    const Network net = build_mlp(2, 4, 3, Activation::leaky_relu(0.3), 41);
    Matrix batch(32, 2);
    std::mt19937_64 gen(42);
    for (auto& v : batch.data)
        v = uniform01(gen) * 2 - 1;

    const auto plain = forward(net, batch);
    Interceptors scale_h2;
    scale_h2["h2"] = [](std::size_t, std::span<double> v) {
        for (auto& x : v)
            x *= 2.0;
    };
    const auto tapped = forward(net, batch, scale_h2);

    CHECK(plain.captures[0].pre_activations.data == tapped.captures[0].pre_activations.data);
    // captures record values before interception at the same hook
    CHECK(plain.captures[1].pre_activations.data == tapped.captures[1].pre_activations.data);
    CHECK(plain.captures[2].pre_activations.data != tapped.captures[2].pre_activations.data);
}

TEST_CASE("forward is deterministic") {
    const Network net = build_mlp(3, 6, 2, Activation::tanh(), 50);
    Matrix batch(64, 3);
    std::mt19937_64 gen(51);
    for (auto& v : batch.data)
        v = uniform01(gen);
    const auto a = forward(net, batch);
    const auto b = forward(net, batch);
    CHECK(a.output.data == b.output.data);
}

TEST_CASE("network construction validates dimensions") {
    std::vector<LayerSpec> layers;
    LayerSpec l1;
    l1.weights = Matrix(3, 2);
    l1.bias = {0, 0, 0};
    l1.activation = Activation::identity();
    LayerSpec l2;
    l2.weights = Matrix(1, 4); // mismatched input dim
    l2.bias = {0};
    l2.activation = Activation::identity();
    layers.push_back(l1);
    layers.push_back(l2);
    CHECK_THROWS_AS(make_network(std::move(layers), 2), std::invalid_argument);
    CHECK_THROWS_AS(build_mlp(0, 3, 1, Activation::identity(), 1), std::invalid_argument);
}
