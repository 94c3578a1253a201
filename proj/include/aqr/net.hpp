#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace aqr {

// Dense row-major matrix; rows are samples, columns are channels.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct Activation {
    enum class Kind { Identity, LeakyRelu, Tanh };

    Kind kind = Kind::Identity;
    double slope = 1.0; // leaky-relu slope, strictly positive

    static Activation identity() { return {Kind::Identity, 1.0}; }
    static Activation leaky_relu(double slope);
    static Activation tanh() { return {Kind::Tanh, 1.0}; }

    double operator()(double x) const;
};

struct LayerSpec {
    Matrix weights; // out_dim x in_dim
    std::vector<double> bias;
    Activation activation;
    std::optional<std::string> hook_id;

    std::size_t in_dim() const { return weights.cols; }
    std::size_t out_dim() const { return weights.rows; }
};

struct Network {
    std::vector<LayerSpec> layers;
    std::size_t input_dim = 0;

    std::vector<std::string> hook_ids() const; // in depth order
};

// Pre-activation values a_c^l recorded at a hook, as they stood before any
// interceptor ran at that hook.
struct HookCapture {
    std::string hook_id;
    Matrix pre_activations; // batch x channels
};

// An interceptor rewrites one channel's pre-activation column in place. It runs
// after the capture is taken and before the activation function.
using ChannelTransform = std::function<void(std::size_t channel, std::span<double> values)>;
using Interceptors = std::map<std::string, ChannelTransform>;

struct ForwardResult {
    Matrix output;
    std::vector<HookCapture> captures;
};

// Validates layer dimensions; a network is at least a hidden layer plus a readout.
Network make_network(std::vector<LayerSpec> layers, std::size_t input_dim);

// Hidden layer (m x d) with a hook at its pre-activation, linear readout on top.
// Weights are drawn from a symmetric distribution at scale 1/sqrt(in_dim),
// deterministically per seed.
Network build_one_hidden_mlp(std::size_t d, std::size_t m, Activation activation,
                             std::uint64_t rng_seed);

// Stack of `depth` hidden layers of width m, hooks "h1".."h<depth>", plus readout.
Network build_mlp(std::size_t d, std::size_t m, std::size_t depth, Activation activation,
                  std::uint64_t rng_seed);

ForwardResult forward(const Network& net, const Matrix& batch,
                      const Interceptors& interceptors = {});

// Column `channel` of a capture across the batch.
std::vector<double> channel_samples(const HookCapture& capture, std::size_t channel);

enum class LayerPolicy { All, TopHalf };

const char* to_string(LayerPolicy p);
LayerPolicy layer_policy_from_string(const std::string& name);

// All -> every hook; TopHalf -> the upper ceil(L/2) hooked layers by depth.
std::vector<std::string> select_hooks(const Network& net, LayerPolicy policy);

} // namespace aqr
