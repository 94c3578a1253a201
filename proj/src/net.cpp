#include "aqr/net.hpp"

#include <cmath>
#include <stdexcept>

#include "aqr/rng.hpp"

namespace aqr {

Activation Activation::leaky_relu(double slope) {
    if (!(slope > 0.0))
        throw std::invalid_argument("leaky-relu slope must be strictly positive");
    return {Kind::LeakyRelu, slope};
}

double Activation::operator()(double x) const {
    switch (kind) {
    case Kind::Identity: return x;
    case Kind::LeakyRelu: return x >= 0.0 ? x : slope * x;
    case Kind::Tanh: return std::tanh(x);
    }
    return x;
}

std::vector<std::string> Network::hook_ids() const {
    std::vector<std::string> ids;
    for (const auto& layer : layers)
        if (layer.hook_id)
            ids.push_back(*layer.hook_id);
    return ids;
}

Network make_network(std::vector<LayerSpec> layers, std::size_t input_dim) {
    if (layers.size() < 2)
        throw std::invalid_argument("network needs at least one hidden layer plus a readout");
    std::size_t dim = input_dim;
    for (const auto& layer : layers) {
        if (layer.in_dim() != dim)
            throw std::invalid_argument("layer input dimension mismatch");
        if (layer.bias.size() != layer.out_dim())
            throw std::invalid_argument("bias dimension mismatch");
        dim = layer.out_dim();
    }
    Network net;
    net.layers = std::move(layers);
    net.input_dim = input_dim;
    return net;
}

namespace {

// Symmetric uniform init at scale 1/sqrt(in_dim) keeps pre-activations O(1).
LayerSpec random_layer(std::size_t out_dim, std::size_t in_dim, Activation act,
                       std::mt19937_64& gen, std::optional<std::string> hook) {
    LayerSpec layer;
    layer.weights = Matrix(out_dim, in_dim);
    layer.bias.resize(out_dim);
    const double scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
    for (std::size_t o = 0; o < out_dim; ++o) {
        for (std::size_t i = 0; i < in_dim; ++i)
            layer.weights(o, i) = (2.0 * uniform01(gen) - 1.0) * scale;
        layer.bias[o] = (2.0 * uniform01(gen) - 1.0) * scale;
    }
    layer.activation = act;
    layer.hook_id = std::move(hook);
    return layer;
}

} // namespace

Network build_mlp(std::size_t d, std::size_t m, std::size_t depth, Activation activation,
                  std::uint64_t rng_seed) {
    if (d < 1 || m < 1 || depth < 1)
        throw std::invalid_argument("network dimensions must be >= 1");
    std::mt19937_64 gen(rng_seed);
    std::vector<LayerSpec> layers;
    std::size_t in = d;
    for (std::size_t l = 0; l < depth; ++l) {
        layers.push_back(random_layer(m, in, activation, gen, "h" + std::to_string(l + 1)));
        in = m;
    }
    layers.push_back(random_layer(1, m, Activation::identity(), gen, std::nullopt));
    return make_network(std::move(layers), d);
}

Network build_one_hidden_mlp(std::size_t d, std::size_t m, Activation activation,
                             std::uint64_t rng_seed) {
    return build_mlp(d, m, 1, activation, rng_seed);
}

ForwardResult forward(const Network& net, const Matrix& batch,
                      const Interceptors& interceptors) {
    if (batch.cols != net.input_dim)
        throw std::invalid_argument("batch column count must equal input_dim");
    {
        auto ids = net.hook_ids();
        for (const auto& [hook, fn] : interceptors) {
            (void)fn;
            bool known = false;
            for (const auto& id : ids)
                known = known || id == hook;
            if (!known)
                throw std::invalid_argument("unknown hook id: " + hook);
        }
    }

    ForwardResult result;
    Matrix current = batch;
    for (const auto& layer : net.layers) {
        Matrix pre(current.rows, layer.out_dim());
        for (std::size_t r = 0; r < current.rows; ++r) {
            for (std::size_t o = 0; o < layer.out_dim(); ++o) {
                double s = layer.bias[o];
                for (std::size_t i = 0; i < layer.in_dim(); ++i)
                    s += layer.weights(o, i) * current(r, i);
                pre(r, o) = s;
            }
        }

        if (layer.hook_id) {
            result.captures.push_back(HookCapture{*layer.hook_id, pre});
            if (auto it = interceptors.find(*layer.hook_id); it != interceptors.end()) {
                std::vector<double> column(pre.rows);
                for (std::size_t c = 0; c < pre.cols; ++c) {
                    for (std::size_t r = 0; r < pre.rows; ++r)
                        column[r] = pre(r, c);
                    it->second(c, std::span<double>(column));
                    for (std::size_t r = 0; r < pre.rows; ++r)
                        pre(r, c) = column[r];
                }
            }
        }

        for (double& v : pre.data)
            v = layer.activation(v);
        current = std::move(pre);
    }
    result.output = std::move(current);
    return result;
}

std::vector<double> channel_samples(const HookCapture& capture, std::size_t channel) {
    if (channel >= capture.pre_activations.cols)
        throw std::out_of_range("channel out of range");
    std::vector<double> column(capture.pre_activations.rows);
    for (std::size_t r = 0; r < column.size(); ++r)
        column[r] = capture.pre_activations(r, channel);
    return column;
}

const char* to_string(LayerPolicy p) { return p == LayerPolicy::All ? "all" : "top_half"; }

LayerPolicy layer_policy_from_string(const std::string& name) {
    if (name == "all") return LayerPolicy::All;
    if (name == "top_half") return LayerPolicy::TopHalf;
    throw std::invalid_argument("unknown layer policy: " + name);
}

std::vector<std::string> select_hooks(const Network& net, LayerPolicy policy) {
    auto ids = net.hook_ids();
    if (ids.empty())
        throw std::invalid_argument("network has no hooks");
    if (policy == LayerPolicy::All)
        return ids;
    const std::size_t keep = (ids.size() + 1) / 2;
    return {ids.end() - static_cast<std::ptrdiff_t>(keep), ids.end()};
}

} // namespace aqr
