#pragma once

// Feedforward multilayer perceptron trained by online error backpropagation.
//
// Conventions used throughout:
//   - weight matrices are (destination x source); layer k maps layer_sizes[k]
//     activations to layer_sizes[k+1] activations
//   - every non-input neuron applies the logistic sigmoid to its weighted sum
//     plus bias, at hidden and output layers alike
//   - the loss per pattern is E = 1/2 * sum((target - output)^2); gradients
//     returned by `gradients` are dE/dcoefficient

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stockcast/series.hpp"

namespace stockcast {

struct NetworkTopology {
    int input_count = 5;
    std::vector<int> hidden_layer_sizes{21, 21};
    int output_count = 1;

    // [input, hidden..., output]
    std::vector<int> layer_sizes() const {
        std::vector<int> sizes;
        sizes.reserve(hidden_layer_sizes.size() + 2);
        sizes.push_back(input_count);
        sizes.insert(sizes.end(), hidden_layer_sizes.begin(), hidden_layer_sizes.end());
        sizes.push_back(output_count);
        return sizes;
    }

    void validate() const {
        if (input_count < 1) throw std::invalid_argument("topology: input_count must be >= 1");
        if (output_count < 1) throw std::invalid_argument("topology: output_count must be >= 1");
        if (hidden_layer_sizes.empty())
            throw std::invalid_argument("topology: at least one hidden layer required");
        for (int size : hidden_layer_sizes)
            if (size < 1) throw std::invalid_argument("topology: hidden layer sizes must be >= 1");
    }

    bool operator==(const NetworkTopology&) const = default;
};

/// Rule of thumb for sizing a hidden layer from the input count: 2n + 1.
inline int heuristic_hidden_size(int input_count) {
    if (input_count < 1) throw std::invalid_argument("input_count must be >= 1");
    return 2 * input_count + 1;
}

// Dense row-major matrix, sized once at construction.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> values;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, 0.0) {}

    double& operator()(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }

    bool operator==(const Matrix&) const = default;
};

// Weights plus biases feeding one non-input layer. Velocity and gradient
// buffers reuse the same shape.
struct LayerCoeffs {
    Matrix weights;               // destination x source
    std::vector<double> biases;   // one per destination neuron

    bool operator==(const LayerCoeffs&) const = default;
};

using Coefficients = std::vector<LayerCoeffs>;

struct MlpNetwork {
    NetworkTopology topology;
    Coefficients layers;  // one entry per non-input layer

    std::size_t coefficient_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.weights.values.size() + l.biases.size();
        return n;
    }

    bool operator==(const MlpNetwork&) const = default;
};

inline bool is_finite(const MlpNetwork& network) {
    for (const auto& layer : network.layers) {
        for (double w : layer.weights.values)
            if (!std::isfinite(w)) return false;
        for (double b : layer.biases)
            if (!std::isfinite(b)) return false;
    }
    return true;
}

inline void check_dimensions(const MlpNetwork& network) {
    network.topology.validate();
    auto sizes = network.topology.layer_sizes();
    if (network.layers.size() != sizes.size() - 1)
        throw std::invalid_argument("network: layer count does not match topology");
    for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
        const auto& layer = network.layers[k];
        if (layer.weights.rows != sizes[k + 1] || layer.weights.cols != sizes[k])
            throw std::invalid_argument("network: weight matrix " + std::to_string(k) +
                                        " does not match topology");
        if (layer.biases.size() != static_cast<std::size_t>(sizes[k + 1]))
            throw std::invalid_argument("network: bias vector " + std::to_string(k) +
                                        " does not match topology");
    }
}

/// Gradient/velocity buffer matching the network's coefficient shapes, zeroed.
inline Coefficients zero_like(const MlpNetwork& network) {
    Coefficients out;
    out.reserve(network.layers.size());
    for (const auto& layer : network.layers) {
        LayerCoeffs c;
        c.weights = Matrix(layer.weights.rows, layer.weights.cols);
        c.biases.assign(layer.biases.size(), 0.0);
        out.push_back(std::move(c));
    }
    return out;
}

// Identifier of the initialization PRNG, recorded in model files. The draw
// sequence is pinned: std::mt19937_64 seeded with the given seed; each
// coefficient consumes one engine output x and becomes
// (x >> 11) * 2^-53 - 0.5, i.e. uniform over [-0.5, 0.5). Draw order is layer
// by layer from the input side, weights row-major first, then biases.
inline constexpr const char* kPrngAlgorithm = "mt19937_64-u53-v1";

inline MlpNetwork init_network(const NetworkTopology& topology, std::uint64_t seed) {
    topology.validate();

    std::mt19937_64 engine(seed);
    auto draw = [&engine] {
        return static_cast<double>(engine() >> 11) * 0x1.0p-53 - 0.5;
    };

    MlpNetwork network;
    network.topology = topology;
    auto sizes = topology.layer_sizes();
    network.layers.reserve(sizes.size() - 1);
    for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
        LayerCoeffs layer;
        layer.weights = Matrix(sizes[k + 1], sizes[k]);
        for (double& w : layer.weights.values) w = draw();
        layer.biases.resize(static_cast<std::size_t>(sizes[k + 1]));
        for (double& b : layer.biases) b = draw();
        network.layers.push_back(std::move(layer));
    }
    return network;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

namespace detail {

// Scratch buffers reused across patterns so the training loop stays
// allocation-free.
struct Workspace {
    std::vector<std::vector<double>> activations;  // one per layer, input included
    std::vector<std::vector<double>> deltas;       // one per non-input layer
    Coefficients gradients;

    void resize(const MlpNetwork& network) {
        auto sizes = network.topology.layer_sizes();
        activations.resize(sizes.size());
        for (std::size_t k = 0; k < sizes.size(); ++k)
            activations[k].assign(static_cast<std::size_t>(sizes[k]), 0.0);
        deltas.resize(sizes.size() - 1);
        for (std::size_t k = 0; k + 1 < sizes.size(); ++k)
            deltas[k].assign(static_cast<std::size_t>(sizes[k + 1]), 0.0);
        gradients = zero_like(network);
    }
};

inline void forward_into(const MlpNetwork& network, std::span<const double> input,
                         std::vector<std::vector<double>>& activations) {
    auto& in = activations.front();
    for (std::size_t i = 0; i < in.size(); ++i) in[i] = input[i];

    for (std::size_t k = 0; k < network.layers.size(); ++k) {
        const auto& layer = network.layers[k];
        const auto& src = activations[k];
        auto& dst = activations[k + 1];
        for (int j = 0; j < layer.weights.rows; ++j) {
            const double* row = &layer.weights.values[static_cast<std::size_t>(j) * layer.weights.cols];
            double sum = layer.biases[static_cast<std::size_t>(j)];
            for (int i = 0; i < layer.weights.cols; ++i) sum += row[i] * src[static_cast<std::size_t>(i)];
            dst[static_cast<std::size_t>(j)] = sigmoid(sum);
        }
    }
}

// Fills ws.gradients with dE/dcoefficient for E = 1/2 sum((t - o)^2) and
// returns the pattern's squared error sum((t - o)^2). Single gradient path:
// both backprop_step and the public gradients() run through here.
inline double gradients_into(const MlpNetwork& network, std::span<const double> input,
                             std::span<const double> target, Workspace& ws) {
    forward_into(network, input, ws.activations);

    const auto& output = ws.activations.back();
    auto& output_delta = ws.deltas.back();
    double squared_error = 0.0;
    for (std::size_t j = 0; j < output.size(); ++j) {
        double err = target[j] - output[j];
        squared_error += err * err;
        output_delta[j] = err * output[j] * (1.0 - output[j]);
    }

    for (std::size_t k = network.layers.size(); k-- > 0;) {
        const auto& delta = ws.deltas[k];
        const auto& src = ws.activations[k];
        auto& grad = ws.gradients[k];
        const auto& weights = network.layers[k].weights;

        for (int j = 0; j < weights.rows; ++j) {
            double d = delta[static_cast<std::size_t>(j)];
            double* grow = &grad.weights.values[static_cast<std::size_t>(j) * weights.cols];
            for (int i = 0; i < weights.cols; ++i) grow[i] = -d * src[static_cast<std::size_t>(i)];
            grad.biases[static_cast<std::size_t>(j)] = -d;
        }

        if (k == 0) break;
        // delta for the upstream layer: act * (1 - act) * sum(downstream delta * weight)
        auto& up_delta = ws.deltas[k - 1];
        const auto& up_act = ws.activations[k];
        for (int i = 0; i < weights.cols; ++i) {
            double sum = 0.0;
            for (int j = 0; j < weights.rows; ++j)
                sum += delta[static_cast<std::size_t>(j)] * weights(j, i);
            double a = up_act[static_cast<std::size_t>(i)];
            up_delta[static_cast<std::size_t>(i)] = a * (1.0 - a) * sum;
        }
    }
    return squared_error;
}

inline void check_pattern(const MlpNetwork& network, std::span<const double> input,
                          std::span<const double> target) {
    if (input.size() != static_cast<std::size_t>(network.topology.input_count))
        throw std::invalid_argument("input length " + std::to_string(input.size()) +
                                    " does not match topology input count " +
                                    std::to_string(network.topology.input_count));
    if (target.size() != static_cast<std::size_t>(network.topology.output_count))
        throw std::invalid_argument("target length " + std::to_string(target.size()) +
                                    " does not match topology output count " +
                                    std::to_string(network.topology.output_count));
    for (double v : input)
        if (!std::isfinite(v)) throw std::invalid_argument("input contains a non-finite value");
    for (double v : target)
        if (!std::isfinite(v)) throw std::invalid_argument("target contains a non-finite value");
}

}  // namespace detail

struct ForwardResult {
    // activations[0] is the input copy; activations.back() the output layer.
    std::vector<std::vector<double>> activations;

    const std::vector<double>& output() const& { return activations.back(); }
    // Keeps `forward(net, x).output()` valid past the full expression.
    std::vector<double> output() && { return std::move(activations.back()); }
};

inline ForwardResult forward(const MlpNetwork& network, std::span<const double> input) {
    if (input.size() != static_cast<std::size_t>(network.topology.input_count))
        throw std::invalid_argument("input length " + std::to_string(input.size()) +
                                    " does not match topology input count " +
                                    std::to_string(network.topology.input_count));
    for (double v : input)
        if (!std::isfinite(v)) throw std::invalid_argument("input contains a non-finite value");

    ForwardResult result;
    auto sizes = network.topology.layer_sizes();
    result.activations.resize(sizes.size());
    for (std::size_t k = 0; k < sizes.size(); ++k)
        result.activations[k].assign(static_cast<std::size_t>(sizes[k]), 0.0);
    detail::forward_into(network, input, result.activations);
    return result;
}

/// dE/dcoefficient for a single pattern, E = 1/2 sum((target - output)^2).
inline Coefficients gradients(const MlpNetwork& network, std::span<const double> input,
                              std::span<const double> target) {
    detail::check_pattern(network, input, target);
    detail::Workspace ws;
    ws.resize(network);
    detail::gradients_into(network, input, target, ws);
    return std::move(ws.gradients);
}

/// Training hyperparameters. `epochs` counts full passes over the training
/// patterns (the "cycles" knob); `seed` drives init_network.
struct TrainingConfig {
    long epochs = 130000;
    double learning_rate = 0.1;
    double momentum = 0.0;
    std::uint64_t seed = 42;
    long log_interval = 1000;

    void validate() const {
        if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
        if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
        if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0,1)");
        if (log_interval < 1) throw std::invalid_argument("log_interval must be >= 1");
    }
};

struct TraceSample {
    long epoch = 0;
    double mse = 0.0;

    bool operator==(const TraceSample&) const = default;
};

struct TrainingTrace {
    std::vector<TraceSample> samples;

    bool operator==(const TrainingTrace&) const = default;
};

namespace detail {

inline void apply_update(MlpNetwork& network, const TrainingConfig& config, const Coefficients& grads,
                         Coefficients& velocity) {
    for (std::size_t k = 0; k < network.layers.size(); ++k) {
        auto& layer = network.layers[k];
        const auto& g = grads[k];
        auto& v = velocity[k];
        for (std::size_t i = 0; i < layer.weights.values.size(); ++i) {
            double step = -config.learning_rate * g.weights.values[i] + config.momentum * v.weights.values[i];
            v.weights.values[i] = step;
            layer.weights.values[i] += step;
        }
        for (std::size_t i = 0; i < layer.biases.size(); ++i) {
            double step = -config.learning_rate * g.biases[i] + config.momentum * v.biases[i];
            v.biases[i] = step;
            layer.biases[i] += step;
        }
    }
}

}  // namespace detail

/// One online update on one pattern. Mutates the network and the velocity
/// (previous-update) buffer; returns the squared error measured before the
/// update.
inline double backprop_step(MlpNetwork& network, std::span<const double> input,
                            std::span<const double> target, const TrainingConfig& config,
                            Coefficients& velocity, detail::Workspace& ws) {
    double squared_error = detail::gradients_into(network, input, target, ws);
    detail::apply_update(network, config, ws.gradients, velocity);
    return squared_error;
}

inline double backprop_step(MlpNetwork& network, std::span<const double> input,
                            std::span<const double> target, const TrainingConfig& config,
                            Coefficients& velocity) {
    detail::check_pattern(network, input, target);
    config.validate();
    detail::Workspace ws;
    ws.resize(network);
    return backprop_step(network, input, target, config, velocity, ws);
}

inline double backprop_step(MlpNetwork& network, const Pattern& pattern, const TrainingConfig& config,
                            Coefficients& velocity) {
    const double target[1] = {pattern.target};
    return backprop_step(network, pattern.inputs, std::span<const double>(target, 1), config, velocity);
}

/// Mean over all patterns of the per-pattern squared error sum((t - o)^2).
inline double dataset_mse(const MlpNetwork& network, const WindowedDataset& data) {
    if (data.patterns.empty()) throw std::invalid_argument("dataset is empty");
    detail::Workspace ws;
    ws.resize(network);
    double total = 0.0;
    for (const auto& pattern : data.patterns) {
        detail::forward_into(network, pattern.inputs, ws.activations);
        double err = pattern.target - ws.activations.back()[0];
        total += err * err;
    }
    return total / static_cast<double>(data.patterns.size());
}

/// Resumable training state: continuing a run from here is coefficient-exact
/// with having trained straight through.
struct TrainState {
    MlpNetwork network;
    Coefficients velocity;
    long epoch = 0;
};

inline TrainState make_train_state(MlpNetwork network) {
    TrainState state;
    state.velocity = zero_like(network);
    state.network = std::move(network);
    return state;
}

/// Advances training to `target_epoch` (absolute). One epoch is one pass over
/// all patterns in chronological order with per-pattern updates. Appends an
/// MSE sample at epoch 0 (when starting fresh), at every log_interval epochs,
/// and at the target epoch.
inline void train_to(TrainState& state, const WindowedDataset& data, const TrainingConfig& config,
                     long target_epoch, TrainingTrace& trace) {
    config.validate();
    if (data.patterns.empty()) throw std::invalid_argument("cannot train on an empty dataset");
    if (state.network.topology.output_count != 1)
        throw std::invalid_argument("windowed datasets carry a single target; topology has output_count " +
                                    std::to_string(state.network.topology.output_count));
    for (const auto& pattern : data.patterns)
        if (pattern.inputs.size() != static_cast<std::size_t>(state.network.topology.input_count))
            throw std::invalid_argument("pattern width " + std::to_string(pattern.inputs.size()) +
                                        " does not match topology input count " +
                                        std::to_string(state.network.topology.input_count));
    if (target_epoch < state.epoch)
        throw std::invalid_argument("target epoch " + std::to_string(target_epoch) +
                                    " precedes current epoch " + std::to_string(state.epoch));
    if (!is_finite(state.network)) throw std::runtime_error("training aborted: non-finite network state");

    detail::Workspace ws;
    ws.resize(state.network);

    if (state.epoch == 0 && trace.samples.empty())
        trace.samples.push_back({0, dataset_mse(state.network, data)});

    double target_buf[1];
    for (long epoch = state.epoch + 1; epoch <= target_epoch; ++epoch) {
        for (const auto& pattern : data.patterns) {
            target_buf[0] = pattern.target;
            backprop_step(state.network, pattern.inputs, std::span<const double>(target_buf, 1), config,
                          state.velocity, ws);
        }
        if (!is_finite(state.network))
            throw std::runtime_error("training aborted: non-finite network state at epoch " +
                                     std::to_string(epoch));
        if (epoch % config.log_interval == 0 || epoch == target_epoch)
            trace.samples.push_back({epoch, dataset_mse(state.network, data)});
    }
    state.epoch = target_epoch;
}

struct TrainResult {
    MlpNetwork network;
    TrainingTrace trace;
};

/// Runs config.epochs full epochs from the given starting network.
/// Deterministic: identical (network, dataset, config) yield identical
/// results.
inline TrainResult train(MlpNetwork network, const WindowedDataset& data, const TrainingConfig& config) {
    auto state = make_train_state(std::move(network));
    TrainingTrace trace;
    train_to(state, data, config, config.epochs, trace);
    return {std::move(state.network), std::move(trace)};
}

}  // namespace stockcast
