#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "helpers.hpp"
#include "stockcast/mlp.hpp"
#include "stockcast/series.hpp"

using namespace stockcast;

namespace {

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void set_all(MlpNetwork& net, double value) {
    for (auto& layer : net.layers) {
        for (auto& w : layer.weights.values) w = value;
        for (auto& b : layer.biases) b = value;
    }
}

// Flat views over a network's coefficients and a matching gradient buffer, in
// the same order, so finite-difference checks can walk them pairwise.
std::vector<double*> coefficient_ptrs(MlpNetwork& net) {
    std::vector<double*> ptrs;
    for (auto& layer : net.layers) {
        for (auto& w : layer.weights.values) ptrs.push_back(&w);
        for (auto& b : layer.biases) ptrs.push_back(&b);
    }
    return ptrs;
}

std::vector<double> flatten(const Coefficients& coeffs) {
    std::vector<double> flat;
    for (const auto& layer : coeffs) {
        flat.insert(flat.end(), layer.weights.values.begin(), layer.weights.values.end());
        flat.insert(flat.end(), layer.biases.begin(), layer.biases.end());
    }
    return flat;
}

double pattern_loss(const MlpNetwork& net, const std::vector<double>& in,
                    const std::vector<double>& target) {
    auto out = forward(net, in).output();
    double e = 0.0;
    for (std::size_t j = 0; j < out.size(); ++j) {
        double err = target[j] - out[j];
        e += err * err;
    }
    return 0.5 * e;
}

}  // namespace

TEST_CASE("heuristic_hidden_size is 2n + 1") {
    CHECK(heuristic_hidden_size(5) == 11);
    CHECK(heuristic_hidden_size(1) == 3);
    CHECK(heuristic_hidden_size(10) == 21);
    CHECK_THROWS_AS(heuristic_hidden_size(0), std::invalid_argument);
}

TEST_CASE("topology validation") {
    CHECK_NOTHROW(NetworkTopology{5, {21, 21}, 1}.validate());
    CHECK_THROWS_AS((NetworkTopology{5, {}, 1}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((NetworkTopology{0, {3}, 1}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((NetworkTopology{5, {0}, 1}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((NetworkTopology{5, {3}, 0}.validate()), std::invalid_argument);

    NetworkTopology t{5, {11, 7}, 1};
    CHECK(t.layer_sizes() == std::vector<int>{5, 11, 7, 1});
}

TEST_CASE("init_network is deterministic in (topology, seed)") {
    NetworkTopology t{5, {21, 21}, 1};
    auto a = init_network(t, 42);
    auto b = init_network(t, 42);
    CHECK(a == b);
    CHECK(a != init_network(t, 43));
}

TEST_CASE("init_network shapes follow the topology") {
    auto net = init_network(NetworkTopology{5, {21, 21}, 1}, 9);
    REQUIRE(net.layers.size() == 3);
    CHECK(net.layers[0].weights.rows == 21);
    CHECK(net.layers[0].weights.cols == 5);
    CHECK(net.layers[1].weights.rows == 21);
    CHECK(net.layers[1].weights.cols == 21);
    CHECK(net.layers[2].weights.rows == 1);
    CHECK(net.layers[2].weights.cols == 21);
    CHECK(net.layers[0].biases.size() == 21);
    CHECK(net.layers[1].biases.size() == 21);
    CHECK(net.layers[2].biases.size() == 1);
    CHECK_NOTHROW(check_dimensions(net));
}

TEST_CASE("a 2:3:1 network has 13 coefficients, all within [-0.5, 0.5]") {
    auto net = init_network(NetworkTopology{2, {3}, 1}, 7);
    CHECK(net.coefficient_count() == 13);  // 2*3 + 3 biases + 3*1 + 1 bias
    for (double* p : coefficient_ptrs(net)) {
        CHECK(*p >= -0.5);
        CHECK(*p <= 0.5);
    }
}

TEST_CASE("initialization draws are pinned to the documented generator") {
    CHECK(std::string(kPrngAlgorithm) == "mt19937_64-u53-v1");

    // Recompute the expected draw sequence straight from the engine: one
    // 64-bit output per coefficient, mapped by (x >> 11) * 2^-53 - 0.5, laid
    // out weights-row-major then biases, layer by layer.
    std::mt19937_64 engine(123);
    auto draw = [&engine] { return static_cast<double>(engine() >> 11) * 0x1.0p-53 - 0.5; };

    auto net = init_network(NetworkTopology{2, {2}, 1}, 123);
    const auto& l0 = net.layers[0];
    const auto& l1 = net.layers[1];
    CHECK(l0.weights(0, 0) == draw());
    CHECK(l0.weights(0, 1) == draw());
    CHECK(l0.weights(1, 0) == draw());
    CHECK(l0.weights(1, 1) == draw());
    CHECK(l0.biases[0] == draw());
    CHECK(l0.biases[1] == draw());
    CHECK(l1.weights(0, 0) == draw());
    CHECK(l1.weights(0, 1) == draw());
    CHECK(l1.biases[0] == draw());
}

TEST_CASE("forward with all-zero coefficients yields 0.5 everywhere") {
    auto net = init_network(NetworkTopology{5, {11, 11}, 1}, 1);
    set_all(net, 0.0);
    auto result = forward(net, std::vector<double>{0.3, 0.9, 0.1, 0.7, 0.5});
    REQUIRE(result.activations.size() == 4);
    for (std::size_t layer = 1; layer < result.activations.size(); ++layer)
        for (double a : result.activations[layer]) CHECK(a == 0.5);
}

TEST_CASE("forward evaluates the 1:1:1 sigmoid chain") {
    auto net = init_network(NetworkTopology{1, {1}, 1}, 1);
    set_all(net, 0.0);
    net.layers[0].weights(0, 0) = 1.0;
    net.layers[1].weights(0, 0) = 1.0;

    auto result = forward(net, std::vector<double>{0.0});
    CHECK(result.activations[1][0] == 0.5);
    CHECK(result.output()[0] == Catch::Approx(0.622459).margin(5e-7));
    CHECK(result.output()[0] == sig(sig(0.0)));
}

TEST_CASE("forward keeps the input copy and every intermediate activation") {
    auto net = init_network(NetworkTopology{3, {4, 2}, 1}, 5);
    std::vector<double> in{0.2, 0.8, 0.5};
    auto result = forward(net, in);
    REQUIRE(result.activations.size() == 4);
    CHECK(result.activations[0] == in);
    CHECK(result.activations[1].size() == 4);
    CHECK(result.activations[2].size() == 2);
    CHECK(result.activations[3].size() == 1);
}

TEST_CASE("forward output lies strictly inside (0, 1)") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> in_dist(-3.0, 3.0);
    for (int trial = 0; trial < 50; ++trial) {
        auto net = init_network(NetworkTopology{4, {5}, 2}, rng());
        std::vector<double> in(4);
        for (auto& x : in) x = in_dist(rng);
        auto result = forward(net, in);
        for (double o : result.output()) {
            CHECK(o > 0.0);
            CHECK(o < 1.0);
        }
    }
}

TEST_CASE("forward rejects bad input") {
    auto net = init_network(NetworkTopology{3, {2}, 1}, 3);
    CHECK_THROWS_AS(forward(net, std::vector<double>{0.1, 0.2}), std::invalid_argument);
    CHECK_THROWS_AS(forward(net, std::vector<double>{0.1, 0.2, 0.3, 0.4}), std::invalid_argument);
    double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(forward(net, std::vector<double>{0.1, nan, 0.3}), std::invalid_argument);
}

TEST_CASE("analytical gradients match central finite differences") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> in_dist(0.0, 1.0);
    std::uniform_real_distribution<double> target_dist(0.1, 0.9);

    // A 2:3:3:1 reference case plus a few random small shapes.
    std::vector<NetworkTopology> shapes{
        {2, {3, 3}, 1}, {1, {1}, 1}, {5, {4}, 2}, {3, {5, 2}, 1}, {2, {2, 2}, 2},
    };

    for (const auto& topology : shapes) {
        auto net = init_network(topology, rng());
        std::vector<double> in(static_cast<std::size_t>(topology.input_count));
        std::vector<double> target(static_cast<std::size_t>(topology.output_count));
        for (auto& x : in) x = in_dist(rng);
        for (auto& t : target) t = target_dist(rng);

        auto analytic = flatten(gradients(net, in, target));
        auto ptrs = coefficient_ptrs(net);
        REQUIRE(analytic.size() == ptrs.size());

        const double h = 1e-5;
        for (std::size_t i = 0; i < ptrs.size(); ++i) {
            double saved = *ptrs[i];
            *ptrs[i] = saved + h;
            double up = pattern_loss(net, in, target);
            *ptrs[i] = saved - h;
            double down = pattern_loss(net, in, target);
            *ptrs[i] = saved;
            double fd = (up - down) / (2.0 * h);

            double a = analytic[i];
            if (std::abs(a) < 1e-10) {
                CHECK(std::abs(a - fd) < 1e-8);
            } else {
                CHECK(std::abs(a - fd) / std::max(std::abs(a), std::abs(fd)) < 1e-6);
            }
        }
    }
}

TEST_CASE("backprop_step with a vanishing learning rate barely moves the network") {
    auto net = init_network(NetworkTopology{3, {4}, 1}, 8);
    auto before = net;
    auto velocity = zero_like(net);
    TrainingConfig config;
    config.learning_rate = 1e-12;
    backprop_step(net, std::vector<double>{0.2, 0.5, 0.8}, std::vector<double>{0.4}, config, velocity);

    auto now = coefficient_ptrs(net);
    auto then = coefficient_ptrs(before);
    for (std::size_t i = 0; i < now.size(); ++i)
        CHECK(std::abs(*now[i] - *then[i]) < 1e-9);
}

TEST_CASE("backprop_step at zero error leaves the network unchanged") {
    auto net = init_network(NetworkTopology{2, {3}, 1}, 11);
    std::vector<double> in{0.3, 0.6};
    auto target = forward(net, in).output();

    auto before = net;
    auto velocity = zero_like(net);
    TrainingConfig config;
    double squared_error = backprop_step(net, in, target, config, velocity);
    CHECK(squared_error == 0.0);
    CHECK(net == before);
}

TEST_CASE("backprop_step returns the squared error measured before the update") {
    auto net = init_network(NetworkTopology{2, {2}, 1}, 4);
    std::vector<double> in{0.25, 0.75};
    std::vector<double> target{0.9};
    double out = forward(net, in).output()[0];
    double expected = (target[0] - out) * (target[0] - out);

    auto velocity = zero_like(net);
    TrainingConfig config;
    config.learning_rate = 0.5;
    CHECK(backprop_step(net, in, target, config, velocity) == expected);
    CHECK(forward(net, in).output()[0] != out);
}

TEST_CASE("momentum folds the previous update into the next one") {
    auto net = init_network(NetworkTopology{2, {2}, 1}, 17);
    std::vector<double> in{0.2, 0.9};
    std::vector<double> target{0.3};

    TrainingConfig config;
    config.learning_rate = 0.4;
    config.momentum = 0.9;

    // Replay the same two updates by hand from the public gradient call.
    auto expected = net;
    auto g0 = flatten(gradients(expected, in, target));
    auto ptrs = coefficient_ptrs(expected);
    std::vector<double> step(ptrs.size());
    for (std::size_t i = 0; i < ptrs.size(); ++i) {
        step[i] = -config.learning_rate * g0[i];
        *ptrs[i] += step[i];
    }
    auto g1 = flatten(gradients(expected, in, target));
    for (std::size_t i = 0; i < ptrs.size(); ++i) {
        step[i] = -config.learning_rate * g1[i] + config.momentum * step[i];
        *ptrs[i] += step[i];
    }

    auto velocity = zero_like(net);
    backprop_step(net, in, target, config, velocity);
    backprop_step(net, in, target, config, velocity);
    CHECK(net == expected);
}

TEST_CASE("backprop_step validates dimensions") {
    auto net = init_network(NetworkTopology{2, {2}, 1}, 1);
    auto velocity = zero_like(net);
    TrainingConfig config;
    CHECK_THROWS_AS(
        backprop_step(net, std::vector<double>{0.1}, std::vector<double>{0.5}, config, velocity),
        std::invalid_argument);
    CHECK_THROWS_AS(backprop_step(net, std::vector<double>{0.1, 0.2},
                                  std::vector<double>{0.5, 0.5}, config, velocity),
                    std::invalid_argument);
}

namespace {

WindowedDataset sine_windows(std::size_t points, const NetworkTopology& topology) {
    auto series = testutil::make_sine_series(points);
    auto params = fit_normalization(series);
    return make_windows(series, params, topology.input_count);
}

}  // namespace

TEST_CASE("train with zero epochs only measures the starting error") {
    NetworkTopology topology{5, {3}, 1};
    auto data = sine_windows(30, topology);
    auto net = init_network(topology, 5);

    TrainingConfig config;
    config.epochs = 0;
    auto result = train(net, data, config);
    CHECK(result.network == net);
    REQUIRE(result.trace.samples.size() == 1);
    CHECK(result.trace.samples[0].epoch == 0);
    CHECK(result.trace.samples[0].mse > 0.0);
    CHECK(result.trace.samples[0].mse == dataset_mse(net, data));
}

TEST_CASE("training is deterministic") {
    NetworkTopology topology{5, {4}, 1};
    auto data = sine_windows(40, topology);

    TrainingConfig config;
    config.epochs = 50;
    config.log_interval = 10;
    auto a = train(init_network(topology, 33), data, config);
    auto b = train(init_network(topology, 33), data, config);
    CHECK(a.network == b.network);
    CHECK(a.trace == b.trace);
}

TEST_CASE("one trained epoch equals a manual pass over the patterns in order") {
    NetworkTopology topology{5, {4}, 1};
    auto data = sine_windows(25, topology);

    TrainingConfig config;
    config.epochs = 1;
    auto net = init_network(topology, 77);

    auto expected = net;
    auto velocity = zero_like(expected);
    for (const auto& pattern : data.patterns) backprop_step(expected, pattern, config, velocity);

    auto result = train(net, data, config);
    CHECK(result.network == expected);
}

TEST_CASE("the trace samples epoch 0, every log_interval, and the final epoch") {
    NetworkTopology topology{5, {3}, 1};
    auto data = sine_windows(20, topology);

    TrainingConfig config;
    config.epochs = 250;
    config.log_interval = 100;
    auto result = train(init_network(topology, 2), data, config);

    std::vector<long> epochs;
    for (const auto& s : result.trace.samples) epochs.push_back(s.epoch);
    CHECK(epochs == std::vector<long>{0, 100, 200, 250});
    for (std::size_t i = 1; i < result.trace.samples.size(); ++i)
        CHECK(result.trace.samples[i - 1].epoch < result.trace.samples[i].epoch);
    for (const auto& s : result.trace.samples) CHECK(std::isfinite(s.mse));
}

TEST_CASE("training reduces the error on a learnable noiseless signal") {
    NetworkTopology topology{5, {11, 11}, 1};
    auto data = sine_windows(205, topology);
    REQUIRE(data.patterns.size() == 200);

    TrainingConfig config;
    config.epochs = 2000;
    config.learning_rate = 0.1;
    config.log_interval = 500;
    auto result = train(init_network(topology, 42), data, config);

    double initial = result.trace.samples.front().mse;
    double final_mse = result.trace.samples.back().mse;
    CHECK(final_mse < 0.1 * initial);
}

TEST_CASE("training a zero-error dataset is a fixed point") {
    NetworkTopology topology{5, {3}, 1};
    auto net = init_network(topology, 6);
    auto data = sine_windows(20, topology);
    for (auto& pattern : data.patterns) pattern.target = forward(net, pattern.inputs).output()[0];

    TrainingConfig config;
    config.epochs = 10;
    auto result = train(net, data, config);
    CHECK(result.network == net);
}

TEST_CASE("train validates its inputs") {
    NetworkTopology topology{5, {3}, 1};
    auto net = init_network(topology, 1);
    TrainingConfig config;
    CHECK_THROWS_AS(train(net, WindowedDataset{}, config), std::invalid_argument);

    auto narrow = sine_windows(20, NetworkTopology{3, {2}, 1});
    CHECK_THROWS_AS(train(net, narrow, config), std::invalid_argument);

    config.learning_rate = 0.0;
    CHECK_THROWS_AS(train(net, sine_windows(20, topology), config), std::invalid_argument);
    config.learning_rate = 0.1;
    config.momentum = 1.0;
    CHECK_THROWS_AS(train(net, sine_windows(20, topology), config), std::invalid_argument);
}

TEST_CASE("training aborts when coefficients go non-finite") {
    // Mixed-sign products that overflow to +/-inf make the weighted sum NaN,
    // which the per-epoch finiteness check must catch.
    auto net = init_network(NetworkTopology{2, {1}, 1}, 1);
    set_all(net, 0.0);
    net.layers[0].weights(0, 0) = 1e308;
    net.layers[0].weights(0, 1) = -1e308;

    WindowedDataset data;
    data.window = 2;
    data.patterns.push_back({{10.0, 10.0}, 0.5, Date{2010, 1, 4}});

    TrainingConfig config;
    config.epochs = 1;
    CHECK_THROWS_WITH(train(net, data, config), Catch::Matchers::ContainsSubstring("non-finite"));
}

TEST_CASE("resumed training matches one continuous run exactly") {
    NetworkTopology topology{5, {4}, 1};
    auto data = sine_windows(30, topology);

    TrainingConfig config;
    config.momentum = 0.9;  // resume must carry the velocity, not just weights
    config.log_interval = 2;

    auto straight = make_train_state(init_network(topology, 12));
    TrainingTrace straight_trace;
    train_to(straight, data, config, 7, straight_trace);

    auto staged = make_train_state(init_network(topology, 12));
    TrainingTrace staged_trace;
    train_to(staged, data, config, 3, staged_trace);
    train_to(staged, data, config, 7, staged_trace);

    CHECK(staged.network == straight.network);
    CHECK(staged.velocity == straight.velocity);
    CHECK(staged.epoch == straight.epoch);

    // The staged trace gains a sample at the resume boundary; wherever both
    // traces sampled the same epoch the MSE must agree exactly.
    for (const auto& s : straight_trace.samples) {
        for (const auto& t : staged_trace.samples)
            if (t.epoch == s.epoch) CHECK(t.mse == s.mse);
    }

    CHECK_THROWS_AS(train_to(staged, data, config, 5, staged_trace), std::invalid_argument);
}

TEST_CASE("dataset_mse averages the per-pattern squared error") {
    auto net = init_network(NetworkTopology{2, {2}, 1}, 9);
    WindowedDataset data;
    data.window = 2;
    data.patterns.push_back({{0.2, 0.4}, 0.9, Date{2010, 1, 4}});
    data.patterns.push_back({{0.6, 0.1}, 0.2, Date{2010, 1, 5}});

    double e0 = 0.9 - forward(net, data.patterns[0].inputs).output()[0];
    double e1 = 0.2 - forward(net, data.patterns[1].inputs).output()[0];
    CHECK(dataset_mse(net, data) == Catch::Approx((e0 * e0 + e1 * e1) / 2.0).margin(1e-15));
    CHECK_THROWS_AS(dataset_mse(net, WindowedDataset{}), std::invalid_argument);
}
