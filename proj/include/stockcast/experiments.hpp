#pragma once

// Scripted tuning experiments: hidden-neuron sweep, training-volume sweep,
// training-error trace, and a metric comparison against prediction files
// produced by other tools.
//
// Sweep points are independent runs sharing one fixed seed, so the swept
// variable is the only thing that changes between rows. Points execute on a
// small worker pool; rows always come back in the order the values were
// given.

#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "stockcast/csv.hpp"
#include "stockcast/date.hpp"
#include "stockcast/evaluate.hpp"
#include "stockcast/mlp.hpp"
#include "stockcast/series.hpp"

namespace stockcast {

/// Shared pipeline settings for one experiment. Defaults mirror the standard
/// full-scale configuration (5:21:21:1, 80% split, horizon 60).
struct ExperimentSettings {
    NetworkTopology topology{};
    TrainingConfig training{};
    double train_fraction = 0.8;
    std::size_t horizon = 60;

    void validate() const {
        topology.validate();
        training.validate();
        if (!(train_fraction > 0.0 && train_fraction < 1.0))
            throw std::invalid_argument("train_fraction must lie in (0,1)");
        if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    }
};

struct SweepRow {
    double value = 0.0;  // the swept setting: neuron count or train fraction
    double mape_pct = 0.0;
    double rmse = 0.0;
    double train_mse_final = 0.0;

    bool operator==(const SweepRow&) const = default;
};

struct SweepResult {
    std::string variable;  // "hidden_neurons" or "train_fraction"
    ExperimentSettings settings;
    std::vector<SweepRow> rows;
};

namespace detail {

// Runs fn(i) for i in [0, n) on up to hardware_concurrency workers. The first
// exception thrown by any worker is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    if (n == 0) return;
    std::size_t worker_count = std::thread::hardware_concurrency();
    if (worker_count == 0) worker_count = 1;
    if (worker_count > n) worker_count = n;

    if (worker_count == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto work = [&] {
        while (!failed.load(std::memory_order_relaxed)) {
            std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                failed.store(true, std::memory_order_relaxed);
                return;
            }
        }
    };

    std::vector<std::thread> workers;
    workers.reserve(worker_count);
    for (std::size_t w = 0; w < worker_count; ++w) workers.emplace_back(work);
    for (auto& t : workers) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

// One full pipeline run: split, fit normalization on the training slice,
// window, train, then score a walk-forward pass over the horizon right after
// the split boundary. Fills everything but row.value.
inline SweepRow run_sweep_point(const PriceSeries& series, const NetworkTopology& topology,
                                const TrainingConfig& training, double train_fraction,
                                std::size_t horizon) {
    auto [train_slice, test_slice] = chronological_split(series, train_fraction);
    (void)test_slice;
    auto params = fit_normalization(train_slice);
    auto windows = make_windows(train_slice, params, topology.input_count);
    if (windows.patterns.empty())
        throw std::invalid_argument("training slice of " + std::to_string(train_slice.size()) +
                                    " points is too short for window " +
                                    std::to_string(topology.input_count));

    auto result = train(init_network(topology, training.seed), windows, training);

    auto records =
        predict_walk_forward(result.network, params, series, train_slice.size(), horizon);

    SweepRow row;
    row.mape_pct = mape(records);
    row.rmse = rmse(records);
    row.train_mse_final = result.trace.samples.back().mse;
    return row;
}

}  // namespace detail

/// Trains and scores one run per neuron count, with both hidden layers set to
/// that count. Row order follows `neuron_counts`.
inline SweepResult sweep_hidden_neurons(const PriceSeries& series, const std::vector<int>& neuron_counts,
                                        const ExperimentSettings& settings) {
    settings.validate();
    if (neuron_counts.empty()) throw std::invalid_argument("neuron_counts is empty");
    for (int count : neuron_counts)
        if (count < 1) throw std::invalid_argument("neuron counts must be >= 1");

    SweepResult result;
    result.variable = "hidden_neurons";
    result.settings = settings;
    result.rows.resize(neuron_counts.size());

    detail::parallel_for(neuron_counts.size(), [&](std::size_t i) {
        NetworkTopology topology = settings.topology;
        topology.hidden_layer_sizes.assign(topology.hidden_layer_sizes.size(), neuron_counts[i]);
        SweepRow row = detail::run_sweep_point(series, topology, settings.training,
                                               settings.train_fraction, settings.horizon);
        row.value = neuron_counts[i];
        result.rows[i] = row;
    });
    return result;
}

/// Trains and scores one run per training fraction. Each run re-splits the
/// series and re-fits normalization on its own training slice; evaluation
/// covers the `horizon` points right after that run's split boundary.
inline SweepResult sweep_training_volume(const PriceSeries& series, const std::vector<double>& fractions,
                                         const ExperimentSettings& settings) {
    settings.validate();
    if (fractions.empty()) throw std::invalid_argument("fractions is empty");
    for (double f : fractions) {
        if (!(f > 0.0 && f < 1.0)) throw std::invalid_argument("fractions must lie in (0,1)");
        auto cut = static_cast<std::size_t>(std::floor(f * static_cast<double>(series.size())));
        if (cut + settings.horizon > series.size())
            throw std::invalid_argument("fraction " + format_double(f) + " leaves only " +
                                        std::to_string(series.size() - cut) +
                                        " test points, fewer than horizon " +
                                        std::to_string(settings.horizon));
    }

    SweepResult result;
    result.variable = "train_fraction";
    result.settings = settings;
    result.rows.resize(fractions.size());

    detail::parallel_for(fractions.size(), [&](std::size_t i) {
        SweepRow row = detail::run_sweep_point(series, settings.topology, settings.training,
                                               fractions[i], settings.horizon);
        row.value = fractions[i];
        result.rows[i] = row;
    });
    return result;
}

/// An in-flight training-error trace that can be extended in stages.
/// Extending to N and then to 2N leaves exactly the same network as one
/// straight run to 2N.
struct TraceRun {
    TrainState state;
    TrainingTrace trace;
    NormalizationParams params;
    WindowedDataset windows;
    TrainingConfig config;
};

inline TraceRun begin_trace_run(const PriceSeries& series, const ExperimentSettings& settings) {
    settings.validate();
    auto [train_slice, test_slice] = chronological_split(series, settings.train_fraction);
    (void)test_slice;

    TraceRun run;
    run.params = fit_normalization(train_slice);
    run.windows = make_windows(train_slice, run.params, settings.topology.input_count);
    if (run.windows.patterns.empty())
        throw std::invalid_argument("training slice of " + std::to_string(train_slice.size()) +
                                    " points is too short for window " +
                                    std::to_string(settings.topology.input_count));
    run.config = settings.training;
    run.state = make_train_state(init_network(settings.topology, settings.training.seed));
    return run;
}

inline void extend_trace_run(TraceRun& run, long target_epoch) {
    train_to(run.state, run.windows, run.config, target_epoch, run.trace);
}

/// Fig-style training-error curve: one run on the series' training slice,
/// sampling MSE at epoch 0, every log_interval, and at max_epochs.
inline TrainingTrace trace_training_error(const PriceSeries& series, const ExperimentSettings& settings,
                                          long max_epochs, long log_interval) {
    if (max_epochs < 0) throw std::invalid_argument("max_epochs must be >= 0");
    ExperimentSettings staged = settings;
    staged.training.log_interval = log_interval;
    auto run = begin_trace_run(series, staged);
    extend_trace_run(run, max_epochs);
    return run.trace;
}

/// Predictions from one external tool, joined against actuals by date.
struct DatedPrediction {
    Date date;
    double predicted = 0.0;

    bool operator==(const DatedPrediction&) const = default;
};

struct NamedPredictions {
    std::string name;
    std::vector<DatedPrediction> predictions;
};

struct ComparisonRow {
    std::string name;
    double mape_pct = 0.0;
    double rmse = 0.0;

    bool operator==(const ComparisonRow&) const = default;
};

/// Scores each tool's predictions against the actuals with this library's own
/// metric code. Every tool must supply exactly the actuals' dates. The first
/// row, named "model", scores the predictions carried by the actual records
/// themselves.
inline std::vector<ComparisonRow> compare_external(const std::vector<PredictionRecord>& actuals,
                                                   const std::vector<NamedPredictions>& tools) {
    if (actuals.empty()) throw std::invalid_argument("no actual records to compare against");

    std::vector<ComparisonRow> rows;
    rows.reserve(tools.size() + 1);
    rows.push_back({"model", mape(actuals), rmse(actuals)});

    for (const auto& tool : tools) {
        std::map<Date, double> by_date;
        for (const auto& p : tool.predictions)
            if (!by_date.emplace(p.date, p.predicted).second)
                throw std::invalid_argument("tool '" + tool.name + "' lists " + to_string(p.date) +
                                            " twice");
        if (by_date.size() != actuals.size())
            throw std::invalid_argument("tool '" + tool.name + "' covers " +
                                        std::to_string(by_date.size()) + " dates, actuals cover " +
                                        std::to_string(actuals.size()));

        std::vector<PredictionRecord> joined;
        joined.reserve(actuals.size());
        for (const auto& a : actuals) {
            auto it = by_date.find(a.date);
            if (it == by_date.end())
                throw std::invalid_argument("tool '" + tool.name + "' is missing " + to_string(a.date));
            joined.push_back({a.date, a.actual, it->second});
        }
        rows.push_back({tool.name, mape(joined), rmse(joined)});
    }
    return rows;
}

}  // namespace stockcast
