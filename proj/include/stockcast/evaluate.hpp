#pragma once

// Prediction drivers and accuracy metrics. Two ways to run a trained network
// over a price series:
//
//   - walk-forward: every one-step-ahead prediction is built from actual
//     lagged closes, so errors do not compound
//   - recursive: after the seed window, predictions are fed back as inputs,
//     so the network free-runs over the horizon
//
// All price-domain outputs go through the same normalization parameters the
// network was trained with.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stockcast/date.hpp"
#include "stockcast/mlp.hpp"
#include "stockcast/series.hpp"

namespace stockcast {

struct PredictionRecord {
    Date date;
    double actual = 0.0;
    double predicted = 0.0;

    bool operator==(const PredictionRecord&) const = default;
};

namespace detail {

inline void check_prediction_args(const MlpNetwork& network, const PriceSeries& series,
                                  std::size_t start_index, std::size_t horizon) {
    if (network.topology.output_count != 1)
        throw std::invalid_argument("prediction requires a single-output network");
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    const auto window = static_cast<std::size_t>(network.topology.input_count);
    if (start_index < window)
        throw std::invalid_argument("start index " + std::to_string(start_index) +
                                    " leaves fewer than " + std::to_string(window) +
                                    " lagged closes to form the first input window");
    if (start_index + horizon > series.size())
        throw std::invalid_argument("horizon " + std::to_string(horizon) + " from index " +
                                    std::to_string(start_index) + " runs past the series end (" +
                                    std::to_string(series.size()) + " points)");
}

}  // namespace detail

/// One-step-ahead predictions for series indices [start_index,
/// start_index + horizon). Each input window holds actual closes, normalized
/// with `params`; each output is denormalized back to a price.
inline std::vector<PredictionRecord> predict_walk_forward(const MlpNetwork& network,
                                                          const NormalizationParams& params,
                                                          const PriceSeries& series,
                                                          std::size_t start_index, std::size_t horizon) {
    detail::check_prediction_args(network, series, start_index, horizon);

    const auto window = static_cast<std::size_t>(network.topology.input_count);
    std::vector<double> inputs(window);
    detail::Workspace ws;
    ws.resize(network);

    std::vector<PredictionRecord> records;
    records.reserve(horizon);
    for (std::size_t t = start_index; t < start_index + horizon; ++t) {
        for (std::size_t i = 0; i < window; ++i)
            inputs[i] = normalize(series.points[t - window + i].close, params);
        detail::forward_into(network, inputs, ws.activations);
        records.push_back({series.points[t].date, series.points[t].close,
                           denormalize(ws.activations.back()[0], params)});
    }
    return records;
}

/// Free-running prediction in the price domain: the window starts on the last
/// `input_count` entries of `seed_closes` and slides over the network's own
/// outputs. Returns `horizon` predicted closes.
inline std::vector<double> recurse_prices(const MlpNetwork& network, const NormalizationParams& params,
                                          std::span<const double> seed_closes, std::size_t horizon) {
    if (network.topology.output_count != 1)
        throw std::invalid_argument("prediction requires a single-output network");
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    const auto window = static_cast<std::size_t>(network.topology.input_count);
    if (seed_closes.size() < window)
        throw std::invalid_argument("need at least " + std::to_string(window) +
                                    " seed closes, got " + std::to_string(seed_closes.size()));

    std::vector<double> buffer(window);
    for (std::size_t i = 0; i < window; ++i)
        buffer[i] = normalize(seed_closes[seed_closes.size() - window + i], params);

    detail::Workspace ws;
    ws.resize(network);

    std::vector<double> predicted;
    predicted.reserve(horizon);
    for (std::size_t step = 0; step < horizon; ++step) {
        detail::forward_into(network, buffer, ws.activations);
        double out = ws.activations.back()[0];
        predicted.push_back(denormalize(out, params));
        for (std::size_t i = 0; i + 1 < window; ++i) buffer[i] = buffer[i + 1];
        buffer[window - 1] = out;
    }
    return predicted;
}

/// Recursive prediction aligned against a known series segment, so the
/// records carry dates and actuals for comparison. Seeds on the closes just
/// before `start_index`.
inline std::vector<PredictionRecord> predict_recursive(const MlpNetwork& network,
                                                       const NormalizationParams& params,
                                                       const PriceSeries& series,
                                                       std::size_t start_index, std::size_t horizon) {
    detail::check_prediction_args(network, series, start_index, horizon);

    const auto window = static_cast<std::size_t>(network.topology.input_count);
    std::vector<double> seed(window);
    for (std::size_t i = 0; i < window; ++i) seed[i] = series.points[start_index - window + i].close;
    auto predicted = recurse_prices(network, params, seed, horizon);

    std::vector<PredictionRecord> records;
    records.reserve(horizon);
    for (std::size_t step = 0; step < horizon; ++step) {
        const auto& point = series.points[start_index + step];
        records.push_back({point.date, point.close, predicted[step]});
    }
    return records;
}

/// Naive reference predictor: tomorrow's close is today's close.
inline std::vector<PredictionRecord> persistence_baseline(const PriceSeries& series,
                                                          std::size_t start_index, std::size_t horizon) {
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    if (start_index < 1)
        throw std::invalid_argument("persistence baseline needs one close before the start index");
    if (start_index + horizon > series.size())
        throw std::invalid_argument("horizon " + std::to_string(horizon) + " from index " +
                                    std::to_string(start_index) + " runs past the series end (" +
                                    std::to_string(series.size()) + " points)");

    std::vector<PredictionRecord> records;
    records.reserve(horizon);
    for (std::size_t t = start_index; t < start_index + horizon; ++t)
        records.push_back({series.points[t].date, series.points[t].close, series.points[t - 1].close});
    return records;
}

namespace detail {

inline void check_records(const std::vector<PredictionRecord>& records, bool need_positive_actuals) {
    if (records.empty()) throw std::invalid_argument("no prediction records to score");
    for (const auto& r : records) {
        if (!std::isfinite(r.actual) || !std::isfinite(r.predicted))
            throw std::invalid_argument("prediction record for " + to_string(r.date) +
                                        " contains a non-finite value");
        if (need_positive_actuals && !(r.actual > 0.0))
            throw std::invalid_argument("actual close for " + to_string(r.date) +
                                        " is not positive; relative error is undefined");
    }
}

}  // namespace detail

/// Mean absolute percentage error: (100 / n) * sum(|actual - predicted| / actual).
inline double mape(const std::vector<PredictionRecord>& records) {
    detail::check_records(records, true);
    double sum = 0.0;
    for (const auto& r : records) sum += std::abs(r.actual - r.predicted) / r.actual;
    return 100.0 * sum / static_cast<double>(records.size());
}

/// Root mean squared error in the price domain.
inline double rmse(const std::vector<PredictionRecord>& records) {
    detail::check_records(records, false);
    double sum = 0.0;
    for (const auto& r : records) {
        double err = r.actual - r.predicted;
        sum += err * err;
    }
    return std::sqrt(sum / static_cast<double>(records.size()));
}

/// Largest single-day relative deviation, signed, plus the day it happened.
struct MaxVariance {
    double pct = 0.0;
    Date date;

    bool operator==(const MaxVariance&) const = default;
};

/// The daily variance (predicted - actual) / actual * 100 with the largest
/// magnitude; sign is preserved so overshoots and undershoots stay
/// distinguishable. Earliest day wins ties.
inline MaxVariance max_daily_variance(const std::vector<PredictionRecord>& records) {
    detail::check_records(records, true);
    MaxVariance best{0.0, records.front().date};
    bool first = true;
    for (const auto& r : records) {
        double pct = (r.predicted - r.actual) / r.actual * 100.0;
        if (first || std::abs(pct) > std::abs(best.pct)) {
            best = {pct, r.date};
            first = false;
        }
    }
    return best;
}

struct EvaluationReport {
    double mape_pct = 0.0;
    double rmse = 0.0;
    MaxVariance max_variance;
    std::size_t horizon = 0;
    std::size_t n = 0;

    bool operator==(const EvaluationReport&) const = default;
};

inline EvaluationReport build_report(const std::vector<PredictionRecord>& records, std::size_t horizon) {
    EvaluationReport report;
    report.mape_pct = mape(records);
    report.rmse = rmse(records);
    report.max_variance = max_daily_variance(records);
    report.horizon = horizon;
    report.n = records.size();
    return report;
}

inline EvaluationReport build_report(const std::vector<PredictionRecord>& records) {
    return build_report(records, records.size());
}

}  // namespace stockcast
