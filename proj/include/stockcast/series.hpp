#pragma once

#include <cmath>
#include <istream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stockcast/csv.hpp"
#include "stockcast/date.hpp"

namespace stockcast {

struct PricePoint {
    Date date;
    double close = 0.0;  // currency units, > 0

    bool operator==(const PricePoint&) const = default;
};

/// Date-ordered daily closing prices for one instrument.
struct PriceSeries {
    std::string instrument;
    std::vector<PricePoint> points;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
};

/// Affine min-max scaling fitted on training prices only. Values outside the
/// fitted source range map outside [target_lo, target_hi]; they are never
/// clamped.
struct NormalizationParams {
    double source_min = 0.0;
    double source_max = 1.0;
    double target_lo = 0.1;
    double target_hi = 0.9;

    bool operator==(const NormalizationParams&) const = default;
};

/// One supervised pattern: `window` consecutive normalized closes and the
/// normalized close of the following day.
struct Pattern {
    std::vector<double> inputs;
    double target = 0.0;
    Date target_date;

    bool operator==(const Pattern&) const = default;
};

struct WindowedDataset {
    std::vector<Pattern> patterns;
    int window = 5;
};

/// Parses a `date,close` CSV stream into a date-ordered series.
/// Errors carry the 1-based line number of the offending row.
inline PriceSeries load_series(std::istream& in, std::string instrument = "") {
    PriceSeries series;
    series.instrument = std::move(instrument);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty input: expected 'date,close' header");
    // tolerate a UTF-8 BOM on the first line
    if (line.size() >= 3 && line[0] == '\xef' && line[1] == '\xbb' && line[2] == '\xbf') line.erase(0, 3);
    if (trim(line) != "date,close")
        throw std::runtime_error("line 1: expected header 'date,close', got '" + std::string(trim(line)) + "'");

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_fields(line);
        if (fields.size() != 2)
            throw std::runtime_error("line " + std::to_string(line_no) + ": expected 2 fields, got " +
                                     std::to_string(fields.size()));
        PricePoint point;
        try {
            point.date = parse_date(fields[0]);
            point.close = parse_double(fields[1], "close");
        } catch (const std::exception& e) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!std::isfinite(point.close) || point.close <= 0.0)
            throw std::runtime_error("line " + std::to_string(line_no) + ": close must be positive, got " +
                                     std::string(fields[1]));
        if (!series.points.empty() && !(series.points.back().date < point.date))
            throw std::runtime_error("line " + std::to_string(line_no) + ": date " + to_string(point.date) +
                                     " does not increase over previous row " +
                                     to_string(series.points.back().date));
        series.points.push_back(point);
    }
    return series;
}

inline PriceSeries load_series(const std::string& csv_text, std::string instrument = "") {
    std::istringstream in(csv_text);
    return load_series(in, std::move(instrument));
}

inline PriceSeries load_series_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open data file: " + path.string());
    return load_series(in, path.stem().string());
}

inline std::string series_to_csv(const PriceSeries& series) {
    std::string out = "date,close\n";
    for (const auto& p : series.points) out += to_string(p.date) + "," + format_double(p.close) + "\n";
    return out;
}

/// Splits into the first floor(train_fraction * n) points and the remainder.
/// Never shuffles: observations are time-dependent.
inline std::pair<PriceSeries, PriceSeries> chronological_split(const PriceSeries& series,
                                                               double train_fraction) {
    if (series.size() < 2) throw std::invalid_argument("split requires at least 2 points");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("train_fraction must lie in (0,1), got " + format_double(train_fraction));

    auto cut = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(series.size())));
    if (cut == 0) throw std::invalid_argument("split leaves an empty training side");
    if (cut == series.size()) throw std::invalid_argument("split leaves an empty test side");

    PriceSeries train{series.instrument, {series.points.begin(), series.points.begin() + cut}};
    PriceSeries test{series.instrument, {series.points.begin() + cut, series.points.end()}};
    return {std::move(train), std::move(test)};
}

/// Fits min-max parameters on the training slice only. Test-period prices may
/// map outside the target range; that is intended.
inline NormalizationParams fit_normalization(const PriceSeries& train, double target_lo = 0.1,
                                             double target_hi = 0.9) {
    if (train.size() < 2) throw std::invalid_argument("normalization requires at least 2 training points");
    if (!(target_hi > target_lo)) throw std::invalid_argument("target_hi must exceed target_lo");

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& p : train.points) {
        lo = std::min(lo, p.close);
        hi = std::max(hi, p.close);
    }
    if (!(hi > lo))
        throw std::invalid_argument("cannot normalize a constant series (min == max == " + format_double(lo) +
                                    ")");
    return {lo, hi, target_lo, target_hi};
}

inline double normalize(double value, const NormalizationParams& params) {
    return params.target_lo +
           (value - params.source_min) * (params.target_hi - params.target_lo) /
               (params.source_max - params.source_min);
}

inline double denormalize(double value, const NormalizationParams& params) {
    return params.source_min +
           (value - params.target_lo) * (params.source_max - params.source_min) /
               (params.target_hi - params.target_lo);
}

/// Builds max(0, n - window) sliding-window patterns in chronological order.
/// Pattern i holds the normalized closes at positions i..i+window-1 and
/// targets the close at i+window.
inline WindowedDataset make_windows(const PriceSeries& series, const NormalizationParams& params,
                                    int window = 5) {
    if (window < 1) throw std::invalid_argument("window must be at least 1");

    WindowedDataset data;
    data.window = window;
    auto n = series.size();
    auto w = static_cast<std::size_t>(window);
    if (n <= w) return data;

    data.patterns.reserve(n - w);
    for (std::size_t i = 0; i + w < n; ++i) {
        Pattern p;
        p.inputs.reserve(w);
        for (std::size_t k = 0; k < w; ++k) p.inputs.push_back(normalize(series.points[i + k].close, params));
        p.target = normalize(series.points[i + w].close, params);
        p.target_date = series.points[i + w].date;
        data.patterns.push_back(std::move(p));
    }
    return data;
}

}  // namespace stockcast
