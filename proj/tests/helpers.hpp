#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>

#include "stockcast/date.hpp"
#include "stockcast/series.hpp"

namespace testutil {

// The bundled synthetic corpus: 1,000 trading days of a noiseless sine wave,
// period 40 days, closes between 80 and 120, starting 2008-01-02.
// data/sine.csv is exactly this series rendered to CSV; a test pins the file
// to this function so the two cannot drift apart.
inline stockcast::PriceSeries make_sine_series(std::size_t n = 1000) {
    stockcast::PriceSeries series;
    series.instrument = "sine";
    stockcast::Date date{2008, 1, 2};
    for (std::size_t i = 0; i < n; ++i) {
        double close = 100.0 + 20.0 * std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / 40.0);
        series.points.push_back({date, close});
        date = stockcast::next_weekday(date);
    }
    return series;
}

// Evenly spaced weekday series with the given closes, for small hand-checked
// fixtures.
inline stockcast::PriceSeries make_series(const std::vector<double>& closes,
                                          std::string instrument = "fixture") {
    stockcast::PriceSeries series;
    series.instrument = std::move(instrument);
    stockcast::Date date{2010, 1, 4};
    for (double close : closes) {
        series.points.push_back({date, close});
        date = stockcast::next_weekday(date);
    }
    return series;
}

// Scratch directory removed on destruction.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        static std::mt19937_64 rng{std::random_device{}()};
        path = std::filesystem::temp_directory_path() /
               ("stockcast-test-" + std::to_string(rng()));
        std::filesystem::create_directory(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::filesystem::path file(const std::string& name) const { return path / name; }
};

}  // namespace testutil
