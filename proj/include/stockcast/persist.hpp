#pragma once

// Serialization for everything the pipeline reads or writes: versioned model
// files (JSON), prediction/trace/sweep/comparison tables (CSV), and the
// evaluation report (JSON).
//
// Model files must survive a save/load round trip coefficient-for-coefficient
// and carry no volatile fields, so identical runs produce byte-identical
// files. All file writers go through write_file_atomic.

#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stockcast/csv.hpp"
#include "stockcast/date.hpp"
#include "stockcast/evaluate.hpp"
#include "stockcast/experiments.hpp"
#include "stockcast/mlp.hpp"
#include "stockcast/series.hpp"

namespace stockcast {

inline constexpr int kModelFormatVersion = 1;

/// Provenance recorded alongside the coefficients. `seed_source` says where
/// the seed came from: "default", "config", "flag", or "env:STOCKCAST_SEED".
struct ModelMetadata {
    std::uint64_t seed = 42;
    std::string seed_source = "default";
    long epochs = 0;
    double learning_rate = 0.1;
    double momentum = 0.0;
    std::string instrument;
    Date train_start{};
    Date train_end{};

    bool operator==(const ModelMetadata&) const = default;
};

struct ModelFile {
    MlpNetwork network;
    NormalizationParams params;
    ModelMetadata metadata;
};

namespace detail {

// at() with a message that names the missing section instead of nlohmann's
// generic pointer syntax.
inline const nlohmann::json& require(const nlohmann::json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end())
        throw std::runtime_error(std::string("model file is missing the '") + key + "' section");
    return *it;
}

}  // namespace detail

inline nlohmann::json model_to_json(const ModelFile& model) {
    check_dimensions(model.network);
    if (!is_finite(model.network))
        throw std::invalid_argument("refusing to save a network with non-finite coefficients");
    if (!(model.params.source_max > model.params.source_min))
        throw std::invalid_argument("refusing to save degenerate normalization parameters");

    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : model.network.layers) {
        nlohmann::json rows = nlohmann::json::array();
        for (int r = 0; r < layer.weights.rows; ++r) {
            nlohmann::json row = nlohmann::json::array();
            for (int c = 0; c < layer.weights.cols; ++c) row.push_back(layer.weights(r, c));
            rows.push_back(std::move(row));
        }
        layers.push_back({{"weights", std::move(rows)}, {"biases", layer.biases}});
    }

    return {
        {"format_version", kModelFormatVersion},
        {"prng_algorithm", kPrngAlgorithm},
        {"topology",
         {{"input_count", model.network.topology.input_count},
          {"hidden_layer_sizes", model.network.topology.hidden_layer_sizes},
          {"output_count", model.network.topology.output_count}}},
        {"layers", std::move(layers)},
        {"normalization",
         {{"source_min", model.params.source_min},
          {"source_max", model.params.source_max},
          {"target_lo", model.params.target_lo},
          {"target_hi", model.params.target_hi}}},
        {"training",
         {{"seed", model.metadata.seed},
          {"seed_source", model.metadata.seed_source},
          {"epochs", model.metadata.epochs},
          {"learning_rate", model.metadata.learning_rate},
          {"momentum", model.metadata.momentum},
          {"instrument", model.metadata.instrument},
          {"train_start", to_string(model.metadata.train_start)},
          {"train_end", to_string(model.metadata.train_end)}}},
    };
}

inline ModelFile model_from_json(const nlohmann::json& j) {
    int version = detail::require(j, "format_version").get<int>();
    if (version != kModelFormatVersion)
        throw std::runtime_error("unsupported model format_version " + std::to_string(version) +
                                 " (this build reads version " + std::to_string(kModelFormatVersion) +
                                 ")");
    // Read but do not interpret: the identifier only matters when seeding new
    // networks, and it is pinned at compile time.
    detail::require(j, "prng_algorithm").get<std::string>();

    ModelFile model;
    const auto& topo = detail::require(j, "topology");
    model.network.topology.input_count = detail::require(topo, "input_count").get<int>();
    model.network.topology.hidden_layer_sizes =
        detail::require(topo, "hidden_layer_sizes").get<std::vector<int>>();
    model.network.topology.output_count = detail::require(topo, "output_count").get<int>();

    for (const auto& jlayer : detail::require(j, "layers")) {
        LayerCoeffs layer;
        const auto& rows = detail::require(jlayer, "weights");
        int row_count = static_cast<int>(rows.size());
        int col_count = row_count > 0 ? static_cast<int>(rows.front().size()) : 0;
        layer.weights = Matrix(row_count, col_count);
        for (int r = 0; r < row_count; ++r) {
            const auto& row = rows[static_cast<std::size_t>(r)];
            if (static_cast<int>(row.size()) != col_count)
                throw std::runtime_error("model file has a ragged weight matrix");
            for (int c = 0; c < col_count; ++c) layer.weights(r, c) = row[static_cast<std::size_t>(c)].get<double>();
        }
        layer.biases = detail::require(jlayer, "biases").get<std::vector<double>>();
        model.network.layers.push_back(std::move(layer));
    }
    check_dimensions(model.network);
    if (!is_finite(model.network))
        throw std::runtime_error("model file contains non-finite coefficients");

    const auto& norm = detail::require(j, "normalization");
    model.params.source_min = detail::require(norm, "source_min").get<double>();
    model.params.source_max = detail::require(norm, "source_max").get<double>();
    model.params.target_lo = detail::require(norm, "target_lo").get<double>();
    model.params.target_hi = detail::require(norm, "target_hi").get<double>();
    if (!(model.params.source_max > model.params.source_min) ||
        !(model.params.target_hi > model.params.target_lo))
        throw std::runtime_error("model file contains degenerate normalization parameters");

    const auto& training = detail::require(j, "training");
    model.metadata.seed = detail::require(training, "seed").get<std::uint64_t>();
    model.metadata.seed_source = detail::require(training, "seed_source").get<std::string>();
    model.metadata.epochs = detail::require(training, "epochs").get<long>();
    model.metadata.learning_rate = detail::require(training, "learning_rate").get<double>();
    model.metadata.momentum = detail::require(training, "momentum").get<double>();
    model.metadata.instrument = detail::require(training, "instrument").get<std::string>();
    model.metadata.train_start = parse_date(detail::require(training, "train_start").get<std::string>());
    model.metadata.train_end = parse_date(detail::require(training, "train_end").get<std::string>());
    return model;
}

inline std::string model_to_text(const ModelFile& model) { return model_to_json(model).dump(2) + "\n"; }

inline ModelFile model_from_text(const std::string& text, const std::string& origin = "model file") {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error(origin + " is not valid JSON: " + e.what());
    }
    try {
        return model_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(origin + " is malformed: " + e.what());
    }
}

inline void save_model(const ModelFile& model, const std::filesystem::path& path) {
    write_file_atomic(path, model_to_text(model));
}

inline ModelFile load_model(const std::filesystem::path& path) {
    return model_from_text(read_file(path), "'" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Prediction tables

inline std::string predictions_to_csv(const std::vector<PredictionRecord>& records) {
    std::string out = "date,actual,predicted\n";
    for (const auto& r : records) {
        out += to_string(r.date);
        out += ',';
        out += format_double(r.actual);
        out += ',';
        out += format_double(r.predicted);
        out += '\n';
    }
    return out;
}

inline std::vector<PredictionRecord> read_predictions(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("prediction CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (line != "date,actual,predicted")
        throw std::runtime_error("prediction CSV must start with header 'date,actual,predicted', got '" +
                                 line + "'");

    std::vector<PredictionRecord> records;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_fields(line);
        if (fields.size() != 3)
            throw std::runtime_error("line " + std::to_string(line_no) + ": expected 3 fields, got " +
                                     std::to_string(fields.size()));
        PredictionRecord r;
        try {
            r.date = parse_date(fields[0]);
        } catch (const std::exception& e) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": " + e.what());
        }
        r.actual = parse_double(fields[1], "actual on line " + std::to_string(line_no));
        r.predicted = parse_double(fields[2], "predicted on line " + std::to_string(line_no));
        if (!(r.actual > 0.0))
            throw std::runtime_error("line " + std::to_string(line_no) + ": actual must be positive");
        if (!records.empty() && !(records.back().date < r.date))
            throw std::runtime_error("line " + std::to_string(line_no) + ": dates must be strictly increasing (" +
                                     to_string(records.back().date) + " then " + to_string(r.date) + ")");
        records.push_back(r);
    }
    if (records.empty()) throw std::runtime_error("prediction CSV has a header but no rows");
    return records;
}

inline std::vector<PredictionRecord> read_predictions(const std::string& csv_text) {
    std::istringstream in(csv_text);
    return read_predictions(in);
}

inline std::vector<PredictionRecord> read_predictions_file(const std::filesystem::path& path) {
    std::string text = read_file(path);
    std::istringstream in(text);
    try {
        return read_predictions(in);
    } catch (const std::exception& e) {
        throw std::runtime_error("'" + path.string() + "': " + e.what());
    }
}

/// Tool prediction CSV: header `date,predicted`, same date conventions as the
/// input price CSV.
inline std::vector<DatedPrediction> read_tool_predictions(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("tool prediction CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (line != "date,predicted")
        throw std::runtime_error("tool prediction CSV must start with header 'date,predicted', got '" +
                                 line + "'");

    std::vector<DatedPrediction> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_fields(line);
        if (fields.size() != 2)
            throw std::runtime_error("line " + std::to_string(line_no) + ": expected 2 fields, got " +
                                     std::to_string(fields.size()));
        DatedPrediction r;
        try {
            r.date = parse_date(fields[0]);
        } catch (const std::exception& e) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": " + e.what());
        }
        r.predicted = parse_double(fields[1], "predicted on line " + std::to_string(line_no));
        if (!rows.empty() && !(rows.back().date < r.date))
            throw std::runtime_error("line " + std::to_string(line_no) + ": dates must be strictly increasing (" +
                                     to_string(rows.back().date) + " then " + to_string(r.date) + ")");
        rows.push_back(r);
    }
    if (rows.empty()) throw std::runtime_error("tool prediction CSV has a header but no rows");
    return rows;
}

inline std::vector<DatedPrediction> read_tool_predictions(const std::string& csv_text) {
    std::istringstream in(csv_text);
    return read_tool_predictions(in);
}

inline std::vector<DatedPrediction> read_tool_predictions_file(const std::filesystem::path& path) {
    std::string text = read_file(path);
    std::istringstream in(text);
    try {
        return read_tool_predictions(in);
    } catch (const std::exception& e) {
        throw std::runtime_error("'" + path.string() + "': " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Training trace

inline std::string trace_to_csv(const TrainingTrace& trace) {
    std::string out = "epoch,mse\n";
    for (const auto& s : trace.samples) {
        out += std::to_string(s.epoch);
        out += ',';
        out += format_double(s.mse);
        out += '\n';
    }
    return out;
}

inline TrainingTrace read_trace(const std::string& csv_text) {
    std::istringstream in(csv_text);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("trace CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("# ", 0) == 0) {
        if (!std::getline(in, line)) throw std::runtime_error("trace CSV ends after the metadata comment");
        if (!line.empty() && line.back() == '\r') line.pop_back();
    }
    if (line != "epoch,mse")
        throw std::runtime_error("trace CSV must start with header 'epoch,mse', got '" + line + "'");

    TrainingTrace trace;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_fields(line);
        if (fields.size() != 2)
            throw std::runtime_error("line " + std::to_string(line_no) + ": expected 2 fields, got " +
                                     std::to_string(fields.size()));
        TraceSample s;
        s.epoch = static_cast<long>(parse_integer(fields[0], "epoch on line " + std::to_string(line_no)));
        s.mse = parse_double(fields[1], "mse on line " + std::to_string(line_no));
        trace.samples.push_back(s);
    }
    return trace;
}

// ---------------------------------------------------------------------------
// Sweep tables
//
// First line is a '#' comment holding the run metadata as JSON, then a plain
// CSV table. Readers skip or parse the comment as needed.

inline std::string sweep_to_csv(const SweepResult& result) {
    nlohmann::json meta = {
        {"variable", result.variable},
        {"seed", result.settings.training.seed},
        {"epochs", result.settings.training.epochs},
        {"learning_rate", result.settings.training.learning_rate},
        {"momentum", result.settings.training.momentum},
        {"train_fraction", result.settings.train_fraction},
        {"horizon", result.settings.horizon},
        {"window", result.settings.topology.input_count},
    };
    std::string out = "# " + meta.dump() + "\n";
    out += "value,mape_pct,rmse,train_mse_final\n";
    for (const auto& row : result.rows) {
        out += format_double(row.value);
        out += ',';
        out += format_double(row.mape_pct);
        out += ',';
        out += format_double(row.rmse);
        out += ',';
        out += format_double(row.train_mse_final);
        out += '\n';
    }
    return out;
}

struct SweepTable {
    std::string variable;
    std::vector<SweepRow> rows;
};

inline SweepTable read_sweep_csv(const std::string& csv_text) {
    std::istringstream in(csv_text);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("sweep CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    SweepTable table;
    if (line.rfind("# ", 0) == 0) {
        try {
            table.variable = nlohmann::json::parse(line.substr(2)).at("variable").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(std::string("sweep CSV metadata comment is malformed: ") + e.what());
        }
        if (!std::getline(in, line)) throw std::runtime_error("sweep CSV ends after the metadata comment");
        if (!line.empty() && line.back() == '\r') line.pop_back();
    }
    if (line != "value,mape_pct,rmse,train_mse_final")
        throw std::runtime_error("sweep CSV must have header 'value,mape_pct,rmse,train_mse_final', got '" +
                                 line + "'");

    std::size_t line_no = 2;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_fields(line);
        if (fields.size() != 4)
            throw std::runtime_error("line " + std::to_string(line_no) + ": expected 4 fields, got " +
                                     std::to_string(fields.size()));
        SweepRow row;
        row.value = parse_double(fields[0], "value on line " + std::to_string(line_no));
        row.mape_pct = parse_double(fields[1], "mape_pct on line " + std::to_string(line_no));
        row.rmse = parse_double(fields[2], "rmse on line " + std::to_string(line_no));
        row.train_mse_final = parse_double(fields[3], "train_mse_final on line " + std::to_string(line_no));
        table.rows.push_back(row);
    }
    return table;
}

// ---------------------------------------------------------------------------
// Comparison table

inline std::string comparison_to_csv(const std::vector<ComparisonRow>& rows) {
    std::string out = "tool,mape_pct,rmse\n";
    for (const auto& row : rows) {
        out += row.name;
        out += ',';
        out += format_double(row.mape_pct);
        out += ',';
        out += format_double(row.rmse);
        out += '\n';
    }
    return out;
}

inline std::vector<ComparisonRow> read_comparison_csv(const std::string& csv_text) {
    std::istringstream in(csv_text);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("comparison CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "tool,mape_pct,rmse")
        throw std::runtime_error("comparison CSV must have header 'tool,mape_pct,rmse', got '" + line +
                                 "'");

    std::vector<ComparisonRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_fields(line);
        if (fields.size() != 3)
            throw std::runtime_error("line " + std::to_string(line_no) + ": expected 3 fields, got " +
                                     std::to_string(fields.size()));
        ComparisonRow row;
        row.name = fields[0];
        row.mape_pct = parse_double(fields[1], "mape_pct on line " + std::to_string(line_no));
        row.rmse = parse_double(fields[2], "rmse on line " + std::to_string(line_no));
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Evaluation report

inline std::string report_to_json(const EvaluationReport& report) {
    nlohmann::json j = {
        {"mape_pct", report.mape_pct},
        {"rmse", report.rmse},
        {"max_variance_pct", report.max_variance.pct},
        {"max_variance_date", to_string(report.max_variance.date)},
        {"horizon", report.horizon},
        {"n", report.n},
    };
    return j.dump(2) + "\n";
}

inline EvaluationReport read_report(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error(std::string("report is not valid JSON: ") + e.what());
    }
    try {
        EvaluationReport report;
        report.mape_pct = j.at("mape_pct").get<double>();
        report.rmse = j.at("rmse").get<double>();
        report.max_variance.pct = j.at("max_variance_pct").get<double>();
        report.max_variance.date = parse_date(j.at("max_variance_date").get<std::string>());
        report.horizon = j.at("horizon").get<std::size_t>();
        report.n = j.at("n").get<std::size_t>();
        return report;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("report is missing a field: ") + e.what());
    }
}

}  // namespace stockcast
