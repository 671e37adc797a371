#pragma once

// Command-line front end. Five subcommands drive the pipeline:
//
//   train     fit a model on a price CSV, write model file + training trace
//   predict   run a saved model over a series, write date,actual,predicted
//   evaluate  score a prediction CSV, write a report JSON
//   sweep     neurons / volume / epochs experiment, write a result table
//   compare   score external tool predictions against actuals
//
// Settings resolve in precedence order: built-in defaults, then the
// STOCKCAST_SEED environment variable (seed only), then --config JSON, then
// flags. Where the seed came from is recorded in the model file. All inputs
// are validated before any training starts, and outputs are written
// atomically.

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stockcast/evaluate.hpp"
#include "stockcast/experiments.hpp"
#include "stockcast/mlp.hpp"
#include "stockcast/persist.hpp"
#include "stockcast/series.hpp"

namespace stockcast {

/// Everything a run needs beyond file paths. Defaults are the full-scale
/// reference configuration: 5:21:21:1, 80/20 split, 130,000 epochs, eta 0.1,
/// no momentum, horizon 60, walk-forward mode.
struct RunConfig {
    NetworkTopology topology{};
    TrainingConfig training{};
    double train_fraction = 0.8;
    std::size_t horizon = 60;
    std::string mode = "walk_forward";
    std::string seed_source = "default";

    void validate() const {
        topology.validate();
        training.validate();
        if (!(train_fraction > 0.0 && train_fraction < 1.0))
            throw std::invalid_argument("train fraction must lie in (0,1)");
        if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
        if (mode != "walk_forward" && mode != "recursive")
            throw std::invalid_argument("mode must be walk_forward or recursive");
    }

    ExperimentSettings experiment_settings() const {
        return {topology, training, train_fraction, horizon};
    }
};

namespace detail {

inline std::uint64_t parse_seed(std::string_view text, const std::string& what) {
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw std::invalid_argument(what + " is '" + std::string(text) +
                                    "', expected an unsigned integer");
    return value;
}

inline void apply_env_seed(RunConfig& cfg) {
    if (const char* value = std::getenv("STOCKCAST_SEED")) {
        cfg.training.seed = parse_seed(value, "STOCKCAST_SEED");
        cfg.seed_source = "env:STOCKCAST_SEED";
    }
}

inline void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw std::runtime_error("config '" + path.string() + "' must be a JSON object");

    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "window")
                cfg.topology.input_count = value.get<int>();
            else if (key == "hidden_layer_sizes")
                cfg.topology.hidden_layer_sizes = value.get<std::vector<int>>();
            else if (key == "epochs")
                cfg.training.epochs = value.get<long>();
            else if (key == "learning_rate")
                cfg.training.learning_rate = value.get<double>();
            else if (key == "momentum")
                cfg.training.momentum = value.get<double>();
            else if (key == "log_interval")
                cfg.training.log_interval = value.get<long>();
            else if (key == "seed") {
                cfg.training.seed = value.get<std::uint64_t>();
                cfg.seed_source = "config";
            } else if (key == "train_fraction")
                cfg.train_fraction = value.get<double>();
            else if (key == "horizon")
                cfg.horizon = value.get<std::size_t>();
            else if (key == "mode")
                cfg.mode = value.get<std::string>();
            else
                throw std::runtime_error("config key '" + key + "' is not recognized");
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("config '" + path.string() + "' is malformed: " + e.what());
    }
}

// Option values shared by the subcommands that build a RunConfig. Each value
// only lands in the config if its flag was actually given.
struct ConfigFlags {
    std::string config_path;
    std::uint64_t seed = 0;
    long epochs = 0;
    double learning_rate = 0.0;
    double momentum = 0.0;
    long log_interval = 0;
    std::vector<int> hidden;
    int window = 0;
    double split = 0.0;
    std::size_t horizon = 0;
    std::string mode;

    CLI::Option* config_opt = nullptr;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* epochs_opt = nullptr;
    CLI::Option* lr_opt = nullptr;
    CLI::Option* momentum_opt = nullptr;
    CLI::Option* log_opt = nullptr;
    CLI::Option* hidden_opt = nullptr;
    CLI::Option* window_opt = nullptr;
    CLI::Option* split_opt = nullptr;
    CLI::Option* horizon_opt = nullptr;
    CLI::Option* mode_opt = nullptr;
};

inline void add_config_flag(CLI::App* sub, ConfigFlags& f) {
    f.config_opt = sub->add_option("--config", f.config_path, "JSON config file")
                       ->check(CLI::ExistingFile);
}

inline void add_training_flags(CLI::App* sub, ConfigFlags& f) {
    f.seed_opt = sub->add_option("--seed", f.seed, "initialization seed");
    f.epochs_opt = sub->add_option("--epochs", f.epochs, "training epochs");
    f.lr_opt = sub->add_option("--learning-rate,--lr", f.learning_rate, "backpropagation learning rate");
    f.momentum_opt = sub->add_option("--momentum", f.momentum, "momentum coefficient");
    f.log_opt = sub->add_option("--log-interval", f.log_interval, "epochs between trace samples");
    f.hidden_opt = sub->add_option("--hidden", f.hidden, "hidden layer sizes, e.g. 21,21")
                       ->delimiter(',');
    f.window_opt = sub->add_option("--window", f.window, "input window length");
}

inline void add_split_flag(CLI::App* sub, ConfigFlags& f) {
    f.split_opt = sub->add_option("--split", f.split, "training fraction in (0,1)");
}

inline void add_horizon_mode_flags(CLI::App* sub, ConfigFlags& f) {
    f.horizon_opt = sub->add_option("--horizon", f.horizon, "prediction horizon in trading days");
    f.mode_opt = sub->add_option("--mode", f.mode, "walk_forward or recursive")
                     ->check(CLI::IsMember({"walk_forward", "recursive"}));
}

inline RunConfig resolve_config(const ConfigFlags& f) {
    RunConfig cfg;
    apply_env_seed(cfg);
    if (f.config_opt && f.config_opt->count() > 0) apply_config_file(cfg, f.config_path);

    auto given = [](CLI::Option* opt) { return opt && opt->count() > 0; };
    if (given(f.seed_opt)) {
        cfg.training.seed = f.seed;
        cfg.seed_source = "flag";
    }
    if (given(f.epochs_opt)) cfg.training.epochs = f.epochs;
    if (given(f.lr_opt)) cfg.training.learning_rate = f.learning_rate;
    if (given(f.momentum_opt)) cfg.training.momentum = f.momentum;
    if (given(f.log_opt)) cfg.training.log_interval = f.log_interval;
    if (given(f.hidden_opt)) cfg.topology.hidden_layer_sizes = f.hidden;
    if (given(f.window_opt)) cfg.topology.input_count = f.window;
    if (given(f.split_opt)) cfg.train_fraction = f.split;
    if (given(f.horizon_opt)) cfg.horizon = f.horizon;
    if (given(f.mode_opt)) cfg.mode = f.mode;

    cfg.validate();
    return cfg;
}

inline void check_output_path(const std::filesystem::path& path, const std::string& flag) {
    auto parent = path.parent_path();
    if (parent.empty()) return;
    if (!std::filesystem::is_directory(parent))
        throw std::runtime_error(flag + ": directory '" + parent.string() + "' does not exist");
}

inline std::filesystem::path default_trace_path(std::filesystem::path model_path) {
    model_path.replace_extension();
    model_path += ".trace.csv";
    return model_path;
}

inline nlohmann::json load_spec_json(const std::string& spec_arg) {
    std::string text = spec_arg;
    std::string origin = "inline sweep spec";
    if (spec_arg.empty() || spec_arg.front() != '{') {
        text = read_file(spec_arg);
        origin = "sweep spec '" + spec_arg + "'";
    }
    try {
        auto j = nlohmann::json::parse(text);
        if (!j.is_object()) throw std::runtime_error(origin + " must be a JSON object");
        return j;
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error(origin + " is not valid JSON: " + e.what());
    }
}

inline void reject_unknown_spec_keys(const nlohmann::json& spec, std::initializer_list<const char*> allowed,
                                     const std::string& kind) {
    for (const auto& [key, value] : spec.items()) {
        (void)value;
        bool known = false;
        for (const char* k : allowed) known = known || key == k;
        if (!known)
            throw std::runtime_error("sweep spec key '" + key + "' is not recognized for kind " + kind);
    }
}

}  // namespace detail

namespace cli {

struct TrainArgs {
    std::filesystem::path data;
    std::filesystem::path out;
    std::filesystem::path trace;
    detail::ConfigFlags flags;
    CLI::Option* trace_opt = nullptr;
};

inline int run_train(const TrainArgs& args, std::ostream& out) {
    RunConfig cfg = detail::resolve_config(args.flags);
    detail::check_output_path(args.out, "--out");
    auto trace_path = args.trace_opt->count() > 0 ? args.trace : detail::default_trace_path(args.out);
    detail::check_output_path(trace_path, "--trace");

    auto series = load_series_file(args.data);
    auto [train_slice, test_slice] = chronological_split(series, cfg.train_fraction);
    (void)test_slice;
    auto params = fit_normalization(train_slice);
    auto windows = make_windows(train_slice, params, cfg.topology.input_count);
    if (windows.patterns.empty())
        throw std::runtime_error("training slice of " + std::to_string(train_slice.size()) +
                                 " points is too short for window " +
                                 std::to_string(cfg.topology.input_count));

    auto result = train(init_network(cfg.topology, cfg.training.seed), windows, cfg.training);

    ModelFile model;
    model.network = std::move(result.network);
    model.params = params;
    model.metadata = {cfg.training.seed,         cfg.seed_source,
                      cfg.training.epochs,       cfg.training.learning_rate,
                      cfg.training.momentum,     series.instrument,
                      train_slice.points.front().date, train_slice.points.back().date};

    save_model(model, args.out);
    write_file_atomic(trace_path, trace_to_csv(result.trace));

    out << "trained on " << series.instrument << ": " << windows.patterns.size() << " patterns, "
        << cfg.training.epochs << " epochs, final mse " << format_double(result.trace.samples.back().mse)
        << "\n";
    out << "wrote " << args.out.string() << "\n";
    out << "wrote " << trace_path.string() << "\n";
    return 0;
}

struct PredictArgs {
    std::filesystem::path model;
    std::filesystem::path data;
    std::filesystem::path out;
    std::string start_date;
    detail::ConfigFlags flags;
    CLI::Option* start_opt = nullptr;
};

inline int run_predict(const PredictArgs& args, std::ostream& out) {
    RunConfig cfg = detail::resolve_config(args.flags);
    detail::check_output_path(args.out, "--out");

    auto model = load_model(args.model);
    auto series = load_series_file(args.data);

    std::size_t start = 0;
    if (args.start_opt->count() > 0) {
        Date from = parse_date(args.start_date);
        while (start < series.size() && series.points[start].date < from) ++start;
        if (start == series.size())
            throw std::runtime_error("no data on or after --start-date " + to_string(from) +
                                     " (series ends " + to_string(series.points.back().date) + ")");
    } else {
        start = static_cast<std::size_t>(
            std::floor(cfg.train_fraction * static_cast<double>(series.size())));
    }

    auto records = cfg.mode == "recursive"
                       ? predict_recursive(model.network, model.params, series, start, cfg.horizon)
                       : predict_walk_forward(model.network, model.params, series, start, cfg.horizon);

    write_file_atomic(args.out, predictions_to_csv(records));
    out << "wrote " << args.out.string() << " (" << records.size() << " records, " << cfg.mode << ")\n";
    return 0;
}

struct EvaluateArgs {
    std::filesystem::path predictions;
    std::filesystem::path out;
};

inline int run_evaluate(const EvaluateArgs& args, std::ostream& out) {
    detail::check_output_path(args.out, "--out");
    auto records = read_predictions_file(args.predictions);
    auto report = build_report(records);
    write_file_atomic(args.out, report_to_json(report));
    out << "mape " << format_double(report.mape_pct) << "%, rmse " << format_double(report.rmse)
        << ", max variance " << format_double(report.max_variance.pct) << "% on "
        << to_string(report.max_variance.date) << " (n=" << report.n << ")\n";
    out << "wrote " << args.out.string() << "\n";
    return 0;
}

struct SweepArgs {
    std::string kind;
    std::filesystem::path data;
    std::filesystem::path out;
    std::string spec;
    detail::ConfigFlags flags;
    CLI::Option* spec_opt = nullptr;
};

inline int run_sweep(const SweepArgs& args, std::ostream& out) {
    RunConfig cfg = detail::resolve_config(args.flags);
    detail::check_output_path(args.out, "--out");
    auto settings = cfg.experiment_settings();

    nlohmann::json spec = nlohmann::json::object();
    if (args.spec_opt->count() > 0) spec = detail::load_spec_json(args.spec);

    auto series = load_series_file(args.data);
    std::string csv;
    std::size_t row_count = 0;

    try {
        if (args.kind == "neurons") {
            detail::reject_unknown_spec_keys(spec, {"counts"}, "neurons");
            std::vector<int> counts;
            if (spec.contains("counts")) {
                counts = spec.at("counts").get<std::vector<int>>();
            } else {
                for (int c = 1; c <= 25; ++c) counts.push_back(c);
            }
            auto result = sweep_hidden_neurons(series, counts, settings);
            csv = sweep_to_csv(result);
            row_count = result.rows.size();
        } else if (args.kind == "volume") {
            detail::reject_unknown_spec_keys(spec, {"fractions"}, "volume");
            std::vector<double> fractions;
            if (spec.contains("fractions")) {
                fractions = spec.at("fractions").get<std::vector<double>>();
            } else {
                for (int i = 1; i <= 9; ++i) fractions.push_back(static_cast<double>(i) / 10.0);
            }
            auto result = sweep_training_volume(series, fractions, settings);
            csv = sweep_to_csv(result);
            row_count = result.rows.size();
        } else {  // epochs
            detail::reject_unknown_spec_keys(spec, {"max_epochs", "log_interval"}, "epochs");
            long max_epochs = spec.contains("max_epochs") ? spec.at("max_epochs").get<long>()
                                                          : settings.training.epochs;
            long log_interval = spec.contains("log_interval") ? spec.at("log_interval").get<long>()
                                                              : settings.training.log_interval;
            auto trace = trace_training_error(series, settings, max_epochs, log_interval);
            nlohmann::json meta = {
                {"variable", "epochs"},
                {"seed", settings.training.seed},
                {"max_epochs", max_epochs},
                {"log_interval", log_interval},
                {"learning_rate", settings.training.learning_rate},
                {"momentum", settings.training.momentum},
                {"train_fraction", settings.train_fraction},
                {"window", settings.topology.input_count},
            };
            csv = "# " + meta.dump() + "\n" + trace_to_csv(trace);
            row_count = trace.samples.size();
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("sweep spec is malformed: ") + e.what());
    }

    write_file_atomic(args.out, csv);
    out << "wrote " << args.out.string() << " (" << row_count << " rows)\n";
    return 0;
}

struct CompareArgs {
    std::filesystem::path actuals;
    std::vector<std::string> tools;
    std::filesystem::path out;
};

inline int run_compare(const CompareArgs& args, std::ostream& out) {
    detail::check_output_path(args.out, "--out");
    auto actuals = read_predictions_file(args.actuals);

    std::vector<NamedPredictions> tools;
    tools.reserve(args.tools.size());
    for (const auto& entry : args.tools) {
        auto eq = entry.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == entry.size())
            throw std::runtime_error("--tool expects name=path, got '" + entry + "'");
        std::string name = entry.substr(0, eq);
        std::string path = entry.substr(eq + 1);
        if (name == "model")
            throw std::runtime_error("tool name 'model' is reserved for the actuals' own predictions");
        for (const auto& existing : tools)
            if (existing.name == name) throw std::runtime_error("tool '" + name + "' given twice");
        tools.push_back({std::move(name), read_tool_predictions_file(path)});
    }

    auto rows = compare_external(actuals, tools);
    write_file_atomic(args.out, comparison_to_csv(rows));
    out << "wrote " << args.out.string() << " (" << rows.size() << " rows)\n";
    return 0;
}

}  // namespace cli

/// Parses and runs one command line. `args` excludes the program name.
/// Returns the process exit code; diagnostics go to `err`, one line per
/// failure.
inline int cli_dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
    CLI::App app{"feedforward network toolkit for daily close-price forecasting", "stockcast"};
    app.require_subcommand(1);

    cli::TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "fit a model on a price CSV");
    train_cmd->add_option("--data", train_args.data, "input CSV with header date,close")
        ->required()
        ->check(CLI::ExistingFile);
    train_cmd->add_option("--out", train_args.out, "model file to write")->required();
    train_args.trace_opt =
        train_cmd->add_option("--trace", train_args.trace, "training trace CSV (default: <out>.trace.csv)");
    detail::add_config_flag(train_cmd, train_args.flags);
    detail::add_training_flags(train_cmd, train_args.flags);
    detail::add_split_flag(train_cmd, train_args.flags);

    cli::PredictArgs predict_args;
    auto* predict_cmd = app.add_subcommand("predict", "run a saved model over a price CSV");
    predict_cmd->add_option("--model", predict_args.model, "model file from train")
        ->required()
        ->check(CLI::ExistingFile);
    predict_cmd->add_option("--data", predict_args.data, "input CSV with header date,close")
        ->required()
        ->check(CLI::ExistingFile);
    predict_cmd->add_option("--out", predict_args.out, "prediction CSV to write")->required();
    predict_args.start_opt = predict_cmd->add_option(
        "--start-date", predict_args.start_date,
        "first prediction date, YYYY-MM-DD (default: the --split boundary)");
    detail::add_config_flag(predict_cmd, predict_args.flags);
    detail::add_split_flag(predict_cmd, predict_args.flags);
    detail::add_horizon_mode_flags(predict_cmd, predict_args.flags);

    cli::EvaluateArgs evaluate_args;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "score a prediction CSV");
    evaluate_cmd->add_option("--predictions", evaluate_args.predictions, "CSV from predict")
        ->required()
        ->check(CLI::ExistingFile);
    evaluate_cmd->add_option("--out", evaluate_args.out, "report JSON to write")->required();

    cli::SweepArgs sweep_args;
    auto* sweep_cmd = app.add_subcommand("sweep", "run a tuning experiment");
    sweep_cmd->add_option("--kind", sweep_args.kind, "neurons, volume, or epochs")
        ->required()
        ->check(CLI::IsMember({"neurons", "volume", "epochs"}));
    sweep_cmd->add_option("--data", sweep_args.data, "input CSV with header date,close")
        ->required()
        ->check(CLI::ExistingFile);
    sweep_cmd->add_option("--out", sweep_args.out, "result CSV to write")->required();
    sweep_args.spec_opt = sweep_cmd->add_option(
        "--spec", sweep_args.spec, "JSON object or file: {\"counts\":[..]}, {\"fractions\":[..]}, "
        "or {\"max_epochs\":N,\"log_interval\":K}");
    detail::add_config_flag(sweep_cmd, sweep_args.flags);
    detail::add_training_flags(sweep_cmd, sweep_args.flags);
    detail::add_split_flag(sweep_cmd, sweep_args.flags);
    detail::add_horizon_mode_flags(sweep_cmd, sweep_args.flags);

    cli::CompareArgs compare_args;
    auto* compare_cmd = app.add_subcommand("compare", "score external predictions against actuals");
    compare_cmd->add_option("--actuals", compare_args.actuals, "prediction CSV carrying the actuals")
        ->required()
        ->check(CLI::ExistingFile);
    compare_cmd->add_option("--tool", compare_args.tools, "name=path of a date,predicted CSV (repeatable)");
    compare_cmd->add_option("--out", compare_args.out, "comparison CSV to write")->required();

    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("stockcast");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (train_cmd->parsed()) return cli::run_train(train_args, out);
        if (predict_cmd->parsed()) return cli::run_predict(predict_args, out);
        if (evaluate_cmd->parsed()) return cli::run_evaluate(evaluate_args, out);
        if (sweep_cmd->parsed()) return cli::run_sweep(sweep_args, out);
        if (compare_cmd->parsed()) return cli::run_compare(compare_args, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    err << "error: no subcommand given\n";
    return 1;
}

inline int cli_dispatch(int argc, const char* const* argv, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
    std::vector<std::string> args;
    args.reserve(argc > 0 ? static_cast<std::size_t>(argc - 1) : 0);
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return cli_dispatch(args, out, err);
}

}  // namespace stockcast
