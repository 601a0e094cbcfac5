// Command-line front end: dataset generation, training, evaluation, the
// noise-robustness simulation suite, loss/patching ablations, theorem
// verification, and plot-data export.  Every subcommand takes --config and
// --seed; any other --path.to.field arguments override config leaves.
//
// Exit codes: 0 success, 2 bad configuration, 3 training diverged in every
// arm, 1 anything else.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "timesql/checkpoint.hpp"
#include "timesql/experiment.hpp"

using namespace timesql;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json load_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::parse_error& err) {
        throw ConfigError("config " + path.string() + ": " + err.what());
    }
}

// Applies "--a.b.c value" / "--a.b.c=value" pairs onto the config document.
// Values parse as JSON when possible and fall back to strings.
void apply_overrides(json& config, const std::vector<std::string>& extras) {
    std::size_t i = 0;
    while (i < extras.size()) {
        std::string key = extras[i];
        if (key.rfind("--", 0) != 0) {
            throw ConfigError("unexpected argument '" + key +
                              "' (overrides look like --train.learning_rate 1e-3)");
        }
        key = key.substr(2);
        std::string value;
        const auto eq = key.find('=');
        if (eq != std::string::npos) {
            value = key.substr(eq + 1);
            key = key.substr(0, eq);
            ++i;
        } else {
            if (i + 1 >= extras.size()) {
                throw ConfigError("missing value for override --" + key);
            }
            value = extras[i + 1];
            i += 2;
        }

        json* node = &config;
        std::size_t start = 0;
        while (true) {
            const auto dot = key.find('.', start);
            const std::string part =
                key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
            if (part.empty()) throw ConfigError("bad override path --" + key);
            if (dot == std::string::npos) {
                json parsed;
                try {
                    parsed = json::parse(value);
                } catch (...) {
                    parsed = value;
                }
                (*node)[part] = parsed;
                break;
            }
            node = &(*node)[part];
            start = dot + 1;
        }
    }
}

struct CommonArgs {
    std::string config_path;
    std::optional<std::int64_t> seed;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file");
        cmd->add_option("--seed", seed, "Override every RNG seed used by the run");
        cmd->allow_extras();
    }
};

ExperimentConfig resolve_config(const CommonArgs& args, CLI::App* cmd) {
    json doc = args.config_path.empty() ? json::object() : load_json_file(args.config_path);
    apply_overrides(doc, cmd->remaining());
    if (args.seed) {
        doc["train"]["seed"] = *args.seed;
        if (doc.contains("dataset") && doc["dataset"].contains("trig")) {
            doc["dataset"]["trig"]["rng_seed"] = *args.seed;
        }
    }
    return parse_experiment_config(doc.dump());
}

void write_text(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

void write_manifest(const fs::path& dir, const std::string& command,
                    const std::optional<std::int64_t>& seed, const json& config,
                    const std::vector<fs::path>& outputs) {
    json manifest = {{"command", command}, {"config", config}};
    manifest["seed"] = seed ? json(*seed) : json(nullptr);
    json files = json::array();
    for (const auto& p : outputs) files.push_back(p.string());
    manifest["outputs"] = files;
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

json metrics_json(const EvalMetrics& metrics) {
    return {{"mse", metrics.mse},
            {"mae", metrics.mae},
            {"per_horizon_mse", metrics.per_horizon_mse},
            {"per_horizon_mae", metrics.per_horizon_mae}};
}

json stats_json(const DatasetStats& stats) {
    json per_variable = json::array();
    for (const auto& v : stats.per_variable) {
        per_variable.push_back({{"name", v.name},
                                {"mean", v.mean},
                                {"std", v.stddev},
                                {"min", v.min},
                                {"max", v.max}});
    }
    return {{"num_features", stats.num_features},
            {"num_samples", stats.num_samples},
            {"per_variable", per_variable}};
}

SeriesMatrix load_series(const ExperimentConfig& config) {
    config.dataset.validate();
    return config.dataset.trig ? generate_trig(*config.dataset.trig)
                               : load_csv(config.dataset.csv->path,
                                          config.dataset.csv->options);
}

int run_simulate(const CommonArgs& args, CLI::App* cmd) {
    const ExperimentConfig config = resolve_config(args, cmd);
    const SimulationReport report =
        run_simulation_suite(config, config.noise_stds, config.seeds);

    const fs::path csv_path = config.output_dir / "simulation.csv";
    write_text(csv_path, simulation_csv(report));
    write_manifest(config.output_dir, "simulate", args.seed,
                   json::parse(experiment_config_json(config)), {csv_path});

    std::size_t diverged = 0;
    for (const auto& cell : report.cells) diverged += cell.diverged ? 1 : 0;
    std::cout << "simulate: " << report.cells.size() << " cells ("
              << report.noise_stds.size() << " stds x " << report.seeds.size()
              << " seeds x " << report.arms.size() << " arms), " << diverged
              << " diverged\nwrote " << csv_path.string() << "\n";
    return diverged == report.cells.size() ? 3 : 0;
}

int run_ablate(const CommonArgs& args, CLI::App* cmd,
               const std::vector<std::size_t>& horizons) {
    const ExperimentConfig config = resolve_config(args, cmd);
    const AblationReport report = run_ablation(config, {}, horizons);

    const fs::path csv_path = config.output_dir / "ablation.csv";
    write_text(csv_path, ablation_csv(report));
    write_manifest(config.output_dir, "ablate", args.seed,
                   json::parse(experiment_config_json(config)), {csv_path});

    std::size_t diverged = 0;
    for (const auto& row : report.rows) diverged += row.diverged ? 1 : 0;
    std::cout << ablation_csv(report) << "wrote " << csv_path.string() << "\n";
    return diverged == report.rows.size() ? 3 : 0;
}

int run_train(const CommonArgs& args, CLI::App* cmd) {
    const ExperimentConfig config = resolve_config(args, cmd);
    const PreparedData prepared = prepare_dataset(config);
    const std::size_t n_vars = prepared.train.front().input.num_variables();
    const ModelConfig model = make_model_config(config, n_vars, config.scales, config.horizon);

    TrainResult result;
    try {
        result = train(model, prepared.train, prepared.val, config.train);
    } catch (const std::runtime_error& err) {
        std::cerr << err.what() << "\n";
        return 3;
    }
    const EvalMetrics metrics = evaluate(result.params, prepared.test);

    const fs::path dir = config.output_dir;
    const fs::path ckpt = dir / "checkpoint.tsq";
    const fs::path history = dir / "history.jsonl";
    const fs::path metrics_path = dir / "metrics.json";
    fs::create_directories(dir);
    save_checkpoint(result.params, ckpt);
    write_text(history, history_jsonl(result.history));
    json m = metrics_json(metrics);
    m["best_epoch"] = result.best_epoch;
    m["epochs_run"] = result.history.size();
    write_text(metrics_path, m.dump(2) + "\n");
    write_manifest(dir, "train", args.seed, json::parse(experiment_config_json(config)),
                   {ckpt, history, metrics_path});

    std::cout << "train: " << result.history.size() << " epochs, best epoch "
              << result.best_epoch << "\ntest mse " << metrics.mse << ", test mae "
              << metrics.mae << "\nwrote " << ckpt.string() << "\n";
    return 0;
}

int run_evaluate(const CommonArgs& args, CLI::App* cmd, const std::string& checkpoint) {
    const ExperimentConfig config = resolve_config(args, cmd);
    const ModelParams params = load_checkpoint(checkpoint);
    const PreparedData prepared = prepare_dataset(config);
    const EvalMetrics metrics = evaluate(params, prepared.test);

    const fs::path metrics_path = config.output_dir / "metrics.json";
    write_text(metrics_path, metrics_json(metrics).dump(2) + "\n");
    write_manifest(config.output_dir, "evaluate", args.seed,
                   json::parse(experiment_config_json(config)), {metrics_path});
    std::cout << metrics_json(metrics).dump(2) << "\n";
    return 0;
}

int run_gen_data(const CommonArgs& args, CLI::App* cmd, std::string out_path) {
    const ExperimentConfig config = resolve_config(args, cmd);
    if (!config.dataset.trig) {
        throw ConfigError("gen-data needs dataset.trig in the config");
    }
    const SeriesMatrix series = generate_trig(*config.dataset.trig);
    const fs::path out =
        out_path.empty() ? config.output_dir / "data.csv" : fs::path(out_path);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    save_csv(series, out);
    write_manifest(config.output_dir, "gen-data", args.seed,
                   json::parse(experiment_config_json(config)), {out});
    std::cout << "gen-data: " << series.num_variables() << " variables x "
              << series.num_steps() << " steps\nwrote " << out.string() << "\n";
    return 0;
}

int run_stats(const CommonArgs& args, CLI::App* cmd) {
    const ExperimentConfig config = resolve_config(args, cmd);
    const DatasetStats stats = dataset_stats(load_series(config));
    const json j = stats_json(stats);
    const fs::path out = config.output_dir / "stats.json";
    write_text(out, j.dump(2) + "\n");
    write_manifest(config.output_dir, "stats", args.seed,
                   json::parse(experiment_config_json(config)), {out});
    std::cout << j.dump(2) << "\n";
    return 0;
}

int run_verify_theorems(const CommonArgs& args, CLI::App* cmd, std::size_t samples,
                        std::string out_dir) {
    // Needs no dataset; --config only contributes the output directory.
    fs::path dir = out_dir.empty() ? fs::path("runs/theorems") : fs::path(out_dir);
    if (!args.config_path.empty()) {
        json doc = load_json_file(args.config_path);
        apply_overrides(doc, cmd->remaining());
        if (out_dir.empty() && doc.contains("output_dir")) {
            dir = doc.at("output_dir").get<std::string>();
        }
    }
    const std::uint64_t seed = args.seed ? static_cast<std::uint64_t>(*args.seed) : 0;

    const Theorem1Report t1 = verify_theorem1(samples, seed);
    const Theorem2Report t2 = verify_theorem2(samples, seed);

    const std::string combined = "{\n\"theorem1\": " + theorem1_report_json(t1) +
                                 ",\n\"theorem2\": " + theorem2_report_json(t2) + "\n}\n";
    const fs::path out = dir / "theorems.json";
    write_text(out, combined);
    write_manifest(dir, "verify-theorems", args.seed,
                   json{{"samples", samples}, {"seed", seed}}, {out});
    std::cout << combined;
    return (t1.violations == 0 && t2.violations == 0) ? 0 : 1;
}

std::vector<EpochRecord> parse_history_jsonl(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open history file " + path.string());
    std::vector<EpochRecord> history;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        EpochRecord r;
        r.epoch = j.at("epoch").get<std::size_t>();
        r.train_loss = j.at("train_loss").get<double>();
        if (!j.at("val_mse").is_null()) r.val_mse = j.at("val_mse").get<double>();
        if (!j.at("val_mae").is_null()) r.val_mae = j.at("val_mae").get<double>();
        history.push_back(r);
    }
    return history;
}

int run_plot_data(const CommonArgs& args, CLI::App* cmd, const std::string& kind,
                  double c, const std::string& history_path,
                  const std::string& checkpoint, std::size_t window_index,
                  std::size_t variable, std::string out_path) {
    std::vector<PlotPoint> points;
    fs::path dir = "runs/plots";
    if (kind == "loss-curves") {
        points = loss_curve_points(c);
        if (!args.config_path.empty()) {
            dir = resolve_config(args, cmd).output_dir;
        }
    } else if (kind == "history") {
        if (history_path.empty()) throw ConfigError("plot-data history needs --history");
        points = history_points(parse_history_jsonl(history_path));
    } else if (kind == "forecast") {
        if (checkpoint.empty()) throw ConfigError("plot-data forecast needs --checkpoint");
        const ExperimentConfig config = resolve_config(args, cmd);
        dir = config.output_dir;
        const ModelParams params = load_checkpoint(checkpoint);
        const PreparedData prepared = prepare_dataset(config);
        if (window_index >= prepared.test.size()) {
            throw ConfigError("window index " + std::to_string(window_index) +
                              " out of range (test split has " +
                              std::to_string(prepared.test.size()) + " windows)");
        }
        points = forecast_points(params, prepared.test[window_index], variable);
    } else {
        throw ConfigError("unknown plot kind '" + kind +
                          "' (expected loss-curves, history or forecast)");
    }

    const fs::path out =
        out_path.empty() ? dir / ("plot_" + kind + ".csv") : fs::path(out_path);
    write_text(out, plot_data_csv(points));
    std::cout << "wrote " << out.string() << " (" << points.size() << " points)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"TimeSQL: multi-scale patching forecaster with the smooth quadratic loss"};
    app.require_subcommand(1);

    CommonArgs common;

    auto* simulate = app.add_subcommand(
        "simulate", "Noise-robustness study over noise stds, seeds and loss arms");
    common.attach(simulate);

    auto* ablate = app.add_subcommand("ablate", "Per-arm evaluation table");
    std::vector<std::size_t> horizons;
    ablate->add_option("--horizon", horizons, "Horizon(s) to sweep (default: config horizon)");
    common.attach(ablate);

    auto* train_cmd = app.add_subcommand("train", "Train one model and checkpoint it");
    common.attach(train_cmd);

    auto* evaluate_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint on the test split");
    std::string checkpoint;
    evaluate_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    common.attach(evaluate_cmd);

    auto* verify = app.add_subcommand("verify-theorems",
                                      "Monte-Carlo verification of the noise-effect bounds");
    std::size_t samples = 1000000;
    std::string theorem_out_dir;
    verify->add_option("--samples", samples, "Samples per theorem (default 1e6)");
    verify->add_option("--out-dir", theorem_out_dir, "Report directory");
    common.attach(verify);

    auto* gen_data = app.add_subcommand("gen-data", "Generate the synthetic dataset as CSV");
    std::string gen_out;
    gen_data->add_option("--out", gen_out, "Output CSV path (default <output_dir>/data.csv)");
    common.attach(gen_data);

    auto* stats_cmd = app.add_subcommand("stats", "Dataset statistics report");
    common.attach(stats_cmd);

    auto* plot = app.add_subcommand("plot-data", "Tidy CSV series for external plotting");
    std::string kind = "loss-curves", history_path, plot_checkpoint, plot_out;
    double curve_c = 0.08;
    std::size_t window_index = 0, variable = 0;
    plot->add_option("--kind", kind, "loss-curves | history | forecast");
    plot->add_option("--c", curve_c, "Kernel width for loss-curves");
    plot->add_option("--history", history_path, "history.jsonl from a train run");
    plot->add_option("--checkpoint", plot_checkpoint, "Checkpoint for forecast");
    plot->add_option("--window", window_index, "Test window index for forecast");
    plot->add_option("--variable", variable, "Variable index for forecast");
    plot->add_option("--out", plot_out, "Output CSV path");
    common.attach(plot);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*simulate) return run_simulate(common, simulate);
        if (*ablate) return run_ablate(common, ablate, horizons);
        if (*train_cmd) return run_train(common, train_cmd);
        if (*evaluate_cmd) return run_evaluate(common, evaluate_cmd, checkpoint);
        if (*verify) return run_verify_theorems(common, verify, samples, theorem_out_dir);
        if (*gen_data) return run_gen_data(common, gen_data, gen_out);
        if (*stats_cmd) return run_stats(common, stats_cmd);
        if (*plot) {
            return run_plot_data(common, plot, kind, curve_c, history_path,
                                 plot_checkpoint, window_index, variable, plot_out);
        }
    } catch (const ConfigError& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return 0;
}
