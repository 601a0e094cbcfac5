#include "timesql/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace timesql {

namespace {

using nlohmann::json;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

SqlHyperParams merge_hp(const SqlHyperParams& base, const json& j) {
    SqlHyperParams hp = base;
    hp.c = j.value("c", hp.c);
    hp.alpha = j.value("alpha", hp.alpha);
    hp.beta = j.value("beta", hp.beta);
    hp.gamma = j.value("gamma", hp.gamma);
    return hp;
}

MultiScaleConfig parse_scales(const json& j) {
    MultiScaleConfig config;
    for (const auto& pair : j) {
        if (!pair.is_array() || pair.size() != 2) {
            throw ConfigError("scales entries must be [patch_len, stride] pairs");
        }
        config.scales.push_back({pair.at(0).get<std::size_t>(), pair.at(1).get<std::size_t>()});
    }
    return config;
}

json scales_to_json(const MultiScaleConfig& config) {
    json out = json::array();
    for (const auto& s : config.scales) out.push_back({s.patch_len, s.stride});
    return out;
}

json hp_to_json(const SqlHyperParams& hp) {
    return {{"c", hp.c}, {"alpha", hp.alpha}, {"beta", hp.beta}, {"gamma", hp.gamma}};
}

}  // namespace

void DatasetConfig::validate() const {
    if (trig.has_value() == csv.has_value()) {
        throw ConfigError("dataset: exactly one of 'trig' or 'csv' must be configured");
    }
    if (trig) trig->validate();
}

void ExperimentConfig::validate() const {
    dataset.validate();
    split.validate();
    if (lookback < 2 || horizon == 0 || window_stride == 0) {
        throw ConfigError("lookback must be >= 2, horizon and window_stride positive");
    }
    scales.validate(lookback);
    if (hidden == 0) throw ConfigError("model.hidden must be positive");
    if (encoder != "mlp") {
        throw ConfigError("model.encoder '" + encoder + "' is not implemented (only \"mlp\")");
    }
    train.validate();
    std::vector<std::string> names;
    for (const auto& arm : arms) {
        if (arm.name.empty()) throw ConfigError("arms: every arm needs a name");
        if (std::find(names.begin(), names.end(), arm.name) != names.end()) {
            throw ConfigError("arms: duplicate arm name '" + arm.name + "'");
        }
        names.push_back(arm.name);
        if (arm.scales) arm.scales->validate(lookback);
        if (arm.hp) arm.hp->validate();
    }
    for (double s : noise_stds) {
        if (!(s >= 0.0)) throw ConfigError("noise_stds must be nonnegative");
    }
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& err) {
        throw ConfigError(std::string("config is not valid JSON: ") + err.what());
    }

    ExperimentConfig config;
    try {
        if (j.contains("dataset")) {
            const auto& d = j.at("dataset");
            if (d.contains("trig")) {
                config.dataset.trig = parse_trig_spec(d.at("trig").dump());
            }
            if (d.contains("csv")) {
                CsvSourceConfig src;
                const auto& c = d.at("csv");
                src.path = c.at("path").get<std::string>();
                if (c.contains("delimiter")) {
                    const auto delim = c.at("delimiter").get<std::string>();
                    if (delim.size() != 1) throw ConfigError("csv.delimiter must be one character");
                    src.options.delimiter = delim[0];
                }
                src.options.has_header = c.value("has_header", true);
                if (c.contains("time_column")) {
                    src.options.time_column = c.at("time_column").get<std::string>();
                }
                config.dataset.csv = std::move(src);
            }
        }
        if (j.contains("split")) {
            const auto& s = j.at("split");
            config.split.train_fraction = s.value("train", config.split.train_fraction);
            config.split.val_fraction = s.value("val", config.split.val_fraction);
            config.split.test_fraction = s.value("test", config.split.test_fraction);
        }
        config.lookback = j.value("lookback", config.lookback);
        config.horizon = j.value("horizon", config.horizon);
        config.window_stride = j.value("window_stride", config.window_stride);
        config.standardize = j.value("standardize", config.standardize);
        if (j.contains("scales")) config.scales = parse_scales(j.at("scales"));
        if (j.contains("model")) {
            const auto& m = j.at("model");
            config.hidden = m.value("hidden", config.hidden);
            config.encoder = m.value("encoder", config.encoder);
            config.revin_affine = m.value("revin_affine", config.revin_affine);
        }
        if (j.contains("train")) {
            const auto& t = j.at("train");
            config.train.learning_rate = t.value("learning_rate", config.train.learning_rate);
            config.train.batch_size = t.value("batch_size", config.train.batch_size);
            config.train.max_epochs = t.value("max_epochs", config.train.max_epochs);
            config.train.patience = t.value("patience", config.train.patience);
            if (t.contains("loss")) {
                config.train.loss_choice = loss_choice_from_string(t.at("loss").get<std::string>());
            }
            if (t.contains("hp")) config.train.hp = merge_hp(config.train.hp, t.at("hp"));
            config.train.rng_seed = t.value("seed", config.train.rng_seed);
            if (t.contains("adam_betas")) {
                config.train.adam_beta1 = t.at("adam_betas").at(0).get<double>();
                config.train.adam_beta2 = t.at("adam_betas").at(1).get<double>();
            }
            config.train.adam_eps = t.value("adam_eps", config.train.adam_eps);
        }
        if (j.contains("arms")) {
            for (const auto& a : j.at("arms")) {
                ArmSpec arm;
                arm.name = a.at("name").get<std::string>();
                if (a.contains("loss")) {
                    arm.loss_choice = loss_choice_from_string(a.at("loss").get<std::string>());
                }
                if (a.contains("scales")) arm.scales = parse_scales(a.at("scales"));
                if (a.contains("hp")) arm.hp = merge_hp(config.train.hp, a.at("hp"));
                config.arms.push_back(std::move(arm));
            }
        }
        if (j.contains("noise_stds")) {
            config.noise_stds = j.at("noise_stds").get<std::vector<double>>();
        }
        if (j.contains("seeds")) {
            config.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        }
        if (j.contains("output_dir")) {
            config.output_dir = j.at("output_dir").get<std::string>();
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& err) {
        throw ConfigError(std::string("bad config: ") + err.what());
    }

    try {
        config.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& err) {
        throw ConfigError(std::string("invalid config: ") + err.what());
    }
    return config;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_experiment_config(buffer.str());
}

std::string experiment_config_json(const ExperimentConfig& config) {
    json j;
    if (config.dataset.trig) {
        j["dataset"]["trig"] = json::parse(trig_spec_json(*config.dataset.trig));
    }
    if (config.dataset.csv) {
        json c = {{"path", config.dataset.csv->path.string()},
                  {"delimiter", std::string(1, config.dataset.csv->options.delimiter)},
                  {"has_header", config.dataset.csv->options.has_header}};
        if (config.dataset.csv->options.time_column) {
            c["time_column"] = *config.dataset.csv->options.time_column;
        }
        j["dataset"]["csv"] = c;
    }
    j["split"] = {{"train", config.split.train_fraction},
                  {"val", config.split.val_fraction},
                  {"test", config.split.test_fraction}};
    j["lookback"] = config.lookback;
    j["horizon"] = config.horizon;
    j["window_stride"] = config.window_stride;
    j["standardize"] = config.standardize;
    j["scales"] = scales_to_json(config.scales);
    j["model"] = {{"hidden", config.hidden},
                  {"encoder", config.encoder},
                  {"revin_affine", config.revin_affine}};
    j["train"] = {{"learning_rate", config.train.learning_rate},
                  {"batch_size", config.train.batch_size},
                  {"max_epochs", config.train.max_epochs},
                  {"patience", config.train.patience},
                  {"loss", to_string(config.train.loss_choice)},
                  {"hp", hp_to_json(config.train.hp)},
                  {"seed", config.train.rng_seed},
                  {"adam_betas", {config.train.adam_beta1, config.train.adam_beta2}},
                  {"adam_eps", config.train.adam_eps}};
    j["arms"] = json::array();
    for (const auto& arm : config.arms) {
        json a = {{"name", arm.name}};
        if (arm.loss_choice) a["loss"] = to_string(*arm.loss_choice);
        if (arm.scales) a["scales"] = scales_to_json(*arm.scales);
        if (arm.hp) a["hp"] = hp_to_json(*arm.hp);
        j["arms"].push_back(a);
    }
    j["noise_stds"] = config.noise_stds;
    j["seeds"] = config.seeds;
    j["output_dir"] = config.output_dir.string();
    return j.dump(2);
}

namespace {

// z-score each variable with mean/std of the train prefix.  A constant prefix
// is only centered.
SeriesMatrix standardize_series(const SeriesMatrix& series, double train_fraction) {
    const std::size_t len = series.num_steps();
    const auto train_len = static_cast<std::size_t>(
        std::floor(static_cast<double>(len) * train_fraction));
    const auto count = static_cast<double>(train_len);

    SeriesMatrix out = series;
    for (std::size_t n = 0; n < series.num_variables(); ++n) {
        double sum = 0.0;
        for (std::size_t t = 0; t < train_len; ++t) sum += series.values.at(n, t);
        const double mean = sum / count;
        double sq = 0.0;
        for (std::size_t t = 0; t < train_len; ++t) {
            const double d = series.values.at(n, t) - mean;
            sq += d * d;
        }
        const double stddev = std::sqrt(sq / count);
        const double scale = stddev > 0.0 ? 1.0 / stddev : 1.0;
        for (std::size_t t = 0; t < len; ++t) {
            out.values.at(n, t) = (series.values.at(n, t) - mean) * scale;
        }
    }
    return out;
}

}  // namespace

PreparedData prepare_dataset(const ExperimentConfig& config) {
    config.dataset.validate();
    SeriesMatrix series = config.dataset.trig
                              ? generate_trig(*config.dataset.trig)
                              : load_csv(config.dataset.csv->path, config.dataset.csv->options);
    if (config.standardize) {
        series = standardize_series(series, config.split.train_fraction);
    }

    PreparedData prepared;
    prepared.source_stats = dataset_stats(series);

    const SeriesSplits splits = split_series(series, config.split);
    prepared.train =
        make_windows(splits.train, config.lookback, config.horizon, config.window_stride);
    if (splits.val.num_steps() >= config.lookback + config.horizon) {
        prepared.val = make_windows(splits.val, config.lookback, config.horizon,
                                    config.window_stride);
    }
    prepared.test = make_windows(splits.test, config.lookback, config.horizon, 1);
    return prepared;
}

ModelConfig make_model_config(const ExperimentConfig& config, std::size_t num_variables,
                              const MultiScaleConfig& scales, std::size_t horizon) {
    ModelConfig model;
    model.num_variables = num_variables;
    model.lookback = config.lookback;
    model.horizon = horizon;
    model.hidden = config.hidden;
    model.scales = scales;
    model.revin_affine = config.revin_affine;
    model.validate();
    return model;
}

std::vector<ArmSpec> default_loss_arms(const SqlHyperParams& hp) {
    std::vector<ArmSpec> arms;
    arms.push_back({"sql", LossChoice::sql, std::nullopt, hp});
    SqlHyperParams no_rqf = hp;
    no_rqf.alpha = 0.0;
    arms.push_back({"sql-no-rqf", LossChoice::sql, std::nullopt, no_rqf});
    SqlHyperParams no_or = hp;
    no_or.beta = 0.0;
    no_or.gamma = 0.0;
    arms.push_back({"sql-no-or", LossChoice::sql, std::nullopt, no_or});
    SqlHyperParams no_mae = hp;
    no_mae.alpha = 1.0;
    arms.push_back({"sql-no-mae", LossChoice::sql, std::nullopt, no_mae});
    arms.push_back({"mse", LossChoice::mse, std::nullopt, std::nullopt});
    return arms;
}

std::vector<ArmSpec> patching_arms(const MultiScaleConfig& multi) {
    std::vector<ArmSpec> arms;
    arms.push_back({"multi-scale", std::nullopt, multi, std::nullopt});
    MultiScaleConfig single;
    single.scales.push_back(multi.scales.front());
    arms.push_back({"single-scale", std::nullopt, single, std::nullopt});
    return arms;
}

namespace {

struct ResolvedArm {
    std::string name;
    TrainConfig train;
    MultiScaleConfig scales;
};

ResolvedArm resolve_arm(const ExperimentConfig& base, const ArmSpec& arm) {
    ResolvedArm resolved;
    resolved.name = arm.name;
    resolved.train = base.train;
    if (arm.loss_choice) resolved.train.loss_choice = *arm.loss_choice;
    if (arm.hp) resolved.train.hp = *arm.hp;
    resolved.scales = arm.scales ? *arm.scales : base.scales;
    return resolved;
}

struct ArmOutcome {
    bool diverged = false;
    std::string error;
    double test_mse = 0.0;
    double test_mae = 0.0;
    double initial_train_mse = 0.0;
};

ArmOutcome run_arm(const ExperimentConfig& config, const PreparedData& prepared,
                   const ResolvedArm& arm, std::size_t horizon) {
    ArmOutcome outcome;
    const std::size_t n_vars = prepared.train.front().input.num_variables();
    const ModelConfig model = make_model_config(config, n_vars, arm.scales, horizon);
    try {
        const TrainResult result = train(model, prepared.train, prepared.val, arm.train);
        const EvalMetrics metrics = evaluate(result.params, prepared.test);
        outcome.test_mse = metrics.mse;
        outcome.test_mae = metrics.mae;
        outcome.initial_train_mse = result.initial_train_mse;
    } catch (const std::runtime_error& err) {
        outcome.diverged = true;
        outcome.error = err.what();
    }
    return outcome;
}

}  // namespace

SimulationReport run_simulation_suite(const ExperimentConfig& base,
                                      const std::vector<double>& noise_stds,
                                      const std::vector<std::uint64_t>& seeds) {
    if (!base.dataset.trig) {
        throw ConfigError("run_simulation_suite: the simulation suite needs a trig dataset");
    }
    if (base.arms.size() < 2) {
        throw ConfigError("run_simulation_suite: at least two arms are required");
    }
    const bool has_robust = std::any_of(base.arms.begin(), base.arms.end(), [&](const ArmSpec& a) {
        const LossChoice choice = a.loss_choice.value_or(base.train.loss_choice);
        return choice == LossChoice::sql || choice == LossChoice::rqf_only;
    });
    const bool has_mse = std::any_of(base.arms.begin(), base.arms.end(), [&](const ArmSpec& a) {
        return a.loss_choice.value_or(base.train.loss_choice) == LossChoice::mse;
    });
    if (!has_robust || !has_mse) {
        throw ConfigError(
            "run_simulation_suite: arms must include a sql/rqf arm and an mse arm");
    }

    SimulationReport report;
    report.noise_stds = noise_stds;
    report.seeds = seeds;
    for (const auto& arm : base.arms) report.arms.push_back(arm.name);

    for (double noise_std : noise_stds) {
        for (std::uint64_t seed : seeds) {
            ExperimentConfig config = base;
            config.dataset.trig->noise_std = noise_std;
            config.dataset.trig->rng_seed = seed;
            config.train.rng_seed = seed;
            const PreparedData prepared = prepare_dataset(config);

            // Arms sharing an architecture must also share their pre-update
            // evaluation; anything else means the seeding leaked.
            std::vector<std::pair<std::string, double>> seen_inits;
            for (const auto& arm_spec : base.arms) {
                const ResolvedArm arm = resolve_arm(config, arm_spec);
                const ArmOutcome outcome = run_arm(config, prepared, arm, config.horizon);
                CellResult cell;
                cell.noise_std = noise_std;
                cell.arm = arm.name;
                cell.seed = seed;
                cell.diverged = outcome.diverged;
                cell.error = outcome.error;
                cell.test_mse = outcome.test_mse;
                cell.test_mae = outcome.test_mae;
                cell.initial_train_mse = outcome.initial_train_mse;
                report.cells.push_back(std::move(cell));

                if (!outcome.diverged) {
                    std::ostringstream signature;
                    for (const auto& s : arm.scales.scales) {
                        signature << s.patch_len << 'x' << s.stride << ';';
                    }
                    bool matched = false;
                    for (const auto& [sig, value] : seen_inits) {
                        if (sig == signature.str()) {
                            matched = true;
                            if (value != outcome.initial_train_mse) {
                                throw std::logic_error(
                                    "run_simulation_suite: arms with identical architecture "
                                    "disagree on the pre-update evaluation; seeding is broken");
                            }
                        }
                    }
                    if (!matched) seen_inits.emplace_back(signature.str(), outcome.initial_train_mse);
                }
            }
        }
    }
    return report;
}

AblationReport run_ablation(const ExperimentConfig& base, std::vector<ArmSpec> arms,
                            std::vector<std::size_t> horizons) {
    if (arms.empty()) arms = base.arms;
    if (arms.empty()) arms = default_loss_arms(base.train.hp);
    if (horizons.empty()) horizons = {base.horizon};

    AblationReport report;
    for (std::size_t horizon : horizons) {
        ExperimentConfig config = base;
        config.horizon = horizon;
        const PreparedData prepared = prepare_dataset(config);
        for (const auto& arm_spec : arms) {
            const ResolvedArm arm = resolve_arm(config, arm_spec);
            const ArmOutcome outcome = run_arm(config, prepared, arm, horizon);
            AblationRow row;
            row.arm = arm.name;
            row.horizon = horizon;
            row.diverged = outcome.diverged;
            row.error = outcome.error;
            row.test_mse = outcome.test_mse;
            row.test_mae = outcome.test_mae;
            row.initial_train_mse = outcome.initial_train_mse;
            report.rows.push_back(std::move(row));
        }
    }
    return report;
}

std::string simulation_csv(const SimulationReport& report) {
    std::string out = "noise_std,arm,seed,test_mse,test_mae,diverged\n";
    for (const CellResult& cell : report.cells) {
        out += format_double(cell.noise_std);
        out += ',' + cell.arm + ',' + std::to_string(cell.seed) + ',';
        out += format_double(cell.test_mse);
        out += ',';
        out += format_double(cell.test_mae);
        out += ',';
        out += cell.diverged ? '1' : '0';
        out += '\n';
    }
    return out;
}

std::string ablation_csv(const AblationReport& report) {
    std::string out = "arm,horizon,test_mse,test_mae,diverged\n";
    for (const AblationRow& row : report.rows) {
        out += row.arm + ',' + std::to_string(row.horizon) + ',';
        out += format_double(row.test_mse);
        out += ',';
        out += format_double(row.test_mae);
        out += ',';
        out += row.diverged ? '1' : '0';
        out += '\n';
    }
    return out;
}

std::string plot_data_csv(const std::vector<PlotPoint>& points) {
    std::string out = "series_name,x,y\n";
    for (const PlotPoint& p : points) {
        out += p.series_name + ',' + format_double(p.x) + ',' + format_double(p.y) + '\n';
    }
    return out;
}

std::vector<PlotPoint> loss_curve_points(double c, double lo, double hi, std::size_t steps) {
    if (steps < 2) throw std::invalid_argument("loss_curve_points: need at least 2 steps");
    std::vector<PlotPoint> points;
    points.reserve(4 * steps);
    for (std::size_t i = 0; i < steps; ++i) {
        const double e = lo + (hi - lo) * static_cast<double>(i) /
                                  static_cast<double>(steps - 1);
        points.push_back({"rqf_loss", e, rqf_loss(e, 0.0, c)});
        points.push_back({"rqf_grad", e, rqf_grad(e, 0.0, c)});
        points.push_back({"mse_loss", e, e * e});
        points.push_back({"mse_grad", e, 2.0 * e});
    }
    return points;
}

std::vector<PlotPoint> history_points(const std::vector<EpochRecord>& history) {
    std::vector<PlotPoint> points;
    for (const EpochRecord& r : history) {
        const auto x = static_cast<double>(r.epoch);
        points.push_back({"train_loss", x, r.train_loss});
        if (r.val_mse) points.push_back({"val_mse", x, *r.val_mse});
        if (r.val_mae) points.push_back({"val_mae", x, *r.val_mae});
    }
    return points;
}

std::vector<PlotPoint> forecast_points(const ModelParams& params,
                                       const SeriesWindow& window, std::size_t variable) {
    if (variable >= window.input.num_variables()) {
        throw std::invalid_argument("forecast_points: variable index out of range");
    }
    const ForwardTrace trace = forward(params, window.input);
    std::vector<PlotPoint> points;
    const std::size_t lookback = window.input.num_steps();
    for (std::size_t t = 0; t < lookback; ++t) {
        points.push_back({"input", static_cast<double>(t), window.input.values.at(variable, t)});
    }
    for (std::size_t t = 0; t < window.target.num_steps(); ++t) {
        const auto x = static_cast<double>(lookback + t);
        points.push_back({"truth", x, window.target.values.at(variable, t)});
        points.push_back({"prediction", x, trace.prediction.at(variable, t)});
    }
    return points;
}

std::string theorem1_report_json(const Theorem1Report& report) {
    json j = {{"theorem", 1},
              {"samples", report.samples},
              {"violations", report.violations},
              {"worst_ratio", report.worst_ratio},
              {"max_identity_gap", report.max_identity_gap},
              {"seed", report.seed}};
    return j.dump(2);
}

std::string theorem2_report_json(const Theorem2Report& report) {
    json j = {{"theorem", 2},
              {"samples", report.samples},
              {"violations", report.violations},
              {"worst_margin", report.worst_margin},
              {"strata",
               {{"A", report.stratum_counts[0]},
                {"B", report.stratum_counts[1]},
                {"C", report.stratum_counts[2]},
                {"D", report.stratum_counts[3]}}},
              {"outside_search_samples", report.outside_search_samples},
              {"outside_counterexample_found", report.outside_counterexample_found},
              {"seed", report.seed}};
    if (report.outside_counterexample_found) {
        j["outside_counterexample"] = {{"e", report.outside_counterexample.e},
                                       {"eps", report.outside_counterexample.eps},
                                       {"c", report.outside_counterexample.c},
                                       {"v_r", report.outside_counterexample.v_r},
                                       {"v_m", report.outside_counterexample.v_m}};
    }
    return j.dump(2);
}

}  // namespace timesql
