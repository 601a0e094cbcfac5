#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "timesql/data.hpp"
#include "timesql/model.hpp"
#include "timesql/theory.hpp"
#include "timesql/training.hpp"
#include "timesql/types.hpp"

namespace timesql {

// Raised for malformed or inconsistent run configuration; the CLI maps it to
// exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct CsvSourceConfig {
    std::filesystem::path path;
    CsvOptions options;
};

// Exactly one of the two sources must be present.
struct DatasetConfig {
    std::optional<TrigSpec> trig;
    std::optional<CsvSourceConfig> csv;

    void validate() const;
};

// A named variant of the base run.  Unset fields inherit from the base
// config; hp overrides are resolved against the base at parse time.
struct ArmSpec {
    std::string name;
    std::optional<LossChoice> loss_choice;
    std::optional<MultiScaleConfig> scales;
    std::optional<SqlHyperParams> hp;
};

struct ExperimentConfig {
    DatasetConfig dataset;
    SplitSpec split{0.8, 0.0, 0.2};
    std::size_t lookback = 64;
    std::size_t horizon = 16;
    // Offset between consecutive training windows; 1 reproduces the fully
    // overlapping convention, larger values thin the window set.
    std::size_t window_stride = 1;
    // z-score every variable with mean/std taken from the train prefix before
    // windowing, the usual benchmark protocol (and what keeps the default c,
    // beta, gamma loss weights on a sensible scale).
    bool standardize = true;
    MultiScaleConfig scales;
    std::size_t hidden = 32;
    std::string encoder = "mlp";  // extension point; only "mlp" is implemented
    bool revin_affine = false;
    TrainConfig train;
    std::vector<ArmSpec> arms;
    // Simulation-suite axes.
    std::vector<double> noise_stds{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    std::vector<std::uint64_t> seeds{0, 1, 2};
    std::filesystem::path output_dir = "runs";

    void validate() const;
};

ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
// Fully resolved config back as JSON; what run manifests record.
std::string experiment_config_json(const ExperimentConfig& config);

struct PreparedData {
    std::vector<SeriesWindow> train;
    std::vector<SeriesWindow> val;   // empty when val_fraction is 0
    std::vector<SeriesWindow> test;
    DatasetStats source_stats;       // of the (possibly standardized) series
};

// Generate or load the dataset, optionally standardize, split, and window it.
PreparedData prepare_dataset(const ExperimentConfig& config);

ModelConfig make_model_config(const ExperimentConfig& config, std::size_t num_variables,
                              const MultiScaleConfig& scales, std::size_t horizon);

struct CellResult {
    double noise_std = 0.0;
    std::string arm;
    std::uint64_t seed = 0;
    bool diverged = false;
    std::string error;
    double test_mse = 0.0;
    double test_mae = 0.0;
    double initial_train_mse = 0.0;
};

struct SimulationReport {
    std::vector<double> noise_stds;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> arms;
    std::vector<CellResult> cells;  // std-major, then seed, then arm
};

// The noise-robustness study: for every noise std and seed, generate the
// synthetic dataset, train every arm under identical seeding (identical
// initialization and batch order; only the varied factor differs), and
// evaluate on the clean test suffix.  A diverging cell is recorded and the
// suite continues.
SimulationReport run_simulation_suite(const ExperimentConfig& base,
                                      const std::vector<double>& noise_stds,
                                      const std::vector<std::uint64_t>& seeds);

struct AblationRow {
    std::string arm;
    std::size_t horizon = 0;
    bool diverged = false;
    std::string error;
    double test_mse = 0.0;
    double test_mae = 0.0;
    double initial_train_mse = 0.0;
};

struct AblationReport {
    std::vector<AblationRow> rows;  // horizon-major, then arm
};

// Trains every arm on the configured dataset, once per requested horizon.
// Arms default to the config's; horizons default to {config.horizon}.
AblationReport run_ablation(const ExperimentConfig& base,
                            std::vector<ArmSpec> arms = {},
                            std::vector<std::size_t> horizons = {});

// The loss-deletion arm set: full sql, sql without the RQF term (alpha=0),
// without outlier regularization (beta=gamma=0), without MAE (alpha=1), and
// plain mse.
std::vector<ArmSpec> default_loss_arms(const SqlHyperParams& hp);
// Multi-scale versus first-scale-only.
std::vector<ArmSpec> patching_arms(const MultiScaleConfig& multi);

std::string simulation_csv(const SimulationReport& report);
std::string ablation_csv(const AblationReport& report);

// Tidy long-format plot rows.
struct PlotPoint {
    std::string series_name;
    double x = 0.0;
    double y = 0.0;
};

std::string plot_data_csv(const std::vector<PlotPoint>& points);
// rqf/mse loss and gradient values over an error grid.
std::vector<PlotPoint> loss_curve_points(double c, double lo = -3.0, double hi = 3.0,
                                         std::size_t steps = 241);
std::vector<PlotPoint> history_points(const std::vector<EpochRecord>& history);
// Input, ground truth and model forecast of one window, for one variable.
std::vector<PlotPoint> forecast_points(const ModelParams& params,
                                       const SeriesWindow& window, std::size_t variable);

std::string theorem1_report_json(const Theorem1Report& report);
std::string theorem2_report_json(const Theorem2Report& report);

}  // namespace timesql
