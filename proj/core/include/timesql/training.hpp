#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "timesql/losses.hpp"
#include "timesql/model.hpp"

namespace timesql {

// Which objective the optimizer follows.  rqf_only and mae_only reuse the SQL
// machinery with alpha forced to 1/0 and the outlier regularization off.
enum class LossChoice { sql, mse, rqf_only, mae_only };

std::string to_string(LossChoice choice);
LossChoice loss_choice_from_string(const std::string& name);

struct TrainConfig {
    double learning_rate = 1e-4;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 100;
    // Consecutive validation epochs without improvement tolerated before
    // stopping; 0 disables early stopping.
    std::size_t patience = 10;
    LossChoice loss_choice = LossChoice::sql;
    SqlHyperParams hp;
    std::uint64_t rng_seed = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    void validate() const;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::size_t step = 0;
};

// One bias-corrected Adam update in place.  The state is lazily sized on the
// first call; afterwards shapes must agree.
void adam_step(std::vector<double>& params, std::span<const double> grad,
               AdamState& state, double learning_rate, double beta1, double beta2,
               double eps);

// The loss a given choice actually optimizes, on denormalized predictions.
LossReport training_loss(const Matrix& pred, const Matrix& target, LossChoice choice,
                         const SqlHyperParams& hp);

struct EvalMetrics {
    double mse = 0.0;
    double mae = 0.0;
    // Per forecast step, pooled over windows and variables.
    std::vector<double> per_horizon_mse;
    std::vector<double> per_horizon_mae;
};

// MSE/MAE over all elements of all windows, computed on denormalized
// predictions against the raw targets.
EvalMetrics evaluate(const ModelParams& params, const std::vector<SeriesWindow>& windows);

struct EpochRecord {
    std::size_t epoch = 0;       // 1-based
    double train_loss = 0.0;     // mean training loss over the epoch's windows
    std::optional<double> val_mse;
    std::optional<double> val_mae;
};

struct TrainResult {
    ModelParams params;  // parameters of the best validation epoch (final epoch when no val)
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    // Evaluation MSE of the freshly initialized model on the training windows,
    // before any update; equal-seed runs must agree on it exactly, which is
    // how experiment suites check that arms share their initialization.
    double initial_train_mse = 0.0;
};

// Minibatch Adam over the flat parameter vector.  Deterministic for a fixed
// (config, data) pair: initialization and batch order come from
// config.rng_seed, and gradients are accumulated in window order.  Early
// stopping tracks the validation MSE; a non-finite loss aborts with an error
// naming the epoch and batch.
TrainResult train(const ModelConfig& model_config,
                  const std::vector<SeriesWindow>& train_windows,
                  const std::vector<SeriesWindow>& val_windows, const TrainConfig& config);

// JSON lines, one record per epoch: {"epoch":..,"train_loss":..,"val_mse":..,"val_mae":..}
// (validation fields are null when there is no validation split).
std::string history_jsonl(const std::vector<EpochRecord>& history);

}  // namespace timesql
