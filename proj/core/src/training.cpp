#include "timesql/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "timesql/rng.hpp"

namespace timesql {

std::string to_string(LossChoice choice) {
    switch (choice) {
        case LossChoice::sql: return "sql";
        case LossChoice::mse: return "mse";
        case LossChoice::rqf_only: return "rqf";
        case LossChoice::mae_only: return "mae";
    }
    return "unknown";
}

LossChoice loss_choice_from_string(const std::string& name) {
    if (name == "sql") return LossChoice::sql;
    if (name == "mse") return LossChoice::mse;
    if (name == "rqf" || name == "rqf_only") return LossChoice::rqf_only;
    if (name == "mae" || name == "mae_only") return LossChoice::mae_only;
    throw std::invalid_argument("unknown loss choice '" + name +
                                "' (expected sql, mse, rqf or mae)");
}

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw std::invalid_argument("TrainConfig: learning_rate must be finite and >= 0");
    }
    if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be positive");
    if (max_epochs == 0) throw std::invalid_argument("TrainConfig: max_epochs must be positive");
    if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0)) {
        throw std::invalid_argument("TrainConfig: adam betas must lie in (0,1)");
    }
    if (!(adam_eps > 0.0)) throw std::invalid_argument("TrainConfig: adam_eps must be positive");
    hp.validate();
}

void adam_step(std::vector<double>& params, std::span<const double> grad,
               AdamState& state, double learning_rate, double beta1, double beta2,
               double eps) {
    if (grad.size() != params.size()) {
        std::ostringstream msg;
        msg << "adam_step: gradient has " << grad.size() << " entries for "
            << params.size() << " parameters";
        throw std::invalid_argument(msg.str());
    }
    if (state.m.empty() && state.v.empty() && state.step == 0) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size() || state.v.size() != params.size()) {
        throw std::invalid_argument("adam_step: moment vectors do not match the parameters");
    }

    state.step += 1;
    const auto t = static_cast<double>(state.step);
    const double bias1 = 1.0 - std::pow(beta1, t);
    const double bias2 = 1.0 - std::pow(beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grad[i];
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grad[i] * grad[i];
        const double m_hat = state.m[i] / bias1;
        const double v_hat = state.v[i] / bias2;
        params[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + eps);
    }
}

LossReport training_loss(const Matrix& pred, const Matrix& target, LossChoice choice,
                         const SqlHyperParams& hp) {
    switch (choice) {
        case LossChoice::mse:
            return mse_loss(pred, target);
        case LossChoice::sql:
            return sql_loss(pred, target, hp);
        case LossChoice::rqf_only: {
            SqlHyperParams pure = hp;
            pure.alpha = 1.0;
            pure.beta = 0.0;
            pure.gamma = 0.0;
            return sql_loss(pred, target, pure);
        }
        case LossChoice::mae_only: {
            SqlHyperParams pure = hp;
            pure.alpha = 0.0;
            pure.beta = 0.0;
            pure.gamma = 0.0;
            return sql_loss(pred, target, pure);
        }
    }
    throw std::logic_error("training_loss: unhandled loss choice");
}

EvalMetrics evaluate(const ModelParams& params, const std::vector<SeriesWindow>& windows) {
    if (windows.empty()) {
        throw std::invalid_argument("evaluate: no windows given");
    }
    const std::size_t horizon = params.config.horizon;
    EvalMetrics metrics;
    std::vector<double> sq_by_step(horizon, 0.0);
    std::vector<double> abs_by_step(horizon, 0.0);
    std::size_t rows_seen = 0;

    for (const SeriesWindow& window : windows) {
        const ForwardTrace trace = forward(params, window.input);
        if (window.target.num_steps() != horizon ||
            window.target.num_variables() != params.config.num_variables) {
            std::ostringstream msg;
            msg << "evaluate: target is " << window.target.num_variables() << "x"
                << window.target.num_steps() << ", model produces "
                << params.config.num_variables << "x" << horizon;
            throw std::invalid_argument(msg.str());
        }
        for (std::size_t n = 0; n < trace.prediction.rows; ++n) {
            for (std::size_t t = 0; t < horizon; ++t) {
                const double e = trace.prediction.at(n, t) - window.target.values.at(n, t);
                sq_by_step[t] += e * e;
                abs_by_step[t] += std::abs(e);
            }
            ++rows_seen;
        }
    }

    const auto per_step = static_cast<double>(rows_seen);
    metrics.per_horizon_mse.resize(horizon);
    metrics.per_horizon_mae.resize(horizon);
    double sq_total = 0.0, abs_total = 0.0;
    for (std::size_t t = 0; t < horizon; ++t) {
        metrics.per_horizon_mse[t] = sq_by_step[t] / per_step;
        metrics.per_horizon_mae[t] = abs_by_step[t] / per_step;
        sq_total += sq_by_step[t];
        abs_total += abs_by_step[t];
    }
    const auto count = per_step * static_cast<double>(horizon);
    metrics.mse = sq_total / count;
    metrics.mae = abs_total / count;
    return metrics;
}

TrainResult train(const ModelConfig& model_config,
                  const std::vector<SeriesWindow>& train_windows,
                  const std::vector<SeriesWindow>& val_windows, const TrainConfig& config) {
    config.validate();
    model_config.validate();
    if (train_windows.empty()) {
        throw std::invalid_argument("train: training split has no windows");
    }

    ModelParams params = ModelParams::random_init(model_config, config.rng_seed);
    std::vector<double> flat = params.flatten();
    AdamState adam;

    TrainResult result;
    result.initial_train_mse = evaluate(params, train_windows).mse;

    const bool has_val = !val_windows.empty();
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<double> best_flat = flat;
    std::size_t best_epoch = 0;
    std::size_t epochs_without_improvement = 0;

    std::vector<std::size_t> order(train_windows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(config.rng_seed, /*stream=*/1);

    std::vector<double> batch_grad(flat.size());

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            std::fill(batch_grad.begin(), batch_grad.end(), 0.0);

            for (std::size_t pos = start; pos < end; ++pos) {
                const SeriesWindow& window = train_windows[order[pos]];
                const ForwardTrace trace = forward(params, window.input);
                const LossReport report = training_loss(
                    trace.prediction, window.target.values, config.loss_choice, config.hp);
                if (!std::isfinite(report.total)) {
                    std::ostringstream msg;
                    msg << "train: diverged: non-finite loss at epoch " << epoch
                        << ", batch " << batch_index << " (window " << order[pos] << ")";
                    throw std::runtime_error(msg.str());
                }
                loss_sum += report.total;
                const std::vector<double> grad =
                    backward(trace, report.grad_wrt_prediction, params);
                for (std::size_t i = 0; i < batch_grad.size(); ++i) {
                    batch_grad[i] += grad[i];
                }
            }

            const double inv_batch = 1.0 / static_cast<double>(end - start);
            for (double& g : batch_grad) g *= inv_batch;
            adam_step(flat, batch_grad, adam, config.learning_rate, config.adam_beta1,
                      config.adam_beta2, config.adam_eps);
            params.unflatten(flat);
            ++batch_index;
        }

        EpochRecord record;
        record.epoch = epoch;
        record.train_loss = loss_sum / static_cast<double>(order.size());

        if (has_val) {
            const EvalMetrics val = evaluate(params, val_windows);
            record.val_mse = val.mse;
            record.val_mae = val.mae;
            if (val.mse < best_val) {
                best_val = val.mse;
                best_flat = flat;
                best_epoch = epoch;
                epochs_without_improvement = 0;
            } else {
                ++epochs_without_improvement;
            }
        }
        result.history.push_back(record);

        if (has_val && config.patience > 0 &&
            epochs_without_improvement >= config.patience) {
            break;
        }
    }

    if (has_val && best_epoch > 0) {
        params.unflatten(best_flat);
        result.best_epoch = best_epoch;
    } else {
        result.best_epoch = result.history.size();
    }
    result.params = std::move(params);
    return result;
}

std::string history_jsonl(const std::vector<EpochRecord>& history) {
    std::string out;
    char buf[96];
    for (const EpochRecord& r : history) {
        out += "{\"epoch\":" + std::to_string(r.epoch);
        std::snprintf(buf, sizeof(buf), ",\"train_loss\":%.17g", r.train_loss);
        out += buf;
        if (r.val_mse) {
            std::snprintf(buf, sizeof(buf), ",\"val_mse\":%.17g,\"val_mae\":%.17g",
                          *r.val_mse, *r.val_mae);
            out += buf;
        } else {
            out += ",\"val_mse\":null,\"val_mae\":null";
        }
        out += "}\n";
    }
    return out;
}

}  // namespace timesql
