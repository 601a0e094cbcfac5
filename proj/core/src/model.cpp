#include "timesql/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "timesql/rng.hpp"

namespace timesql {

namespace {

constexpr double kVarianceGuard = 1e-5;

[[noreturn]] void dimension_error(const std::string& where, const std::string& detail) {
    throw std::invalid_argument(where + ": dimension mismatch: " + detail);
}

}  // namespace

void ModelConfig::validate() const {
    if (num_variables == 0 || lookback == 0 || horizon == 0 || hidden == 0) {
        throw std::invalid_argument(
            "ModelConfig: num_variables, lookback, horizon and hidden must be positive");
    }
    if (lookback < 2) {
        throw std::invalid_argument("ModelConfig: lookback must be >= 2 for normalization");
    }
    scales.validate(lookback);
}

std::size_t ModelConfig::feature_width() const {
    std::size_t width = 0;
    for (const auto& scale : scales.scales) {
        width += patch_count(lookback, scale) * hidden;
    }
    return width;
}

std::size_t ModelParams::parameter_count() const {
    std::size_t count = 0;
    for (const auto& enc : encoders) count += enc.weight.size() + enc.bias.size();
    count += head.weight.size() + head.bias.size();
    if (affine_scale) count += affine_scale->size() + affine_shift->size();
    return count;
}

std::vector<double> ModelParams::flatten() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for (const auto& enc : encoders) {
        flat.insert(flat.end(), enc.weight.begin(), enc.weight.end());
        flat.insert(flat.end(), enc.bias.begin(), enc.bias.end());
    }
    flat.insert(flat.end(), head.weight.begin(), head.weight.end());
    flat.insert(flat.end(), head.bias.begin(), head.bias.end());
    if (affine_scale) {
        flat.insert(flat.end(), affine_scale->begin(), affine_scale->end());
        flat.insert(flat.end(), affine_shift->begin(), affine_shift->end());
    }
    return flat;
}

void ModelParams::unflatten(std::span<const double> flat) {
    if (flat.size() != parameter_count()) {
        std::ostringstream msg;
        msg << "ModelParams::unflatten: expected " << parameter_count()
            << " parameters, got " << flat.size();
        throw std::invalid_argument(msg.str());
    }
    std::size_t pos = 0;
    const auto take = [&](std::vector<double>& dst) {
        std::copy(flat.begin() + static_cast<std::ptrdiff_t>(pos),
                  flat.begin() + static_cast<std::ptrdiff_t>(pos + dst.size()), dst.begin());
        pos += dst.size();
    };
    for (auto& enc : encoders) {
        take(enc.weight);
        take(enc.bias);
    }
    take(head.weight);
    take(head.bias);
    if (affine_scale) {
        take(*affine_scale);
        take(*affine_shift);
    }
}

void ModelParams::validate() const {
    config.validate();
    if (encoders.size() != config.scales.scales.size()) {
        dimension_error("ModelParams", "one encoder per scale expected");
    }
    for (std::size_t k = 0; k < encoders.size(); ++k) {
        const auto& enc = encoders[k];
        const std::size_t want_in = config.scales.scales[k].patch_len;
        if (enc.in != want_in || enc.out != config.hidden ||
            enc.weight.size() != enc.in * enc.out || enc.bias.size() != enc.out) {
            std::ostringstream msg;
            msg << "encoder " << k << " expects " << want_in << " -> " << config.hidden;
            dimension_error("ModelParams", msg.str());
        }
    }
    const std::size_t want_features = config.feature_width();
    if (head.in != want_features || head.out != config.horizon ||
        head.weight.size() != head.in * head.out || head.bias.size() != head.out) {
        std::ostringstream msg;
        msg << "head expects " << want_features << " -> " << config.horizon;
        dimension_error("ModelParams", msg.str());
    }
    if (affine_scale.has_value() != config.revin_affine ||
        affine_shift.has_value() != config.revin_affine) {
        dimension_error("ModelParams", "affine arrays do not match revin_affine flag");
    }
    if (affine_scale &&
        (affine_scale->size() != config.num_variables ||
         affine_shift->size() != config.num_variables)) {
        dimension_error("ModelParams", "affine arrays must have one entry per variable");
    }
}

ModelParams ModelParams::zeros(const ModelConfig& config) {
    config.validate();
    ModelParams params;
    params.config = config;
    for (const auto& scale : config.scales.scales) {
        DenseLayer enc;
        enc.in = scale.patch_len;
        enc.out = config.hidden;
        enc.weight.assign(enc.in * enc.out, 0.0);
        enc.bias.assign(enc.out, 0.0);
        params.encoders.push_back(std::move(enc));
    }
    params.head.in = config.feature_width();
    params.head.out = config.horizon;
    params.head.weight.assign(params.head.in * params.head.out, 0.0);
    params.head.bias.assign(params.head.out, 0.0);
    if (config.revin_affine) {
        params.affine_scale = std::vector<double>(config.num_variables, 1.0);
        params.affine_shift = std::vector<double>(config.num_variables, 0.0);
    }
    return params;
}

ModelParams ModelParams::random_init(const ModelConfig& config, std::uint64_t seed) {
    ModelParams params = zeros(config);
    Rng rng(seed);
    const auto fill = [&](DenseLayer& layer) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
        for (double& w : layer.weight) w = rng.uniform(-bound, bound);
        for (double& b : layer.bias) b = rng.uniform(-bound, bound);
    };
    for (auto& enc : params.encoders) fill(enc);
    fill(params.head);
    return params;
}

std::pair<SeriesMatrix, NormStats> rev_in_normalize(const SeriesMatrix& window) {
    const std::size_t n_vars = window.num_variables();
    const std::size_t length = window.num_steps();
    if (length < 2) {
        throw std::invalid_argument("rev_in_normalize: window must contain at least 2 steps");
    }

    NormStats stats;
    stats.mean.resize(n_vars);
    stats.stddev.resize(n_vars);
    Matrix normalized(n_vars, length);

    const auto len = static_cast<double>(length);
    for (std::size_t n = 0; n < n_vars; ++n) {
        const auto row = window.values.row(n);
        double sum = 0.0;
        for (double x : row) sum += x;
        const double mean = sum / len;
        double sq = 0.0;
        for (double x : row) sq += (x - mean) * (x - mean);
        const double stddev = std::sqrt(sq / len + kVarianceGuard);
        stats.mean[n] = mean;
        stats.stddev[n] = stddev;
        for (std::size_t t = 0; t < length; ++t) {
            normalized.at(n, t) = (row[t] - mean) / stddev;
        }
    }

    SeriesMatrix out;
    out.values = std::move(normalized);
    out.variable_names = window.variable_names;
    out.interval_note = window.interval_note;
    return {std::move(out), std::move(stats)};
}

Matrix rev_in_denormalize(const Matrix& prediction, const NormStats& stats) {
    if (prediction.rows != stats.mean.size() || stats.mean.size() != stats.stddev.size()) {
        std::ostringstream msg;
        msg << "rev_in_denormalize: prediction has " << prediction.rows
            << " variables but stats cover " << stats.mean.size();
        throw std::invalid_argument(msg.str());
    }
    Matrix out(prediction.rows, prediction.cols);
    for (std::size_t n = 0; n < prediction.rows; ++n) {
        for (std::size_t t = 0; t < prediction.cols; ++t) {
            out.at(n, t) = prediction.at(n, t) * stats.stddev[n] + stats.mean[n];
        }
    }
    return out;
}

ForwardTrace forward(const ModelParams& params, const SeriesMatrix& window) {
    params.validate();
    const ModelConfig& cfg = params.config;
    if (window.num_variables() != cfg.num_variables) {
        std::ostringstream msg;
        msg << "input window has " << window.num_variables() << " variables, model expects "
            << cfg.num_variables;
        dimension_error("forward", msg.str());
    }
    if (window.num_steps() != cfg.lookback) {
        std::ostringstream msg;
        msg << "input window has " << window.num_steps() << " steps, model expects lookback "
            << cfg.lookback;
        dimension_error("forward", msg.str());
    }

    ForwardTrace trace;
    auto [normalized_series, stats] = rev_in_normalize(window);
    trace.stats = std::move(stats);
    trace.normalized = normalized_series.values;

    // Optional learnable affine applied on top of the plain normalization.
    SeriesMatrix encoder_input = std::move(normalized_series);
    if (cfg.revin_affine) {
        for (std::size_t n = 0; n < cfg.num_variables; ++n) {
            const double g = (*params.affine_scale)[n];
            const double b = (*params.affine_shift)[n];
            for (std::size_t t = 0; t < cfg.lookback; ++t) {
                encoder_input.values.at(n, t) = encoder_input.values.at(n, t) * g + b;
            }
        }
    }

    trace.patches = multi_patch(encoder_input, cfg.scales);

    const std::size_t n_vars = cfg.num_variables;
    const std::size_t hidden = cfg.hidden;
    const std::size_t n_scales = cfg.scales.scales.size();

    trace.enc_pre.resize(n_scales);
    trace.enc_act.resize(n_scales);
    trace.features = Matrix(n_vars, cfg.feature_width());

    std::size_t feature_offset = 0;
    for (std::size_t k = 0; k < n_scales; ++k) {
        const PatchTensor& patches = trace.patches[k];
        const DenseLayer& enc = params.encoders[k];
        const std::size_t n_patches = patches.num_patches;
        const std::size_t patch_len = patches.scale.patch_len;

        auto& pre = trace.enc_pre[k];
        auto& act = trace.enc_act[k];
        pre.resize(n_vars * n_patches * hidden);
        act.resize(pre.size());

        for (std::size_t n = 0; n < n_vars; ++n) {
            for (std::size_t i = 0; i < n_patches; ++i) {
                const auto patch_values = patches.patch_row(n, i);
                const std::size_t base = (n * n_patches + i) * hidden;
                for (std::size_t h = 0; h < hidden; ++h) {
                    const double* w = enc.weight.data() + h * patch_len;
                    double z = enc.bias[h];
                    for (std::size_t s = 0; s < patch_len; ++s) {
                        z += w[s] * patch_values[s];
                    }
                    pre[base + h] = z;
                    const double a = z > 0.0 ? z : 0.0;
                    act[base + h] = a;
                    trace.features.at(n, feature_offset + i * hidden + h) = a;
                }
            }
        }
        feature_offset += n_patches * hidden;
    }

    // Shared head maps each variable's concatenated features to the horizon.
    const DenseLayer& head = params.head;
    trace.head_out = Matrix(n_vars, cfg.horizon);
    for (std::size_t n = 0; n < n_vars; ++n) {
        const auto feat = trace.features.row(n);
        for (std::size_t t = 0; t < cfg.horizon; ++t) {
            const double* w = head.weight.data() + t * head.in;
            double z = head.bias[t];
            for (std::size_t f = 0; f < head.in; ++f) {
                z += w[f] * feat[f];
            }
            trace.head_out.at(n, t) = z;
        }
    }

    // Reverse the affine, then the normalization.
    Matrix unaffine = trace.head_out;
    if (cfg.revin_affine) {
        for (std::size_t n = 0; n < n_vars; ++n) {
            const double g = (*params.affine_scale)[n];
            const double b = (*params.affine_shift)[n];
            for (std::size_t t = 0; t < cfg.horizon; ++t) {
                unaffine.at(n, t) = (unaffine.at(n, t) - b) / g;
            }
        }
    }
    trace.prediction = rev_in_denormalize(unaffine, trace.stats);
    return trace;
}

std::vector<double> backward(const ForwardTrace& trace, const Matrix& grad_output,
                             const ModelParams& params) {
    params.validate();
    const ModelConfig& cfg = params.config;
    const std::size_t n_vars = cfg.num_variables;
    const std::size_t horizon = cfg.horizon;
    const std::size_t hidden = cfg.hidden;

    if (grad_output.rows != n_vars || grad_output.cols != horizon) {
        std::ostringstream msg;
        msg << "grad_output is " << grad_output.rows << "x" << grad_output.cols
            << ", model produces " << n_vars << "x" << horizon;
        dimension_error("backward", msg.str());
    }
    if (trace.prediction.rows != n_vars || trace.prediction.cols != horizon ||
        trace.normalized.rows != n_vars || trace.normalized.cols != cfg.lookback ||
        trace.patches.size() != cfg.scales.scales.size()) {
        dimension_error("backward", "trace does not match these params (stale trace?)");
    }

    ModelParams grads = ModelParams::zeros(cfg);
    // zeros() seeds the affine at identity so a zero network stays
    // invertible; as a gradient accumulator it must start at 0.
    if (grads.affine_scale) {
        std::fill(grads.affine_scale->begin(), grads.affine_scale->end(), 0.0);
    }

    // Denormalization: prediction = u * stddev + mean.
    Matrix d_head_out(n_vars, horizon);
    for (std::size_t n = 0; n < n_vars; ++n) {
        for (std::size_t t = 0; t < horizon; ++t) {
            d_head_out.at(n, t) = grad_output.at(n, t) * trace.stats.stddev[n];
        }
    }
    // Output side of the affine: u = (head_out - shift) / scale.
    if (cfg.revin_affine) {
        for (std::size_t n = 0; n < n_vars; ++n) {
            const double g = (*params.affine_scale)[n];
            const double b = (*params.affine_shift)[n];
            for (std::size_t t = 0; t < horizon; ++t) {
                const double du = d_head_out.at(n, t);
                const double u = (trace.head_out.at(n, t) - b) / g;
                (*grads.affine_scale)[n] += -du * u / g;
                (*grads.affine_shift)[n] += -du / g;
                d_head_out.at(n, t) = du / g;
            }
        }
    }

    // Head layer.
    const DenseLayer& head = params.head;
    Matrix d_features(n_vars, head.in);
    for (std::size_t n = 0; n < n_vars; ++n) {
        const auto feat = trace.features.row(n);
        for (std::size_t t = 0; t < horizon; ++t) {
            const double dz = d_head_out.at(n, t);
            if (dz == 0.0) continue;
            double* dw = grads.head.weight.data() + t * head.in;
            const double* w = head.weight.data() + t * head.in;
            for (std::size_t f = 0; f < head.in; ++f) {
                dw[f] += dz * feat[f];
                d_features.at(n, f) += dz * w[f];
            }
            grads.head.bias[t] += dz;
        }
    }

    // Encoders; input gradients are only materialized when the affine needs them.
    Matrix d_encoder_input;
    if (cfg.revin_affine) d_encoder_input = Matrix(n_vars, cfg.lookback);

    std::size_t feature_offset = 0;
    for (std::size_t k = 0; k < trace.patches.size(); ++k) {
        const PatchTensor& patches = trace.patches[k];
        const DenseLayer& enc = params.encoders[k];
        DenseLayer& d_enc = grads.encoders[k];
        const std::size_t n_patches = patches.num_patches;
        const std::size_t patch_len = patches.scale.patch_len;
        const std::size_t stride = patches.scale.stride;
        const auto& pre = trace.enc_pre[k];

        for (std::size_t n = 0; n < n_vars; ++n) {
            for (std::size_t i = 0; i < n_patches; ++i) {
                const auto patch_values = patches.patch_row(n, i);
                const std::size_t base = (n * n_patches + i) * hidden;
                for (std::size_t h = 0; h < hidden; ++h) {
                    // ReLU gate; the derivative at exactly 0 is taken as 0.
                    if (pre[base + h] <= 0.0) continue;
                    const double dz = d_features.at(n, feature_offset + i * hidden + h);
                    if (dz == 0.0) continue;
                    double* dw = d_enc.weight.data() + h * patch_len;
                    for (std::size_t s = 0; s < patch_len; ++s) {
                        dw[s] += dz * patch_values[s];
                    }
                    d_enc.bias[h] += dz;
                    if (cfg.revin_affine) {
                        const double* w = enc.weight.data() + h * patch_len;
                        for (std::size_t s = 0; s < patch_len; ++s) {
                            d_encoder_input.at(n, i * stride + s) += dz * w[s];
                        }
                    }
                }
            }
        }
        feature_offset += n_patches * hidden;
    }

    // Input side of the affine: encoder_input = normalized * scale + shift.
    if (cfg.revin_affine) {
        for (std::size_t n = 0; n < n_vars; ++n) {
            for (std::size_t t = 0; t < cfg.lookback; ++t) {
                const double d = d_encoder_input.at(n, t);
                (*grads.affine_scale)[n] += d * trace.normalized.at(n, t);
                (*grads.affine_shift)[n] += d;
            }
        }
    }

    return grads.flatten();
}

}  // namespace timesql
