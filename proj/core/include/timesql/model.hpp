#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "timesql/patching.hpp"
#include "timesql/types.hpp"

namespace timesql {

// Fully connected layer, weight stored row-major [out x in].
struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weight;
    std::vector<double> bias;
};

struct ModelConfig {
    std::size_t num_variables = 0;
    std::size_t lookback = 0;
    std::size_t horizon = 0;
    std::size_t hidden = 32;
    MultiScaleConfig scales;
    bool revin_affine = false;

    void validate() const;

    // Width of the per-variable feature vector fed to the head:
    // sum over scales of (patch count * hidden).
    std::size_t feature_width() const;
};

// All learnable weights.  The network is channel-independent: encoders and
// head are shared across variables, and each variable's prediction depends
// only on that variable's history.  Architecture per window:
//
//   normalize -> (optional affine) -> multi-scale patching
//     -> per-scale dense(S^(p,k) -> hidden) + ReLU on every patch
//     -> concatenate all patch features per variable
//     -> dense(feature_width -> horizon)
//     -> denormalize
//
// flatten()/unflatten() expose everything as one parameter vector in a fixed
// order: each encoder's weight then bias (scale order), head weight then
// bias, then the affine scale/shift when enabled.  The round-trip is bitwise.
struct ModelParams {
    ModelConfig config;
    std::vector<DenseLayer> encoders;  // one per scale, in = patch_len, out = hidden
    DenseLayer head;                   // in = feature_width, out = horizon
    std::optional<std::vector<double>> affine_scale;  // per variable, when enabled
    std::optional<std::vector<double>> affine_shift;

    std::size_t parameter_count() const;
    std::vector<double> flatten() const;
    void unflatten(std::span<const double> flat);

    // Throws when any stored array disagrees with the config's dimensions.
    void validate() const;

    static ModelParams zeros(const ModelConfig& config);
    // Layer weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]; the affine
    // pair starts at identity (scale 1, shift 0).
    static ModelParams random_init(const ModelConfig& config, std::uint64_t seed);
};

// Per-variable normalization statistics of one input window.
struct NormStats {
    std::vector<double> mean;
    std::vector<double> stddev;  // sqrt(population variance + 1e-5)
};

// Normalizes each variable row to mean 0 and (guarded) unit variance.  The
// variance uses denominator L and a 1e-5 guard under the square root, so
// constant rows map to zeros instead of dividing by zero.  Requires L >= 2.
std::pair<SeriesMatrix, NormStats> rev_in_normalize(const SeriesMatrix& window);

// Returns prediction * stddev + mean per variable; the exact inverse of
// rev_in_normalize for matching stats.
Matrix rev_in_denormalize(const Matrix& prediction, const NormStats& stats);

// Everything forward() caches so backward() can run without recomputation.
struct ForwardTrace {
    NormStats stats;
    Matrix normalized;                         // pre-affine normalized input, N x L
    std::vector<PatchTensor> patches;          // what the encoders consumed
    std::vector<std::vector<double>> enc_pre;  // per scale: [var][patch][hidden] pre-activations
    std::vector<std::vector<double>> enc_act;  // per scale: ReLU outputs, same layout
    Matrix features;                           // N x feature_width
    Matrix head_out;                           // normalized-space prediction, N x T
    Matrix prediction;                         // denormalized prediction, N x T
};

// Runs the full pipeline on one window (N x lookback).  Throws on any
// dimension mismatch, naming the offending layer.
ForwardTrace forward(const ModelParams& params, const SeriesMatrix& window);

// Reverse-mode gradient of sum(grad_output * prediction) with respect to
// every parameter, returned in flatten() order.  `trace` must come from
// forward() with the same params.
std::vector<double> backward(const ForwardTrace& trace, const Matrix& grad_output,
                             const ModelParams& params);

}  // namespace timesql
