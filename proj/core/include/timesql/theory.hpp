#pragma once

#include <array>
#include <cstdint>
#include <cstddef>

namespace timesql {

// One Monte-Carlo draw for the noise-effect analysis.  `e` is the signed
// noiseless prediction error in the convention where the clean loss sees e
// and the label perturbed by `eps` makes the loss see e + eps (i.e. a clean
// label y = e against prediction 0 reproduces the same quantities through the
// loss functions themselves).
//
//   v_mse = |2*eps*e + eps^2| / e^2                    (loss-value effect, MSE)
//   v_rqf = c*|2*eps*e + eps^2| / (e^2*((e+eps)^2+c))  (loss-value effect, RQF)
//   v_m   = |eps/e|                                    (gradient effect, MSE)
//   v_r   = |(e+eps)(e^2+c)^2 - e((e+eps)^2+c)^2|
//           / (|e| * ((e+eps)^2+c)^2)                  (gradient effect, RQF)
struct NoiseEffectSample {
    double e = 0.0;
    double eps = 0.0;
    double c = 0.0;
    double v_mse = 0.0;
    double v_rqf = 0.0;
    double v_r = 0.0;
    double v_m = 0.0;
};

// Computes all four noise-effect quantities.  Throws for e == 0 (the
// normalization divides by the clean loss) and for c <= 0.
NoiseEffectSample noise_effect(double e, double eps, double c);

struct ValueRange {
    double lo = 0.0;
    double hi = 0.0;
};

struct Theorem1Report {
    std::size_t samples = 0;
    std::size_t violations = 0;        // samples with v_rqf > v_mse
    double worst_ratio = 0.0;          // max v_rqf / v_mse observed
    double max_identity_gap = 0.0;     // max |v_rqf/v_mse - c/(c+(e+eps)^2)|
    std::uint64_t seed = 0;
    NoiseEffectSample first_violation;
};

// Samples (e, eps, c) and checks that the noise effect on the RQF loss value
// never exceeds the effect on the MSE loss value.  e and eps are sampled
// uniformly (redrawing the measure-zero e == 0), c log-uniformly so both
// c << e^2 and c >> e^2 regimes are exercised.
Theorem1Report verify_theorem1(std::size_t num_samples, std::uint64_t seed,
                               ValueRange e_range = {-10.0, 10.0},
                               ValueRange eps_range = {-10.0, 10.0},
                               ValueRange c_range = {1e-6, 100.0});

// Sign strata of the constrained gradient comparison:
//   A: eps >= 2|e|, bracket >= 0      B: eps >= 2|e|, bracket < 0
//   C: eps <= -2|e|, bracket >= 0     D: eps <= -2|e|, bracket < 0
// where bracket = (e+eps)(e^2+c)^2 - e((e+eps)^2+c)^2.
struct Theorem2Report {
    std::size_t samples = 0;
    std::size_t violations = 0;              // constrained samples with v_r > v_m
    double worst_margin = 0.0;               // max v_r - v_m observed
    std::array<std::size_t, 4> stratum_counts{};  // A, B, C, D
    std::uint64_t seed = 0;
    NoiseEffectSample first_violation;

    // Search outside the |eps| >= 2|e| constraint: a sample with v_r > v_m
    // there shows the constraint is not vacuous.
    std::size_t outside_search_samples = 0;
    bool outside_counterexample_found = false;
    NoiseEffectSample outside_counterexample;
};

// Samples (e, eps, c) with |eps| >= 2|e| enforced and checks that the noise
// effect on the RQF gradient never exceeds the effect on the MSE gradient.
// Also runs a bounded random search in the unconstrained region |eps| < 2|e|
// for a sample violating v_r <= v_m.
Theorem2Report verify_theorem2(std::size_t num_samples, std::uint64_t seed);

}  // namespace timesql
