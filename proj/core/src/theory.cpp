#include "timesql/theory.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "timesql/rng.hpp"

namespace timesql {

namespace {

// Two independently computed quantities whose exact values satisfy a <= b can
// land a few ulps apart in floating point; this slack is far below the 1e-10
// resolution the identity checks run at.
constexpr double kComparisonSlack = 1e-12;

double bracket_term(double e, double eps, double c) {
    const double clean = e * e + c;
    const double noisy = (e + eps) * (e + eps) + c;
    return (e + eps) * clean * clean - e * noisy * noisy;
}

}  // namespace

NoiseEffectSample noise_effect(double e, double eps, double c) {
    if (e == 0.0) {
        throw std::invalid_argument(
            "noise_effect: undefined normalization: e must be nonzero (the noise "
            "effect divides by the clean loss)");
    }
    if (!(c > 0.0)) {
        std::ostringstream msg;
        msg << "noise_effect: c must be strictly positive, got " << c;
        throw std::invalid_argument(msg.str());
    }

    NoiseEffectSample s;
    s.e = e;
    s.eps = eps;
    s.c = c;

    const double e2 = e * e;
    const double shift = std::abs(2.0 * eps * e + eps * eps);
    const double noisy = (e + eps) * (e + eps) + c;

    s.v_mse = shift / e2;
    s.v_rqf = c * shift / (e2 * noisy);
    s.v_m = std::abs(eps / e);
    s.v_r = std::abs(bracket_term(e, eps, c)) / (std::abs(e) * noisy * noisy);
    return s;
}

Theorem1Report verify_theorem1(std::size_t num_samples, std::uint64_t seed,
                               ValueRange e_range, ValueRange eps_range,
                               ValueRange c_range) {
    if (!(c_range.lo > 0.0)) {
        throw std::invalid_argument("verify_theorem1: c range must be strictly positive");
    }
    Rng rng(seed);
    Theorem1Report report;
    report.seed = seed;
    report.samples = num_samples;

    for (std::size_t i = 0; i < num_samples; ++i) {
        double e = rng.uniform(e_range.lo, e_range.hi);
        while (e == 0.0) e = rng.uniform(e_range.lo, e_range.hi);
        const double eps = rng.uniform(eps_range.lo, eps_range.hi);
        const double c = rng.log_uniform(c_range.lo, c_range.hi);

        const NoiseEffectSample s = noise_effect(e, eps, c);
        if (s.v_rqf > s.v_mse * (1.0 + kComparisonSlack)) {
            if (report.violations == 0) report.first_violation = s;
            ++report.violations;
        }
        if (s.v_mse > 0.0) {
            const double ratio = s.v_rqf / s.v_mse;
            if (ratio > report.worst_ratio) report.worst_ratio = ratio;
            const double closed_form = c / (c + (e + eps) * (e + eps));
            const double gap = std::abs(ratio - closed_form);
            if (gap > report.max_identity_gap) report.max_identity_gap = gap;
        }
    }
    return report;
}

Theorem2Report verify_theorem2(std::size_t num_samples, std::uint64_t seed) {
    Rng rng(seed);
    Theorem2Report report;
    report.seed = seed;
    report.samples = num_samples;
    report.worst_margin = -std::numeric_limits<double>::infinity();

    for (std::size_t i = 0; i < num_samples; ++i) {
        double e = rng.uniform(-5.0, 5.0);
        while (e == 0.0) e = rng.uniform(-5.0, 5.0);
        // |eps| >= 2|e|, both signs covered so all four strata occur.
        const double magnitude = 2.0 * std::abs(e) * (1.0 + rng.uniform(0.0, 4.0));
        const double eps = (rng.uniform() < 0.5) ? magnitude : -magnitude;
        const double c = rng.log_uniform(1e-4, 100.0);

        const NoiseEffectSample s = noise_effect(e, eps, c);
        const bool positive_eps = eps >= 2.0 * std::abs(e);
        const bool nonneg_bracket = bracket_term(e, eps, c) >= 0.0;
        const std::size_t stratum =
            positive_eps ? (nonneg_bracket ? 0 : 1) : (nonneg_bracket ? 2 : 3);
        ++report.stratum_counts[stratum];

        const double margin = s.v_r - s.v_m;
        if (margin > report.worst_margin) report.worst_margin = margin;
        if (s.v_r > s.v_m + kComparisonSlack * std::max(1.0, s.v_m)) {
            if (report.violations == 0) report.first_violation = s;
            ++report.violations;
        }
    }

    // Show the constraint is not vacuous: look for v_r > v_m with |eps| < 2|e|.
    const std::size_t search_budget = 100000;
    for (std::size_t i = 0; i < search_budget; ++i) {
        ++report.outside_search_samples;
        double e = rng.uniform(-5.0, 5.0);
        while (e == 0.0) e = rng.uniform(-5.0, 5.0);
        const double eps = rng.uniform(-1.0, 1.0) * 2.0 * std::abs(e) * 0.999;
        const double c = rng.log_uniform(1e-4, 100.0);

        const NoiseEffectSample s = noise_effect(e, eps, c);
        if (s.v_r > s.v_m * (1.0 + 1e-9) + 1e-9) {
            report.outside_counterexample_found = true;
            report.outside_counterexample = s;
            break;
        }
    }
    return report;
}

}  // namespace timesql
