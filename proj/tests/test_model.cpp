#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "timesql/checkpoint.hpp"
#include "timesql/model.hpp"
#include "timesql/rng.hpp"

using namespace timesql;

namespace {

SeriesMatrix random_window(std::size_t n_vars, std::size_t n_steps, std::uint64_t seed) {
    Rng rng(seed);
    Matrix values(n_vars, n_steps);
    for (double& v : values.data) v = rng.uniform(-4.0, 4.0);
    return make_series(std::move(values));
}

// Independent oracle: evaluates each output element directly from the raw
// window with explicit index arithmetic, no patch tensors, no caching.
Matrix straight_line_forward(const ModelParams& params, const SeriesMatrix& window) {
    const ModelConfig& cfg = params.config;
    const std::size_t n_vars = window.num_variables();
    const std::size_t length = window.num_steps();
    Matrix pred(n_vars, cfg.horizon);

    for (std::size_t n = 0; n < n_vars; ++n) {
        double mean = 0.0;
        for (std::size_t t = 0; t < length; ++t) mean += window.values.at(n, t);
        mean /= static_cast<double>(length);
        double var = 0.0;
        for (std::size_t t = 0; t < length; ++t) {
            var += (window.values.at(n, t) - mean) * (window.values.at(n, t) - mean);
        }
        var /= static_cast<double>(length);
        const double stddev = std::sqrt(var + 1e-5);

        const double g = cfg.revin_affine ? (*params.affine_scale)[n] : 1.0;
        const double b = cfg.revin_affine ? (*params.affine_shift)[n] : 0.0;

        for (std::size_t t = 0; t < cfg.horizon; ++t) {
            double head = params.head.bias[t];
            std::size_t feature = 0;
            for (std::size_t k = 0; k < cfg.scales.scales.size(); ++k) {
                const std::size_t plen = cfg.scales.scales[k].patch_len;
                const std::size_t pstride = cfg.scales.scales[k].stride;
                const std::size_t count = (length - plen) / pstride + 1;
                for (std::size_t i = 0; i < count; ++i) {
                    for (std::size_t h = 0; h < cfg.hidden; ++h) {
                        double z = params.encoders[k].bias[h];
                        for (std::size_t s = 0; s < plen; ++s) {
                            const double raw = window.values.at(n, i * pstride + s);
                            const double normalized = (raw - mean) / stddev;
                            z += params.encoders[k].weight[h * plen + s] *
                                 (normalized * g + b);
                        }
                        const double activation = z > 0.0 ? z : 0.0;
                        head += params.head.weight[t * params.head.in + feature] * activation;
                        ++feature;
                    }
                }
            }
            const double unaffine = cfg.revin_affine ? (head - b) / g : head;
            pred.at(n, t) = unaffine * stddev + mean;
        }
    }
    return pred;
}

ModelConfig small_config(std::size_t n_vars, std::size_t lookback, std::size_t horizon,
                         std::size_t hidden, MultiScaleConfig scales, bool affine = false) {
    ModelConfig cfg;
    cfg.num_variables = n_vars;
    cfg.lookback = lookback;
    cfg.horizon = horizon;
    cfg.hidden = hidden;
    cfg.scales = std::move(scales);
    cfg.revin_affine = affine;
    return cfg;
}

double fd_relative_gap(double analytic, double fd) {
    return std::abs(analytic - fd) / (std::abs(analytic) + std::abs(fd) + 1e-12);
}

}  // namespace

TEST_CASE("rev_in_normalize examples") {
    SUBCASE("constant row maps to zeros and keeps its mean") {
        Matrix values(1, 4, 5.0);
        const auto [normalized, stats] = rev_in_normalize(make_series(std::move(values)));
        CHECK(stats.mean[0] == 5.0);
        for (std::size_t t = 0; t < 4; ++t) {
            CHECK(std::abs(normalized.values.at(0, t)) < 1e-12);
        }
    }

    SUBCASE("two-point row") {
        Matrix values(1, 2);
        values.at(0, 0) = 0.0;
        values.at(0, 1) = 2.0;
        const auto [normalized, stats] = rev_in_normalize(make_series(std::move(values)));
        CHECK(stats.mean[0] == 1.0);
        // Population variance 1 plus the 1e-5 guard.
        CHECK(stats.stddev[0] == doctest::Approx(1.0).epsilon(1e-5));
        CHECK(normalized.values.at(0, 0) == doctest::Approx(-1.0).epsilon(1e-5));
        CHECK(normalized.values.at(0, 1) == doctest::Approx(1.0).epsilon(1e-5));
    }

    SUBCASE("round-trip identity") {
        const SeriesMatrix window = random_window(3, 17, 21);
        const auto [normalized, stats] = rev_in_normalize(window);
        const Matrix restored = rev_in_denormalize(normalized.values, stats);
        for (std::size_t i = 0; i < restored.data.size(); ++i) {
            const double want = window.values.data[i];
            CHECK(std::abs(restored.data[i] - want) <= 1e-6 * (1.0 + std::abs(want)));
        }
    }

    SUBCASE("zero prediction denormalizes to the mean") {
        const SeriesMatrix window = random_window(2, 9, 3);
        const auto [normalized, stats] = rev_in_normalize(window);
        const Matrix restored = rev_in_denormalize(Matrix(2, 5, 0.0), stats);
        for (std::size_t n = 0; n < 2; ++n) {
            for (std::size_t t = 0; t < 5; ++t) {
                CHECK(restored.at(n, t) == stats.mean[n]);
            }
        }
    }

    SUBCASE("stats shape mismatch") {
        const auto [normalized, stats] = rev_in_normalize(random_window(2, 9, 4));
        CHECK_THROWS_AS(rev_in_denormalize(Matrix(3, 5, 0.0), stats), std::invalid_argument);
    }

    SUBCASE("single-step window is rejected") {
        Matrix one(1, 1, 2.0);
        CHECK_THROWS_AS(rev_in_normalize(make_series(std::move(one))), std::invalid_argument);
    }
}

TEST_CASE("flat view round-trips bitwise") {
    const ModelConfig cfg = small_config(2, 16, 4, 3, {{{4, 2}, {8, 4}}}, true);
    ModelParams params = ModelParams::random_init(cfg, 77);
    (*params.affine_scale)[0] = 1.25;
    (*params.affine_shift)[1] = -0.5;

    const std::vector<double> flat = params.flatten();
    CHECK(flat.size() == params.parameter_count());

    ModelParams copy = ModelParams::zeros(cfg);
    copy.unflatten(flat);
    CHECK(copy.flatten() == flat);
    for (std::size_t k = 0; k < params.encoders.size(); ++k) {
        CHECK(copy.encoders[k].weight == params.encoders[k].weight);
        CHECK(copy.encoders[k].bias == params.encoders[k].bias);
    }
    CHECK(copy.head.weight == params.head.weight);
    CHECK(*copy.affine_scale == *params.affine_scale);
    CHECK(*copy.affine_shift == *params.affine_shift);

    std::vector<double> wrong(flat.size() + 1, 0.0);
    CHECK_THROWS_AS(copy.unflatten(wrong), std::invalid_argument);
}

TEST_CASE("zero parameters predict the per-variable input mean") {
    const ModelConfig cfg = small_config(3, 12, 5, 4, {{{4, 2}}});
    const ModelParams params = ModelParams::zeros(cfg);
    const SeriesMatrix window = random_window(3, 12, 9);
    const ForwardTrace trace = forward(params, window);

    for (std::size_t n = 0; n < 3; ++n) {
        double mean = 0.0;
        for (std::size_t t = 0; t < 12; ++t) mean += window.values.at(n, t);
        mean /= 12.0;
        for (std::size_t t = 0; t < 5; ++t) {
            CHECK(trace.prediction.at(n, t) == mean);
        }
    }
}

TEST_CASE("constant window propagates through an identity-like net") {
    const ModelConfig cfg = small_config(1, 4, 2, 1, {{{4, 1}}});
    ModelParams params = ModelParams::zeros(cfg);
    // The normalized constant window is all zeros; only the biases act.
    params.encoders[0].bias[0] = 1.0;   // feature = relu(1) = 1
    params.head.weight = {2.0, 2.0};    // one feature, two horizon steps
    params.head.bias = {0.0, 0.0};

    Matrix values(1, 4, 7.5);
    const ForwardTrace trace = forward(params, make_series(std::move(values)));
    // head output 2, stddev = sqrt(1e-5), prediction constant across steps.
    const double want = 2.0 * std::sqrt(1e-5) + 7.5;
    CHECK(trace.prediction.at(0, 0) == doctest::Approx(want).epsilon(1e-12));
    CHECK(trace.prediction.at(0, 0) == trace.prediction.at(0, 1));
}

TEST_CASE("forward matches the straight-line oracle") {
    // N=2, L=16, T=4 with a three-scale config, plus an affine variant.
    for (bool affine : {false, true}) {
        const ModelConfig cfg =
            small_config(2, 16, 4, 3, {{{4, 2}, {8, 4}, {16, 8}}}, affine);
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            ModelParams params = ModelParams::random_init(cfg, seed);
            if (affine) {
                Rng rng(seed + 1000);
                for (std::size_t n = 0; n < 2; ++n) {
                    (*params.affine_scale)[n] = rng.uniform(0.5, 1.5);
                    (*params.affine_shift)[n] = rng.uniform(-0.5, 0.5);
                }
            }
            const SeriesMatrix window = random_window(2, 16, seed + 50);
            const ForwardTrace trace = forward(params, window);
            const Matrix oracle = straight_line_forward(params, window);
            for (std::size_t i = 0; i < oracle.data.size(); ++i) {
                CHECK(std::abs(trace.prediction.data[i] - oracle.data[i]) < 1e-10);
            }
        }
    }
}

TEST_CASE("channel independence: variables do not leak into each other") {
    const ModelConfig cfg = small_config(4, 20, 6, 4, {{{5, 3}, {10, 5}}});
    const ModelParams params = ModelParams::random_init(cfg, 5);
    const SeriesMatrix base = random_window(4, 20, 6);

    SeriesMatrix perturbed = base;
    for (std::size_t t = 0; t < 20; ++t) perturbed.values.at(1, t) *= -3.0;

    const ForwardTrace a = forward(params, base);
    const ForwardTrace b = forward(params, perturbed);
    for (std::size_t n = 0; n < 4; ++n) {
        if (n == 1) continue;
        for (std::size_t t = 0; t < 6; ++t) {
            CHECK(a.prediction.at(n, t) == b.prediction.at(n, t));
        }
    }
}

TEST_CASE("forward dimension errors name the layer") {
    const ModelConfig cfg = small_config(2, 16, 4, 3, {{{4, 2}}});
    ModelParams params = ModelParams::random_init(cfg, 1);

    CHECK_THROWS_WITH_AS(forward(params, random_window(3, 16, 2)),
                         doctest::Contains("variables"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(forward(params, random_window(2, 15, 2)),
                         doctest::Contains("lookback"), std::invalid_argument);

    params.head.weight.pop_back();
    CHECK_THROWS_WITH_AS(forward(params, random_window(2, 16, 2)),
                         doctest::Contains("head"), std::invalid_argument);
}

TEST_CASE("backward: linearity in the upstream gradient") {
    const ModelConfig cfg = small_config(2, 16, 4, 3, {{{4, 2}, {8, 4}}});
    const ModelParams params = ModelParams::random_init(cfg, 3);
    const SeriesMatrix window = random_window(2, 16, 33);
    const ForwardTrace trace = forward(params, window);

    SUBCASE("zero upstream gradient gives a zero parameter gradient") {
        const auto grad = backward(trace, Matrix(2, 4, 0.0), params);
        for (double g : grad) CHECK(g == 0.0);
    }

    SUBCASE("doubling the upstream gradient doubles the parameter gradient") {
        Rng rng(8);
        Matrix upstream(2, 4);
        for (double& v : upstream.data) v = rng.uniform(-1.0, 1.0);
        Matrix doubled = upstream;
        for (double& v : doubled.data) v *= 2.0;

        const auto g1 = backward(trace, upstream, params);
        const auto g2 = backward(trace, doubled, params);
        REQUIRE(g1.size() == g2.size());
        for (std::size_t i = 0; i < g1.size(); ++i) {
            CHECK(g2[i] == 2.0 * g1[i]);
        }
    }

    SUBCASE("mismatched upstream gradient is rejected") {
        const Matrix bad(2, 7, 0.0);
        CHECK_THROWS_WITH_AS(backward(trace, bad, params), doctest::Contains("grad_output"),
                             std::invalid_argument);
    }
}

TEST_CASE("backward matches central finite differences over random configs") {
    Rng meta(2024);
    int accepted = 0;
    std::uint64_t seed = 0;
    double worst = 0.0;

    while (accepted < 20) {
        ++seed;
        const std::size_t n_vars = 1 + meta.below(3);
        const std::size_t lookback = 8 + meta.below(10);
        const std::size_t horizon = 1 + meta.below(4);
        const std::size_t hidden = 1 + meta.below(4);
        MultiScaleConfig scales;
        const std::size_t n_scales = 1 + meta.below(3);
        for (std::size_t k = 0; k < n_scales; ++k) {
            const std::size_t plen = 2 + meta.below(lookback - 2);
            const std::size_t pstride = 1 + meta.below(4);
            scales.scales.push_back({plen, pstride});
        }
        const bool affine = accepted % 2 == 1;
        const ModelConfig cfg =
            small_config(n_vars, lookback, horizon, hidden, scales, affine);

        ModelParams params = ModelParams::random_init(cfg, seed);
        if (affine) {
            Rng rng(seed + 999);
            for (std::size_t n = 0; n < n_vars; ++n) {
                (*params.affine_scale)[n] = rng.uniform(0.6, 1.4);
                (*params.affine_shift)[n] = rng.uniform(-0.4, 0.4);
            }
        }
        const SeriesMatrix window = random_window(n_vars, lookback, seed + 10000);
        const ForwardTrace trace = forward(params, window);

        // Skip draws with pre-activations close enough to the ReLU kink that
        // the finite-difference step could flip them.
        bool near_kink = false;
        for (const auto& pre : trace.enc_pre) {
            for (double z : pre) {
                if (std::abs(z) < 1e-3) near_kink = true;
            }
        }
        if (near_kink) continue;
        ++accepted;

        Rng grng(seed + 20000);
        Matrix upstream(n_vars, horizon);
        for (double& v : upstream.data) v = grng.uniform(-1.0, 1.0);

        const std::vector<double> analytic = backward(trace, upstream, params);
        std::vector<double> flat = params.flatten();
        const double h = 1e-5;
        ModelParams probe = params;
        for (std::size_t i = 0; i < flat.size(); ++i) {
            const double saved = flat[i];
            const auto objective = [&](double value) {
                flat[i] = value;
                probe.unflatten(flat);
                const ForwardTrace t2 = forward(probe, window);
                double sum = 0.0;
                for (std::size_t j = 0; j < upstream.data.size(); ++j) {
                    sum += upstream.data[j] * t2.prediction.data[j];
                }
                return sum;
            };
            const double fd = (objective(saved + h) - objective(saved - h)) / (2.0 * h);
            flat[i] = saved;

            // Dead units yield exactly zero on both routes; everything else
            // must agree tightly.
            if (std::abs(analytic[i]) + std::abs(fd) < 1e-9) continue;
            worst = std::max(worst, fd_relative_gap(analytic[i], fd));
        }
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("checkpoint round-trip and validation") {
    const auto path = std::filesystem::temp_directory_path() / "timesql_ckpt_test.tsq";
    const ModelConfig cfg = small_config(2, 16, 4, 3, {{{4, 2}, {8, 4}}}, true);
    ModelParams params = ModelParams::random_init(cfg, 11);
    (*params.affine_scale)[1] = 0.75;

    save_checkpoint(params, path);
    const ModelParams loaded = load_checkpoint(path);
    CHECK(loaded.flatten() == params.flatten());
    CHECK(loaded.config.scales == cfg.scales);
    CHECK(loaded.config.revin_affine == cfg.revin_affine);

    SUBCASE("foreign files are rejected") {
        std::ofstream out(path);
        out << "{\"format\":\"something-else\"}\n1\n2\n";
        out.close();
        CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("not a timesql"),
                             std::runtime_error);
    }

    SUBCASE("truncated parameter vectors are rejected") {
        save_checkpoint(params, path);
        std::ifstream in(path);
        std::string manifest;
        std::getline(in, manifest);
        in.close();
        std::ofstream out(path);
        out << manifest << "\n1.0\n2.0\n";
        out.close();
        CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("expected"),
                             std::runtime_error);
    }
    std::filesystem::remove(path);
}
