#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "timesql/rng.hpp"
#include "timesql/training.hpp"

using namespace timesql;

namespace {

// Textbook Adam, written independently: moments and corrections computed per
// coordinate with its own loop structure and long-double accumulation.
struct ReferenceAdam {
    std::vector<long double> m, v;
    long double beta1, beta2, eps, lr;
    int t = 0;

    ReferenceAdam(std::size_t n, double lr_, double b1, double b2, double eps_)
        : m(n, 0.0L), v(n, 0.0L), beta1(b1), beta2(b2), eps(eps_), lr(lr_) {}

    void step(std::vector<double>& params, const std::vector<double>& grad) {
        ++t;
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0L - beta1) * static_cast<long double>(grad[i]);
            v[i] = beta2 * v[i] +
                   (1.0L - beta2) * static_cast<long double>(grad[i]) * grad[i];
            const long double m_hat =
                m[i] / (1.0L - std::pow(beta1, static_cast<long double>(t)));
            const long double v_hat =
                v[i] / (1.0L - std::pow(beta2, static_cast<long double>(t)));
            params[i] = static_cast<double>(params[i] - lr * m_hat / (std::sqrt(v_hat) + eps));
        }
    }
};

ModelConfig tiny_model(std::size_t n_vars = 1, std::size_t lookback = 16,
                       std::size_t horizon = 4) {
    ModelConfig cfg;
    cfg.num_variables = n_vars;
    cfg.lookback = lookback;
    cfg.horizon = horizon;
    cfg.hidden = 8;
    cfg.scales.scales = {{4, 2}, {8, 4}};
    return cfg;
}

std::vector<SeriesWindow> sine_windows(std::size_t n_vars, std::size_t n_steps,
                                       std::size_t lookback, std::size_t horizon,
                                       std::uint64_t seed, double noise = 0.0) {
    Rng rng(seed);
    Matrix values(n_vars, n_steps);
    for (std::size_t n = 0; n < n_vars; ++n) {
        for (std::size_t t = 0; t < n_steps; ++t) {
            values.at(n, t) = std::sin(0.37 * static_cast<double>(t) + 0.5 * static_cast<double>(n)) +
                              noise * rng.normal();
        }
    }
    return make_windows(make_series(std::move(values)), lookback, horizon, 1);
}

}  // namespace

TEST_CASE("adam_step basics") {
    std::vector<double> params{1.0, -2.0, 3.0};
    AdamState state;

    SUBCASE("zero gradient leaves parameters untouched, advances the step") {
        const std::vector<double> zero(3, 0.0);
        adam_step(params, zero, state, 0.1, 0.9, 0.999, 1e-8);
        CHECK(params == std::vector<double>{1.0, -2.0, 3.0});
        CHECK(state.step == 1);
    }

    SUBCASE("first bias-corrected step has magnitude close to the learning rate") {
        // m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps).
        for (double g : {1e-4, 0.5, 3.0, -7.0}) {
            std::vector<double> p{0.0};
            AdamState s;
            const std::vector<double> grad{g};
            adam_step(p, grad, s, 0.01, 0.9, 0.999, 1e-8);
            CHECK(std::abs(p[0]) == doctest::Approx(0.01).epsilon(1e-4));
            CHECK(std::signbit(p[0]) != std::signbit(g));
        }
    }

    SUBCASE("shape mismatch is rejected") {
        const std::vector<double> short_grad(2, 1.0);
        CHECK_THROWS_AS(adam_step(params, short_grad, state, 0.1, 0.9, 0.999, 1e-8),
                        std::invalid_argument);
    }
}

TEST_CASE("adam matches an independent reference over 100 steps") {
    Rng rng(17);
    const std::size_t n = 24;
    std::vector<double> ours(n), theirs(n);
    for (std::size_t i = 0; i < n; ++i) ours[i] = theirs[i] = rng.uniform(-1.0, 1.0);

    AdamState state;
    ReferenceAdam reference(n, 3e-3, 0.9, 0.999, 1e-8);
    for (int step = 0; step < 100; ++step) {
        std::vector<double> grad(n);
        for (double& g : grad) g = rng.uniform(-2.0, 2.0);
        adam_step(ours, grad, state, 3e-3, 0.9, 0.999, 1e-8);
        reference.step(theirs, grad);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(std::abs(ours[i] - theirs[i]) < 1e-10);
        }
    }
}

TEST_CASE("training_loss routes the choices") {
    Rng rng(3);
    Matrix pred(2, 3), target(2, 3);
    for (double& v : pred.data) v = rng.uniform(-2.0, 2.0);
    for (double& v : target.data) v = rng.uniform(-2.0, 2.0);
    const SqlHyperParams hp;

    const LossReport as_mse = training_loss(pred, target, LossChoice::mse, hp);
    CHECK(as_mse.total == mse_loss(pred, target).total);
    CHECK(as_mse.grad_wrt_prediction.data == mse_loss(pred, target).grad_wrt_prediction.data);

    const LossReport as_sql = training_loss(pred, target, LossChoice::sql, hp);
    CHECK(as_sql.total == sql_loss(pred, target, hp).total);
    // The two objectives really differ on this batch.
    CHECK(as_sql.grad_wrt_prediction.data != as_mse.grad_wrt_prediction.data);

    const LossReport as_rqf = training_loss(pred, target, LossChoice::rqf_only, hp);
    const SqlHyperParams rqf_hp{hp.c, 1.0, 0.0, 0.0};
    CHECK(as_rqf.total == sql_loss(pred, target, rqf_hp).total);

    const LossReport as_mae = training_loss(pred, target, LossChoice::mae_only, hp);
    const SqlHyperParams mae_hp{hp.c, 0.0, 0.0, 0.0};
    CHECK(as_mae.total == sql_loss(pred, target, mae_hp).total);

    CHECK(to_string(LossChoice::rqf_only) == "rqf");
    CHECK(loss_choice_from_string("mae") == LossChoice::mae_only);
    CHECK_THROWS_AS(loss_choice_from_string("dtw"), std::invalid_argument);
}

TEST_CASE("evaluate") {
    SUBCASE("zero model on constant series is a perfect predictor") {
        // Constant input rows make the zero network predict the constant, and
        // the targets equal it too.
        Matrix values(2, 30);
        for (std::size_t t = 0; t < 30; ++t) {
            values.at(0, t) = 2.5;
            values.at(1, t) = -1.0;
        }
        const auto windows = make_windows(make_series(std::move(values)), 16, 4, 1);
        const ModelParams params = ModelParams::zeros(tiny_model(2));
        const EvalMetrics metrics = evaluate(params, windows);
        CHECK(metrics.mse == 0.0);
        CHECK(metrics.mae == 0.0);
    }

    SUBCASE("variance identity on a zero-mean fixture") {
        // Targets are standard normal and independent of the input window, so
        // a mean predictor scores mse close to 1.
        Rng rng(11);
        Matrix values(1, 4000);
        for (double& v : values.data) v = rng.normal();
        const auto windows = make_windows(make_series(std::move(values)), 16, 4, 4);
        const ModelParams params = ModelParams::zeros(tiny_model(1));
        const EvalMetrics metrics = evaluate(params, windows);
        CHECK(metrics.mse == doctest::Approx(1.0).epsilon(0.05));
    }

    SUBCASE("pooled mae^2 never exceeds mse, per-horizon breakdown averages out") {
        const auto windows = sine_windows(2, 200, 16, 4, 5, 0.3);
        const ModelParams params = ModelParams::random_init(tiny_model(2), 1);
        const EvalMetrics metrics = evaluate(params, windows);
        CHECK(metrics.mae * metrics.mae <= metrics.mse + 1e-15);
        REQUIRE(metrics.per_horizon_mse.size() == 4);
        double mse_mean = 0.0;
        for (double v : metrics.per_horizon_mse) mse_mean += v;
        CHECK(mse_mean / 4.0 == doctest::Approx(metrics.mse).epsilon(1e-12));
    }

    SUBCASE("empty window set is rejected") {
        const ModelParams params = ModelParams::zeros(tiny_model(1));
        CHECK_THROWS_AS(evaluate(params, {}), std::invalid_argument);
    }
}

TEST_CASE("lr = 0 leaves the parameters at their initialization") {
    const auto windows = sine_windows(1, 60, 16, 4, 2);
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.max_epochs = 3;
    cfg.batch_size = 8;
    cfg.rng_seed = 4;
    const TrainResult result = train(tiny_model(), windows, {}, cfg);
    const ModelParams init = ModelParams::random_init(tiny_model(), 4);
    CHECK(result.params.flatten() == init.flatten());
    CHECK(result.history.size() == 3);
}

TEST_CASE("a single window can be overfit to near zero loss") {
    const auto windows = sine_windows(1, 20, 16, 4, 7);
    REQUIRE(windows.size() == 1);
    TrainConfig cfg;
    cfg.learning_rate = 3e-3;
    cfg.batch_size = 1;
    cfg.max_epochs = 2000;
    cfg.patience = 0;
    cfg.loss_choice = LossChoice::mse;
    cfg.rng_seed = 0;
    const TrainResult result = train(tiny_model(), windows, {}, cfg);
    CHECK(result.history.back().train_loss < 1e-3);
}

TEST_CASE("training is deterministic for a fixed seed") {
    const auto windows = sine_windows(2, 120, 16, 4, 9, 0.2);
    const std::vector<SeriesWindow> val(windows.end() - 10, windows.end());
    const std::vector<SeriesWindow> tr(windows.begin(), windows.end() - 10);

    TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.batch_size = 16;
    cfg.max_epochs = 5;
    cfg.rng_seed = 123;

    const TrainResult a = train(tiny_model(2), tr, val, cfg);
    const TrainResult b = train(tiny_model(2), tr, val, cfg);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].train_loss == b.history[i].train_loss);
        CHECK(*a.history[i].val_mse == *b.history[i].val_mse);
    }
    CHECK(a.params.flatten() == b.params.flatten());
    CHECK(a.initial_train_mse == b.initial_train_mse);

    // A different seed trains differently.
    cfg.rng_seed = 124;
    const TrainResult c = train(tiny_model(2), tr, val, cfg);
    CHECK(c.history.front().train_loss != a.history.front().train_loss);
}

TEST_CASE("early stopping returns the best validation epoch") {
    const auto windows = sine_windows(1, 150, 16, 4, 13, 0.4);
    const std::vector<SeriesWindow> val(windows.end() - 20, windows.end());
    const std::vector<SeriesWindow> tr(windows.begin(), windows.end() - 20);

    TrainConfig cfg;
    cfg.learning_rate = 5e-3;
    cfg.batch_size = 16;
    cfg.max_epochs = 40;
    cfg.patience = 3;
    cfg.rng_seed = 5;

    const TrainResult result = train(tiny_model(), tr, val, cfg);

    // Replay the history: best_epoch must be the argmin of val_mse.
    std::size_t argmin = 0;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : result.history) {
        if (*r.val_mse < best) {
            best = *r.val_mse;
            argmin = r.epoch;
        }
    }
    CHECK(result.best_epoch == argmin);
    // And the returned parameters reproduce exactly that score.
    CHECK(evaluate(result.params, val).mse == best);
    CHECK(result.history.size() <= 40);
}

TEST_CASE("divergence aborts with epoch and batch in the message") {
    const auto windows = sine_windows(1, 60, 16, 4, 21);
    TrainConfig cfg;
    cfg.learning_rate = 1e155;  // drives predictions to overflow within a few steps
    cfg.batch_size = 4;
    cfg.max_epochs = 50;
    cfg.rng_seed = 2;
    cfg.loss_choice = LossChoice::mse;
    CHECK_THROWS_WITH_AS(train(tiny_model(), windows, {}, cfg),
                         doctest::Contains("epoch"), std::runtime_error);
}

TEST_CASE("history serializes to JSON lines") {
    std::vector<EpochRecord> history;
    history.push_back({1, 0.5, 0.25, 0.4});
    history.push_back({2, 0.125, std::nullopt, std::nullopt});
    const std::string jsonl = history_jsonl(history);
    CHECK(jsonl ==
          "{\"epoch\":1,\"train_loss\":0.5,\"val_mse\":0.25,\"val_mae\":0.40000000000000002}\n"
          "{\"epoch\":2,\"train_loss\":0.125,\"val_mse\":null,\"val_mae\":null}\n");
}
