#include "timesql/losses.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace timesql {

namespace {

void require_positive_c(double c, const char* where) {
    if (!(c > 0.0) || !std::isfinite(c)) {
        std::ostringstream msg;
        msg << where << ": kernel width c must be strictly positive, got " << c;
        throw std::invalid_argument(msg.str());
    }
}

void require_same_shape(const Matrix& pred, const Matrix& target, const char* where) {
    if (!pred.same_shape(target)) {
        std::ostringstream msg;
        msg << where << ": shape mismatch: prediction " << pred.rows << "x" << pred.cols
            << " vs target " << target.rows << "x" << target.cols;
        throw std::invalid_argument(msg.str());
    }
    if (pred.rows == 0 || pred.cols == 0) {
        std::ostringstream msg;
        msg << where << ": empty prediction";
        throw std::invalid_argument(msg.str());
    }
}

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

void SqlHyperParams::validate() const {
    require_positive_c(c, "SqlHyperParams");
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw std::invalid_argument("SqlHyperParams: alpha must lie in [0,1]");
    }
    if (!(beta >= 0.0)) {
        throw std::invalid_argument("SqlHyperParams: beta must be nonnegative");
    }
    if (!(gamma >= 0.0)) {
        throw std::invalid_argument("SqlHyperParams: gamma must be nonnegative");
    }
}

double rqf_loss(double pred, double target, double c) {
    require_positive_c(c, "rqf_loss");
    const double e = pred - target;
    const double e2 = e * e;
    return e2 / (e2 + c);
}

double rqf_grad(double pred, double target, double c) {
    require_positive_c(c, "rqf_grad");
    const double e = pred - target;
    const double d = e * e + c;
    return 2.0 * c * e / (d * d);
}

double rqf_maclaurin(double error, double c, int order) {
    require_positive_c(c, "rqf_maclaurin");
    if (order < 1) {
        throw std::invalid_argument("rqf_maclaurin: order must be >= 1");
    }
    const double q = error * error / c;
    double term = q;
    double sum = 0.0;
    for (int i = 1; i <= order; ++i) {
        sum += (i % 2 == 1) ? term : -term;
        term *= q;
    }
    return sum;
}

LossReport sql_loss(const Matrix& pred, const Matrix& target, const SqlHyperParams& hp) {
    hp.validate();
    require_same_shape(pred, target, "sql_loss");

    const std::size_t count = pred.rows * pred.cols;
    const double inv_count = 1.0 / static_cast<double>(count);

    LossReport report;
    report.grad_wrt_prediction = Matrix(pred.rows, pred.cols);

    double rqf_sum = 0.0, mae_sum = 0.0, l1_sum = 0.0, l2_sum = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        const double x = pred.data[i];
        const double e = x - target.data[i];
        const double e2 = e * e;
        const double d = e2 + hp.c;

        rqf_sum += e2 / d;
        mae_sum += std::abs(e);
        l1_sum += std::abs(x);
        l2_sum += x * x;

        report.grad_wrt_prediction.data[i] =
            (hp.alpha * 2.0 * hp.c * e / (d * d) + (1.0 - hp.alpha) * sign(e) +
             hp.beta * sign(x) + 2.0 * hp.gamma * x) *
            inv_count;
    }

    report.rqf_term = rqf_sum * inv_count;
    report.mae_term = mae_sum * inv_count;
    report.or_l1_term = hp.beta * l1_sum * inv_count;
    report.or_l2_term = hp.gamma * l2_sum * inv_count;
    report.total = hp.alpha * report.rqf_term + (1.0 - hp.alpha) * report.mae_term +
                   report.or_l1_term + report.or_l2_term;
    return report;
}

LossReport mse_loss(const Matrix& pred, const Matrix& target) {
    require_same_shape(pred, target, "mse_loss");

    const std::size_t count = pred.rows * pred.cols;
    const double inv_count = 1.0 / static_cast<double>(count);

    LossReport report;
    report.grad_wrt_prediction = Matrix(pred.rows, pred.cols);

    double sum = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        const double e = pred.data[i] - target.data[i];
        sum += e * e;
        report.grad_wrt_prediction.data[i] = 2.0 * e * inv_count;
    }
    report.total = sum * inv_count;
    return report;
}

}  // namespace timesql
