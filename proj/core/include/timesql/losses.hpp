#pragma once

#include "timesql/types.hpp"

namespace timesql {

// Hyper-parameters of the smooth quadratic loss:
//   c      kernel width of the rational quadratic term, strictly positive
//   alpha  blend weight between the RQF and MAE terms, in [0, 1]
//   beta   L1 outlier-regularization weight on the prediction, >= 0
//   gamma  L2 outlier-regularization weight on the prediction, >= 0
struct SqlHyperParams {
    double c = 0.08;
    double alpha = 0.2;
    double beta = 0.05;
    double gamma = 0.05;

    void validate() const;

    // Preset used for short, small-sample series (weekly ILI-style data).
    static SqlHyperParams ili_preset() { return {100.0, 0.1, 0.0005, 0.0001}; }
};

// Loss value with its term breakdown and the exact gradient w.r.t. the
// prediction.  The terms are reported so that
//   total == alpha*rqf_term + (1-alpha)*mae_term + or_l1_term + or_l2_term
// holds; or_l1_term/or_l2_term already carry their beta/gamma weights.
struct LossReport {
    double total = 0.0;
    double rqf_term = 0.0;    // mean e^2/(e^2+c)
    double mae_term = 0.0;    // mean |e|
    double or_l1_term = 0.0;  // beta  * mean |pred|
    double or_l2_term = 0.0;  // gamma * mean pred^2
    Matrix grad_wrt_prediction;
};

// Rational quadratic loss of one element: e^2/(e^2+c) with e = pred - target.
// Bounded in [0, 1).
double rqf_loss(double pred, double target, double c);

// d rqf_loss / d pred = 2ce/(e^2+c)^2.  Odd in e; its magnitude peaks at
// |e| = sqrt(c/3) and decays toward zero for large errors.
double rqf_grad(double pred, double target, double c);

// Truncated Maclaurin expansion of the RQF loss in the error e:
// sum_{i=1..order} (-1)^(i-1) e^(2i)/c^i.  Converges for e^2 < c.
double rqf_maclaurin(double error, double c, int order);

// Smooth quadratic loss over an N x T prediction, reduced by mean over all
// N*T elements.  The gradient uses sign(0) = 0 at the MAE and L1 kinks.
LossReport sql_loss(const Matrix& pred, const Matrix& target,
                    const SqlHyperParams& hp);

// Mean squared error with gradient 2e/count.  Term breakdown fields are left
// zero; only total and the gradient are meaningful.
LossReport mse_loss(const Matrix& pred, const Matrix& target);

}  // namespace timesql
