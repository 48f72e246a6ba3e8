#pragma once

#include <Eigen/Dense>
#include <vector>

namespace reclink {

struct LogisticFit {
    Eigen::VectorXd coef;
    Eigen::MatrixXd cov;  // inverse observed information
    int iterations = 0;
    bool converged = false;
    bool separation = false;  // a coefficient diverged and was capped
};

/// Logistic regression by iteratively reweighted least squares. `x` must
/// include the intercept column. Stops when the score's max-norm drops below
/// 1e-8 or after 50 iterations.
LogisticFit fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double coef_cap = 30.0);

double logistic_log_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& beta);
Eigen::VectorXd logistic_score(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& beta);

struct MIEstimate {
    double qbar = 0.0;     // combined estimate
    double ubar = 0.0;     // within-imputation variance
    double b = 0.0;        // between-imputation variance
    double t = 0.0;        // total variance
    double df = 0.0;       // degrees of freedom
    double ci_low = 0.0, ci_high = 0.0;
    int m = 0;
    bool df_capped = false;  // no between variance; df held at the cap
};

inline constexpr double kMaxDegreesOfFreedom = 1e6;

/// Rubin's combining rules with t-based intervals. Needs m >= 2.
MIEstimate rubin_combine(const std::vector<double>& estimates, const std::vector<double>& variances,
                         double level = 0.95);

}  // namespace reclink
