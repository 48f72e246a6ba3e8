#include "reclink/mi_analysis.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <numeric>

#include "reclink/errors.hpp"

namespace reclink {

namespace {

Eigen::VectorXd fitted(const Eigen::MatrixXd& x, const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = x * beta;
    return eta.unaryExpr([](double e) { return 1.0 / (1.0 + std::exp(-e)); });
}

}  // namespace

double logistic_log_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = x * beta;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
        // log(1 + e^eta) without overflow.
        const double e = eta[i];
        const double softplus = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
        ll += y[i] * e - softplus;
    }
    return ll;
}

Eigen::VectorXd logistic_score(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& beta) {
    return x.transpose() * (y - fitted(x, beta));
}

LogisticFit fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double coef_cap) {
    const Eigen::Index n = x.rows(), p = x.cols();
    if (y.size() != n) throw ValidationError("outcome length differs from design rows");
    if (n <= p) throw ValidationError("logistic fit needs more rows than columns");
    for (Eigen::Index i = 0; i < n; ++i)
        if (y[i] != 0.0 && y[i] != 1.0) throw ValidationError("logistic outcome must be 0/1");

    LogisticFit fit;
    fit.coef = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd info(p, p);
    for (int it = 0; it < 50; ++it) {
        const Eigen::VectorXd mu = fitted(x, fit.coef);
        const Eigen::VectorXd w = (mu.array() * (1.0 - mu.array())).max(1e-300).matrix();
        const Eigen::VectorXd score = x.transpose() * (y - mu);
        if (score.lpNorm<Eigen::Infinity>() < 1e-8) {
            fit.converged = true;
            break;
        }
        info = x.transpose() * w.asDiagonal() * x;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        if (ldlt.info() != Eigen::Success) throw NumericalError("logistic information matrix is singular");
        const Eigen::VectorXd step = ldlt.solve(score);
        // Step halving keeps the log-likelihood from decreasing.
        const double ll0 = logistic_log_likelihood(x, y, fit.coef);
        double scale = 1.0;
        Eigen::VectorXd next = fit.coef + step;
        while (logistic_log_likelihood(x, y, next) < ll0 - 1e-12 && scale > 1e-6) {
            scale *= 0.5;
            next = fit.coef + scale * step;
        }
        fit.coef = next;
        fit.iterations = it + 1;
        if (fit.coef.lpNorm<Eigen::Infinity>() > coef_cap) {
            fit.separation = true;
            fit.coef = fit.coef.cwiseMax(-coef_cap).cwiseMin(coef_cap);
            break;
        }
    }
    if (!fit.converged && !fit.separation) {
        const Eigen::VectorXd score = logistic_score(x, y, fit.coef);
        fit.converged = score.lpNorm<Eigen::Infinity>() < 1e-8;
    }
    const Eigen::VectorXd mu = fitted(x, fit.coef);
    const Eigen::VectorXd w = (mu.array() * (1.0 - mu.array())).max(1e-300).matrix();
    info = x.transpose() * w.asDiagonal() * x;
    fit.cov = info.inverse();
    if (!fit.cov.allFinite()) throw NumericalError("logistic covariance is not finite");
    return fit;
}

MIEstimate rubin_combine(const std::vector<double>& estimates, const std::vector<double>& variances, double level) {
    if (estimates.size() != variances.size()) throw ValidationError("estimates and variances differ in length");
    if (estimates.size() < 2) throw ValidationError("combining needs at least two imputations");
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("confidence level must lie in (0, 1)");
    for (double u : variances)
        if (!(u >= 0.0)) throw ValidationError("within-imputation variances must be >= 0");
    MIEstimate e;
    e.m = static_cast<int>(estimates.size());
    const double m = e.m;
    e.qbar = std::accumulate(estimates.begin(), estimates.end(), 0.0) / m;
    e.ubar = std::accumulate(variances.begin(), variances.end(), 0.0) / m;
    double ss = 0.0;
    for (double q : estimates) ss += (q - e.qbar) * (q - e.qbar);
    e.b = ss / (m - 1.0);
    e.t = e.ubar + (1.0 + 1.0 / m) * e.b;
    if (e.b > 0.0 && e.t > 0.0) {
        const double r = (1.0 + 1.0 / m) * e.b / e.t;
        e.df = std::min((m - 1.0) / (r * r), kMaxDegreesOfFreedom);
        e.df_capped = e.df == kMaxDegreesOfFreedom;
    } else {
        e.df = kMaxDegreesOfFreedom;
        e.df_capped = true;
    }
    const boost::math::students_t dist(e.df);
    const double half = boost::math::quantile(dist, 0.5 + level / 2.0) * std::sqrt(e.t);
    e.ci_low = e.qbar - half;
    e.ci_high = e.qbar + half;
    return e;
}

}  // namespace reclink
