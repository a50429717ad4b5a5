#pragma once

// Damped Gauss-Newton (Levenberg-Marquardt) with Marquardt diagonal scaling
// and an optional projection onto box constraints after every step.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace cvent {

struct LmOptions {
    int max_iterations = 500;
    /// Converged when an accepted step lowers the cost by less than this
    /// fraction.
    double relative_cost_tolerance = 1e-12;
    double initial_lambda = 1e-3;
};

struct LmResult {
    Eigen::VectorXd x;
    Eigen::VectorXd residuals;
    Eigen::MatrixXd jacobian;
    double cost = 0.0;  ///< sum of squared residuals
    int iterations = 0;
    bool converged = false;
};

/// `model(x, r, J)` fills residuals r (size m) and, when J is non-null, the
/// m x n Jacobian. `project(x)` returns the nearest admissible point.
template <class Model, class Project>
LmResult levenberg_marquardt(Model&& model, const Eigen::VectorXd& x0, Project&& project,
                             const LmOptions& options = {})
{
    LmResult out;
    out.x = project(x0);
    model(out.x, out.residuals, &out.jacobian);
    out.cost = out.residuals.squaredNorm();

    double lambda = options.initial_lambda;
    Eigen::VectorXd trial_r;
    for (out.iterations = 0; out.iterations < options.max_iterations; ++out.iterations) {
        if (out.cost == 0.0) {
            out.converged = true;
            break;
        }
        const Eigen::MatrixXd jtj = out.jacobian.transpose() * out.jacobian;
        const Eigen::VectorXd grad = out.jacobian.transpose() * out.residuals;
        Eigen::VectorXd diag = jtj.diagonal().cwiseMax(1e-300);

        Eigen::MatrixXd damped = jtj;
        damped.diagonal() += lambda * diag;
        const Eigen::VectorXd step = damped.ldlt().solve(-grad);
        const Eigen::VectorXd trial = project(out.x + step);
        if ((trial - out.x).norm() <= 1e-15 * (1.0 + out.x.norm())) {
            out.converged = true;
            break;
        }
        model(trial, trial_r, nullptr);
        const double trial_cost = trial_r.squaredNorm();

        if (std::isfinite(trial_cost) && trial_cost < out.cost) {
            const double relative = (out.cost - trial_cost) / out.cost;
            out.x = trial;
            model(out.x, out.residuals, &out.jacobian);
            out.cost = out.residuals.squaredNorm();
            lambda = std::max(lambda / 10.0, 1e-15);
            if (relative < options.relative_cost_tolerance) {
                out.converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if (lambda > 1e16) {
                // No descent direction left at working precision.
                out.converged = true;
                break;
            }
        }
    }
    return out;
}

/// Linearized parameter covariance s^2 (J^T J)^-1 with s^2 = RSS / (m - n).
/// Parameters whose Jacobian column vanishes (e.g. pinned at a bound where
/// the model is flat) get NaN rows and columns; the rest come from the
/// reduced problem. Columns are scaled before inversion.
inline Eigen::MatrixXd parameter_covariance(const Eigen::MatrixXd& jacobian, double rss)
{
    const auto m = jacobian.rows();
    const auto n = jacobian.cols();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    Eigen::MatrixXd out = Eigen::MatrixXd::Constant(n, n, nan);
    const Eigen::VectorXd norms = jacobian.colwise().norm().transpose();
    const double largest = norms.size() > 0 ? norms.maxCoeff() : 0.0;
    std::vector<Eigen::Index> keep;
    for (Eigen::Index j = 0; j < n; ++j) {
        if (norms[j] > 0.0 && norms[j] > 1e-300 * largest) keep.push_back(j);
    }
    if (keep.empty()) return out;
    const auto k = static_cast<Eigen::Index>(keep.size());
    Eigen::MatrixXd scaled(m, k);
    for (Eigen::Index j = 0; j < k; ++j) scaled.col(j) = jacobian.col(keep[j]) / norms[keep[j]];
    const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(scaled.transpose() * scaled);
    if (cod.rank() < k) return out;
    const double dof = static_cast<double>(std::max<Eigen::Index>(m - n, 1));
    const Eigen::MatrixXd inv = cod.pseudoInverse();
    for (Eigen::Index a = 0; a < k; ++a) {
        for (Eigen::Index b = 0; b < k; ++b) {
            out(keep[a], keep[b]) = (rss / dof) * inv(a, b) / (norms[keep[a]] * norms[keep[b]]);
        }
    }
    return out;
}

}  // namespace cvent
