#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>

namespace fluxonium {

/// Residual callback: fills r (size m) and, when `jacobian` is non-null, the
/// m x n Jacobian dr/dx. Returning false marks x as infeasible (the step is
/// rejected and the trust region shrinks).
using ResidualFunction =
    std::function<bool(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* jacobian)>;

struct LeastSquaresOptions {
    int max_iterations = 200;
    double ftol = 1e-12;  ///< relative reduction of the cost
    double xtol = 1e-10;  ///< relative step size
    double gtol = 1e-10;  ///< scaled gradient, max |J^T r| / (|r| |J_k|)
    double initial_lambda = 1e-3;
    /// Finite-difference Jacobian (central, relative step) instead of the
    /// callback's analytic one.
    bool numeric_jacobian = false;
    double fd_step = 1e-6;
};

struct LeastSquaresResult {
    Eigen::VectorXd x;
    Eigen::VectorXd residuals;
    Eigen::MatrixXd jacobian;
    double cost = 0.0;  ///< 0.5 * |r|^2
    int iterations = 0;
    int n_evals = 0;
    bool converged = false;
    std::string reason;
};

/// Levenberg-Marquardt with Marquardt diagonal scaling and adaptive damping.
LeastSquaresResult levenberg_marquardt(const ResidualFunction& f, const Eigen::VectorXd& x0,
                                       const LeastSquaresOptions& options = {});

struct CovarianceEstimate {
    Eigen::MatrixXd covariance;  ///< s^2 (J^T J)^+
    double residual_variance = 0.0;  ///< s^2 = |r|^2 / (m - n)
    double condition_number = 0.0;
    bool degenerate = false;  ///< J rank deficient (condition > 1e12)
};

/// Parameter covariance from the Jacobian at the optimum of a weighted
/// problem (residuals already multiplied by sqrt(weight)).
CovarianceEstimate covariance_from_jacobian(const Eigen::MatrixXd& jacobian,
                                            const Eigen::VectorXd& residuals);

}  // namespace fluxonium
