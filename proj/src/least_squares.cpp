#include "fluxonium/least_squares.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fluxonium/errors.hpp"

namespace fluxonium {

namespace {

bool evaluate(const ResidualFunction& f, const Eigen::VectorXd& x, Eigen::VectorXd& r,
              Eigen::MatrixXd* jacobian, const LeastSquaresOptions& options, int& n_evals) {
    if (!options.numeric_jacobian || jacobian == nullptr) {
        ++n_evals;
        if (!f(x, r, jacobian)) return false;
        return r.allFinite() && (jacobian == nullptr || jacobian->allFinite());
    }
    ++n_evals;
    if (!f(x, r, nullptr) || !r.allFinite()) return false;
    jacobian->resize(r.size(), x.size());
    Eigen::VectorXd rp, rm;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        const double h = options.fd_step * std::max(1.0, std::abs(x(k)));
        Eigen::VectorXd xp = x, xm = x;
        xp(k) += h;
        xm(k) -= h;
        n_evals += 2;
        if (!f(xp, rp, nullptr) || !f(xm, rm, nullptr)) return false;
        jacobian->col(k) = (rp - rm) / (2.0 * h);
    }
    return jacobian->allFinite();
}

}  // namespace

LeastSquaresResult levenberg_marquardt(const ResidualFunction& f, const Eigen::VectorXd& x0,
                                       const LeastSquaresOptions& options) {
    LeastSquaresResult out;
    out.x = x0;
    Eigen::MatrixXd jac;
    if (!evaluate(f, out.x, out.residuals, &jac, options, out.n_evals)) {
        throw DomainError("residuals are not finite at the starting point", {"x0"});
    }
    const Eigen::Index n = x0.size();
    if (out.residuals.size() < n) {
        throw DataError("fewer residuals (" + std::to_string(out.residuals.size()) +
                        ") than parameters (" + std::to_string(n) + ")");
    }
    out.cost = 0.5 * out.residuals.squaredNorm();
    double lambda = options.initial_lambda;
    Eigen::VectorXd scale = Eigen::VectorXd::Zero(n);

    for (out.iterations = 0; out.iterations < options.max_iterations; ++out.iterations) {
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd grad = jac.transpose() * out.residuals;
        // Marquardt scaling: running maximum of the Jacobian column norms.
        for (Eigen::Index k = 0; k < n; ++k) scale(k) = std::max(scale(k), std::sqrt(jtj(k, k)));

        const double rnorm = out.residuals.norm();
        double gmax = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
            if (scale(k) > 0.0 && rnorm > 0.0) gmax = std::max(gmax, std::abs(grad(k)) / (scale(k) * rnorm));
        }
        if (gmax <= options.gtol || rnorm == 0.0) {
            out.converged = true;
            out.reason = "gradient below gtol";
            break;
        }

        bool accepted = false;
        bool small_step = false;
        bool small_reduction = false;
        for (int attempt = 0; attempt < 40 && !accepted; ++attempt) {
            Eigen::MatrixXd a = jtj;
            for (Eigen::Index k = 0; k < n; ++k) {
                a(k, k) += lambda * std::max(scale(k) * scale(k), std::numeric_limits<double>::min());
            }
            const Eigen::VectorXd step = -a.ldlt().solve(grad);
            if (!step.allFinite()) {
                lambda *= 10.0;
                continue;
            }
            const Eigen::VectorXd x_new = out.x + step;
            Eigen::VectorXd r_new;
            if (!evaluate(f, x_new, r_new, nullptr, options, out.n_evals)) {
                lambda *= 10.0;
                continue;
            }
            const double cost_new = 0.5 * r_new.squaredNorm();
            const double predicted = -(grad.dot(step) + 0.5 * step.dot(jtj * step));
            const double actual = out.cost - cost_new;
            if (actual > 0.0) {
                const double rho = predicted > 0.0 ? actual / predicted : 0.0;
                small_reduction = actual <= options.ftol * out.cost;
                small_step = step.norm() <= options.xtol * (out.x.norm() + options.xtol);
                out.x = x_new;
                out.cost = cost_new;
                if (!evaluate(f, out.x, out.residuals, &jac, options, out.n_evals)) {
                    throw ConvergenceError("Jacobian evaluation failed at an accepted point");
                }
                lambda *= rho > 0.75 ? 1.0 / 3.0 : (rho < 0.25 ? 2.0 : 1.0);
                lambda = std::max(lambda, 1e-15);
                accepted = true;
            } else {
                lambda *= 4.0;
                if (step.norm() <= options.xtol * (out.x.norm() + options.xtol)) {
                    small_step = true;
                    break;
                }
            }
        }
        if (small_reduction || small_step) {
            out.converged = true;
            out.reason = small_reduction ? "cost reduction below ftol" : "step below xtol";
            ++out.iterations;
            break;
        }
        if (!accepted) {
            out.reason = "no acceptable step";
            break;
        }
    }
    if (out.reason.empty()) out.reason = "iteration limit";
    out.jacobian = std::move(jac);
    return out;
}

CovarianceEstimate covariance_from_jacobian(const Eigen::MatrixXd& jacobian,
                                            const Eigen::VectorXd& residuals) {
    CovarianceEstimate out;
    const Eigen::Index m = jacobian.rows();
    const Eigen::Index n = jacobian.cols();
    const double dof = static_cast<double>(std::max<Eigen::Index>(1, m - n));
    out.residual_variance = residuals.squaredNorm() / dof;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(jacobian, Eigen::ComputeThinV);
    const Eigen::VectorXd s = svd.singularValues();
    out.condition_number = s(n - 1) > 0.0 ? s(0) / s(n - 1) : std::numeric_limits<double>::infinity();
    out.degenerate = !(out.condition_number < 1e12);
    Eigen::VectorXd inv2 = Eigen::VectorXd::Zero(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        if (s(k) > 1e-12 * s(0)) inv2(k) = 1.0 / (s(k) * s(k));
    }
    const Eigen::MatrixXd v = svd.matrixV();
    out.covariance = out.residual_variance * v * inv2.asDiagonal() * v.transpose();
    out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
    return out;
}

}  // namespace fluxonium
