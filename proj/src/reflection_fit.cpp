#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "fluxonium/errors.hpp"
#include "fluxonium/fitting.hpp"

namespace fluxonium {

namespace {

double wrap(double angle) { return std::remainder(angle, 2.0 * std::numbers::pi); }

struct BranchGuess {
    double f_res = 0.0;   // GHz
    double kappa = 0.0;   // MHz
};

// Resonance at the steepest point of the unwrapped phase. Throws when the
// steepest point sits at the edge of the sweep or the phase barely moves.
BranchGuess guess_branch(std::vector<PhasePoint> pts, const char* name) {
    if (pts.size() < 8) throw DataError(std::string("branch ") + name + ": need at least 8 phase points");
    std::sort(pts.begin(), pts.end(), [](const PhasePoint& a, const PhasePoint& b) { return a.f_ghz < b.f_ghz; });
    std::vector<double> unwrapped(pts.size());
    unwrapped[0] = pts[0].phase;
    for (std::size_t k = 1; k < pts.size(); ++k) {
        unwrapped[k] = unwrapped[k - 1] + wrap(pts[k].phase - pts[k - 1].phase);
    }
    std::size_t steep = 1;
    double best = -1.0;
    for (std::size_t k = 1; k < pts.size(); ++k) {
        const double df = pts[k].f_ghz - pts[k - 1].f_ghz;
        if (!(df > 0.0)) throw DataError(std::string("branch ") + name + ": duplicate probe frequencies");
        const double slope = std::abs(unwrapped[k] - unwrapped[k - 1]) / df;
        if (slope > best) {
            best = slope;
            steep = k;
        }
    }
    const double swing = std::abs(unwrapped.back() - unwrapped.front());
    if (steep < 2 || steep + 2 > pts.size() || swing < 1.0) {
        throw DataError(std::string("branch ") + name + ": sweep does not span the resonance");
    }
    BranchGuess g;
    g.f_res = 0.5 * (pts[steep].f_ghz + pts[steep - 1].f_ghz);
    // Critically coupled: |d phase / d f| = 4 / kappa on resonance (kappa, f in MHz).
    g.kappa = 4.0 / (best * 1e-3);
    return g;
}

}  // namespace

ReflectionFit fit_reflection(const ReflectionData& data, const ReflectionFitOptions& options) {
    if (!(options.coupling_ratio > 0.0 && options.coupling_ratio <= 1.0)) {
        throw ConfigError("coupling_ratio must be in (0, 1]");
    }
    const BranchGuess g = guess_branch(data.g, "g");
    const BranchGuess e = guess_branch(data.e, "e");
    const double f0_init = 0.5 * (g.f_res + e.f_res);
    const double kappa_init = 0.5 * (g.kappa + e.kappa);
    const double chi_init = 1e3 * (e.f_res - g.f_res);

    // x = (f0 offset in MHz, log kappa, chi in MHz[, logit coupling_ratio])
    const bool free_ratio = options.fit_coupling_ratio;
    auto model_of = [&](const Eigen::VectorXd& x) {
        ReflectionModel m;
        m.f0 = f0_init + 1e-3 * x(0);
        m.kappa = std::exp(x(1));
        m.chi = x(2);
        // Clamp keeps the ratio inside (0, 1] for any x(3).
        m.coupling_ratio = free_ratio ? 1.0 / (1.0 + std::exp(-x(3))) : options.coupling_ratio;
        m.coupling_ratio = std::clamp(m.coupling_ratio, 1e-9, 1.0);
        return m;
    };
    const std::size_t n_g = data.g.size();
    ResidualFunction residual = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd*) {
        const ReflectionModel m = model_of(x);
        if (!(m.kappa > 0.0) || !std::isfinite(m.kappa)) return false;
        r.resize(static_cast<Eigen::Index>(n_g + data.e.size()));
        for (std::size_t k = 0; k < n_g; ++k) {
            const double model = std::arg(reflection_coefficient(m, data.g[k].f_ghz, QubitState::g));
            r(static_cast<Eigen::Index>(k)) = wrap(data.g[k].phase - model);
        }
        for (std::size_t k = 0; k < data.e.size(); ++k) {
            const double model = std::arg(reflection_coefficient(m, data.e[k].f_ghz, QubitState::e));
            r(static_cast<Eigen::Index>(n_g + k)) = wrap(data.e[k].phase - model);
        }
        return true;
    };

    Eigen::VectorXd x0(free_ratio ? 4 : 3);
    x0(0) = 0.0;
    x0(1) = std::log(kappa_init);
    x0(2) = chi_init;
    if (free_ratio) {
        const double start = std::min(options.coupling_ratio, 0.999);
        x0(3) = std::log(start / (1.0 - start));
    }
    LeastSquaresOptions lsq = options.lsq;
    lsq.numeric_jacobian = true;
    const LeastSquaresResult result = levenberg_marquardt(residual, x0, lsq);

    ReflectionFit out;
    out.model = model_of(result.x);
    out.converged = result.converged;
    out.n_evals = result.n_evals;
    out.rms_phase = std::sqrt(result.residuals.squaredNorm() / double(result.residuals.size()));
    out.resolved = std::abs(out.model.chi) > out.model.kappa;
    const CovarianceEstimate cov = covariance_from_jacobian(result.jacobian, result.residuals);
    out.f0_error = 1e-3 * std::sqrt(std::max(0.0, cov.covariance(0, 0)));
    out.kappa_error = out.model.kappa * std::sqrt(std::max(0.0, cov.covariance(1, 1)));
    out.chi_error = std::sqrt(std::max(0.0, cov.covariance(2, 2)));
    if (free_ratio) {
        const double r = out.model.coupling_ratio;
        out.coupling_ratio_error = r * (1.0 - r) * std::sqrt(std::max(0.0, cov.covariance(3, 3)));
    }
    return out;
}

nlohmann::json to_json(const ReflectionFit& fit) {
    return {{"f0_ghz", fit.model.f0},
            {"kappa_mhz", fit.model.kappa},
            {"chi_mhz", fit.model.chi},
            {"coupling_ratio", fit.model.coupling_ratio},
            {"f0_error_ghz", fit.f0_error},
            {"kappa_error_mhz", fit.kappa_error},
            {"chi_error_mhz", fit.chi_error},
            {"coupling_ratio_error", fit.coupling_ratio_error},
            {"rms_phase_rad", fit.rms_phase},
            {"chi_exceeds_kappa", fit.resolved},
            {"converged", fit.converged},
            {"n_evals", fit.n_evals}};
}

}  // namespace fluxonium
