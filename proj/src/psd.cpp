#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <mutex>
#include <string>

#include <fftw3.h>

#include "fluxonium/least_squares.hpp"
#include "fluxonium/timeseries.hpp"

namespace fluxonium {

namespace {

// FFTW planning is not thread-safe.
std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

std::string band_text(const PsdEstimate& psd) {
    return "[" + std::to_string(psd.frequencies.front()) + ", " + std::to_string(psd.frequencies.back()) + "] Hz";
}

}  // namespace

double uniform_step(std::span<const double> times, double rel_tolerance) {
    if (times.size() < 2) throw DataError("need at least two timestamps");
    const double step = (times.back() - times.front()) / double(times.size() - 1);
    if (!(step > 0.0)) throw DataError("timestamps must increase");
    for (std::size_t k = 1; k < times.size(); ++k) {
        if (std::abs((times[k] - times[k - 1]) - step) > rel_tolerance * step) {
            throw DataError("timestamps are not uniformly spaced (gap " + std::to_string(times[k] - times[k - 1]) +
                            " at index " + std::to_string(k) + ", expected " + std::to_string(step) + ")");
        }
    }
    return step;
}

PsdEstimate estimate_psd(const std::vector<std::vector<double>>& traces, double duration_s) {
    if (traces.empty()) throw DataError("PSD: need at least one trace");
    if (!(duration_s > 0.0)) throw DataError("PSD: duration must be positive");
    const std::size_t n = traces.front().size();
    if (n < 4) throw DataError("PSD: traces need at least 4 samples");
    for (const auto& t : traces) {
        if (t.size() != n) throw DataError("PSD: traces differ in length");
        for (double v : t) {
            if (!std::isfinite(v)) throw DataError("PSD: non-finite sample");
        }
    }
    PsdEstimate out;
    out.n_averages = static_cast<int>(traces.size());
    out.total_duration = duration_s;
    out.dt = duration_s / double(n);
    const std::size_t n_out = n / 2;
    out.frequencies.resize(n_out);
    out.power.assign(n_out, 0.0);
    for (std::size_t k = 1; k <= n_out; ++k) out.frequencies[k - 1] = double(k) / duration_s;

    std::vector<double> in(n);
    std::vector<std::complex<double>> spec(n / 2 + 1);
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), reinterpret_cast<fftw_complex*>(spec.data()),
                                    FFTW_ESTIMATE);
    }
    for (const auto& trace : traces) {
        double mean = 0.0;
        for (double v : trace) mean += v;
        mean /= double(n);
        for (std::size_t k = 0; k < n; ++k) in[k] = trace[k] - mean;
        fftw_execute(plan);
        for (std::size_t k = 1; k <= n_out; ++k) {
            const double f2 = std::norm(spec[k]) / (double(n) * double(n));
            const bool nyquist = n % 2 == 0 && k == n / 2;
            out.power[k - 1] += (nyquist ? 1.0 : 2.0) * duration_s * f2;
        }
    }
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    for (double& p : out.power) p /= double(traces.size());
    return out;
}

double rtn_model(double f, double gamma, double b, double s0) {
    return b * gamma * gamma / (f * f + gamma * gamma) + s0;
}

RtnFit fit_rtn_psd(const PsdEstimate& psd) {
    const std::size_t m = psd.frequencies.size();
    if (m < 8 || psd.power.size() != m) throw DataError("RTN fit: need at least 8 spectral points");
    for (double p : psd.power) {
        if (!(p > 0.0) || !std::isfinite(p)) throw DataError("RTN fit: spectral power must be positive");
    }
    const double f_lo = psd.frequencies.front(), f_hi = psd.frequencies.back();
    if (f_hi < 10.0 * f_lo) throw DataError("RTN fit: spectrum spans less than a decade " + band_text(psd));

    // Start: floor from the upper quarter, plateau from the lowest bins, knee
    // where the excess halves.
    std::vector<double> upper(psd.power.end() - long(m / 4), psd.power.end());
    std::nth_element(upper.begin(), upper.begin() + long(upper.size() / 2), upper.end());
    const double s0_init = upper[upper.size() / 2];
    const std::size_t n_low = std::min<std::size_t>(3, m);
    double plateau = 0.0;
    for (std::size_t k = 0; k < n_low; ++k) plateau += psd.power[k];
    plateau /= double(n_low);
    const double noise = s0_init / std::sqrt(double(std::max(psd.n_averages, 1)));
    const double b_init = plateau - s0_init;
    if (!(b_init > 3.0 * noise)) {
        throw DataError("RTN fit: no Lorentzian excess above the white floor in " + band_text(psd));
    }
    double gamma_init = f_lo;
    for (std::size_t k = 0; k < m; ++k) {
        if (psd.power[k] - s0_init < 0.5 * b_init) {
            gamma_init = psd.frequencies[k];
            break;
        }
    }

    ResidualFunction residual = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
        const double g = std::exp(x(0)), b = std::exp(x(1)), s0 = std::exp(x(2));
        r.resize(static_cast<Eigen::Index>(m));
        if (jac) jac->resize(static_cast<Eigen::Index>(m), 3);
        for (std::size_t k = 0; k < m; ++k) {
            const auto i = static_cast<Eigen::Index>(k);
            const double f = psd.frequencies[k];
            const double lor = b * g * g / (f * f + g * g);
            const double model = lor + s0;
            r(i) = std::log(model) - std::log(psd.power[k]);
            if (jac) {
                (*jac)(i, 0) = lor * 2.0 * f * f / (f * f + g * g) / model;
                (*jac)(i, 1) = lor / model;
                (*jac)(i, 2) = s0 / model;
            }
        }
        return true;
    };
    Eigen::VectorXd x0(3);
    x0 << std::log(gamma_init), std::log(b_init), std::log(s0_init);
    LeastSquaresOptions lsq;
    lsq.max_iterations = 500;
    const LeastSquaresResult res = levenberg_marquardt(residual, x0, lsq);

    RtnFit fit;
    fit.gamma = std::exp(res.x(0));
    fit.b = std::exp(res.x(1));
    fit.s0 = std::exp(res.x(2));
    fit.rms_log_residual = std::sqrt(res.residuals.squaredNorm() / double(m));
    const CovarianceEstimate cov = covariance_from_jacobian(res.jacobian, res.residuals);
    fit.gamma_error = fit.gamma * std::sqrt(std::max(0.0, cov.covariance(0, 0)));
    fit.b_error = fit.b * std::sqrt(std::max(0.0, cov.covariance(1, 1)));
    fit.s0_error = fit.s0 * std::sqrt(std::max(0.0, cov.covariance(2, 2)));
    if (fit.gamma < f_lo || fit.gamma > f_hi) {
        throw DataError("RTN fit: knee " + std::to_string(fit.gamma) + " Hz lies outside the measured band " +
                        band_text(psd));
    }
    return fit;
}

nlohmann::json to_json(const RtnFit& fit) {
    return {{"gamma_rtn_hz", fit.gamma},
            {"gamma_rtn_error_hz", fit.gamma_error},
            {"b_hz2_per_hz", fit.b},
            {"b_error_hz2_per_hz", fit.b_error},
            {"s0_hz2_per_hz", fit.s0},
            {"s0_error_hz2_per_hz", fit.s0_error},
            {"rms_log_residual", fit.rms_log_residual}};
}

}  // namespace fluxonium
