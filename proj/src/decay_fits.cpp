#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/distributions/fisher_f.hpp>
#include <Eigen/Dense>

#include "fluxonium/least_squares.hpp"
#include "fluxonium/timeseries.hpp"

namespace fluxonium {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void check_times(std::span<const double> t, std::span<const double> y, std::size_t min_points,
                 const char* what) {
    if (t.size() != y.size()) throw DataError(std::string(what) + ": times and values differ in length");
    if (t.size() < min_points) {
        throw DataError(std::string(what) + ": need at least " + std::to_string(min_points) + " points, have " +
                        std::to_string(t.size()));
    }
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (!std::isfinite(t[k]) || !std::isfinite(y[k])) throw DataError(std::string(what) + ": non-finite input");
        if (k > 0 && !(t[k] > t[k - 1])) throw DataError(std::string(what) + ": times must be strictly increasing");
    }
}

// Linear least squares of y on the columns of `basis`; returns the RSS.
double linear_fit(const Eigen::MatrixXd& basis, const Eigen::VectorXd& y, Eigen::VectorXd& coef) {
    coef = basis.colPivHouseholderQr().solve(y);
    return (basis * coef - y).squaredNorm();
}

Eigen::VectorXd to_vector(std::span<const double> v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> log_grid(double lo, double hi, int n) {
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) out[static_cast<std::size_t>(k)] = lo * std::pow(hi / lo, double(k) / (n - 1));
    return out;
}

LeastSquaresOptions tight_options(int max_iterations) {
    LeastSquaresOptions o;
    o.max_iterations = max_iterations;
    o.ftol = 1e-15;
    o.xtol = 1e-13;
    o.gtol = 1e-13;
    return o;
}

}  // namespace

DecayFit fit_exponential_decay(std::span<const double> times, std::span<const double> values) {
    check_times(times, values, 6, "decay fit");
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (*hi - *lo == 0.0) throw DataError("decay fit: data are constant, no decay to fit");
    const std::size_t n = times.size();
    const double t0 = times.front();
    const double span = times.back() - t0;
    const Eigen::VectorXd y = to_vector(values);

    // Profile over T on a log grid, amplitude and offset solved linearly.
    double best_rss = std::numeric_limits<double>::infinity();
    double best_t = span;
    Eigen::VectorXd coef;
    Eigen::MatrixXd basis(static_cast<Eigen::Index>(n), 2);
    basis.col(1).setOnes();
    for (double tau : log_grid(span / 100.0, 100.0 * span, 81)) {
        for (std::size_t k = 0; k < n; ++k) basis(static_cast<Eigen::Index>(k), 0) = std::exp(-(times[k] - t0) / tau);
        const double rss = linear_fit(basis, y, coef);
        if (rss < best_rss) {
            best_rss = rss;
            best_t = tau;
        }
    }
    for (std::size_t k = 0; k < n; ++k) basis(static_cast<Eigen::Index>(k), 0) = std::exp(-(times[k] - t0) / best_t);
    linear_fit(basis, y, coef);

    // x = (A at t0, log T, B)
    ResidualFunction residual = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
        const double tau = std::exp(x(1));
        r.resize(static_cast<Eigen::Index>(n));
        if (jac) jac->resize(static_cast<Eigen::Index>(n), 3);
        for (std::size_t k = 0; k < n; ++k) {
            const auto i = static_cast<Eigen::Index>(k);
            const double s = (times[k] - t0) / tau;
            const double e = std::exp(-s);
            r(i) = x(0) * e + x(2) - values[k];
            if (jac) {
                (*jac)(i, 0) = e;
                (*jac)(i, 1) = x(0) * e * s;
                (*jac)(i, 2) = 1.0;
            }
        }
        return true;
    };
    Eigen::VectorXd x0(3);
    x0 << coef(0), std::log(best_t), coef(1);
    const LeastSquaresResult res = levenberg_marquardt(residual, x0, tight_options(500));

    DecayFit fit;
    fit.t = std::exp(res.x(1));
    fit.amplitude = res.x(0) * std::exp(t0 / fit.t);
    fit.offset = res.x(2);
    fit.rms_residual = std::sqrt(res.residuals.squaredNorm() / double(n));
    if (!(fit.t > 0.0) || fit.t > 1e4 * span) {
        throw DataError("decay fit: fitted decay time " + std::to_string(fit.t) + " is outside (0, 1e4 x span]");
    }
    const CovarianceEstimate cov = covariance_from_jacobian(res.jacobian, res.residuals);
    const double amp0_error = std::sqrt(std::max(0.0, cov.covariance(0, 0)));
    fit.t_error = fit.t * std::sqrt(std::max(0.0, cov.covariance(1, 1)));
    fit.amplitude_error = amp0_error * std::exp(t0 / fit.t);
    fit.offset_error = std::sqrt(std::max(0.0, cov.covariance(2, 2)));
    if (!(std::abs(res.x(0)) > amp0_error)) {
        throw DataError("decay fit: amplitude is not resolved above its standard error");
    }
    return fit;
}

std::optional<double> RamseyFit::f_beating() const {
    if (!two_tone || !f2) return std::nullopt;
    return std::abs(*f2 - f1);
}

double RamseyFit::mean_frequency() const {
    if (!two_tone || !f2 || amplitudes.size() < 2) return f1;
    const double w1 = std::abs(amplitudes[0]);
    const double w2 = std::abs(amplitudes[1]);
    return (w1 * f1 + w2 * *f2) / (w1 + w2);
}

double frequency_jump(const RamseyFit& a, const RamseyFit& b) { return b.mean_frequency() - a.mean_frequency(); }

namespace {

struct Tone {
    double amplitude;
    double frequency;
    double phase;
};

// Sign conventions: positive amplitude and frequency, phase in (-pi, pi].
Tone normalize(Tone t) {
    if (t.frequency < 0.0) {
        t.frequency = -t.frequency;
        t.phase = -t.phase;
    }
    if (t.amplitude < 0.0) {
        t.amplitude = -t.amplitude;
        t.phase += std::numbers::pi;
    }
    t.phase = std::remainder(t.phase, kTwoPi);
    return t;
}

// Model with `tones` tones sharing one envelope. x = (log T, B, then per tone
// a_k, f_k, phi_k); times are measured from the first sample.
struct RamseyModel {
    std::span<const double> t;
    std::span<const double> y;
    int tones;

    bool operator()(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* jac) const {
        const double tau = std::exp(x(0));
        const auto n = static_cast<Eigen::Index>(t.size());
        r.resize(n);
        if (jac) jac->resize(n, x.size());
        for (Eigen::Index i = 0; i < n; ++i) {
            const double ti = t[static_cast<std::size_t>(i)] - t[0];
            const double env = std::exp(-ti / tau);
            double sum = 0.0;
            for (int k = 0; k < tones; ++k) {
                const double a = x(2 + 3 * k), f = x(3 + 3 * k), p = x(4 + 3 * k);
                const double arg = kTwoPi * f * ti + p;
                const double c = std::cos(arg), s = std::sin(arg);
                sum += a * c;
                if (jac) {
                    (*jac)(i, 2 + 3 * k) = env * c;
                    (*jac)(i, 3 + 3 * k) = -env * a * s * kTwoPi * ti;
                    (*jac)(i, 4 + 3 * k) = -env * a * s;
                }
            }
            r(i) = env * sum + x(1) - y[static_cast<std::size_t>(i)];
            if (jac) {
                (*jac)(i, 0) = env * sum * ti / tau;
                (*jac)(i, 1) = 1.0;
            }
        }
        return true;
    }
};

// Linear least squares with the frequencies and T fixed; fills x.
double profile(std::span<const double> t, const Eigen::VectorXd& y, std::span<const double> freqs, double tau,
               Eigen::VectorXd& x) {
    const auto n = static_cast<Eigen::Index>(t.size());
    const auto m = static_cast<Eigen::Index>(freqs.size());
    Eigen::MatrixXd basis(n, 2 * m + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double ti = t[static_cast<std::size_t>(i)] - t[0];
        const double env = std::exp(-ti / tau);
        for (Eigen::Index k = 0; k < m; ++k) {
            const double arg = kTwoPi * freqs[static_cast<std::size_t>(k)] * ti;
            basis(i, 2 * k) = env * std::cos(arg);
            basis(i, 2 * k + 1) = env * std::sin(arg);
        }
        basis(i, 2 * m) = 1.0;
    }
    Eigen::VectorXd coef;
    const double rss = linear_fit(basis, y, coef);
    x.resize(2 + 3 * m);
    x(0) = std::log(tau);
    x(1) = coef(2 * m);
    for (Eigen::Index k = 0; k < m; ++k) {
        // c cos + s sin = a cos(arg + phi) with a = hypot, phi = atan2(-s, c)
        x(2 + 3 * k) = std::hypot(coef(2 * k), coef(2 * k + 1));
        x(3 + 3 * k) = freqs[static_cast<std::size_t>(k)];
        x(4 + 3 * k) = std::atan2(-coef(2 * k + 1), coef(2 * k));
    }
    return rss;
}

// Local maxima of the periodogram of y - mean, strongest first.
std::vector<double> periodogram_peaks(std::span<const double> t, const Eigen::VectorXd& y, std::size_t count) {
    const double span = t.back() - t.front();
    std::vector<double> dts(t.size() - 1);
    for (std::size_t k = 1; k < t.size(); ++k) dts[k - 1] = t[k] - t[k - 1];
    std::nth_element(dts.begin(), dts.begin() + long(dts.size() / 2), dts.end());
    const double f_max = 0.5 / dts[dts.size() / 2];
    const double df = 1.0 / (8.0 * span);
    const double mean = y.mean();
    std::vector<double> f, p;
    for (double fk = df; fk <= f_max; fk += df) {
        std::complex<double> acc = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            acc += (y(static_cast<Eigen::Index>(i)) - mean) * std::polar(1.0, -kTwoPi * fk * (t[i] - t[0]));
        }
        f.push_back(fk);
        p.push_back(std::norm(acc));
    }
    std::vector<std::size_t> maxima;
    for (std::size_t k = 0; k < p.size(); ++k) {
        const bool left = k == 0 || p[k] >= p[k - 1];
        const bool right = k + 1 == p.size() || p[k] > p[k + 1];
        if (left && right) maxima.push_back(k);
    }
    std::sort(maxima.begin(), maxima.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
    std::vector<double> out;
    for (std::size_t k = 0; k < maxima.size() && out.size() < count; ++k) out.push_back(f[maxima[k]]);
    return out;
}

RamseyFit make_fit(const LeastSquaresResult& res, int tones, double span) {
    RamseyFit fit;
    fit.t2_star = std::exp(res.x(0));
    fit.offset = res.x(1);
    fit.rss = res.residuals.squaredNorm();
    fit.converged = res.converged;
    const CovarianceEstimate cov = covariance_from_jacobian(res.jacobian, res.residuals);
    fit.t2_star_error = fit.t2_star * std::sqrt(std::max(0.0, cov.covariance(0, 0)));
    std::vector<std::pair<Tone, double>> tone_list;
    for (int k = 0; k < tones; ++k) {
        const Tone tone = normalize({res.x(2 + 3 * k), res.x(3 + 3 * k), res.x(4 + 3 * k)});
        tone_list.push_back({tone, std::sqrt(std::max(0.0, cov.covariance(3 + 3 * k, 3 + 3 * k)))});
    }
    std::sort(tone_list.begin(), tone_list.end(),
              [](const auto& a, const auto& b) { return a.first.frequency < b.first.frequency; });
    fit.f1 = tone_list[0].first.frequency;
    if (tones == 2) {
        fit.f2 = tone_list[1].first.frequency;
        fit.two_tone = true;
        fit.under_resolved = span < 1.5 / std::abs(*fit.f2 - fit.f1);
    }
    for (const auto& [tone, err] : tone_list) {
        fit.amplitudes.push_back(tone.amplitude);
        fit.phases.push_back(tone.phase);
        fit.frequency_errors.push_back(err);
    }
    return fit;
}

}  // namespace

RamseyFit fit_ramsey_two_tone(std::span<const double> times, std::span<const double> signal,
                              const RamseyOptions& options) {
    check_times(times, signal, 12, "Ramsey fit");
    const Eigen::VectorXd y = to_vector(signal);
    const double span = times.back() - times.front();
    const auto taus = log_grid(span / 20.0, 20.0 * span, 25);
    const LeastSquaresOptions lsq = tight_options(options.max_iterations);

    const std::vector<double> peaks = periodogram_peaks(times, y, 6);
    if (peaks.empty()) throw DataError("Ramsey fit: no oscillation found");

    // One tone.
    Eigen::VectorXd x1, trial;
    double best = std::numeric_limits<double>::infinity();
    for (double tau : taus) {
        const double f[] = {peaks[0]};
        const double rss = profile(times, y, f, tau, trial);
        if (rss < best) {
            best = rss;
            x1 = trial;
        }
    }
    const double n = double(times.size());
    const double rss0 = (y.array() - y.mean()).square().sum();
    if (!(rss0 > 0.0)) throw DataError("Ramsey fit: constant signal, no fringes");
    {
        // one damped tone (4 extra parameters) against a constant
        const double f0 = ((rss0 - best) / 4.0) / (best / (n - 5.0));
        const double p0 = best > 0.0 ? boost::math::cdf(boost::math::complement(
                                           boost::math::fisher_f(4.0, n - 5.0), std::max(0.0, f0)))
                                     : 0.0;
        if (!(p0 < options.alpha)) throw DataError("Ramsey fit: no significant fringes");
    }
    const RamseyModel one{times, signal, 1};
    const LeastSquaresResult r1 = levenberg_marquardt(one, x1, lsq);
    RamseyFit single = make_fit(r1, 1, span);
    if (!r1.converged) throw ConvergenceError("Ramsey fit: one-tone fit did not converge (" + r1.reason + ")");

    // Two tones: profile over candidate pairs from the periodogram and around
    // the one-tone frequency.
    std::vector<double> candidates = peaks;
    for (double k : {0.5, 1.0, 1.5, 2.0, 3.0}) {
        candidates.push_back(single.f1 + k / span);
        if (single.f1 - k / span > 0.0) candidates.push_back(single.f1 - k / span);
    }
    Eigen::VectorXd x2;
    best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < candidates.size(); ++a) {
        for (std::size_t b = a + 1; b < candidates.size(); ++b) {
            if (std::abs(candidates[a] - candidates[b]) < 0.25 / span) continue;
            for (double tau : taus) {
                const double f[] = {candidates[a], candidates[b]};
                const double rss = profile(times, y, f, tau, trial);
                if (rss < best) {
                    best = rss;
                    x2 = trial;
                }
            }
        }
    }
    if (x2.size() == 0) return single;
    const RamseyModel two{times, signal, 2};
    const LeastSquaresResult r2 = levenberg_marquardt(two, x2, lsq);
    RamseyFit pair = make_fit(r2, 2, span);

    const double rss1 = single.rss, rss2 = pair.rss;
    if (!(rss2 < rss1) || n <= 8.0) return single;
    const double f_stat = rss2 > 0.0 ? ((rss1 - rss2) / 3.0) / (rss2 / (n - 8.0))
                                     : std::numeric_limits<double>::infinity();
    const double p = std::isinf(f_stat)
                         ? 0.0
                         : boost::math::cdf(boost::math::complement(boost::math::fisher_f(3.0, n - 8.0), f_stat));
    pair.f_statistic = single.f_statistic = f_stat;
    pair.p_value = single.p_value = p;
    if (!(p < options.alpha)) return single;
    if (!r2.converged) {
        throw RamseyConvergenceError("Ramsey fit: two-tone fit did not converge (" + r2.reason + ")", single);
    }
    return pair;
}

nlohmann::json to_json(const DecayFit& fit) {
    return {{"t", fit.t},
            {"t_error", fit.t_error},
            {"amplitude", fit.amplitude},
            {"amplitude_error", fit.amplitude_error},
            {"offset", fit.offset},
            {"offset_error", fit.offset_error},
            {"rms_residual", fit.rms_residual}};
}

nlohmann::json to_json(const RamseyFit& fit) {
    nlohmann::json j = {{"f1", fit.f1},
                        {"t2_star", fit.t2_star},
                        {"t2_star_error", fit.t2_star_error},
                        {"amplitudes", fit.amplitudes},
                        {"phases", fit.phases},
                        {"frequency_errors", fit.frequency_errors},
                        {"offset", fit.offset},
                        {"rss", fit.rss},
                        {"f_statistic", std::isfinite(fit.f_statistic) ? nlohmann::json(fit.f_statistic)
                                                                        : nlohmann::json("inf")},
                        {"p_value", fit.p_value},
                        {"two_tone", fit.two_tone},
                        {"under_resolved", fit.under_resolved},
                        {"mean_frequency", fit.mean_frequency()},
                        {"converged", fit.converged}};
    j["f2"] = fit.f2 ? nlohmann::json(*fit.f2) : nlohmann::json(nullptr);
    const auto beat = fit.f_beating();
    j["f_beating"] = beat ? nlohmann::json(*beat) : nlohmann::json(nullptr);
    return j;
}

}  // namespace fluxonium
