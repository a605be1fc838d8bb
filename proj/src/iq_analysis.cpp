#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "fluxonium/constants.hpp"
#include "fluxonium/timeseries.hpp"

namespace fluxonium {

namespace {

constexpr double kLogSqrtTwoPi = 0.91893853320467274178;

double log_normal_pdf(double x, double mu, double sigma) {
    const double z = (x - mu) / sigma;
    return -0.5 * z * z - std::log(sigma) - kLogSqrtTwoPi;
}

struct Mixture {
    double w[2];
    double mu[2];
    double sigma[2];
};

double log_likelihood(std::span<const double> x, const Mixture& m) {
    double ll = 0.0;
    for (double v : x) {
        const double a = std::log(m.w[0]) + log_normal_pdf(v, m.mu[0], m.sigma[0]);
        const double b = std::log(m.w[1]) + log_normal_pdf(v, m.mu[1], m.sigma[1]);
        const double hi = std::max(a, b);
        ll += hi + std::log1p(std::exp(std::min(a, b) - hi));
    }
    return ll;
}

// Two-means on a line, seeded at the extremes.
Mixture kmeans_start(std::span<const double> x) {
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    double c[2] = {*lo, *hi};
    for (int it = 0; it < 50; ++it) {
        double sum[2] = {0, 0}, cnt[2] = {0, 0};
        const double cut = 0.5 * (c[0] + c[1]);
        for (double v : x) {
            const int k = v > cut ? 1 : 0;
            sum[k] += v;
            cnt[k] += 1;
        }
        bool moved = false;
        for (int k = 0; k < 2; ++k) {
            if (cnt[k] > 0 && sum[k] / cnt[k] != c[k]) {
                c[k] = sum[k] / cnt[k];
                moved = true;
            }
        }
        if (!moved) break;
    }
    Mixture m{};
    double cnt[2] = {0, 0}, ss[2] = {0, 0};
    const double cut = 0.5 * (c[0] + c[1]);
    for (double v : x) {
        const int k = v > cut ? 1 : 0;
        cnt[k] += 1;
        ss[k] += (v - c[k]) * (v - c[k]);
    }
    double pooled = 0.0;
    for (double v : x) pooled += (v - cut) * (v - cut);
    pooled = std::sqrt(pooled / double(x.size()));
    for (int k = 0; k < 2; ++k) {
        m.mu[k] = c[k];
        m.w[k] = std::max(cnt[k], 1.0) / double(x.size());
        m.sigma[k] = cnt[k] > 1 ? std::sqrt(ss[k] / cnt[k]) : pooled;
        if (!(m.sigma[k] > 0.0)) m.sigma[k] = std::max(pooled, 1e-12);
    }
    return m;
}

}  // namespace

void validate(const IQTrace& trace) {
    if (!(trace.dt > 0.0) || !std::isfinite(trace.dt)) throw DataError("IQ trace: dt must be positive");
    if (trace.samples.empty()) throw DataError("IQ trace: no samples");
    for (const auto& z : trace.samples) {
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) throw DataError("IQ trace: non-finite sample");
    }
}

double IqHistogramFit::rotated_i(std::complex<double> z) const {
    return z.real() * std::cos(rotation) + z.imag() * std::sin(rotation);
}

IqHistogramFit histogram_iq(const IQTrace& trace) {
    validate(trace);
    const std::size_t n = trace.samples.size();
    if (n < 100) throw DataError("IQ histogram: need at least 100 samples, have " + std::to_string(n));

    // Principal axis of the centered covariance.
    double mi = 0.0, mq = 0.0;
    for (const auto& z : trace.samples) {
        mi += z.real();
        mq += z.imag();
    }
    mi /= double(n);
    mq /= double(n);
    double cii = 0.0, cqq = 0.0, ciq = 0.0;
    for (const auto& z : trace.samples) {
        const double a = z.real() - mi, b = z.imag() - mq;
        cii += a * a;
        cqq += b * b;
        ciq += a * b;
    }
    IqHistogramFit fit;
    fit.rotation = 0.5 * std::atan2(2.0 * ciq, cii - cqq);

    std::vector<double> x(n);
    for (std::size_t k = 0; k < n; ++k) x[k] = fit.rotated_i(trace.samples[k]);

    Mixture m = kmeans_start(x);
    double ll = log_likelihood(x, m);
    std::vector<double> resp(n);
    int it = 0;
    for (; it < 2000; ++it) {
        // E step
        double nk[2] = {0, 0}, sx[2] = {0, 0};
        for (std::size_t k = 0; k < n; ++k) {
            const double a = std::log(m.w[0]) + log_normal_pdf(x[k], m.mu[0], m.sigma[0]);
            const double b = std::log(m.w[1]) + log_normal_pdf(x[k], m.mu[1], m.sigma[1]);
            resp[k] = 1.0 / (1.0 + std::exp(a - b));  // weight of component 1
            nk[1] += resp[k];
            sx[1] += resp[k] * x[k];
            sx[0] += (1.0 - resp[k]) * x[k];
        }
        nk[0] = double(n) - nk[1];
        // M step
        Mixture next = m;
        for (int c = 0; c < 2; ++c) {
            if (nk[c] < 1e-9) {
                next.w[c] = 0.0;
                continue;
            }
            next.w[c] = nk[c] / double(n);
            next.mu[c] = sx[c] / nk[c];
        }
        if (next.w[0] == 0.0 || next.w[1] == 0.0) {
            m = next;
            break;
        }
        double ss[2] = {0, 0};
        for (std::size_t k = 0; k < n; ++k) {
            ss[0] += (1.0 - resp[k]) * (x[k] - next.mu[0]) * (x[k] - next.mu[0]);
            ss[1] += resp[k] * (x[k] - next.mu[1]) * (x[k] - next.mu[1]);
        }
        for (int c = 0; c < 2; ++c) next.sigma[c] = std::max(std::sqrt(ss[c] / nk[c]), 1e-12);
        double change = 0.0;
        for (int c = 0; c < 2; ++c) {
            change = std::max({change, std::abs(next.mu[c] - m.mu[c]) / next.sigma[c],
                               std::abs(next.sigma[c] - m.sigma[c]) / next.sigma[c],
                               std::abs(next.w[c] - m.w[c]) / std::max(next.w[c], 1e-300)});
        }
        m = next;
        if (change < 1e-11) {
            ++it;
            break;
        }
    }
    fit.iterations = it;

    // Heavier component is g and is placed at the lower I.
    int g = m.w[0] > m.w[1] || (m.w[0] == m.w[1] && m.mu[0] <= m.mu[1]) ? 0 : 1;
    const int e = 1 - g;
    double sign = 1.0;
    if (m.w[e] > 0.0 && m.mu[g] > m.mu[e]) {
        sign = -1.0;
        fit.rotation += std::numbers::pi;
    }
    fit.rotation = std::remainder(fit.rotation, 2.0 * std::numbers::pi);
    fit.mu_g = sign * m.mu[g];
    fit.sigma_g = m.sigma[g];
    fit.p_g = m.w[g];
    if (m.w[e] > 0.0) {
        fit.mu_e = sign * m.mu[e];
        fit.sigma_e = m.sigma[e];
        fit.p_e = m.w[e];
    }

    // Single state when the second weight is negligible or BIC prefers one
    // Gaussian (2 parameters) over the mixture (5).
    double mean = 0.0, var = 0.0;
    for (double v : x) mean += v;
    mean /= double(n);
    for (double v : x) var += (v - mean) * (v - mean);
    var /= double(n);
    const double ll1 = -0.5 * double(n) * (std::log(2.0 * std::numbers::pi * var) + 1.0);
    if (m.w[e] > 0.0) {
        ll = log_likelihood(x, m);
    }
    fit.log_likelihood = ll;
    const double bic1 = -2.0 * ll1 + 2.0 * std::log(double(n));
    const double bic2 = -2.0 * ll + 5.0 * std::log(double(n));
    if (fit.p_e < 1e-3 || bic1 <= bic2) {
        fit.single_state = true;
    }
    return fit;
}

JumpRecord latch_filter(const IQTrace& trace, const IqHistogramFit& fit, double band) {
    validate(trace);
    if (fit.single_state) throw DataError("latch filter: histogram fit found a single state");
    std::vector<double> i_values(trace.samples.size());
    for (std::size_t k = 0; k < i_values.size(); ++k) i_values[k] = fit.rotated_i(trace.samples[k]);
    LatchParams params{fit.mu_g, fit.mu_e, fit.sigma_g, fit.sigma_e, band, fit.rotation};
    return latch_filter(i_values, trace.dt, params);
}

JumpRecord latch_filter(std::span<const double> i_values, double dt, const LatchParams& p) {
    if (!(dt > 0.0)) throw DataError("latch filter: dt must be positive");
    if (i_values.empty()) throw DataError("latch filter: no samples");
    if (!(p.band > 0.0)) throw DataError("latch filter: band multiplier must be positive");
    const double half_g = p.band * p.sigma_g, half_e = p.band * p.sigma_e;
    if (!(std::abs(p.mu_e - p.mu_g) > half_g + half_e)) {
        throw DataError("latch filter: insufficient SNR, the +/-" + std::to_string(p.band) +
                        " sigma bands overlap (|mu_e - mu_g| = " + std::to_string(std::abs(p.mu_e - p.mu_g)) +
                        ", band widths " + std::to_string(half_g) + " + " + std::to_string(half_e) + ")");
    }
    JumpRecord rec;
    rec.dt = dt;
    rec.filter = p;
    rec.states.resize(i_values.size());
    auto in_band = [](double v, double mu, double half) { return v >= mu - half && v <= mu + half; };
    QubitLevel state =
        std::abs(i_values[0] - p.mu_g) <= std::abs(i_values[0] - p.mu_e) ? QubitLevel::g : QubitLevel::e;
    for (std::size_t k = 0; k < i_values.size(); ++k) {
        const double v = i_values[k];
        if (state == QubitLevel::g && in_band(v, p.mu_e, half_e)) {
            state = QubitLevel::e;
            rec.transitions.push_back({k, state});
        } else if (state == QubitLevel::e && in_band(v, p.mu_g, half_g)) {
            state = QubitLevel::g;
            rec.transitions.push_back({k, state});
        }
        rec.states[k] = state;
    }
    for (std::size_t k = 0; k + 1 < rec.transitions.size(); ++k) {
        const double d = double(rec.transitions[k + 1].index - rec.transitions[k].index) * dt;
        (rec.transitions[k].to == QubitLevel::g ? rec.dwell_g : rec.dwell_e).push_back(d);
    }
    return rec;
}

DwellEstimate dwell_mle(const JumpRecord& record, std::size_t min_dwells) {
    DwellEstimate est;
    est.n_dwell_g = record.dwell_g.size();
    est.n_dwell_e = record.dwell_e.size();
    if (est.n_dwell_g < min_dwells || est.n_dwell_e < min_dwells) {
        throw DataError("dwell MLE: need " + std::to_string(min_dwells) + " complete dwells per state, have g=" +
                        std::to_string(est.n_dwell_g) + " e=" + std::to_string(est.n_dwell_e));
    }
    if (!(record.dt > 0.0)) throw DataError("dwell MLE: dt must be positive");
    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double d : v) s += d;
        return s / double(v.size());
    };
    est.raw_mean_g = mean(record.dwell_g);
    est.raw_mean_e = mean(record.dwell_e);
    const double dt = record.dt;
    const double p_down = dt / est.raw_mean_e;  // per-sample exit probabilities
    const double p_up = dt / est.raw_mean_g;
    const double s = p_down + p_up;
    if (!(s < 1.0)) throw DataError("dwell MLE: dwells are too short for the sampling interval");
    const double total = -std::log1p(-s) / dt;
    est.t_down = s / (total * p_down);
    est.t_up = s / (total * p_up);
    est.t1 = 1.0 / (1.0 / est.t_down + 1.0 / est.t_up);
    est.t_down_error = est.t_down / std::sqrt(double(est.n_dwell_e));
    est.t_up_error = est.t_up / std::sqrt(double(est.n_dwell_g));
    return est;
}

double effective_temperature(double f01_ghz, double t_up, double t_down) {
    if (!(f01_ghz > 0.0) || !(t_up > 0.0) || !(t_down > 0.0)) {
        throw DomainError("effective temperature needs positive f01 and times", {"f01", "t_up", "t_down"});
    }
    if (t_up == t_down) return std::numeric_limits<double>::infinity();
    return constants::planck * f01_ghz * constants::giga / (constants::boltzmann * std::log(t_up / t_down));
}

nlohmann::json to_json(const IqHistogramFit& fit) {
    return {{"rotation_rad", fit.rotation}, {"mu_g", fit.mu_g},       {"mu_e", fit.mu_e},
            {"sigma_g", fit.sigma_g},       {"sigma_e", fit.sigma_e}, {"p_g", fit.p_g},
            {"p_e", fit.p_e},               {"single_state", fit.single_state},
            {"iterations", fit.iterations}, {"log_likelihood", fit.log_likelihood}};
}

nlohmann::json to_json(const JumpRecord& rec, bool include_states) {
    nlohmann::json transitions = nlohmann::json::array();
    for (const auto& t : rec.transitions) {
        transitions.push_back({{"index", t.index}, {"to", t.to == QubitLevel::g ? "g" : "e"}});
    }
    nlohmann::json j = {{"dt_us", rec.dt},
                        {"n_samples", rec.states.size()},
                        {"transitions", transitions},
                        {"dwell_g_us", rec.dwell_g},
                        {"dwell_e_us", rec.dwell_e},
                        {"filter",
                         {{"mu_g", rec.filter.mu_g},
                          {"mu_e", rec.filter.mu_e},
                          {"sigma_g", rec.filter.sigma_g},
                          {"sigma_e", rec.filter.sigma_e},
                          {"band", rec.filter.band},
                          {"rotation_rad", rec.filter.rotation}}}};
    if (include_states) {
        std::string s(rec.states.size(), 'g');
        for (std::size_t k = 0; k < s.size(); ++k) {
            if (rec.states[k] == QubitLevel::e) s[k] = 'e';
        }
        j["states"] = s;
    }
    return j;
}

nlohmann::json to_json(const DwellEstimate& est) {
    return {{"t_down_us", est.t_down},
            {"t_up_us", est.t_up},
            {"t1_us", est.t1},
            {"t_down_error_us", est.t_down_error},
            {"t_up_error_us", est.t_up_error},
            {"n_dwell_g", est.n_dwell_g},
            {"n_dwell_e", est.n_dwell_e},
            {"raw_mean_g_us", est.raw_mean_g},
            {"raw_mean_e_us", est.raw_mean_e}};
}

}  // namespace fluxonium
