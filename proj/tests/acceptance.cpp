// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "fluxonium/coupled.hpp"
#include "fluxonium/errors.hpp"
#include "fluxonium/fitting.hpp"
#include "fluxonium/hamiltonian.hpp"
#include "fluxonium/noise.hpp"
#include "fluxonium/params.hpp"
#include "fluxonium/synth.hpp"
#include "fluxonium/timeseries.hpp"

using namespace fluxonium;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void check(bool ok, const std::string& what) {
        pass = pass && ok;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [fail]");
    }
};

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string fmt(const char* f, double a, double b) {
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
    char buf[192];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

CircuitParams device(double phi = 0.0) {
    return {23.4, charging_energy_from_capacitance(1.26), inductive_energy_from_inductance(285.0), phi};
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// 1
Outcome unit_conversions() {
    Outcome o;
    const double e_c = charging_energy_from_capacitance(1.26);
    const double e_l = inductive_energy_from_inductance(285.0);
    o.check(rel(e_c, 15.0) <= 0.03, fmt("E_C = %.6f GHz, %.2f%% from 15", e_c, 100 * rel(e_c, 15.0)));
    // hand evaluation (Phi_0/2pi)^2 / (L h) with CODATA 2018 constants
    o.check(std::abs(e_l - 0.573549167743) < 1e-6, fmt("E_L = %.9f GHz", e_l));
    return o;
}

// 2
Outcome solver_cross_validation() {
    Outcome o;
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    SolveOptions tight;
    tight.tolerance = 1e-8;
    for (int trial = 0; trial < 50; ++trial) {
        const double e_c = 2.0 + 14.0 * u(rng);
        const double ratio = 0.5 + 9.5 * u(rng);
        const CircuitParams p{ratio * e_c, e_c, 0.3 + 1.7 * u(rng), u(rng)};
        const auto a = solve(p, CphiRModel::sinusoidal(), 5, BasisSpec::oscillator(), tight);
        const auto b = solve(p, CphiRModel::sinusoidal(), 5, BasisSpec::phase_grid(), tight);
        for (int k = 0; k < 5; ++k) worst = std::max(worst, std::abs(a.energies(k) - b.energies(k)));
    }
    o.check(worst < 1e-6, fmt("50 sets, max |dE| over 5 levels = %.2e GHz", worst));
    return o;
}

SpectroscopyDataset device_spectrum(double noise, std::uint64_t seed) {
    SpectrumSpec s;
    s.params = device();
    s.phi_ext = uniform_grid(0.0, 0.5, 51);
    s.noise_ghz = noise;
    return gen_spectrum(s, seed).data;
}

// 3
Outcome spectrum_round_trip() {
    Outcome o;
    CircuitParams init = device();
    init.e_j *= 1.10;
    init.e_c_sigma *= 0.93;
    init.e_l *= 1.07;
    FitOptions opt;
    opt.coordinates = FitCoordinates::circuit;
    const auto clean = fit_spectrum(device_spectrum(0.0, 7), CphiRModel::sinusoidal(), init, opt);
    const double worst = std::max({rel(clean.estimate("e_j"), 23.4), rel(clean.estimate("c_sigma"), 1.26),
                                   rel(clean.estimate("l_q"), 285.0)});
    o.check(worst < 1e-4, fmt("noiseless: max relative error %.1e", worst));

    opt.n_starts = 1;
    CircuitParams near = device();
    near.e_j *= 1.03;
    near.e_c_sigma *= 0.98;
    near.e_l *= 1.02;
    double worst_z = 0.0;
    int outside = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto r = fit_spectrum(device_spectrum(0.001, 100 + seed), CphiRModel::sinusoidal(), near, opt);
        const double truth[] = {23.4, 1.26, 285.0};
        for (int k = 0; k < 3; ++k) {
            const double z = std::abs(r.estimates(k) - truth[k]) / r.std_errors(k);
            worst_z = std::max(worst_z, z);
            outside += z > 3.0;
        }
    }
    o.check(outside == 0, fmt("1 MHz noise, 20 seeds: %g of 60 estimates beyond 3 sigma, max |z| = %.2f", outside,
                              worst_z));
    return o;
}

// 4
Outcome cphir_discrimination() {
    Outcome o;
    const CircuitParams p = device();
    SpectrumSpec s;
    s.params = p;
    s.labels = {TransitionLabel::ge};
    s.phi_ext = uniform_grid(0.0, 0.5, 101);
    s.noise_ghz = 0.0005;
    auto data = gen_spectrum(s, 11).data;
    const auto windows = crossing_exclusion_windows(p, CphiRModel::sinusoidal(), 0.0, 0.5, {7.4}, 1.0);
    data.exclusion_windows = windows;

    FitOptions opt;
    opt.n_starts = 1;
    opt.dim_tolerance = 1e-4;
    const auto sin_fit = fit_spectrum(data, CphiRModel::sinusoidal(), p, opt);
    o.check(sin_fit.max_abs_residual < 2e-3,
            fmt("sinusoid on sinusoid data: max residual %.3f MHz", 1e3 * sin_fit.max_abs_residual));

    // Higher harmonics belong to the junction: E_C and E_L stay at the
    // sinusoidal fit values and E_J is refit.
    FitOptions ej_only = opt;
    ej_only.free.e_c_sigma = false;
    ej_only.free.e_l = false;
    for (const auto& model : {CphiRModel::slanted(), CphiRModel::sawtooth(10)}) {
        const auto r = fit_spectrum(data, model, sin_fit.params, ej_only);
        const auto full = fit_spectrum(data, model, sin_fit.params, opt);
        o.check(r.max_abs_residual >= 10e-3,
                model.name() + fmt(": max residual %.2f MHz (all three refit: %.2f MHz)", 1e3 * r.max_abs_residual,
                                   1e3 * full.max_abs_residual));
    }

    SpectrumSpec c = s;
    c.noise_ghz = 0.0;
    c.cphir = CphiRModel({1.0, 0.05}, "second-harmonic");
    auto contaminated = gen_spectrum(c, 11).data;
    contaminated.exclusion_windows = windows;
    const auto r = fit_spectrum(contaminated, CphiRModel::sinusoidal(), sin_fit.params, ej_only);
    const auto full = fit_spectrum(contaminated, CphiRModel::sinusoidal(), sin_fit.params, opt);
    o.check(r.max_abs_residual > 2e-3, fmt("5%% second harmonic: max residual %.2f MHz (all three refit: %.3f MHz)",
                                           1e3 * r.max_abs_residual, 1e3 * full.max_abs_residual));
    return o;
}

// Adjust (E_J, E_L) at fixed E_C until the high-minus-low g-e splits at zero
// and half flux equal the targets.
CircuitParams calibrate_two_ej(double e_c, double delta, double split0, double split_half) {
    CircuitParams p{23.4, e_c, 0.57, 0.0};
    const std::vector<double> ends = {0.0, 0.5};
    auto splits = [&](const CircuitParams& q) {
        CircuitParams hi = q;
        hi.e_j += delta;
        const auto a = predict_transitions(q, CphiRModel::sinusoidal(), ends, TransitionLabel::ge, 160);
        const auto b = predict_transitions(hi, CphiRModel::sinusoidal(), ends, TransitionLabel::ge, 160);
        return Eigen::Vector2d(b[0] - a[0] - split0, b[1] - a[1] - split_half);
    };
    for (int it = 0; it < 30; ++it) {
        const Eigen::Vector2d r = splits(p);
        if (r.cwiseAbs().maxCoeff() < 1e-8) break;
        Eigen::Matrix2d j;
        CircuitParams q = p;
        q.e_j += 1e-3;
        j.col(0) = (splits(q) - r) / 1e-3;
        q = p;
        q.e_l += 1e-5;
        j.col(1) = (splits(q) - r) / 1e-5;
        const Eigen::Vector2d step = j.colPivHouseholderQr().solve(-r);
        p.e_j += std::clamp(step(0), -2.0, 2.0);
        p.e_l = std::max(0.05, p.e_l + std::clamp(step(1), -0.1, 0.1));
    }
    return p;
}

// 5
Outcome two_ej() {
    Outcome o;
    const CircuitParams p = calibrate_two_ej(15.37, 0.19, 7.4e-3, -30e-3);
    o.check(true, fmt("calibrated E_J %.4f, E_L %.4f GHz", p.e_j, p.e_l));
    const auto crossings = branch_crossings(p, 0.19);
    const bool one = crossings.size() == 1;
    o.check(one && std::abs(crossings[0] - 0.08) <= 0.02,
            one ? fmt("branch crossing at phi_ext = %.4f", crossings[0]) : std::string("no single crossing"));

    SpectrumSpec s;
    s.params = p;
    s.labels = {TransitionLabel::ge};
    s.phi_ext = uniform_grid(0.0, 0.5, 101);
    s.noise_ghz = 0.001;
    s.delta_e_j = 0.19;
    auto data = gen_spectrum(s, 5).data;
    data.exclusion_windows = crossing_exclusion_windows(p, CphiRModel::sinusoidal(), 0.0, 0.5, {7.4}, 1.0);
    CircuitParams init = p;
    init.e_j *= 1.02;
    init.e_l *= 0.98;
    const auto fit = fit_two_ej(data, init);
    o.check(fit.resolved && rel(fit.delta_e_j, 0.19) <= 0.05,
            fmt("recovered split %.4f +- %.4f GHz", fit.delta_e_j, fit.delta_e_j_error));
    return o;
}

// 6
Outcome phase_slip() {
    Outcome o;
    const double nu = phase_slip_frequency({23.4, 15.4, 0.5, 0.0});
    // mpmath, 30 significant digits
    const double hand = 2.4483405752623489837;
    o.check(rel(nu, hand) < 1e-10, fmt("nu(23.4, 15.4) = %.12f GHz, rel. dev %.1e", nu, rel(nu, hand)));

    // exponent of ln f_ge against sqrt(E_J/E_C) at small E_L, algebraic prefactor removed
    const double e_c = 15.4, e_l = 0.1;
    std::vector<double> x, y;
    for (double ratio = 2.0; ratio <= 6.0 + 1e-9; ratio += 0.5) {
        const CircuitParams q{ratio * e_c, e_c, e_l, 0.5};
        const double f = transition_frequency(solve(q, CphiRModel::sinusoidal(), 2), 0, 1);
        x.push_back(std::sqrt(ratio));
        y.push_back(std::log(f / std::pow(8.0 * std::pow(q.e_j, 3) * e_c, 0.25)));
    }
    const double n = double(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sxy += (x[k] - mx) * (y[k] - my);
        sxx += (x[k] - mx) * (x[k] - mx);
    }
    const double slope = sxy / sxx;
    o.check(rel(slope, -std::sqrt(8.0)) <= 0.15,
            fmt("slope %.3f vs %.3f (%.1f%%)", slope, -std::sqrt(8.0), 100 * rel(slope, -std::sqrt(8.0))));
    return o;
}

// 7
Outcome quantum_jumps() {
    Outcome o;
    const double dt = 0.784;
    const auto n = static_cast<std::size_t>(2.0e6 / dt);
    const auto tel = gen_telegraph(9.9, 1100.0, dt, n, 1);
    const auto trace = gen_iq_trace(tel, -3.0, 3.0, 1.0, 2);
    const auto hist = histogram_iq(trace);
    const auto est = dwell_mle(latch_filter(trace, hist, 2.0));
    o.check(rel(est.t_down, 9.9) <= 0.10, fmt("T_down %.2f us", est.t_down));
    o.check(rel(est.t_up, 1100.0) <= 0.10, fmt("T_up %.0f us", est.t_up));
    o.check(rel(est.t1, 9.8) <= 0.10, fmt("T1 %.2f us (2 s of data)", est.t1));
    return o;
}

// 8
Outcome rtn_psd() {
    Outcome o;
    const RtnSpec spec{9.4e-3, 1.89e13, 3.73e11, 2.08, 400, 85};
    const auto psd = estimate_psd(gen_rtn(spec, 1), 400 * 2.08);
    const auto fit = fit_rtn_psd(psd);
    o.check(rel(fit.gamma, spec.gamma_knee) <= 0.25, fmt("Gamma %.4g Hz", fit.gamma));
    o.check(rel(fit.b, spec.b) <= 0.25, fmt("b %.4g", fit.b));
    o.check(rel(fit.s0, spec.s0) <= 0.25, fmt("S0 %.4g", fit.s0));
    return o;
}

// 9
Outcome readout() {
    Outcome o;
    const ReflectionModel truth{7.4086, 1.00, -1.72, 1.0};
    const auto f = uniform_grid(truth.f0 - 0.006, truth.f0 + 0.006, 241);
    const auto fit = fit_reflection(gen_s11(truth, f, 0.02, 3));
    o.check(rel(fit.model.chi, -1.72) <= 0.02 && rel(fit.model.kappa, 1.0) <= 0.02,
            fmt("chi %.4f MHz, kappa %.4f MHz", fit.model.chi, fit.model.kappa));
    const auto weak = fit_reflection(gen_s11({7.4086, 1.00, -0.5, 1.0}, f, 0.02, 4));
    o.check(fit.resolved && !weak.resolved, "|chi| > kappa flagged for -1.72 MHz, not for -0.5 MHz");
    return o;
}

// 10
Outcome shot_noise() {
    Outcome o;
    BudgetInputs in;
    in.t1 = 14.0;
    in.points = {{0.5, 14.0, 0.0}};  // Gamma2 = Gamma1, so the residual is Gamma1/2
    in.resonator = {7.4086, 1.00, 0.1, 0.0};
    in.chi_mhz = -1.72;
    const auto b = budget_report(in);
    o.check(rel(b.implied_n_photon, 0.007) <= 0.30, fmt("implied nbar %.5f", b.implied_n_photon));
    return o;
}

// 11
Outcome invariants() {
    Outcome o;
    {
        const std::vector<double> g = {0.137, 1.137, -0.863, 0.5 + 0.137, 0.5 - 0.137};
        const auto s = spectrum_sweep(device(), CphiRModel::sinusoidal(), g, 4);
        const double period = std::max((s.row(1) - s.row(0)).cwiseAbs().maxCoeff(),
                                       (s.row(2) - s.row(0)).cwiseAbs().maxCoeff());
        o.check(period < 1e-7, fmt("flux periodicity %.1e GHz", period));
        const double mirror = (s.row(3) - s.row(4)).cwiseAbs().maxCoeff();
        const double slope = flux_slope(device(0.5), CphiRModel::sinusoidal(), 0, 1);
        o.check(mirror < 1e-7 && slope < 1e-6, fmt("half-flux stationarity: mirror %.1e GHz, slope %.1e", mirror, slope));
    }
    {
        const auto at0 = solve(device(0.0), CphiRModel::sinusoidal(), 4);
        const auto mid = solve(device(0.25), CphiRModel::sinusoidal(), 4);
        const double a = std::abs(matrix_element(at0, PhaseOperator::n, 0, 2));
        const double b = std::abs(matrix_element(mid, PhaseOperator::n, 0, 2));
        o.check(a * 10.0 <= b, fmt("|n_gf| %.1e at zero flux vs %.4f at 0.25", a, b));
    }
    {
        const auto traces = gen_rtn({9.4e-3, 1.89e13, 3.73e11, 2.08, 400, 85}, 9);
        const auto psd = estimate_psd(traces, 400 * 2.08);
        double sum = 0.0, var = 0.0;
        for (double p : psd.power) sum += p;
        for (const auto& t : traces) {
            const double m = std::accumulate(t.begin(), t.end(), 0.0) / double(t.size());
            for (double v : t) var += (v - m) * (v - m) / double(t.size());
        }
        var /= double(traces.size());
        o.check(rel(sum / psd.total_duration, var) < 1e-10, fmt("Parseval rel. dev %.1e", rel(sum / psd.total_duration, var)));
    }
    {
        const auto tel = gen_telegraph(9.9, 1100.0, 0.784, 200000, 3);
        const auto trace = gen_iq_trace(tel, -3.0, 3.0, 1.0, 4);
        const auto a = latch_filter(trace, histogram_iq(trace));
        const auto b = latch_filter(trace, histogram_iq(trace));
        o.check(a.states == b.states && a.dwell_e == b.dwell_e && a.dwell_g == b.dwell_g, "latch determinism");
    }
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    std::setvbuf(stdout, nullptr, _IOLBF, 0);
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"unit conversions", unit_conversions},
        {"oscillator vs phase-grid eigenvalues", solver_cross_validation},
        {"spectrum round trip", spectrum_round_trip},
        {"CphiR discrimination", cphir_discrimination},
        {"two-E_J model", two_ej},
        {"phase-slip approximation", phase_slip},
        {"quantum-jump pipeline", quantum_jumps},
        {"RTN power spectrum", rtn_psd},
        {"readout model", readout},
        {"shot-noise consistency", shot_noise},
        {"invariant suites", invariants},
    };
    std::set<int> only;
    for (int k = 1; k < argc; ++k) only.insert(std::atoi(argv[k]));

    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const int id = static_cast<int>(k) + 1;
        if (!only.empty() && !only.count(id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = criteria[k].second();
        } catch (const std::exception& e) {
            out.pass = false;
            out.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("%s  %2d %-38s %s (%.1f s)\n", out.pass ? "PASS" : "FAIL", id, criteria[k].first.c_str(),
                    out.detail.c_str(), secs);
        failed += !out.pass;
    }
    std::printf("%d criteria failed\n", failed);
    return failed == 0 ? 0 : 1;
}
