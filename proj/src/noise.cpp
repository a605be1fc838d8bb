#include "fluxonium/noise.hpp"

#include <algorithm>
#include <numbers>
#include <string>

#include "fluxonium/errors.hpp"

namespace fluxonium {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_positive(double value, const char* name) {
    if (!(value > 0.0) || !std::isfinite(value)) {
        throw DomainError(std::string(name) + " must be positive and finite", {name});
    }
}

}  // namespace

double flux_dephasing_rate(double a_phi_uphi0, double slope_ghz_per_phi0, double prefactor) {
    // uPhi0 * GHz/Phi0 = 1e-3 MHz; angular rate in 1/us.
    return kTwoPi * prefactor * a_phi_uphi0 * std::abs(slope_ghz_per_phi0) * 1e-3;
}

FluxNoiseFit flux_noise_amplitude(std::span<const FluxNoisePoint> data, double t1_mean,
                                  const FluxNoiseOptions& options) {
    if (data.size() < 4) {
        throw DataError("flux-noise fit needs at least 4 flux points, have " + std::to_string(data.size()));
    }
    require_positive(t1_mean, "t1_mean");
    require_positive(options.time_unit_us, "time_unit_us");
    require_positive(options.prefactor, "prefactor");
    const double n = static_cast<double>(data.size());
    const double gamma1_half = 0.5 / (t1_mean * options.time_unit_us);
    std::vector<double> x(data.size()), y(data.size());
    for (std::size_t k = 0; k < data.size(); ++k) {
        require_positive(data[k].t2_echo, "t2_echo");
        if (!std::isfinite(data[k].slope)) throw DataError("flux slope is not finite");
        x[k] = flux_dephasing_rate(1.0, data[k].slope, options.prefactor);
        y[k] = 1.0 / (data[k].t2_echo * options.time_unit_us) - gamma1_half;
    }
    // Sums in sorted order so the result does not depend on the input order.
    std::vector<std::size_t> order(data.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return x[a] != x[b] ? x[a] < x[b] : y[a] < y[b];
    });
    double mx = 0.0, my = 0.0;
    for (std::size_t k : order) {
        mx += x[k];
        my += y[k];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t k : order) {
        sxx += (x[k] - mx) * (x[k] - mx);
        sxy += (x[k] - mx) * (y[k] - my);
    }
    if (!(sxx > 0.0)) throw DataError("flux slopes are all equal; the amplitude is not identifiable");
    FluxNoiseFit fit;
    fit.n_points = static_cast<int>(data.size());
    fit.a_phi = sxy / sxx;
    fit.intercept = my - fit.a_phi * mx;
    double ss = 0.0;
    for (std::size_t k : order) {
        const double r = y[k] - fit.intercept - fit.a_phi * x[k];
        ss += r * r;
    }
    const double s2 = ss / (n - 2.0);
    fit.a_phi_error = std::sqrt(s2 / sxx);
    fit.intercept_error = std::sqrt(s2 * (1.0 / n + mx * mx / sxx));
    fit.negative_slope = fit.a_phi < 0.0;
    return fit;
}

double shot_noise_dephasing(const ResonatorParams& res, double chi_mhz) {
    if (!(res.n_photon >= 0.0)) throw DomainError("n_photon must be >= 0", {"n_photon"});
    require_positive(res.kappa, "kappa");
    if (!std::isfinite(chi_mhz)) throw DomainError("chi must be finite", {"chi"});
    const double kappa = kTwoPi * res.kappa;
    const double chi = kTwoPi * chi_mhz;
    return res.n_photon * kappa * chi * chi / (kappa * kappa + chi * chi);
}

double implied_photon_number(double rate, double kappa_mhz, double chi_mhz) {
    if (chi_mhz == 0.0) throw DomainError("chi = 0 gives no shot-noise dephasing", {"chi"});
    ResonatorParams unit;
    unit.kappa = kappa_mhz;
    unit.n_photon = 1.0;
    return rate / shot_noise_dephasing(unit, chi_mhz);
}

DecoherenceBudget budget_report(const BudgetInputs& in) {
    require_positive(in.t1, "t1");
    if (in.points.empty()) throw DataError("budget needs at least one flux point");
    if (!(in.a_phi >= 0.0)) throw DomainError("a_phi must be >= 0", {"a_phi"});
    DecoherenceBudget out;
    out.t1 = in.t1;
    out.a_phi = in.a_phi;
    out.gamma1_over_2 = 0.5 / in.t1;
    out.gamma_shot = in.resonator.n_photon > 0.0 ? shot_noise_dephasing(in.resonator, in.chi_mhz) : 0.0;
    std::size_t sweet = 0;
    for (std::size_t k = 0; k < in.points.size(); ++k) {
        const auto& p = in.points[k];
        require_positive(p.t2_echo, "t2_echo");
        BudgetEntry e;
        e.phi_ext = p.phi_ext;
        e.gamma2 = 1.0 / p.t2_echo;
        e.gamma1_over_2 = out.gamma1_over_2;
        e.gamma_flux = flux_dephasing_rate(in.a_phi, p.slope, in.prefactor);
        e.gamma_shot = out.gamma_shot;
        const double residual = e.gamma2 - e.gamma1_over_2 - e.gamma_flux - e.gamma_shot;
        e.inconsistent = residual < -in.tolerance;
        e.gamma_ic_residual = std::max(0.0, residual);
        out.inconsistent = out.inconsistent || e.inconsistent;
        out.entries.push_back(e);
        if (std::abs(p.slope) < std::abs(in.points[sweet].slope)) sweet = k;
    }
    // Sweet-spot residual before the shot-noise term is attributed.
    const auto& s = out.entries[sweet];
    out.sweet_spot_residual = std::max(0.0, s.gamma2 - s.gamma1_over_2 - s.gamma_flux);
    if (in.chi_mhz != 0.0 && in.resonator.kappa > 0.0) {
        out.implied_n_photon = implied_photon_number(out.sweet_spot_residual, in.resonator.kappa, in.chi_mhz);
    }
    if (in.sweet_spot_curvature && *in.sweet_spot_curvature > 0.0) {
        // Gamma ~ 2 pi A^2 |f''| with A in Phi_0 and f'' in GHz/Phi_0^2.
        out.implied_second_order_a_phi =
            1e6 * std::sqrt(out.sweet_spot_residual / (kTwoPi * *in.sweet_spot_curvature * 1e3));
    }
    return out;
}

nlohmann::json to_json(const DecoherenceBudget& b) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : b.entries) {
        entries.push_back({{"phi_ext", e.phi_ext},
                           {"gamma2_per_us", e.gamma2},
                           {"gamma1_over_2_per_us", e.gamma1_over_2},
                           {"gamma_flux_per_us", e.gamma_flux},
                           {"gamma_shot_per_us", e.gamma_shot},
                           {"gamma_ic_residual_per_us", e.gamma_ic_residual},
                           {"inconsistent", e.inconsistent}});
    }
    nlohmann::json j = {{"t1_us", b.t1},
                        {"gamma1_over_2_per_us", b.gamma1_over_2},
                        {"a_phi_uphi0", b.a_phi},
                        {"gamma_shot_per_us", b.gamma_shot},
                        {"entries", entries},
                        {"sweet_spot_residual_per_us", b.sweet_spot_residual},
                        {"implied_n_photon", b.implied_n_photon},
                        {"inconsistent", b.inconsistent}};
    j["implied_second_order_a_phi_uphi0"] =
        b.implied_second_order_a_phi ? nlohmann::json(*b.implied_second_order_a_phi) : nlohmann::json(nullptr);
    return j;
}

DecoherenceBudget decoherence_budget_from_json(const nlohmann::json& j) {
    DecoherenceBudget b;
    b.t1 = j.at("t1_us").get<double>();
    b.gamma1_over_2 = j.at("gamma1_over_2_per_us").get<double>();
    b.a_phi = j.at("a_phi_uphi0").get<double>();
    b.gamma_shot = j.at("gamma_shot_per_us").get<double>();
    for (const auto& e : j.at("entries")) {
        BudgetEntry x;
        x.phi_ext = e.at("phi_ext").get<double>();
        x.gamma2 = e.at("gamma2_per_us").get<double>();
        x.gamma1_over_2 = e.at("gamma1_over_2_per_us").get<double>();
        x.gamma_flux = e.at("gamma_flux_per_us").get<double>();
        x.gamma_shot = e.at("gamma_shot_per_us").get<double>();
        x.gamma_ic_residual = e.at("gamma_ic_residual_per_us").get<double>();
        x.inconsistent = e.at("inconsistent").get<bool>();
        b.entries.push_back(x);
    }
    b.sweet_spot_residual = j.at("sweet_spot_residual_per_us").get<double>();
    b.implied_n_photon = j.at("implied_n_photon").get<double>();
    if (!j.at("implied_second_order_a_phi_uphi0").is_null()) {
        b.implied_second_order_a_phi = j.at("implied_second_order_a_phi_uphi0").get<double>();
    }
    b.inconsistent = j.at("inconsistent").get<bool>();
    return b;
}

nlohmann::json to_json(const BudgetInputs& in) {
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : in.points) {
        points.push_back({{"phi_ext", p.phi_ext}, {"t2_echo_us", p.t2_echo}, {"slope_ghz_per_phi0", p.slope}});
    }
    nlohmann::json j = {{"t1_us", in.t1},
                        {"points", points},
                        {"a_phi_uphi0", in.a_phi},
                        {"echo_prefactor", in.prefactor},
                        {"resonator", to_json(in.resonator)},
                        {"chi_mhz", in.chi_mhz},
                        {"tolerance_per_us", in.tolerance}};
    if (in.sweet_spot_curvature) j["sweet_spot_curvature_ghz_per_phi0_sq"] = *in.sweet_spot_curvature;
    return j;
}

BudgetInputs budget_inputs_from_json(const nlohmann::json& j) {
    static const char* known[] = {"t1_us", "points", "a_phi_uphi0", "echo_prefactor", "resonator",
                                  "chi_mhz", "tolerance_per_us", "sweet_spot_curvature_ghz_per_phi0_sq"};
    for (const auto& [key, value] : j.items()) {
        if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) ==
            std::end(known)) {
            throw ConfigError("budget inputs: unknown key '" + key + "'");
        }
    }
    BudgetInputs in;
    try {
        in.t1 = j.at("t1_us").get<double>();
        for (const auto& p : j.at("points")) {
            in.points.push_back({p.at("phi_ext").get<double>(), p.at("t2_echo_us").get<double>(),
                                 p.at("slope_ghz_per_phi0").get<double>()});
        }
        in.a_phi = j.value("a_phi_uphi0", 0.0);
        in.prefactor = j.value("echo_prefactor", kEchoPrefactor);
        if (j.contains("resonator")) in.resonator = resonator_params_from_json(j.at("resonator"));
        in.chi_mhz = j.value("chi_mhz", 0.0);
        in.tolerance = j.value("tolerance_per_us", 1e-9);
        if (j.contains("sweet_spot_curvature_ghz_per_phi0_sq")) {
            in.sweet_spot_curvature = j.at("sweet_spot_curvature_ghz_per_phi0_sq").get<double>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("budget inputs: ") + e.what());
    }
    return in;
}

nlohmann::json to_json(const FluxNoiseFit& fit) {
    return {{"a_phi_uphi0", fit.a_phi},
            {"a_phi_error_uphi0", fit.a_phi_error},
            {"intercept_per_us", fit.intercept},
            {"intercept_error_per_us", fit.intercept_error},
            {"negative_slope", fit.negative_slope},
            {"n_points", fit.n_points}};
}

}  // namespace fluxonium
