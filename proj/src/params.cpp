#include "fluxonium/params.hpp"

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "fluxonium/constants.hpp"
#include "fluxonium/errors.hpp"

namespace fluxonium {

namespace {

using constants::elementary_charge;
using constants::planck;
using constants::reduced_flux_quantum;

constexpr double kChargingScale =
    elementary_charge * elementary_charge / (2.0 * constants::femto * planck * constants::giga);
constexpr double kInductiveScale =
    reduced_flux_quantum * reduced_flux_quantum / (constants::nano * planck * constants::giga);

void require_positive(double value, const char* field) {
    if (!(value > 0.0) || !std::isfinite(value)) {
        throw DomainError(std::string(field) + " must be positive and finite, got " +
                              std::to_string(value),
                          {field});
    }
}

void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                         const char* what) {
    if (!j.is_object()) throw ConfigError(std::string(what) + ": expected a JSON object");
    for (const auto& item : j.items()) {
        if (!allowed.contains(item.key())) {
            throw ConfigError(std::string(what) + ": unknown key '" + item.key() + "'");
        }
    }
}

double number(const nlohmann::json& j, const char* key) {
    const auto& v = j.at(key);
    if (!v.is_number()) throw ConfigError(std::string("key '") + key + "' must be a number");
    return v.get<double>();
}

}  // namespace

CapacitanceDecomposition CapacitanceDecomposition::make(double c_q_ff, double c_j_ff) {
    std::vector<std::string> bad;
    if (!(c_q_ff >= 0.0) || !std::isfinite(c_q_ff)) bad.emplace_back("c_q");
    if (!(c_j_ff >= 0.0) || !std::isfinite(c_j_ff)) bad.emplace_back("c_j");
    if (!bad.empty()) throw DomainError("capacitances must be non-negative", bad);
    return {c_q_ff, c_j_ff, c_q_ff + c_j_ff};
}

double charging_energy_from_capacitance(double c_ff) {
    require_positive(c_ff, "capacitance");
    return kChargingScale / c_ff;
}

double capacitance_from_charging_energy(double e_c_ghz) {
    require_positive(e_c_ghz, "charging energy");
    return kChargingScale / e_c_ghz;
}

double inductive_energy_from_inductance(double l_nh) {
    require_positive(l_nh, "inductance");
    return kInductiveScale / l_nh;
}

double inductance_from_inductive_energy(double e_l_ghz) {
    require_positive(e_l_ghz, "inductive energy");
    return kInductiveScale / e_l_ghz;
}

CircuitParams validate(const CircuitParams& params) {
    std::vector<std::string> bad;
    std::string msg;
    auto check = [&](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            bad.emplace_back(name);
            msg += std::string(msg.empty() ? "" : "; ") + name + " must be positive (got " +
                   std::to_string(v) + ")";
        }
    };
    check(params.e_j, "e_j");
    check(params.e_c_sigma, "e_c_sigma");
    check(params.e_l, "e_l");
    if (!std::isfinite(params.phi_ext)) {
        bad.emplace_back("phi_ext");
        msg += std::string(msg.empty() ? "" : "; ") + "phi_ext must be finite";
    }
    if (!bad.empty()) throw DomainError("invalid circuit parameters: " + msg, bad);
    return params;
}

ResonatorParams validate(const ResonatorParams& params) {
    std::vector<std::string> bad;
    if (!(params.f_r > 0.0) || !std::isfinite(params.f_r)) bad.emplace_back("f_r");
    if (!(params.kappa > 0.0) || !std::isfinite(params.kappa)) bad.emplace_back("kappa");
    if (!(params.g >= 0.0) || !std::isfinite(params.g)) bad.emplace_back("g");
    if (!(params.n_photon >= 0.0) || !std::isfinite(params.n_photon)) {
        bad.emplace_back("n_photon");
    }
    if (!bad.empty()) {
        std::string msg = "invalid resonator parameters:";
        for (const auto& b : bad) msg += " " + b;
        throw DomainError(msg, bad);
    }
    return params;
}

CircuitParams circuit_params_from_json(const nlohmann::json& j) {
    reject_unknown_keys(j,
                        {"e_j_ghz", "e_c_sigma_ghz", "c_sigma_ff", "c_q_ff", "c_j_ff", "e_l_ghz",
                         "l_q_nh", "phi_ext_phi0"},
                        "circuit parameters");
    CircuitParams p;
    if (!j.contains("e_j_ghz")) throw ConfigError("circuit parameters: missing e_j_ghz");
    p.e_j = number(j, "e_j_ghz");

    const int n_cap = int(j.contains("e_c_sigma_ghz")) + int(j.contains("c_sigma_ff")) +
                      int(j.contains("c_q_ff") || j.contains("c_j_ff"));
    if (n_cap != 1) {
        throw ConfigError(
            "circuit parameters: give exactly one of e_c_sigma_ghz, c_sigma_ff, c_q_ff+c_j_ff");
    }
    if (j.contains("e_c_sigma_ghz")) {
        p.e_c_sigma = number(j, "e_c_sigma_ghz");
    } else if (j.contains("c_sigma_ff")) {
        p.e_c_sigma = charging_energy_from_capacitance(number(j, "c_sigma_ff"));
    } else {
        if (!j.contains("c_q_ff") || !j.contains("c_j_ff")) {
            throw ConfigError("circuit parameters: c_q_ff and c_j_ff must be given together");
        }
        const auto caps = CapacitanceDecomposition::make(number(j, "c_q_ff"), number(j, "c_j_ff"));
        p.e_c_sigma = charging_energy_from_capacitance(caps.c_sigma);
    }

    if (j.contains("e_l_ghz") == j.contains("l_q_nh")) {
        throw ConfigError("circuit parameters: give exactly one of e_l_ghz, l_q_nh");
    }
    p.e_l = j.contains("e_l_ghz") ? number(j, "e_l_ghz")
                                  : inductive_energy_from_inductance(number(j, "l_q_nh"));
    if (j.contains("phi_ext_phi0")) p.phi_ext = number(j, "phi_ext_phi0");
    return validate(p);
}

nlohmann::json to_json(const CircuitParams& p) {
    return {{"e_j_ghz", p.e_j},
            {"e_c_sigma_ghz", p.e_c_sigma},
            {"e_l_ghz", p.e_l},
            {"phi_ext_phi0", p.phi_ext}};
}

ResonatorParams resonator_params_from_json(const nlohmann::json& j) {
    reject_unknown_keys(j, {"f_r_ghz", "kappa_mhz", "g_ghz", "n_photon"}, "resonator parameters");
    ResonatorParams r;
    for (const char* key : {"f_r_ghz", "kappa_mhz", "g_ghz"}) {
        if (!j.contains(key)) throw ConfigError(std::string("resonator parameters: missing ") + key);
    }
    r.f_r = number(j, "f_r_ghz");
    r.kappa = number(j, "kappa_mhz");
    r.g = number(j, "g_ghz");
    if (j.contains("n_photon")) r.n_photon = number(j, "n_photon");
    return validate(r);
}

nlohmann::json to_json(const ResonatorParams& r) {
    return {{"f_r_ghz", r.f_r}, {"kappa_mhz", r.kappa}, {"g_ghz", r.g}, {"n_photon", r.n_photon}};
}

}  // namespace fluxonium
