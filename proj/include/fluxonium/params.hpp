#pragma once

#include <json.hpp>

namespace fluxonium {

// Unit system: energies are frequencies E/h in GHz, times in microseconds,
// external flux in units of the flux quantum.

struct CircuitParams {
    double e_j = 0.0;        ///< Josephson energy, GHz
    double e_c_sigma = 0.0;  ///< total charging energy e^2/(2 C_sigma h), GHz
    double e_l = 0.0;        ///< inductive energy, GHz
    double phi_ext = 0.0;    ///< external flux, Phi_0

    bool operator==(const CircuitParams&) const = default;
};

/// C_sigma = C_q + C_J, in fF. Build through `make` so the sum holds exactly.
struct CapacitanceDecomposition {
    double c_q = 0.0;
    double c_j = 0.0;
    double c_sigma = 0.0;

    static CapacitanceDecomposition make(double c_q_ff, double c_j_ff);
};

struct ResonatorParams {
    double f_r = 0.0;       ///< bare resonator frequency, GHz
    double kappa = 0.0;     ///< total linewidth kappa/2pi, MHz
    double g = 0.0;         ///< qubit-resonator coupling, GHz
    double n_photon = 0.0;  ///< mean photon number

    bool operator==(const ResonatorParams&) const = default;
};

/// e^2 / (2 C h) in GHz for C in fF. Throws DomainError for c <= 0.
double charging_energy_from_capacitance(double c_ff);
/// Inverse of charging_energy_from_capacitance, fF.
double capacitance_from_charging_energy(double e_c_ghz);
/// (Phi_0 / 2pi)^2 / (L h) in GHz for L in nH. Throws DomainError for l <= 0.
double inductive_energy_from_inductance(double l_nh);
/// Inverse of inductive_energy_from_inductance, nH.
double inductance_from_inductive_energy(double e_l_ghz);

/// Returns `params` unchanged or throws DomainError listing every bad field.
CircuitParams validate(const CircuitParams& params);
ResonatorParams validate(const ResonatorParams& params);

// JSON with unit-suffixed keys. Qubit: e_j_ghz, one of e_c_sigma_ghz /
// c_sigma_ff / (c_q_ff + c_j_ff), one of e_l_ghz / l_q_nh, phi_ext_phi0.
// Resonator: f_r_ghz, kappa_mhz, g_ghz, n_photon. Unknown keys are rejected.
CircuitParams circuit_params_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CircuitParams& p);
ResonatorParams resonator_params_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ResonatorParams& r);

}  // namespace fluxonium
