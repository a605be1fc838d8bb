#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "fluxonium/params.hpp"

namespace fluxonium {

/// Default echo prefactor for 1/f flux noise: Gamma_Phi = 2 pi A |df/dPhi| sqrt(ln 2).
inline const double kEchoPrefactor = std::sqrt(std::log(2.0));

/// Pure dephasing rate (1/us) from first-order 1/f flux noise.
/// a_phi in micro-Phi_0, slope |df_ge/dphi_ext| in GHz/Phi_0.
double flux_dephasing_rate(double a_phi_uphi0, double slope_ghz_per_phi0,
                           double prefactor = kEchoPrefactor);

struct FluxNoisePoint {
    double phi_ext = 0.0;
    double t2_echo = 0.0;  ///< in `time_unit_us` units
    double slope = 0.0;    ///< |df_ge/dphi_ext|, GHz/Phi_0
};

struct FluxNoiseOptions {
    double prefactor = kEchoPrefactor;
    double time_unit_us = 1.0;  ///< length of the input time unit in us (1e-3 for ns)
};

struct FluxNoiseFit {
    double a_phi = 0.0;        ///< micro-Phi_0
    double a_phi_error = 0.0;
    double intercept = 0.0;    ///< 1/us, residual dephasing at zero slope
    double intercept_error = 0.0;
    bool negative_slope = false;
    int n_points = 0;
};

/// Ordinary least squares of Gamma2 - Gamma1/2 against the modelled
/// first-order sensitivity. Needs >= 4 points with distinct slopes.
FluxNoiseFit flux_noise_amplitude(std::span<const FluxNoisePoint> data, double t1_mean,
                                  const FluxNoiseOptions& options = {});

/// Photon shot-noise dephasing Gamma = nbar kappa chi^2 / (kappa^2 + chi^2)
/// in 1/us, with kappa = 2 pi kappa_mhz and chi = 2 pi chi_mhz.
double shot_noise_dephasing(const ResonatorParams& res, double chi_mhz);
/// nbar that makes shot_noise_dephasing equal `rate` (1/us).
double implied_photon_number(double rate, double kappa_mhz, double chi_mhz);

struct BudgetPoint {
    double phi_ext = 0.0;
    double t2_echo = 0.0;  ///< us
    double slope = 0.0;    ///< GHz/Phi_0
};

struct BudgetInputs {
    double t1 = 0.0;  ///< us
    std::vector<BudgetPoint> points;
    double a_phi = 0.0;  ///< micro-Phi_0, 0 switches flux noise off
    double prefactor = kEchoPrefactor;
    ResonatorParams resonator;  ///< n_photon = 0 switches shot noise off
    double chi_mhz = 0.0;
    /// |d^2 f_ge / dphi_ext^2| at the sweet spot, GHz/Phi_0^2; enables the
    /// second-order flux-noise reading of the sweet-spot residual.
    std::optional<double> sweet_spot_curvature;
    double tolerance = 1e-9;  ///< 1/us slack before components exceeding the total are flagged
};

struct BudgetEntry {
    double phi_ext = 0.0;
    double gamma2 = 0.0;  ///< measured 1/T2echo, 1/us
    double gamma1_over_2 = 0.0;
    double gamma_flux = 0.0;
    double gamma_shot = 0.0;
    double gamma_ic_residual = 0.0;
    bool inconsistent = false;  ///< modelled components exceed the measurement
};

struct DecoherenceBudget {
    double t1 = 0.0;
    double gamma1_over_2 = 0.0;
    double a_phi = 0.0;
    double gamma_shot = 0.0;
    std::vector<BudgetEntry> entries;
    /// Readings of the residual at the smallest-slope point: the nbar that
    /// would explain it as shot noise alone, and the 1/f amplitude (uPhi_0)
    /// that would explain it as second-order flux noise.
    double sweet_spot_residual = 0.0;
    double implied_n_photon = 0.0;
    std::optional<double> implied_second_order_a_phi;
    bool inconsistent = false;
};

DecoherenceBudget budget_report(const BudgetInputs& inputs);

nlohmann::json to_json(const DecoherenceBudget& budget);
nlohmann::json to_json(const BudgetInputs& inputs);
DecoherenceBudget decoherence_budget_from_json(const nlohmann::json& j);
BudgetInputs budget_inputs_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FluxNoiseFit& fit);

}  // namespace fluxonium
