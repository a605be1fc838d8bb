#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fluxonium/coupled.hpp"
#include "fluxonium/cphir.hpp"
#include "fluxonium/least_squares.hpp"
#include "fluxonium/params.hpp"

namespace fluxonium {

enum class TransitionLabel { ge, gf, unassigned };
std::string_view to_string(TransitionLabel label);
TransitionLabel transition_label_from_string(std::string_view text);

struct SpectroscopyPoint {
    double phi_ext = 0.0;    ///< Phi_0
    double frequency = 0.0;  ///< GHz
    TransitionLabel label = TransitionLabel::ge;
    double weight = 1.0;     ///< residuals are multiplied by sqrt(weight)
};

/// Closed flux interval [lo, hi] whose points are left out of fits.
struct FluxWindow {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double phi) const noexcept { return phi >= lo && phi <= hi; }
};

struct SpectroscopyDataset {
    std::vector<SpectroscopyPoint> points;
    std::vector<FluxWindow> exclusion_windows;

    bool excluded(double phi_ext) const noexcept;
    std::size_t active_count() const noexcept;
};

/// Throws DataError on non-positive frequencies or weights, non-finite flux,
/// or overlapping / inverted exclusion windows.
void validate(const SpectroscopyDataset& data);

/// Sorts and merges overlapping windows.
std::vector<FluxWindow> merge_windows(std::vector<FluxWindow> windows);

/// Flux intervals in [phi_lo, phi_hi] where the predicted g-e or g-f line lies
/// within `half_width_ghz` of any of `centers_ghz` (defaults: the readout
/// resonator and the first superinductor mode), merged. Edges found on the
/// `n_grid` scan are refined by bisection.
std::vector<FluxWindow> crossing_exclusion_windows(const CircuitParams& params, const CphiRModel& cphir,
                                                   double phi_lo, double phi_hi,
                                                   std::vector<double> centers_ghz = {7.4, 13.1},
                                                   double half_width_ghz = 1.0, int n_grid = 401);

struct FreeParameters {
    bool e_j = true;
    bool e_c_sigma = true;
    bool e_l = true;
    int count() const noexcept { return int(e_j) + int(e_c_sigma) + int(e_l); }
};

/// Coordinates the optimizer and the covariance work in: (E_J, E_C, E_L) in
/// GHz, or (E_J in GHz, C_sigma in fF, L_q in nH).
enum class FitCoordinates { energies, circuit };

struct FitOptions {
    FreeParameters free;
    FitCoordinates coordinates = FitCoordinates::energies;
    int n_starts = 16;           ///< Latin-hypercube starts, the first is `init`
    double start_spread = 0.25;  ///< half-width of the start box in log-parameter space
    int stage_iterations = 8;    ///< LM iterations per start before the best is polished
    std::uint64_t seed = 1;
    int basis_dim = 0;           ///< oscillator truncation; 0 picks it from a convergence check
    double dim_tolerance = 1e-6; ///< GHz, for the automatic truncation
    LeastSquaresOptions lsq;
};

struct FitReport {
    CircuitParams params;
    CphiRModel cphir = CphiRModel::sinusoidal();
    FitCoordinates coordinates = FitCoordinates::energies;
    std::vector<std::string> parameter_names;  ///< free parameters, in covariance order
    Eigen::VectorXd estimates;                 ///< in `coordinates` units
    Eigen::MatrixXd covariance;
    Eigen::VectorXd std_errors;
    /// One entry per fitted (non-excluded) point.
    std::vector<std::size_t> point_index;
    std::vector<double> phi_ext;
    std::vector<double> frequency;
    std::vector<double> model;
    std::vector<TransitionLabel> assigned;  ///< transition used for the point
    std::vector<double> residuals;          ///< data - model, GHz
    double rms_residual = 0.0;
    double max_abs_residual = 0.0;
    double cost = 0.0;
    int n_evals = 0;
    int iterations = 0;
    int basis_dim = 0;
    int n_starts = 0;
    bool converged = false;
    bool degenerate = false;  ///< Jacobian rank deficient: parameters correlated
    double condition_number = 0.0;
    std::string message;

    /// Standard error of a named free parameter ("e_j", "e_c_sigma", "e_l",
    /// "c_sigma", "l_q"); throws DomainError when the name is not free.
    double std_error(std::string_view name) const;
    double estimate(std::string_view name) const;
};

nlohmann::json to_json(const FitReport& report);

/// Predicted transition frequency (GHz) for a label (ge or gf) at each flux.
std::vector<double> predict_transitions(const CircuitParams& params, const CphiRModel& cphir,
                                        std::span<const double> phi_ext, TransitionLabel label,
                                        int basis_dim = 0);

FitReport fit_spectrum(const SpectroscopyDataset& data, const CphiRModel& cphir,
                       const CircuitParams& init, const FitOptions& options = {});

/// Independent refit with each model, same data and starting point.
std::vector<FitReport> compare_cphir(const SpectroscopyDataset& data,
                                     std::span<const CphiRModel> models, const CircuitParams& init,
                                     const FitOptions& options = {});

struct TwoEjFit {
    FitReport low;           ///< branch with the smaller E_J
    FitReport high;
    double delta_e_j = 0.0;  ///< GHz, high - low
    double delta_e_j_error = 0.0;
    std::vector<int> branch;  ///< per dataset point: 0 low, 1 high, -1 excluded
    int assignment_iterations = 0;
    Eigen::MatrixXd covariance;  ///< over (e_j_low, e_c_sigma, e_l, e_j_high)
    /// False when the branches never separate by more than
    /// min_separation_sigmas residual rms; low and high then hold one shared fit.
    bool resolved = true;
    double max_separation = 0.0;  ///< GHz, largest branch separation over the fitted points
    double residual_sigma = 0.0;  ///< GHz, two-branch residual rms
};

struct TwoEjOptions {
    double initial_split = 0.2;  ///< GHz, branches start at init.e_j -/+ split/2
    int max_assignment_iterations = 10;
    double min_separation_sigmas = 4.0;
    int basis_dim = 0;
    double dim_tolerance = 1e-6;
    LeastSquaresOptions lsq;
};

/// Joint fit of two interleaved branches sharing E_C and E_L, started from a
/// single-branch fit split by `initial_split`. Points are
/// assigned to the branch whose model is nearer (ties to the lower E_J),
/// refit, and reassigned until the assignment is stable. Throws
/// ConvergenceError when it still changes after the iteration cap.
TwoEjFit fit_two_ej(const SpectroscopyDataset& data, const CircuitParams& init,
                    const TwoEjOptions& options = {});

nlohmann::json to_json(const TwoEjFit& fit);

/// Fluxes in [phi_lo, phi_hi] where the g-e lines of E_J and E_J + delta_e_j
/// cross, located by bisection on an `n_grid` scan. Empty when delta_e_j is 0.
std::vector<double> branch_crossings(const CircuitParams& low, double delta_e_j, double phi_lo = 0.0,
                                     double phi_hi = 0.5, int n_grid = 101, int basis_dim = 0);

// Readout phase fit.

struct PhasePoint {
    double f_ghz = 0.0;
    double phase = 0.0;  ///< arg S11, rad
};

struct ReflectionData {
    std::vector<PhasePoint> g;
    std::vector<PhasePoint> e;
};

struct ReflectionFitOptions {
    bool fit_coupling_ratio = false;
    double coupling_ratio = 1.0;  ///< used when not fitted, and as the start value
    LeastSquaresOptions lsq;
};

struct ReflectionFit {
    ReflectionModel model;
    double f0_error = 0.0;     ///< GHz
    double kappa_error = 0.0;  ///< MHz
    double chi_error = 0.0;    ///< MHz
    double coupling_ratio_error = 0.0;
    double rms_phase = 0.0;    ///< rad
    bool resolved = false;     ///< |chi| > kappa
    bool converged = false;
    int n_evals = 0;
};

/// Fits (f0, kappa, chi[, coupling_ratio]) to the phases of both qubit-state
/// branches. Throws DataError when a branch does not span its resonance.
ReflectionFit fit_reflection(const ReflectionData& data, const ReflectionFitOptions& options = {});

nlohmann::json to_json(const ReflectionFit& fit);

}  // namespace fluxonium
