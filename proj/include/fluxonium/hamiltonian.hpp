#pragma once

#include <complex>
#include <numbers>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "fluxonium/cphir.hpp"
#include "fluxonium/params.hpp"

namespace fluxonium {

enum class BasisKind { oscillator, phase_grid };

/// Truncation of the single-mode problem.
///
/// oscillator: `dim` Fock states of the L-C mode centred on 2 pi phi_ext.
/// phase_grid: `dim` points spanning `phase_window` radians centred on
/// 2 pi phi_ext, with a central-difference kinetic term of order
/// 2 * `stencil_half_width`.
struct BasisSpec {
    BasisKind kind = BasisKind::oscillator;
    int dim = 200;
    double phase_window = 12.0 * std::numbers::pi;
    int stencil_half_width = 4;

    static BasisSpec oscillator(int dim = 200) { return {BasisKind::oscillator, dim}; }
    static BasisSpec phase_grid(int points = 2001, double window = 12.0 * std::numbers::pi) {
        return {BasisKind::phase_grid, points, window};
    }

    bool operator==(const BasisSpec&) const = default;
};

/// Real-symmetric Hamiltonian matrix. Oscillator bases are stored dense,
/// phase grids in LAPACK upper band storage (`band(bandwidth + i - j, j)`).
struct Hamiltonian {
    BasisSpec basis;
    CircuitParams params;
    CphiRModel cphir = CphiRModel::sinusoidal();
    Eigen::MatrixXd dense;
    Eigen::MatrixXd band;
    int bandwidth = 0;
    double energy_offset = 0.0;  ///< potential minimum subtracted from the diagonal, GHz
    double phase_center = 0.0;   ///< 2 pi phi_ext
    double grid_step = 0.0;      ///< phase_grid only
    double oscillator_length = 0.0;  ///< (2 E_C / E_L)^(1/4), phi' = l (a + a^dag)

    int dim() const noexcept { return basis.dim; }
    Eigen::MatrixXd to_dense() const;
};

struct EigenSolution {
    Eigen::VectorXd energies;  ///< ascending, GHz, measured from the potential minimum
    Eigen::MatrixXd vectors;   ///< dim x n_levels, orthonormal columns
    BasisSpec basis;
    CircuitParams params;
    CphiRModel cphir = CphiRModel::sinusoidal();
    int converged_levels = 0;
    double phase_center = 0.0;
    double grid_step = 0.0;
    double oscillator_length = 0.0;

    int n_levels() const noexcept { return static_cast<int>(energies.size()); }
};

enum class PhaseOperator { n, phi };
PhaseOperator phase_operator_from_string(std::string_view name);

/// Minimum over phi of 1/2 E_L (phi - 2 pi phi_ext)^2 + U_J(phi), GHz.
double potential_minimum(const CircuitParams& params, const CphiRModel& cphir);
/// Potential with its minimum shifted to zero, at absolute phase `phi`.
double potential(const CircuitParams& params, const CphiRModel& cphir, double phi);

Hamiltonian build_hamiltonian(const CircuitParams& params, const CphiRModel& cphir,
                              const BasisSpec& basis);

/// Lowest `n_levels` eigenpairs. Requires n_levels <= dim / 4 and checks the
/// per-level residual ||H v - E v|| < 1e-8 ||H||.
EigenSolution diagonalize(const Hamiltonian& h, int n_levels);

struct SolveOptions {
    double tolerance = 1e-6;  ///< GHz, max level shift under dim doubling
    int max_dim = 3200;       ///< oscillator levels; grids scale this by 10
    /// Phase grids only: enlarge the window until the top level's edge
    /// amplitude relative to its peak falls below this.
    double edge_tolerance = 1e-7;
};

/// Builds and diagonalizes, doubling `dim` until the lowest `n_levels`
/// energies move by less than `tolerance`. Throws ConvergenceError with the
/// last two estimates when `max_dim` is reached first.
EigenSolution solve(const CircuitParams& params, const CphiRModel& cphir, int n_levels,
                    BasisSpec basis = BasisSpec::oscillator(), const SolveOptions& options = {});

/// E_j - E_i in GHz.
double transition_frequency(const EigenSolution& sol, int i, int j);

/// <i| op |j> in the eigenbasis. `phi` is the absolute junction phase.
std::complex<double> matrix_element(const EigenSolution& sol, PhaseOperator op, int i, int j);

/// <Pi> for the reflection phi' -> -phi' about 2 pi phi_ext. Meaningful when
/// the potential is symmetric (phi_ext a multiple of 1/2).
double parity(const EigenSolution& sol, int level);

struct WavefunctionSamples {
    std::vector<double> phi;        ///< absolute phase, rad
    std::vector<double> potential;  ///< GHz, zero minimum
    std::vector<double> psi;        ///< normalized so sum |psi|^2 dphi = 1
    double raw_norm = 0.0;          ///< sum |psi|^2 dphi before renormalization
};

/// Samples eigenfunction `level` on a uniform phase grid. Throws DomainError
/// when |psi| at either end of the grid exceeds 1e-6 (support not covered).
WavefunctionSamples wavefunction(const EigenSolution& sol, int level,
                                 std::span<const double> phi_samples);

/// nu = 4/sqrt(pi) (8 E_J^3 E_C)^(1/4) exp(-sqrt(8 E_J / E_C)), GHz.
double phase_slip_frequency(const CircuitParams& params);

/// Hellmann-Feynman derivatives of the eigenenergies (columns: levels) with
/// respect to (e_j, e_c_sigma, e_l, phi_ext). Potential-minimum shifts are
/// not included, so only differences between levels are meaningful.
Eigen::MatrixXd energy_gradients(const EigenSolution& sol);

/// Lowest `n_levels` energies (relative to the ground state) for every flux
/// in `phi_ext`, with every other parameter taken from `params`. Rows: flux
/// points. Parallel over flux points.
Eigen::MatrixXd spectrum_sweep(const CircuitParams& params, const CphiRModel& cphir,
                               std::span<const double> phi_ext, int n_levels,
                               const BasisSpec& basis = BasisSpec::oscillator(),
                               const SolveOptions& options = {});

/// |d f_ij / d phi_ext| in GHz per flux quantum at params.phi_ext.
double flux_slope(const CircuitParams& params, const CphiRModel& cphir, int i, int j,
                  const BasisSpec& basis = BasisSpec::oscillator(200));

std::vector<double> uniform_grid(double first, double last, int count);

}  // namespace fluxonium
