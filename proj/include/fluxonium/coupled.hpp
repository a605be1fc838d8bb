#pragma once

#include <complex>
#include <span>
#include <string_view>

#include <Eigen/Dense>

#include "fluxonium/cphir.hpp"
#include "fluxonium/hamiltonian.hpp"
#include "fluxonium/params.hpp"

namespace fluxonium {

/// Qubit operator entering H_c = g * O (x) (a + a^dag).
enum class CouplingOperator { charge, phase };
CouplingOperator coupling_operator_from_string(std::string_view name);

struct CoupledSpec {
    CircuitParams qubit;
    CphiRModel cphir = CphiRModel::sinusoidal();
    ResonatorParams resonator;
    int n_fock = 6;
    int n_qubit_levels = 20;
    CouplingOperator coupling = CouplingOperator::charge;
    BasisSpec basis = BasisSpec::oscillator();
};

/// Throws DomainError unless n_fock >= 5, n_qubit_levels >= 4 and the
/// parameters validate.
void validate(const CoupledSpec& spec);

/// Dressed eigenstates of the qubit-resonator Hamiltonian. Each state is
/// labelled by the bare product state |q, n> it overlaps most.
struct DressedLevels {
    Eigen::VectorXd energies;  ///< ascending, GHz
    Eigen::VectorXi qubit;     ///< bare qubit label
    Eigen::VectorXi photons;   ///< bare photon label
    Eigen::VectorXd overlap;   ///< |<q, n|dressed>|^2 of the assigned label
    Eigen::VectorXd bare_qubit_energies;

    /// Energy of the dressed state labelled |q, n>; throws DomainError when
    /// no state carries that label.
    double energy(int q, int n) const;
};

DressedLevels dressed_levels(const CoupledSpec& spec);

/// Largest change of the lowest `n_check` dressed energies (relative to the
/// dressed ground state) when n_fock and
/// n_qubit_levels are each increased by 50%.
double truncation_error(const CoupledSpec& spec, int n_check = 6);

/// Dressed energies relative to the dressed ground state, one row per flux
/// point, lowest `n_levels` columns. Parallel over flux points. When
/// `check_truncation` is set, every point is verified to move by < 1e-6 GHz
/// under a 50% larger truncation (ConvergenceError otherwise).
Eigen::MatrixXd coupled_spectrum(const CoupledSpec& spec, std::span<const double> phi_ext,
                                 int n_levels, bool check_truncation = true);

struct DispersiveShift {
    double chi_mhz = 0.0;          ///< [E(e,1)-E(e,0)] - [E(g,1)-E(g,0)]
    double detuning_ghz = 0.0;     ///< f_ge - f_r
    double dressed_resonator_ghz = 0.0;  ///< E(g,1) - E(g,0)
    bool near_resonant = false;    ///< |detuning| < 3 g
    bool resolved = false;         ///< |chi| > kappa
};

DispersiveShift dispersive_shift(const CoupledSpec& spec);

/// Second-order perturbative chi in MHz from the bare qubit spectrum:
/// chi_i = -sum_j g^2 |O_ij|^2 2 w_ij / (w_ij^2 - w_r^2), chi = chi_e - chi_g.
double dispersive_shift_perturbative(const CoupledSpec& spec);

enum class QubitState { g, e };

/// One-port reflection of the readout resonator.
/// S11(f) = 1 - kappa_ext / (i (f - f_res) + kappa / 2), f_res = f0 -/+ chi/2
/// for g/e, kappa_ext = coupling_ratio * kappa.
struct ReflectionModel {
    double f0 = 0.0;              ///< GHz
    double kappa = 1.0;           ///< MHz
    double chi = 0.0;             ///< MHz
    double coupling_ratio = 1.0;  ///< kappa_ext / kappa
};

ReflectionModel validate(const ReflectionModel& model);

/// Resonance frequency in GHz for the given qubit state.
double resonance_frequency(const ReflectionModel& model, QubitState state);

std::complex<double> reflection_coefficient(const ReflectionModel& model, double f_probe_ghz,
                                            QubitState state);

}  // namespace fluxonium
