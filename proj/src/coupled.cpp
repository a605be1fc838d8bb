#include "fluxonium/coupled.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "fluxonium/errors.hpp"
#include "fluxonium/parallel.hpp"

namespace fluxonium {

namespace {

struct BareQubit {
    Eigen::VectorXd energies;  // relative to the ground state
    Eigen::MatrixXcd op;       // coupling operator in the eigenbasis
};

BareQubit bare_qubit(const CoupledSpec& spec, int levels) {
    const auto sol = solve(spec.qubit, spec.cphir, levels, spec.basis);
    BareQubit out;
    out.energies = sol.energies.array() - sol.energies(0);
    out.op.resize(levels, levels);
    const PhaseOperator which =
        spec.coupling == CouplingOperator::charge ? PhaseOperator::n : PhaseOperator::phi;
    for (int i = 0; i < levels; ++i) {
        for (int j = i; j < levels; ++j) {
            std::complex<double> value = matrix_element(sol, which, i, j);
            if (which == PhaseOperator::phi && i == j) value = 0.0;  // static shift, drops out
            out.op(i, j) = value;
            out.op(j, i) = std::conj(value);
        }
    }
    return out;
}

DressedLevels diagonalize_coupled(const CoupledSpec& spec, const BareQubit& bare) {
    const int nq = static_cast<int>(bare.energies.size());
    const int nf = spec.n_fock;
    const int n = nq * nf;
    const double g = spec.resonator.g;
    const double fr = spec.resonator.f_r;
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(n, n);
    for (int q = 0; q < nq; ++q) {
        for (int k = 0; k < nf; ++k) h(q * nf + k, q * nf + k) = bare.energies(q) + fr * k;
    }
    if (g != 0.0) {
        for (int q = 0; q < nq; ++q) {
            for (int p = 0; p < nq; ++p) {
                const std::complex<double> o = g * bare.op(q, p);
                if (o == 0.0) continue;
                for (int k = 0; k + 1 < nf; ++k) {
                    const double amp = std::sqrt(k + 1.0);
                    h(q * nf + k + 1, p * nf + k) += o * amp;
                    h(q * nf + k, p * nf + k + 1) += o * amp;
                }
            }
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(h);
    if (eig.info() != Eigen::Success) throw ConvergenceError("coupled eigensolver failed");

    DressedLevels out;
    out.energies = eig.eigenvalues();
    out.qubit.resize(n);
    out.photons.resize(n);
    out.overlap.resize(n);
    out.bare_qubit_energies = bare.energies;
    for (int s = 0; s < n; ++s) {
        Eigen::Index arg = 0;
        out.overlap(s) = eig.eigenvectors().col(s).cwiseAbs2().maxCoeff(&arg);
        out.qubit(s) = static_cast<int>(arg) / nf;
        out.photons(s) = static_cast<int>(arg) % nf;
    }
    return out;
}

CoupledSpec enlarged(const CoupledSpec& spec) {
    CoupledSpec big = spec;
    big.n_fock = (3 * spec.n_fock + 1) / 2;
    big.n_qubit_levels = (3 * spec.n_qubit_levels + 1) / 2;
    return big;
}

double max_shift(const DressedLevels& a, const DressedLevels& b, int count) {
    count = std::min<int>(count, static_cast<int>(std::min(a.energies.size(), b.energies.size())));
    // Relative to the dressed ground state: with charge coupling the absolute
    // counter-rotating shift grows with the qubit truncation for every level alike.
    double shift = 0.0;
    for (int k = 1; k < count; ++k) {
        shift = std::max(shift, std::abs((a.energies(k) - a.energies(0)) - (b.energies(k) - b.energies(0))));
    }
    return shift;
}

}  // namespace

CouplingOperator coupling_operator_from_string(std::string_view name) {
    if (name == "charge" || name == "n") return CouplingOperator::charge;
    if (name == "phase" || name == "phi") return CouplingOperator::phase;
    throw ConfigError("unknown coupling operator '" + std::string(name) + "' (expected charge or phase)");
}

void validate(const CoupledSpec& spec) {
    validate(spec.qubit);
    validate(spec.resonator);
    std::vector<std::string> bad;
    if (spec.n_fock < 5) bad.emplace_back("n_fock");
    if (spec.n_qubit_levels < 4) bad.emplace_back("n_qubit_levels");
    if (!bad.empty()) {
        throw DomainError("coupled truncation too small (need n_fock >= 5, n_qubit_levels >= 4)", bad);
    }
}

double DressedLevels::energy(int q, int n) const {
    int best = -1;
    for (int s = 0; s < energies.size(); ++s) {
        if (qubit(s) == q && photons(s) == n && (best < 0 || overlap(s) > overlap(best))) best = s;
    }
    if (best < 0) {
        throw DomainError("no dressed state is labelled |" + std::to_string(q) + ", " +
                              std::to_string(n) + ">",
                          {"label"});
    }
    return energies(best);
}

DressedLevels dressed_levels(const CoupledSpec& spec) {
    validate(spec);
    return diagonalize_coupled(spec, bare_qubit(spec, spec.n_qubit_levels));
}

double truncation_error(const CoupledSpec& spec, int n_check) {
    validate(spec);
    const CoupledSpec big = enlarged(spec);
    const BareQubit bare_big = bare_qubit(big, big.n_qubit_levels);
    BareQubit bare_small;
    bare_small.energies = bare_big.energies.head(spec.n_qubit_levels);
    bare_small.op = bare_big.op.topLeftCorner(spec.n_qubit_levels, spec.n_qubit_levels);
    return max_shift(diagonalize_coupled(spec, bare_small), diagonalize_coupled(big, bare_big), n_check);
}

Eigen::MatrixXd coupled_spectrum(const CoupledSpec& spec, std::span<const double> phi_ext,
                                 int n_levels, bool check_truncation) {
    validate(spec);
    if (n_levels < 1 || n_levels > spec.n_fock * spec.n_qubit_levels) {
        throw DomainError("n_levels outside the coupled truncation", {"n_levels"});
    }
    Eigen::MatrixXd out(static_cast<Eigen::Index>(phi_ext.size()), n_levels);
    parallel_for(phi_ext.size(), [&](std::size_t row) {
        CoupledSpec local = spec;
        local.qubit.phi_ext = phi_ext[row];
        DressedLevels levels;
        if (check_truncation) {
            const CoupledSpec big = enlarged(local);
            const BareQubit bare_big = bare_qubit(big, big.n_qubit_levels);
            BareQubit bare_small;
            bare_small.energies = bare_big.energies.head(local.n_qubit_levels);
            bare_small.op = bare_big.op.topLeftCorner(local.n_qubit_levels, local.n_qubit_levels);
            levels = diagonalize_coupled(local, bare_small);
            const double shift = max_shift(levels, diagonalize_coupled(big, bare_big), n_levels);
            if (shift >= 1e-6) {
                throw ConvergenceError("coupled truncation not converged at phi_ext = " +
                                       std::to_string(phi_ext[row]) + " (shift " +
                                       std::to_string(shift) + " GHz)");
            }
        } else {
            levels = diagonalize_coupled(local, bare_qubit(local, local.n_qubit_levels));
        }
        for (int k = 0; k < n_levels; ++k) {
            out(static_cast<Eigen::Index>(row), k) = levels.energies(k) - levels.energies(0);
        }
    });
    return out;
}

DispersiveShift dispersive_shift(const CoupledSpec& spec) {
    const DressedLevels levels = dressed_levels(spec);
    DispersiveShift out;
    const double g_shift = levels.energy(0, 1) - levels.energy(0, 0);
    const double e_shift = levels.energy(1, 1) - levels.energy(1, 0);
    out.chi_mhz = 1e3 * (e_shift - g_shift);
    out.dressed_resonator_ghz = g_shift;
    out.detuning_ghz = levels.bare_qubit_energies(1) - spec.resonator.f_r;
    out.near_resonant = std::abs(out.detuning_ghz) < 3.0 * spec.resonator.g;
    out.resolved = std::abs(out.chi_mhz) > spec.resonator.kappa;
    return out;
}

double dispersive_shift_perturbative(const CoupledSpec& spec) {
    validate(spec);
    const BareQubit bare = bare_qubit(spec, spec.n_qubit_levels);
    const double g = spec.resonator.g;
    const double wr = spec.resonator.f_r;
    auto level_shift = [&](int i) {
        double sum = 0.0;
        for (int j = 0; j < bare.energies.size(); ++j) {
            if (j == i) continue;
            const double w = bare.energies(j) - bare.energies(i);
            sum -= g * g * std::norm(bare.op(i, j)) * 2.0 * w / (w * w - wr * wr);
        }
        return sum;
    };
    return 1e3 * (level_shift(1) - level_shift(0));
}

ReflectionModel validate(const ReflectionModel& model) {
    std::vector<std::string> bad;
    if (!(model.f0 > 0.0) || !std::isfinite(model.f0)) bad.emplace_back("f0");
    if (!(model.kappa > 0.0) || !std::isfinite(model.kappa)) bad.emplace_back("kappa");
    if (!std::isfinite(model.chi)) bad.emplace_back("chi");
    if (!(model.coupling_ratio > 0.0 && model.coupling_ratio <= 1.0)) bad.emplace_back("coupling_ratio");
    if (!bad.empty()) {
        std::string what = "invalid reflection model:";
        for (const auto& b : bad) what += " " + b;
        throw DomainError(what, bad);
    }
    return model;
}

double resonance_frequency(const ReflectionModel& model, QubitState state) {
    const double half = 0.5e-3 * model.chi;
    return state == QubitState::g ? model.f0 - half : model.f0 + half;
}

std::complex<double> reflection_coefficient(const ReflectionModel& model, double f_probe_ghz,
                                            QubitState state) {
    validate(model);
    const double detuning_mhz = 1e3 * (f_probe_ghz - resonance_frequency(model, state));
    const double kappa_ext = model.coupling_ratio * model.kappa;
    return 1.0 - kappa_ext / std::complex<double>(0.5 * model.kappa, detuning_mhz);
}

}  // namespace fluxonium
