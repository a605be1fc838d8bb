#include "fluxonium/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <boost/math/tools/minima.hpp>

#include "fluxonium/errors.hpp"
#include "fluxonium/parallel.hpp"
#include "linalg.hpp"

namespace fluxonium {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Potential in the shifted coordinate x = phi - 2 pi phi_ext, without offset.
double shifted_potential(const CircuitParams& p, const CphiRModel& cphir, double x) {
    return 0.5 * p.e_l * x * x + cphir.josephson_potential(x + kTwoPi * p.phi_ext, p.e_j);
}

void check_basis(const BasisSpec& basis) {
    if (basis.dim < 16) {
        throw DomainError("basis dim must be >= 16, got " + std::to_string(basis.dim), {"dim"});
    }
    if (basis.kind == BasisKind::phase_grid) {
        if (!(basis.phase_window > 0.0)) throw DomainError("phase_window must be positive", {"phase_window"});
        if (basis.stencil_half_width < 1 || basis.stencil_half_width > 16) {
            throw DomainError("stencil_half_width must be in [1, 16]", {"stencil_half_width"});
        }
    }
}

double grid_point(const Hamiltonian& h, int i) {
    return -0.5 * h.basis.phase_window + i * h.grid_step;
}

double infinity_norm(const Hamiltonian& h) {
    if (h.basis.kind == BasisKind::oscillator) return h.dense.cwiseAbs().rowwise().sum().maxCoeff();
    const int n = h.dim();
    const int kd = h.bandwidth;
    double norm = 0.0;
    for (int j = 0; j < n; ++j) {
        double row = std::abs(h.band(kd, j));
        for (int d = 1; d <= kd; ++d) {
            if (j - d >= 0) row += std::abs(h.band(kd - d, j));
            if (j + d < n) row += std::abs(h.band(kd - d, j + d));
        }
        norm = std::max(norm, row);
    }
    return norm;
}

Eigen::VectorXd apply(const Hamiltonian& h, const Eigen::VectorXd& v) {
    if (h.basis.kind == BasisKind::oscillator) return h.dense * v;
    return detail::band_multiply(h.band, h.bandwidth, v);
}

bool symmetric_flux(double phi_ext) {
    const double twice = 2.0 * phi_ext;
    return std::abs(twice - std::round(twice)) < 1e-12;
}

double parity_of(const Eigen::VectorXd& v, BasisKind kind) {
    const auto n = v.size();
    double sum = 0.0;
    if (kind == BasisKind::oscillator) {
        for (Eigen::Index m = 0; m < n; ++m) sum += (m % 2 == 0 ? 1.0 : -1.0) * v(m) * v(m);
    } else {
        for (Eigen::Index i = 0; i < n; ++i) sum += v(i) * v(n - 1 - i);
    }
    return sum;
}

// x -> (a^dag - a) x and x -> (a + a^dag) x in the Fock basis.
Eigen::VectorXd ladder_difference(const Eigen::VectorXd& x) {
    const auto n = x.size();
    Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
    for (Eigen::Index m = 0; m < n; ++m) {
        if (m + 1 < n) y(m + 1) += std::sqrt(double(m + 1)) * x(m);
        if (m > 0) y(m - 1) -= std::sqrt(double(m)) * x(m);
    }
    return y;
}

Eigen::VectorXd ladder_sum(const Eigen::VectorXd& x) {
    const auto n = x.size();
    Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
    for (Eigen::Index m = 0; m < n; ++m) {
        if (m + 1 < n) y(m + 1) += std::sqrt(double(m + 1)) * x(m);
        if (m > 0) y(m - 1) += std::sqrt(double(m)) * x(m);
    }
    return y;
}

Eigen::VectorXd grid_first_derivative(const Eigen::VectorXd& x, int half_width, double step) {
    const Eigen::VectorXd w = detail::first_derivative_weights(half_width);
    const auto n = x.size();
    Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int k = 1; k <= half_width; ++k) {
            const double plus = i + k < n ? x(i + k) : 0.0;
            const double minus = i - k >= 0 ? x(i - k) : 0.0;
            acc += w(k - 1) * (plus - minus);
        }
        y(i) = acc / step;
    }
    return y;
}

void check_level(const EigenSolution& sol, int level) {
    if (level < 0 || level >= sol.converged_levels) {
        throw DomainError("level " + std::to_string(level) + " is not among the " +
                              std::to_string(sol.converged_levels) + " converged levels",
                          {"level"});
    }
}

BasisSpec refined(const BasisSpec& basis) {
    BasisSpec next = basis;
    next.dim = basis.kind == BasisKind::oscillator ? 2 * basis.dim : 2 * (basis.dim - 1) + 1;
    return next;
}

}  // namespace

PhaseOperator phase_operator_from_string(std::string_view name) {
    if (name == "n") return PhaseOperator::n;
    if (name == "phi") return PhaseOperator::phi;
    throw DomainError("unknown operator '" + std::string(name) + "' (expected n or phi)", {"op"});
}

double potential_minimum(const CircuitParams& params, const CphiRModel& cphir) {
    double swing = 0.0;
    for (std::size_t k = 0; k < cphir.order(); ++k) swing += std::abs(cphir.harmonics()[k]) / double(k + 1);
    swing *= params.e_j;
    // Beyond |x| = reach the harmonic term alone exceeds any Josephson gain.
    const double reach = std::sqrt(4.0 * swing / params.e_l) + 1.0;
    const double step = 0.02 / double(cphir.order());
    double best_x = 0.0;
    double best_u = shifted_potential(params, cphir, 0.0);
    for (double x = -reach; x <= reach; x += step) {
        const double u = shifted_potential(params, cphir, x);
        if (u < best_u) {
            best_u = u;
            best_x = x;
        }
    }
    const auto result = boost::math::tools::brent_find_minima(
        [&](double x) { return shifted_potential(params, cphir, x); }, best_x - step, best_x + step,
        std::numeric_limits<double>::digits / 2 + 4);
    return std::min(best_u, result.second);
}

double potential(const CircuitParams& params, const CphiRModel& cphir, double phi) {
    return shifted_potential(params, cphir, phi - kTwoPi * params.phi_ext) -
           potential_minimum(params, cphir);
}

Eigen::MatrixXd Hamiltonian::to_dense() const {
    if (basis.kind == BasisKind::oscillator) return dense;
    const int n = dim();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
    for (int j = 0; j < n; ++j) {
        for (int i = std::max(0, j - bandwidth); i <= j; ++i) {
            out(i, j) = band(bandwidth + i - j, j);
            out(j, i) = out(i, j);
        }
    }
    return out;
}

Hamiltonian build_hamiltonian(const CircuitParams& params_in, const CphiRModel& cphir,
                              const BasisSpec& basis) {
    const CircuitParams params = validate(params_in);
    check_basis(basis);

    Hamiltonian h;
    h.basis = basis;
    h.params = params;
    h.cphir = cphir;
    h.phase_center = kTwoPi * params.phi_ext;
    h.energy_offset = potential_minimum(params, cphir);
    h.oscillator_length = std::pow(2.0 * params.e_c_sigma / params.e_l, 0.25);
    const int n = basis.dim;

    if (basis.kind == BasisKind::oscillator) {
        const double omega = std::sqrt(8.0 * params.e_c_sigma * params.e_l);
        h.dense = Eigen::MatrixXd::Zero(n, n);
        for (int m = 0; m < n; ++m) h.dense(m, m) = omega * (m + 0.5) - h.energy_offset;
        Eigen::MatrixXd cos_part, sin_part;
        const double theta = h.phase_center;
        for (std::size_t k = 0; k < cphir.order(); ++k) {
            const double c = cphir.harmonics()[k];
            if (c == 0.0) continue;
            const double order = double(k + 1);
            detail::displacement_parts(order * h.oscillator_length, n, cos_part, sin_part);
            // cos(k (x + theta)) = cos(kx) cos(k theta) - sin(kx) sin(k theta)
            const double scale = -params.e_j * c / order;
            h.dense += (scale * std::cos(order * theta)) * cos_part;
            h.dense -= (scale * std::sin(order * theta)) * sin_part;
        }
        h.bandwidth = n - 1;
        return h;
    }

    const int m = basis.stencil_half_width;
    h.bandwidth = m;
    h.grid_step = basis.phase_window / double(n - 1);
    const Eigen::VectorXd w = detail::second_derivative_weights(m);
    const double kinetic = 4.0 * params.e_c_sigma / (h.grid_step * h.grid_step);
    h.band = Eigen::MatrixXd::Zero(m + 1, n);
    for (int j = 0; j < n; ++j) {
        h.band(m, j) = shifted_potential(params, cphir, grid_point(h, j)) - h.energy_offset +
                       kinetic * 2.0 * w.sum();
        for (int d = 1; d <= m && j - d >= 0; ++d) h.band(m - d, j) = -kinetic * w(d - 1);
    }
    return h;
}

EigenSolution diagonalize(const Hamiltonian& h, int n_levels) {
    if (n_levels < 1 || n_levels > h.dim() / 4) {
        throw DomainError("truncation too small: " + std::to_string(n_levels) +
                              " levels need dim >= " + std::to_string(4 * n_levels) + ", have " +
                              std::to_string(h.dim()),
                          {"dim"});
    }
    const auto pairs = h.basis.kind == BasisKind::oscillator
                           ? detail::lowest_eigenpairs_dense(h.dense, n_levels, true)
                           : detail::lowest_eigenpairs_band(h.band, h.bandwidth, n_levels, true);

    EigenSolution sol;
    sol.energies = pairs.values;
    sol.vectors = pairs.vectors;
    sol.basis = h.basis;
    sol.params = h.params;
    sol.cphir = h.cphir;
    sol.converged_levels = n_levels;
    sol.phase_center = h.phase_center;
    sol.grid_step = h.grid_step;
    sol.oscillator_length = h.oscillator_length;

    const double norm = infinity_norm(h);
    for (int k = 0; k < n_levels; ++k) {
        Eigen::VectorXd v = sol.vectors.col(k);
        // Deterministic sign: the largest component is positive.
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0.0) v = -v;
        sol.vectors.col(k) = v;
        const double residual = (apply(h, v) - sol.energies(k) * v).norm();
        if (residual > 1e-8 * norm) {
            throw ConvergenceError("eigenpair " + std::to_string(k) + " residual " +
                                   std::to_string(residual) + " exceeds 1e-8 ||H||");
        }
    }

    // Near-degenerate pairs at symmetric flux: even parity first.
    if (symmetric_flux(h.params.phi_ext)) {
        for (int k = 0; k + 1 < n_levels; ++k) {
            const double gap = sol.energies(k + 1) - sol.energies(k);
            if (gap < 1e-10 * std::max(1.0, std::abs(sol.energies(k))) &&
                parity_of(sol.vectors.col(k), h.basis.kind) <
                    parity_of(sol.vectors.col(k + 1), h.basis.kind)) {
                std::swap(sol.energies(k), sol.energies(k + 1));
                sol.vectors.col(k).swap(sol.vectors.col(k + 1));
            }
        }
    }
    return sol;
}

EigenSolution solve(const CircuitParams& params, const CphiRModel& cphir, int n_levels,
                    BasisSpec basis, const SolveOptions& options) {
    const int ceiling = basis.kind == BasisKind::oscillator ? options.max_dim : 10 * options.max_dim;
    basis.dim = std::max(basis.dim, 4 * n_levels);
    // Phase grids: grow the window until the top level decays at the edges.
    if (basis.kind == BasisKind::phase_grid) {
        for (;;) {
            const auto trial = diagonalize(build_hamiltonian(params, cphir, basis), n_levels);
            const auto top = trial.vectors.col(n_levels - 1);
            const double edge = std::max(std::abs(top(0)), std::abs(top(top.size() - 1)));
            if (edge <= options.edge_tolerance * top.cwiseAbs().maxCoeff()) break;
            const double step = basis.phase_window / (basis.dim - 1);
            basis.phase_window *= 1.5;
            basis.dim = static_cast<int>(std::lround(basis.phase_window / step)) + 1;
            if (basis.dim > ceiling) {
                throw ConvergenceError("phase window does not contain the wavefunctions below dim " +
                                       std::to_string(ceiling));
            }
        }
    }

    EigenSolution coarse = diagonalize(build_hamiltonian(params, cphir, basis), n_levels);
    for (;;) {
        const BasisSpec next = refined(basis);
        if (next.dim > ceiling) {
            std::vector<double> last(coarse.energies.data(), coarse.energies.data() + n_levels);
            throw ConvergenceError("levels not converged to " + std::to_string(options.tolerance) +
                                       " GHz below dim " + std::to_string(ceiling),
                                   {}, last);
        }
        EigenSolution fine = diagonalize(build_hamiltonian(params, cphir, next), n_levels);
        const double shift = (fine.energies - coarse.energies).cwiseAbs().maxCoeff();
        if (shift < options.tolerance) return fine;
        if (refined(next).dim > ceiling) {
            throw ConvergenceError(
                "levels not converged to " + std::to_string(options.tolerance) + " GHz below dim " +
                    std::to_string(ceiling),
                std::vector<double>(coarse.energies.data(), coarse.energies.data() + n_levels),
                std::vector<double>(fine.energies.data(), fine.energies.data() + n_levels));
        }
        coarse = std::move(fine);
        basis = next;
    }
}

double transition_frequency(const EigenSolution& sol, int i, int j) {
    if (j <= i) throw DomainError("transition needs j > i", {"j"});
    check_level(sol, i);
    check_level(sol, j);
    return sol.energies(j) - sol.energies(i);
}

std::complex<double> matrix_element(const EigenSolution& sol, PhaseOperator op, int i, int j) {
    check_level(sol, i);
    check_level(sol, j);
    const Eigen::VectorXd vi = sol.vectors.col(i);
    const Eigen::VectorXd vj = sol.vectors.col(j);
    if (sol.basis.kind == BasisKind::oscillator) {
        const double l = sol.oscillator_length;
        if (op == PhaseOperator::n) {
            // n = i (a^dag - a) / (2 l)
            return {0.0, vi.dot(ladder_difference(vj)) / (2.0 * l)};
        }
        const double overlap = i == j ? 1.0 : vi.dot(vj);
        return {l * vi.dot(ladder_sum(vj)) + sol.phase_center * overlap, 0.0};
    }
    if (op == PhaseOperator::n) {
        // n = -i d/dphi
        return {0.0, -vi.dot(grid_first_derivative(vj, sol.basis.stencil_half_width, sol.grid_step))};
    }
    double sum = 0.0;
    const auto n = vi.size();
    for (Eigen::Index k = 0; k < n; ++k) {
        const double phi = sol.phase_center - 0.5 * sol.basis.phase_window + k * sol.grid_step;
        sum += vi(k) * phi * vj(k);
    }
    return {sum, 0.0};
}

double parity(const EigenSolution& sol, int level) {
    check_level(sol, level);
    return parity_of(sol.vectors.col(level), sol.basis.kind);
}

WavefunctionSamples wavefunction(const EigenSolution& sol, int level,
                                 std::span<const double> phi_samples) {
    check_level(sol, level);
    if (phi_samples.size() < 3) throw DomainError("need at least 3 phase samples", {"phi_samples"});
    const double dphi = phi_samples[1] - phi_samples[0];
    for (std::size_t k = 1; k < phi_samples.size(); ++k) {
        if (std::abs(phi_samples[k] - phi_samples[k - 1] - dphi) > 1e-9 * std::abs(dphi) ||
            !(dphi > 0.0)) {
            throw DomainError("phase samples must be uniform and increasing", {"phi_samples"});
        }
    }

    WavefunctionSamples out;
    out.phi.assign(phi_samples.begin(), phi_samples.end());
    out.potential.resize(phi_samples.size());
    out.psi.resize(phi_samples.size());
    const double u_min = potential_minimum(sol.params, sol.cphir);
    const Eigen::VectorXd v = sol.vectors.col(level);

    for (std::size_t s = 0; s < phi_samples.size(); ++s) {
        const double x = phi_samples[s] - sol.phase_center;
        out.potential[s] = shifted_potential(sol.params, sol.cphir, x) - u_min;
        double value = 0.0;
        if (sol.basis.kind == BasisKind::oscillator) {
            // Normalized Hermite functions of width sigma = sqrt(2) l, with a
            // running log-scale so large |x| does not underflow.
            const double sigma = std::numbers::sqrt2 * sol.oscillator_length;
            const double u = x / sigma;
            double log_scale = -0.5 * u * u;
            double prev = 0.0;
            double cur = std::pow(std::numbers::pi, -0.25);
            for (Eigen::Index m = 0; m < v.size(); ++m) {
                if (log_scale > -745.0) value += v(m) * cur * std::exp(log_scale);
                const double next = std::sqrt(2.0 / (m + 1.0)) * u * cur -
                                    std::sqrt(double(m) / (m + 1.0)) * prev;
                prev = cur;
                cur = next;
                if (std::abs(cur) > 1e100) {
                    cur *= 1e-100;
                    prev *= 1e-100;
                    log_scale += std::log(1e100);
                }
            }
            value /= std::sqrt(sigma);
        } else {
            // Four-point Lagrange interpolation of the grid amplitudes.
            const double pos = (x + 0.5 * sol.basis.phase_window) / sol.grid_step;
            const auto n = v.size();
            const auto base = static_cast<Eigen::Index>(std::floor(pos)) - 1;
            const double t = pos - double(base);
            for (int a = 0; a < 4; ++a) {
                const Eigen::Index idx = base + a;
                if (idx < 0 || idx >= n) continue;
                double weight = 1.0;
                for (int b = 0; b < 4; ++b) {
                    if (b != a) weight *= (t - b) / double(a - b);
                }
                value += weight * v(idx);
            }
            value /= std::sqrt(sol.grid_step);
        }
        out.psi[s] = value;
    }

    double norm = 0.0;
    for (double p : out.psi) norm += p * p * dphi;
    out.raw_norm = norm;
    if (!(norm > 0.0)) throw DomainError("wavefunction vanishes on the sample grid", {"phi_samples"});
    const double scale = 1.0 / std::sqrt(norm);
    for (double& p : out.psi) p *= scale;
    if (std::abs(out.psi.front()) > 1e-6 || std::abs(out.psi.back()) > 1e-6) {
        throw DomainError("phase samples do not cover the wavefunction support", {"phi_samples"});
    }
    return out;
}

double phase_slip_frequency(const CircuitParams& params_in) {
    const CircuitParams p = validate(params_in);
    return 4.0 / std::sqrt(std::numbers::pi) *
           std::pow(8.0 * p.e_j * p.e_j * p.e_j * p.e_c_sigma, 0.25) *
           std::exp(-std::sqrt(8.0 * p.e_j / p.e_c_sigma));
}

Eigen::MatrixXd energy_gradients(const EigenSolution& sol) {
    const int levels = sol.n_levels();
    Eigen::MatrixXd grad(4, levels);
    const auto& p = sol.params;
    const auto& cphir = sol.cphir;
    const double theta = sol.phase_center;

    if (sol.basis.kind == BasisKind::oscillator) {
        const int n = sol.basis.dim;
        const double l = sol.oscillator_length;
        // dH/dE_J and dH/dtheta from the displacement matrices.
        Eigen::MatrixXd d_ej = Eigen::MatrixXd::Zero(n, n);
        Eigen::MatrixXd d_theta = Eigen::MatrixXd::Zero(n, n);
        Eigen::MatrixXd cos_part, sin_part;
        for (std::size_t k = 0; k < cphir.order(); ++k) {
            const double c = cphir.harmonics()[k];
            if (c == 0.0) continue;
            const double order = double(k + 1);
            detail::displacement_parts(order * l, n, cos_part, sin_part);
            d_ej -= (c / order) * (std::cos(order * theta) * cos_part - std::sin(order * theta) * sin_part);
            d_theta += (p.e_j * c) * (std::sin(order * theta) * cos_part + std::cos(order * theta) * sin_part);
        }
        for (int k = 0; k < levels; ++k) {
            const Eigen::VectorXd v = sol.vectors.col(k);
            const Eigen::VectorXd diff = ladder_difference(v);
            const Eigen::VectorXd sum = ladder_sum(v);
            grad(0, k) = v.dot(d_ej * v);
            grad(1, k) = diff.squaredNorm() / (l * l);  // <4 n^2>
            grad(2, k) = 0.5 * l * l * sum.squaredNorm();  // <x^2 / 2>
            grad(3, k) = kTwoPi * v.dot(d_theta * v);
        }
        return grad;
    }

    const int n = sol.basis.dim;
    const double h = sol.grid_step;
    const int half_width = sol.basis.stencil_half_width;
    const Eigen::VectorXd w = detail::second_derivative_weights(half_width);
    for (int k = 0; k < levels; ++k) {
        const Eigen::VectorXd v = sol.vectors.col(k);
        double ej = 0.0, el = 0.0, th = 0.0, kin = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = -0.5 * sol.basis.phase_window + i * h;
            const double v2 = v(i) * v(i);
            ej += v2 * cphir.josephson_potential(x + theta, 1.0);
            el += v2 * 0.5 * x * x;
            th += v2 * p.e_j * cphir.current(x + theta);
            double lap = 2.0 * w.sum() * v(i);
            for (int d = 1; d <= half_width; ++d) {
                lap -= w(d - 1) * ((i + d < n ? v(i + d) : 0.0) + (i - d >= 0 ? v(i - d) : 0.0));
            }
            kin += v(i) * lap;
        }
        grad(0, k) = ej;
        grad(1, k) = 4.0 * kin / (h * h);
        grad(2, k) = el;
        grad(3, k) = kTwoPi * th;
    }
    return grad;
}

Eigen::MatrixXd spectrum_sweep(const CircuitParams& params, const CphiRModel& cphir,
                               std::span<const double> phi_ext, int n_levels, const BasisSpec& basis,
                               const SolveOptions& options) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(phi_ext.size()), n_levels);
    parallel_for(phi_ext.size(), [&](std::size_t row) {
        CircuitParams p = params;
        p.phi_ext = phi_ext[row];
        const auto sol = solve(p, cphir, n_levels, basis, options);
        for (int k = 0; k < n_levels; ++k) {
            out(static_cast<Eigen::Index>(row), k) = sol.energies(k) - sol.energies(0);
        }
    });
    return out;
}

double flux_slope(const CircuitParams& params, const CphiRModel& cphir, int i, int j,
                  const BasisSpec& basis) {
    const int levels = std::max(i, j) + 1;
    const auto sol = diagonalize(build_hamiltonian(params, cphir, basis), levels);
    const Eigen::MatrixXd grad = energy_gradients(sol);
    return std::abs(grad(3, j) - grad(3, i));
}

std::vector<double> uniform_grid(double first, double last, int count) {
    if (count < 1) return {};
    if (count == 1) return {first};
    std::vector<double> grid(static_cast<std::size_t>(count));
    const double step = (last - first) / double(count - 1);
    for (int k = 0; k < count; ++k) grid[k] = first + k * step;
    grid.back() = last;
    return grid;
}

}  // namespace fluxonium
