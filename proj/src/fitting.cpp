#include "fluxonium/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>

#include "fluxonium/errors.hpp"
#include "fluxonium/hamiltonian.hpp"
#include "fluxonium/parallel.hpp"

namespace fluxonium {

namespace {

constexpr int kLevels = 3;

int transition_level(TransitionLabel label) { return label == TransitionLabel::gf ? 2 : 1; }

// Transition frequencies and their gradients with respect to (E_J, E_C, E_L)
// at a set of flux points.
struct ModelGrid {
    Eigen::MatrixXd freq;  // rows flux, cols: ge, gf
    std::vector<Eigen::Matrix<double, 3, 2>> grad;  // per flux: d f / d(E_J, E_C, E_L)
};

ModelGrid evaluate_grid(const CircuitParams& params, const CphiRModel& cphir,
                        const std::vector<double>& phis, int dim, bool want_grad) {
    ModelGrid out;
    out.freq.resize(static_cast<Eigen::Index>(phis.size()), 2);
    if (want_grad) out.grad.resize(phis.size());
    parallel_for(phis.size(), [&](std::size_t k) {
        CircuitParams p = params;
        p.phi_ext = phis[k];
        const auto sol = diagonalize(build_hamiltonian(p, cphir, BasisSpec::oscillator(dim)), kLevels);
        const auto row = static_cast<Eigen::Index>(k);
        out.freq(row, 0) = sol.energies(1) - sol.energies(0);
        out.freq(row, 1) = sol.energies(2) - sol.energies(0);
        if (want_grad) {
            const Eigen::MatrixXd g = energy_gradients(sol);
            for (int a = 0; a < 3; ++a) {
                out.grad[k](a, 0) = g(a, 1) - g(a, 0);
                out.grad[k](a, 1) = g(a, 2) - g(a, 0);
            }
        }
    });
    return out;
}

std::vector<double> probe_fluxes(const std::vector<double>& phis) {
    const auto [lo, hi] = std::minmax_element(phis.begin(), phis.end());
    std::vector<double> probes = {*lo, *hi};
    for (double base = std::floor(*lo); base <= *hi; base += 0.5) {
        for (double extra : {0.0, 0.25}) {
            const double phi = base + extra;
            if (phi >= *lo && phi <= *hi) probes.push_back(phi);
        }
    }
    std::sort(probes.begin(), probes.end());
    probes.erase(std::unique(probes.begin(), probes.end()), probes.end());
    return probes;
}

int choose_dim(const CircuitParams& params, const CphiRModel& cphir, const std::vector<double>& phis,
               double tolerance) {
    const auto probes = probe_fluxes(phis);
    Eigen::MatrixXd coarse = evaluate_grid(params, cphir, probes, 32, false).freq;
    for (int dim = 32; dim <= 3200; dim *= 2) {
        const Eigen::MatrixXd fine = evaluate_grid(params, cphir, probes, 2 * dim, false).freq;
        if ((fine - coarse).cwiseAbs().maxCoeff() < tolerance) return dim;
        coarse = fine;
    }
    throw ConvergenceError("no oscillator truncation up to 3200 converges the spectrum to " +
                           std::to_string(tolerance) + " GHz");
}

std::vector<double> unique_fluxes(const SpectroscopyDataset& data, const std::vector<std::size_t>& active,
                                  std::vector<int>& slot) {
    std::map<double, int> index;
    for (std::size_t i : active) index.emplace(data.points[i].phi_ext, 0);
    std::vector<double> phis;
    for (auto& [phi, k] : index) {
        k = static_cast<int>(phis.size());
        phis.push_back(phi);
    }
    slot.assign(data.points.size(), -1);
    for (std::size_t i : active) slot[i] = index.at(data.points[i].phi_ext);
    return phis;
}

const char* coordinate_name(FitCoordinates c, int k) {
    static const char* energies[] = {"e_j", "e_c_sigma", "e_l"};
    static const char* circuit[] = {"e_j", "c_sigma", "l_q"};
    return c == FitCoordinates::energies ? energies[k] : circuit[k];
}

// q: parameters in fit coordinates (E_J, E_C or C_sigma, E_L or L_q).
Eigen::Vector3d coordinates_of(const CircuitParams& p, FitCoordinates c) {
    if (c == FitCoordinates::energies) return {p.e_j, p.e_c_sigma, p.e_l};
    return {p.e_j, capacitance_from_charging_energy(p.e_c_sigma), inductance_from_inductive_energy(p.e_l)};
}

CircuitParams params_of(const Eigen::Vector3d& q, FitCoordinates c, double phi_ext) {
    if (c == FitCoordinates::energies) return {q(0), q(1), q(2), phi_ext};
    return {q(0), charging_energy_from_capacitance(q(1)), inductive_energy_from_inductance(q(2)), phi_ext};
}

// d(E_J, E_C, E_L) / d log q, diagonal.
Eigen::Vector3d energy_log_derivative(const CircuitParams& p, FitCoordinates c) {
    if (c == FitCoordinates::energies) return {p.e_j, p.e_c_sigma, p.e_l};
    return {p.e_j, -p.e_c_sigma, -p.e_l};
}

std::vector<int> free_indices(const FreeParameters& free) {
    std::vector<int> out;
    if (free.e_j) out.push_back(0);
    if (free.e_c_sigma) out.push_back(1);
    if (free.e_l) out.push_back(2);
    return out;
}

// Fills the model value (and d model / d(E_J, E_C, E_L)) for one point; an
// unassigned point takes whichever transition is nearer.
TransitionLabel model_for_point(const SpectroscopyPoint& pt, const ModelGrid& grid, int slot,
                                double& value, Eigen::Vector3d* gradient) {
    TransitionLabel label = pt.label;
    if (label == TransitionLabel::unassigned) {
        label = std::abs(pt.frequency - grid.freq(slot, 0)) <= std::abs(pt.frequency - grid.freq(slot, 1))
                    ? TransitionLabel::ge
                    : TransitionLabel::gf;
    }
    const int col = label == TransitionLabel::gf ? 1 : 0;
    value = grid.freq(slot, col);
    if (gradient != nullptr) *gradient = grid.grad[static_cast<std::size_t>(slot)].col(col);
    return label;
}

std::vector<std::size_t> active_points(const SpectroscopyDataset& data) {
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < data.points.size(); ++i) {
        if (!data.excluded(data.points[i].phi_ext)) active.push_back(i);
    }
    return active;
}

double portable_uniform(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

void fill_report_points(FitReport& report, const SpectroscopyDataset& data,
                        const std::vector<std::size_t>& points, const ModelGrid& grid,
                        const std::vector<int>& slot) {
    double sum2 = 0.0;
    for (std::size_t i : points) {
        const auto& pt = data.points[i];
        double value = 0.0;
        const TransitionLabel label = model_for_point(pt, grid, slot[i], value, nullptr);
        report.point_index.push_back(i);
        report.phi_ext.push_back(pt.phi_ext);
        report.frequency.push_back(pt.frequency);
        report.model.push_back(value);
        report.assigned.push_back(label);
        report.residuals.push_back(pt.frequency - value);
        sum2 += (pt.frequency - value) * (pt.frequency - value);
        report.max_abs_residual = std::max(report.max_abs_residual, std::abs(pt.frequency - value));
    }
    report.rms_residual = report.residuals.empty() ? 0.0 : std::sqrt(sum2 / double(report.residuals.size()));
}

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

}  // namespace

std::string_view to_string(TransitionLabel label) {
    switch (label) {
        case TransitionLabel::ge: return "ge";
        case TransitionLabel::gf: return "gf";
        case TransitionLabel::unassigned: return "unassigned";
    }
    return "unassigned";
}

TransitionLabel transition_label_from_string(std::string_view text) {
    if (text == "ge") return TransitionLabel::ge;
    if (text == "gf") return TransitionLabel::gf;
    if (text == "unassigned" || text == "?" || text.empty()) return TransitionLabel::unassigned;
    throw DataError("unknown transition label '" + std::string(text) + "' (expected ge, gf or unassigned)");
}

bool SpectroscopyDataset::excluded(double phi_ext) const noexcept {
    return std::any_of(exclusion_windows.begin(), exclusion_windows.end(),
                       [&](const FluxWindow& w) { return w.contains(phi_ext); });
}

std::size_t SpectroscopyDataset::active_count() const noexcept {
    return static_cast<std::size_t>(std::count_if(points.begin(), points.end(), [&](const SpectroscopyPoint& p) {
        return !excluded(p.phi_ext);
    }));
}

void validate(const SpectroscopyDataset& data) {
    for (std::size_t i = 0; i < data.points.size(); ++i) {
        const auto& p = data.points[i];
        if (!std::isfinite(p.phi_ext)) throw DataError("point " + std::to_string(i) + ": flux is not finite");
        if (!(p.frequency > 0.0) || !std::isfinite(p.frequency)) {
            throw DataError("point " + std::to_string(i) + ": frequency must be positive");
        }
        if (!(p.weight > 0.0) || !std::isfinite(p.weight)) {
            throw DataError("point " + std::to_string(i) + ": weight must be positive");
        }
    }
    auto windows = data.exclusion_windows;
    for (const auto& w : windows) {
        if (!(w.lo <= w.hi) || !std::isfinite(w.lo) || !std::isfinite(w.hi)) {
            throw DataError("exclusion window [" + std::to_string(w.lo) + ", " + std::to_string(w.hi) +
                            "] is not a finite interval");
        }
    }
    std::sort(windows.begin(), windows.end(), [](const FluxWindow& a, const FluxWindow& b) { return a.lo < b.lo; });
    for (std::size_t k = 1; k < windows.size(); ++k) {
        if (windows[k].lo <= windows[k - 1].hi) throw DataError("exclusion windows overlap");
    }
}

std::vector<FluxWindow> merge_windows(std::vector<FluxWindow> windows) {
    std::sort(windows.begin(), windows.end(), [](const FluxWindow& a, const FluxWindow& b) { return a.lo < b.lo; });
    std::vector<FluxWindow> out;
    for (const auto& w : windows) {
        if (!out.empty() && w.lo <= out.back().hi) {
            out.back().hi = std::max(out.back().hi, w.hi);
        } else {
            out.push_back(w);
        }
    }
    return out;
}

std::vector<FluxWindow> crossing_exclusion_windows(const CircuitParams& params, const CphiRModel& cphir,
                                                   double phi_lo, double phi_hi,
                                                   std::vector<double> centers_ghz, double half_width_ghz,
                                                   int n_grid) {
    if (!(phi_hi > phi_lo) || n_grid < 2) throw DomainError("empty flux range", {"phi_range"});
    const auto phis = uniform_grid(phi_lo, phi_hi, n_grid);
    const int dim = choose_dim(params, cphir, phis, 1e-6);
    const ModelGrid grid = evaluate_grid(params, cphir, phis, dim, false);
    std::vector<FluxWindow> windows;
    for (int col = 0; col < 2; ++col) {
        const TransitionLabel label = col == 0 ? TransitionLabel::ge : TransitionLabel::gf;
        for (double center : centers_ghz) {
            auto inside = [&](double phi) {
                const double p[] = {phi};
                return std::abs(predict_transitions(params, cphir, p, label, dim)[0] - center) <= half_width_ghz;
            };
            // edge between an outside point a and an inside point b
            auto edge = [&](double a, double b) {
                for (int it = 0; it < 50 && std::abs(b - a) > 1e-12; ++it) {
                    const double m = 0.5 * (a + b);
                    (inside(m) ? b : a) = m;
                }
                return b;
            };
            int start = -1;
            for (int k = 0; k <= n_grid; ++k) {
                const bool in = k < n_grid && std::abs(grid.freq(k, col) - center) <= half_width_ghz;
                if (in && start < 0) start = k;
                if (!in && start >= 0) {
                    const double lo = start == 0 ? phis[0] : edge(phis[start - 1], phis[start]);
                    const double hi = k == n_grid ? phis[n_grid - 1] : edge(phis[k], phis[k - 1]);
                    windows.push_back({lo, hi});
                    start = -1;
                }
            }
        }
    }
    return merge_windows(std::move(windows));
}

double FitReport::std_error(std::string_view name) const {
    for (std::size_t k = 0; k < parameter_names.size(); ++k) {
        if (parameter_names[k] == name) return std_errors(static_cast<Eigen::Index>(k));
    }
    throw DomainError("parameter '" + std::string(name) + "' was not fitted", {std::string(name)});
}

double FitReport::estimate(std::string_view name) const {
    for (std::size_t k = 0; k < parameter_names.size(); ++k) {
        if (parameter_names[k] == name) return estimates(static_cast<Eigen::Index>(k));
    }
    throw DomainError("parameter '" + std::string(name) + "' was not fitted", {std::string(name)});
}

std::vector<double> predict_transitions(const CircuitParams& params, const CphiRModel& cphir,
                                        std::span<const double> phi_ext, TransitionLabel label,
                                        int basis_dim) {
    validate(params);
    if (label == TransitionLabel::unassigned) throw DomainError("prediction needs ge or gf", {"label"});
    std::vector<double> phis(phi_ext.begin(), phi_ext.end());
    if (phis.empty()) return {};
    const int dim = basis_dim > 0 ? basis_dim : choose_dim(params, cphir, phis, 1e-6);
    const ModelGrid grid = evaluate_grid(params, cphir, phis, dim, false);
    std::vector<double> out(phis.size());
    for (std::size_t k = 0; k < phis.size(); ++k) {
        out[k] = grid.freq(static_cast<Eigen::Index>(k), transition_level(label) - 1);
    }
    return out;
}

FitReport fit_spectrum(const SpectroscopyDataset& data, const CphiRModel& cphir, const CircuitParams& init,
                       const FitOptions& options) {
    validate(data);
    validate(init);
    const std::vector<int> free = free_indices(options.free);
    if (free.empty()) throw ConfigError("no free parameters");
    const auto active = active_points(data);
    if (active.size() < 2 * free.size()) {
        throw DataError("need at least " + std::to_string(2 * free.size()) + " points outside the exclusion windows, have " +
                        std::to_string(active.size()));
    }
    if (options.n_starts < 1) throw ConfigError("n_starts must be >= 1");

    std::vector<int> slot;
    const std::vector<double> phis = unique_fluxes(data, active, slot);
    const int dim = options.basis_dim > 0 ? options.basis_dim : choose_dim(init, cphir, phis, options.dim_tolerance);
    const FitCoordinates coords = options.coordinates;
    const Eigen::Vector3d q_init = coordinates_of(init, coords);
    const auto n_free = static_cast<Eigen::Index>(free.size());

    auto full_q = [&](const Eigen::VectorXd& u) {
        Eigen::Vector3d q = q_init;
        for (Eigen::Index k = 0; k < n_free; ++k) q(free[k]) = std::exp(u(k));
        return q;
    };

    ResidualFunction residual = [&](const Eigen::VectorXd& u, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
        const CircuitParams p = params_of(full_q(u), coords, 0.0);
        ModelGrid grid;
        try {
            validate(p);
            grid = evaluate_grid(p, cphir, phis, dim, jac != nullptr);
        } catch (const Error&) {
            return false;
        }
        const Eigen::Vector3d dlog = energy_log_derivative(p, coords);
        r.resize(static_cast<Eigen::Index>(active.size()));
        if (jac) jac->resize(r.size(), n_free);
        for (std::size_t k = 0; k < active.size(); ++k) {
            const auto& pt = data.points[active[k]];
            double value = 0.0;
            Eigen::Vector3d gradient;
            model_for_point(pt, grid, slot[active[k]], value, jac ? &gradient : nullptr);
            const double sw = std::sqrt(pt.weight);
            r(static_cast<Eigen::Index>(k)) = sw * (pt.frequency - value);
            if (jac) {
                for (Eigen::Index c = 0; c < n_free; ++c) {
                    (*jac)(static_cast<Eigen::Index>(k), c) = -sw * gradient(free[c]) * dlog(free[c]);
                }
            }
        }
        return true;
    };

    Eigen::VectorXd u0(n_free);
    for (Eigen::Index k = 0; k < n_free; ++k) u0(k) = std::log(q_init(free[k]));

    // Latin hypercube of starts around init; start 0 is init itself.
    std::vector<Eigen::VectorXd> starts = {u0};
    if (options.n_starts > 1) {
        std::mt19937_64 rng(options.seed);
        const int n = options.n_starts - 1;
        std::vector<std::vector<int>> strata(free.size());
        for (auto& perm : strata) {
            perm.resize(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) perm[i] = i;
            for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng() % static_cast<std::uint64_t>(i + 1)]);
        }
        for (int s = 0; s < n; ++s) {
            Eigen::VectorXd u = u0;
            for (Eigen::Index k = 0; k < n_free; ++k) {
                const double v = (strata[k][s] + portable_uniform(rng)) / double(n);
                u(k) += options.start_spread * (2.0 * v - 1.0);
            }
            starts.push_back(u);
        }
    }

    int total_evals = 0;
    LeastSquaresResult best;
    bool have_best = false;
    if (starts.size() > 1) {
        LeastSquaresOptions staged = options.lsq;
        staged.max_iterations = options.stage_iterations;
        for (const auto& start : starts) {
            try {
                auto trial = levenberg_marquardt(residual, start, staged);
                total_evals += trial.n_evals;
                if (!have_best || trial.cost < best.cost) {
                    best = std::move(trial);
                    have_best = true;
                }
            } catch (const DomainError&) {
                // infeasible start
            }
        }
        if (!have_best) throw ConvergenceError("every multistart point was infeasible");
    }
    LeastSquaresResult result = levenberg_marquardt(residual, have_best ? best.x : u0, options.lsq);
    total_evals += result.n_evals;

    FitReport report;
    report.cphir = cphir;
    report.coordinates = coords;
    const Eigen::Vector3d q_hat = full_q(result.x);
    report.params = params_of(q_hat, coords, 0.0);
    report.estimates.resize(n_free);
    for (Eigen::Index k = 0; k < n_free; ++k) {
        report.parameter_names.emplace_back(coordinate_name(coords, free[k]));
        report.estimates(k) = q_hat(free[k]);
    }
    const CovarianceEstimate cov = covariance_from_jacobian(result.jacobian, result.residuals);
    const Eigen::VectorXd d = report.estimates;  // d q / d log q
    report.covariance = d.asDiagonal() * cov.covariance * d.asDiagonal();
    report.std_errors = report.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
    report.degenerate = cov.degenerate;
    report.condition_number = cov.condition_number;
    report.cost = result.cost;
    report.n_evals = total_evals;
    report.iterations = result.iterations;
    report.basis_dim = dim;
    report.n_starts = static_cast<int>(starts.size());
    report.converged = result.converged;
    report.message = result.reason;
    if (report.degenerate) report.message += "; Jacobian rank deficient (correlated parameters)";

    const ModelGrid grid = evaluate_grid(report.params, cphir, phis, dim, false);
    fill_report_points(report, data, active, grid, slot);
    return report;
}

std::vector<FitReport> compare_cphir(const SpectroscopyDataset& data, std::span<const CphiRModel> models,
                                     const CircuitParams& init, const FitOptions& options) {
    if (models.empty()) throw ConfigError("compare_cphir needs at least one model");
    std::vector<FitReport> out;
    out.reserve(models.size());
    for (const auto& model : models) out.push_back(fit_spectrum(data, model, init, options));
    return out;
}

TwoEjFit fit_two_ej(const SpectroscopyDataset& data, const CircuitParams& init, const TwoEjOptions& options) {
    validate(data);
    validate(init);
    const CphiRModel cphir = CphiRModel::sinusoidal();
    const auto active = active_points(data);
    if (active.size() < 8) throw DataError("two-E_J fit needs at least 8 active points");
    if (!(options.initial_split >= 0.0) || options.initial_split >= 2.0 * init.e_j) {
        throw ConfigError("initial_split must be in [0, 2 e_j)");
    }
    std::vector<int> slot;
    const std::vector<double> phis = unique_fluxes(data, active, slot);
    const int dim = options.basis_dim > 0 ? options.basis_dim : choose_dim(init, cphir, phis, options.dim_tolerance);

    // Single-branch fit first, so the split starts around the mean line.
    FitOptions single;
    single.n_starts = 1;
    single.basis_dim = dim;
    single.lsq = options.lsq;
    const CircuitParams center = fit_spectrum(data, cphir, init, single).params;
    if (options.initial_split >= 2.0 * center.e_j) throw ConfigError("initial_split must be below 2 e_j");

    // u = log(E_J low, E_C, E_L, E_J high)
    Eigen::VectorXd u(4);
    u << std::log(center.e_j - 0.5 * options.initial_split), std::log(center.e_c_sigma), std::log(center.e_l),
        std::log(center.e_j + 0.5 * options.initial_split);
    auto branch_params = [&](const Eigen::VectorXd& x, int b) {
        return CircuitParams{std::exp(b == 0 ? x(0) : x(3)), std::exp(x(1)), std::exp(x(2)), 0.0};
    };

    auto assign = [&](const Eigen::VectorXd& x) {
        const ModelGrid g0 = evaluate_grid(branch_params(x, 0), cphir, phis, dim, false);
        const ModelGrid g1 = evaluate_grid(branch_params(x, 1), cphir, phis, dim, false);
        const int lower = x(0) <= x(3) ? 0 : 1;
        std::vector<int> branch(data.points.size(), -1);
        for (std::size_t i : active) {
            double m0 = 0.0, m1 = 0.0;
            model_for_point(data.points[i], g0, slot[i], m0, nullptr);
            model_for_point(data.points[i], g1, slot[i], m1, nullptr);
            const double d0 = std::abs(data.points[i].frequency - m0);
            const double d1 = std::abs(data.points[i].frequency - m1);
            branch[i] = d0 < d1 ? 0 : (d1 < d0 ? 1 : lower);
        }
        return branch;
    };

    std::vector<int> branch = assign(u);
    LeastSquaresResult result;
    int iteration = 0;
    for (;;) {
        ++iteration;
        ResidualFunction residual = [&](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
            ModelGrid grids[2];
            CircuitParams ps[2] = {branch_params(x, 0), branch_params(x, 1)};
            try {
                for (int b = 0; b < 2; ++b) {
                    validate(ps[b]);
                    grids[b] = evaluate_grid(ps[b], cphir, phis, dim, jac != nullptr);
                }
            } catch (const Error&) {
                return false;
            }
            r.resize(static_cast<Eigen::Index>(active.size()));
            if (jac) jac->setZero(r.size(), 4);
            for (std::size_t k = 0; k < active.size(); ++k) {
                const std::size_t i = active[k];
                const int b = branch[i];
                double value = 0.0;
                Eigen::Vector3d gradient;
                model_for_point(data.points[i], grids[b], slot[i], value, jac ? &gradient : nullptr);
                const double sw = std::sqrt(data.points[i].weight);
                const auto row = static_cast<Eigen::Index>(k);
                r(row) = sw * (data.points[i].frequency - value);
                if (jac) {
                    (*jac)(row, b == 0 ? 0 : 3) = -sw * gradient(0) * ps[b].e_j;
                    (*jac)(row, 1) = -sw * gradient(1) * ps[b].e_c_sigma;
                    (*jac)(row, 2) = -sw * gradient(2) * ps[b].e_l;
                }
            }
            return true;
        };
        result = levenberg_marquardt(residual, u, options.lsq);
        u = result.x;
        std::vector<int> next = assign(u);
        if (next == branch) break;
        branch = std::move(next);
        if (iteration >= options.max_assignment_iterations) {
            const auto high = std::count(branch.begin(), branch.end(), 1);
            const auto low = std::count(branch.begin(), branch.end(), 0);
            throw ConvergenceError("branch assignment still changing after " + std::to_string(iteration) +
                                   " iterations (last assignment: " + std::to_string(low) + " low, " +
                                   std::to_string(high) + " high)");
        }
    }

    // Order branches by E_J.
    const bool swapped = u(0) > u(3);
    const int low_b = swapped ? 1 : 0;
    const CovarianceEstimate cov = covariance_from_jacobian(result.jacobian, result.residuals);
    Eigen::Vector4d scale(std::exp(u(0)), std::exp(u(1)), std::exp(u(2)), std::exp(u(3)));
    Eigen::Matrix4d c = scale.asDiagonal() * cov.covariance * scale.asDiagonal();
    if (swapped) {
        Eigen::PermutationMatrix<4> perm;
        perm.indices() << 3, 1, 2, 0;
        c = perm * c * perm.transpose();
    }

    TwoEjFit out;
    out.covariance = c;
    out.assignment_iterations = iteration;
    out.branch.assign(data.points.size(), -1);
    for (std::size_t i : active) out.branch[i] = branch[i] == low_b ? 0 : 1;
    const double ej_low = std::exp(swapped ? u(3) : u(0));
    const double ej_high = std::exp(swapped ? u(0) : u(3));
    out.delta_e_j = ej_high - ej_low;
    out.delta_e_j_error = std::sqrt(std::max(0.0, c(0, 0) + c(3, 3) - 2.0 * c(0, 3)));

    {
        const ModelGrid g0 = evaluate_grid(branch_params(u, 0), cphir, phis, dim, false);
        const ModelGrid g1 = evaluate_grid(branch_params(u, 1), cphir, phis, dim, false);
        double separation = 0.0;
        for (std::size_t i : active) {
            double m0 = 0.0, m1 = 0.0;
            model_for_point(data.points[i], g0, slot[i], m0, nullptr);
            model_for_point(data.points[i], g1, slot[i], m1, nullptr);
            separation = std::max(separation, std::abs(m1 - m0));
        }
        const double dof = std::max(1.0, double(active.size()) - 4.0);
        out.residual_sigma = std::sqrt(result.residuals.squaredNorm() / dof);
        out.max_separation = separation;
        out.resolved = separation > options.min_separation_sigmas * out.residual_sigma;
    }
    if (!out.resolved) {
        // A single line split by nearest-branch assignment; report it as one branch.
        FitOptions single;
        single.n_starts = 1;
        single.basis_dim = dim;
        single.lsq = options.lsq;
        const FitReport one = fit_spectrum(data, cphir, center, single);
        out.low = one;
        out.high = one;
        out.delta_e_j = 0.0;
        out.branch.assign(data.points.size(), -1);
        for (std::size_t i : active) out.branch[i] = 0;
        return out;
    }

    for (int which = 0; which < 2; ++which) {
        FitReport& report = which == 0 ? out.low : out.high;
        report.cphir = cphir;
        report.params = {which == 0 ? ej_low : ej_high, std::exp(u(1)), std::exp(u(2)), 0.0};
        report.parameter_names = {"e_j", "e_c_sigma", "e_l"};
        report.estimates = Eigen::Vector3d(report.params.e_j, report.params.e_c_sigma, report.params.e_l);
        const int ej_index = which == 0 ? 0 : 3;
        const int idx[3] = {ej_index, 1, 2};
        report.covariance.resize(3, 3);
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) report.covariance(a, b) = c(idx[a], idx[b]);
        report.std_errors = report.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
        report.degenerate = cov.degenerate;
        report.condition_number = cov.condition_number;
        report.cost = result.cost;
        report.n_evals = result.n_evals;
        report.iterations = result.iterations;
        report.basis_dim = dim;
        report.n_starts = 1;
        report.converged = result.converged;
        report.message = result.reason;
        std::vector<std::size_t> mine;
        for (std::size_t i : active) {
            if (out.branch[i] == which) mine.push_back(i);
        }
        const ModelGrid grid = evaluate_grid(report.params, cphir, phis, dim, false);
        fill_report_points(report, data, mine, grid, slot);
    }
    return out;
}

std::vector<double> branch_crossings(const CircuitParams& low, double delta_e_j, double phi_lo, double phi_hi,
                                     int n_grid, int basis_dim) {
    validate(low);
    if (n_grid < 2 || !(phi_hi > phi_lo)) throw ConfigError("crossing scan needs n_grid >= 2 and phi_hi > phi_lo");
    CircuitParams high = low;
    high.e_j += delta_e_j;
    validate(high);
    if (delta_e_j == 0.0) return {};
    const CphiRModel cphir = CphiRModel::sinusoidal();
    const auto grid = uniform_grid(phi_lo, phi_hi, n_grid);
    const int dim = basis_dim > 0 ? basis_dim : choose_dim(high, cphir, grid, 1e-9);
    auto split = [&](double phi) {
        const double p[] = {phi};
        return predict_transitions(high, cphir, p, TransitionLabel::ge, dim)[0] -
               predict_transitions(low, cphir, p, TransitionLabel::ge, dim)[0];
    };
    const auto f_high = predict_transitions(high, cphir, grid, TransitionLabel::ge, dim);
    const auto f_low = predict_transitions(low, cphir, grid, TransitionLabel::ge, dim);
    std::vector<double> out;
    for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
        double a = grid[k], b = grid[k + 1];
        double fa = f_high[k] - f_low[k];
        const double fb = f_high[k + 1] - f_low[k + 1];
        if (fa == 0.0) {
            out.push_back(a);
            continue;
        }
        if ((fa < 0.0) == (fb < 0.0)) continue;
        for (int it = 0; it < 60 && b - a > 1e-12; ++it) {
            const double m = 0.5 * (a + b);
            const double fm = split(m);
            if ((fm < 0.0) == (fa < 0.0)) {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        out.push_back(0.5 * (a + b));
    }
    return out;
}

nlohmann::json to_json(const FitReport& r) {
    nlohmann::json j;
    j["params"] = to_json(r.params);
    j["params"].erase("phi_ext_phi0");
    j["c_sigma_ff"] = capacitance_from_charging_energy(r.params.e_c_sigma);
    j["l_q_nh"] = inductance_from_inductive_energy(r.params.e_l);
    j["cphir"] = to_json(r.cphir);
    j["coordinates"] = r.coordinates == FitCoordinates::energies ? "energies" : "circuit";
    j["parameter_names"] = r.parameter_names;
    j["estimates"] = std::vector<double>(r.estimates.data(), r.estimates.data() + r.estimates.size());
    j["std_errors"] = std::vector<double>(r.std_errors.data(), r.std_errors.data() + r.std_errors.size());
    j["covariance"] = matrix_json(r.covariance);
    j["rms_residual_ghz"] = r.rms_residual;
    j["max_abs_residual_ghz"] = r.max_abs_residual;
    j["cost"] = r.cost;
    j["n_evals"] = r.n_evals;
    j["iterations"] = r.iterations;
    j["basis_dim"] = r.basis_dim;
    j["n_starts"] = r.n_starts;
    j["converged"] = r.converged;
    j["degenerate"] = r.degenerate;
    j["condition_number"] = r.condition_number;
    j["message"] = r.message;
    nlohmann::json points = nlohmann::json::array();
    for (std::size_t k = 0; k < r.residuals.size(); ++k) {
        points.push_back({{"index", r.point_index[k]},
                          {"phi_ext", r.phi_ext[k]},
                          {"f_ghz", r.frequency[k]},
                          {"model_ghz", r.model[k]},
                          {"label", std::string(to_string(r.assigned[k]))},
                          {"residual_ghz", r.residuals[k]}});
    }
    j["points"] = std::move(points);
    return j;
}

nlohmann::json to_json(const TwoEjFit& fit) {
    nlohmann::json j;
    j["low"] = to_json(fit.low);
    j["high"] = to_json(fit.high);
    j["delta_e_j_ghz"] = fit.delta_e_j;
    j["delta_e_j_error_ghz"] = fit.delta_e_j_error;
    j["assignment_iterations"] = fit.assignment_iterations;
    j["resolved"] = fit.resolved;
    j["max_separation_ghz"] = fit.max_separation;
    j["residual_sigma_ghz"] = fit.residual_sigma;
    j["branch"] = fit.branch;
    j["covariance"] = matrix_json(fit.covariance);
    return j;
}

}  // namespace fluxonium
