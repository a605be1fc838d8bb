// fluxonium: command-line front end for the spectrum, fitting, readout,
// noise and time-domain analyses.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fluxonium/coupled.hpp"
#include "fluxonium/cphir.hpp"
#include "fluxonium/errors.hpp"
#include "fluxonium/fitting.hpp"
#include "fluxonium/hamiltonian.hpp"
#include "fluxonium/io.hpp"
#include "fluxonium/noise.hpp"
#include "fluxonium/params.hpp"
#include "fluxonium/random.hpp"
#include "fluxonium/synth.hpp"
#include "fluxonium/timeseries.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fluxonium;

namespace {

constexpr const char* kVersion = "0.1.0";

enum ExitCode { kOk = 0, kOther = 1, kConfig = 2, kData = 3, kConvergence = 4 };

struct Artifact {
    std::string name;
    std::string content;
};

struct Run {
    std::string command;
    json config = json::object();
    std::vector<std::string> inputs;
    std::uint64_t seed = 1;
    bool seed_given = false;
    std::vector<Artifact> artifacts;

    void emit(std::string name, std::string content) { artifacts.push_back({std::move(name), std::move(content)}); }
    void emit_json(std::string name, const json& j) { emit(std::move(name), j.dump(2) + "\n"); }
};

// Config access with unknown-key detection.
class Keys {
public:
    Keys(const json& j, std::set<std::string> allowed) : j_(j) {
        if (!j.is_object()) throw ConfigError("config must be a JSON object");
        for (const auto& [key, value] : j.items()) {
            if (!allowed.count(key)) throw ConfigError("unknown config key '" + key + "'");
        }
    }

    bool has(const std::string& key) const { return j_.contains(key); }
    const json& at(const std::string& key) const {
        if (!j_.contains(key)) throw ConfigError("missing config key '" + key + "'");
        return j_.at(key);
    }

    template <class T>
    T get(const std::string& key, T fallback) const {
        if (!j_.contains(key)) return fallback;
        try {
            return j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError("config key '" + key + "' has the wrong type");
        }
    }

    template <class T>
    T require(const std::string& key) const {
        try {
            return at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError("config key '" + key + "' has the wrong type");
        }
    }

private:
    const json& j_;
};

CircuitParams params_or_default(const Keys& k, const std::string& key) {
    if (!k.has(key)) {
        CircuitParams p;
        p.e_j = 23.4;
        p.e_c_sigma = charging_energy_from_capacitance(1.26);
        p.e_l = inductive_energy_from_inductance(285.0);
        return p;
    }
    return circuit_params_from_json(k.at(key));
}

CphiRModel cphir_or_default(const Keys& k) {
    return k.has("cphir") ? cphir_from_json(k.at("cphir")) : CphiRModel::sinusoidal();
}

std::vector<double> flux_grid(const Keys& k) {
    if (k.has("phi_ext")) {
        auto v = k.require<std::vector<double>>("phi_ext");
        if (v.empty()) throw ConfigError("empty flux grid");
        return v;
    }
    const int n = k.get<int>("n_phi", 201);
    if (n < 1) throw ConfigError("empty flux grid (n_phi = " + std::to_string(n) + ")");
    const double lo = k.get<double>("phi_start", 0.0);
    const double hi = k.get<double>("phi_stop", 1.0);
    if (n == 1) return {lo};
    return uniform_grid(lo, hi, n);
}

std::vector<double> linear_grid(const Keys& k, const std::string& start, const std::string& stop,
                                const std::string& count) {
    const int n = k.require<int>(count);
    if (n < 2) throw ConfigError("'" + count + "' must be >= 2");
    return uniform_grid(k.require<double>(start), k.require<double>(stop), n);
}

std::vector<FluxWindow> windows_from(const Keys& k) {
    std::vector<FluxWindow> out;
    if (!k.has("exclusion_windows")) return out;
    for (const auto& w : k.at("exclusion_windows")) {
        if (!w.is_array() || w.size() != 2) throw ConfigError("exclusion windows are [lo, hi] pairs");
        out.push_back({w[0].get<double>(), w[1].get<double>()});
    }
    return out;
}

const std::string& single_input(const Run& run) {
    if (run.inputs.size() != 1) throw ConfigError(run.command + " needs exactly one --input");
    return run.inputs.front();
}

std::vector<std::string> generator_header(const Run& run, GeneratorKind kind) {
    GeneratorSpec spec{run.seed, kind, run.config};
    return {"generator=" + to_json(spec).dump()};
}

// Commands.

void simulate_spectrum(Run& run) {
    Keys k(run.config, {"params", "cphir", "phi_ext", "phi_start", "phi_stop", "n_phi", "n_levels", "basis_dim",
                        "wavefunction_phi_ext", "wavefunction_levels"});
    const CircuitParams params = validate(params_or_default(k, "params"));
    const CphiRModel cphir = cphir_or_default(k);
    const auto phis = flux_grid(k);
    const int n_levels = k.get<int>("n_levels", 4);
    if (n_levels < 2) throw ConfigError("n_levels must be >= 2");
    const int dim = k.get<int>("basis_dim", 200);
    const Eigen::MatrixXd e = spectrum_sweep(params, cphir, phis, n_levels, BasisSpec::oscillator(dim));
    std::vector<std::string> cols = {"phi_ext"};
    for (int j = 1; j < n_levels; ++j) cols.push_back("f_0" + std::to_string(j) + "_ghz");
    std::vector<std::vector<double>> rows;
    for (std::size_t r = 0; r < phis.size(); ++r) {
        std::vector<double> row = {phis[r]};
        for (int j = 1; j < n_levels; ++j) row.push_back(e(static_cast<Eigen::Index>(r), j));
        rows.push_back(row);
    }
    run.emit("spectrum.csv", io::to_csv(cols, rows));

    if (k.has("wavefunction_phi_ext")) {
        CircuitParams p = params;
        p.phi_ext = k.require<double>("wavefunction_phi_ext");
        const int levels = k.get<int>("wavefunction_levels", 3);
        const EigenSolution sol = solve(p, cphir, levels, BasisSpec::oscillator(dim));
        const double c = 2.0 * std::numbers::pi * p.phi_ext;
        const auto grid = uniform_grid(c - 4.0 * std::numbers::pi, c + 4.0 * std::numbers::pi, 801);
        std::vector<std::string> wcols = {"phi_rad", "potential_ghz"};
        std::vector<WavefunctionSamples> samples;
        for (int l = 0; l < levels; ++l) {
            samples.push_back(wavefunction(sol, l, grid));
            wcols.push_back("psi_" + std::to_string(l));
        }
        std::vector<std::vector<double>> wrows;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            std::vector<double> row = {grid[i], samples[0].potential[i]};
            for (const auto& s : samples) row.push_back(s.psi[i]);
            wrows.push_back(row);
        }
        json energies = json::array();
        for (int l = 0; l < levels; ++l) energies.push_back(sol.energies(l));
        run.emit("wavefunctions.csv",
                 io::to_csv(wcols, wrows, {"phi_ext=" + io::format_double(p.phi_ext), "energies_ghz=" + energies.dump()}));
    }
}

FitOptions fit_options_from(const Keys& k, const Run& run) {
    FitOptions o;
    if (k.has("free")) {
        Keys f(k.at("free"), {"e_j", "e_c_sigma", "e_l"});
        o.free.e_j = f.get<bool>("e_j", true);
        o.free.e_c_sigma = f.get<bool>("e_c_sigma", true);
        o.free.e_l = f.get<bool>("e_l", true);
    }
    const auto coords = k.get<std::string>("coordinates", "energies");
    if (coords == "energies") {
        o.coordinates = FitCoordinates::energies;
    } else if (coords == "circuit") {
        o.coordinates = FitCoordinates::circuit;
    } else {
        throw ConfigError("coordinates must be 'energies' or 'circuit'");
    }
    o.n_starts = k.get<int>("n_starts", o.n_starts);
    o.start_spread = k.get<double>("start_spread", o.start_spread);
    o.basis_dim = k.get<int>("basis_dim", 0);
    o.seed = run.seed;
    return o;
}

SpectroscopyDataset dataset_from(const Run& run, const Keys& k, const CircuitParams& init, const CphiRModel& cphir) {
    SpectroscopyDataset data = io::parse_spectroscopy_csv(io::read_file(single_input(run)));
    data.exclusion_windows = windows_from(k);
    if (k.get<bool>("auto_exclusion", false)) {
        double lo = data.points.front().phi_ext, hi = lo;
        for (const auto& p : data.points) {
            lo = std::min(lo, p.phi_ext);
            hi = std::max(hi, p.phi_ext);
        }
        auto windows = data.exclusion_windows;
        for (const auto& w : crossing_exclusion_windows(init, cphir, lo, hi)) windows.push_back(w);
        data.exclusion_windows = merge_windows(windows);
    }
    validate(data);
    return data;
}

std::string residual_csv(const FitReport& r) {
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < r.residuals.size(); ++i) {
        rows.push_back({r.phi_ext[i], r.frequency[i], r.model[i], r.residuals[i],
                        r.assigned[i] == TransitionLabel::ge ? 1.0 : 2.0});
    }
    return io::to_csv({"phi_ext", "frequency_ghz", "model_ghz", "residual_ghz", "final_level"}, rows);
}

void fit_spectrum_cmd(Run& run) {
    Keys k(run.config, {"init", "cphir", "exclusion_windows", "auto_exclusion", "free", "coordinates", "n_starts",
                        "start_spread", "basis_dim"});
    const CircuitParams init = validate(params_or_default(k, "init"));
    const CphiRModel cphir = cphir_or_default(k);
    const FitOptions options = fit_options_from(k, run);
    const SpectroscopyDataset data = dataset_from(run, k, init, cphir);
    const FitReport report = fit_spectrum(data, cphir, init, options);
    run.emit_json("fit.json", to_json(report));
    run.emit("residuals.csv", residual_csv(report));
}

void compare_cphir_cmd(Run& run) {
    Keys k(run.config, {"init", "models", "exclusion_windows", "auto_exclusion", "free", "coordinates", "n_starts",
                        "start_spread", "basis_dim"});
    const CircuitParams init = validate(params_or_default(k, "init"));
    std::vector<CphiRModel> models;
    if (k.has("models")) {
        for (const auto& m : k.at("models")) models.push_back(cphir_from_json(m));
    } else {
        models = {CphiRModel::sinusoidal(), CphiRModel::slanted(), CphiRModel::sawtooth()};
    }
    const FitOptions options = fit_options_from(k, run);
    const SpectroscopyDataset data = dataset_from(run, k, init, models.front());
    const auto reports = compare_cphir(data, models, init, options);
    json summary = json::array();
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const std::string name = std::to_string(i) + "_" + reports[i].cphir.name();
        summary.push_back({{"model", reports[i].cphir.name()},
                           {"rms_residual_ghz", reports[i].rms_residual},
                           {"max_abs_residual_ghz", reports[i].max_abs_residual},
                           {"fit", to_json(reports[i])}});
        run.emit("residuals_" + name + ".csv", residual_csv(reports[i]));
    }
    run.emit_json("compare.json", summary);
}

void fit_two_ej_cmd(Run& run) {
    Keys k(run.config, {"init", "exclusion_windows", "auto_exclusion", "initial_split", "max_assignment_iterations",
                        "basis_dim"});
    const CircuitParams init = validate(params_or_default(k, "init"));
    const SpectroscopyDataset data = dataset_from(run, k, init, CphiRModel::sinusoidal());
    TwoEjOptions o;
    o.initial_split = k.get<double>("initial_split", o.initial_split);
    o.max_assignment_iterations = k.get<int>("max_assignment_iterations", o.max_assignment_iterations);
    o.basis_dim = k.get<int>("basis_dim", 0);
    run.emit_json("two_ej.json", to_json(fit_two_ej(data, init, o)));
}

void dispersive_cmd(Run& run) {
    Keys k(run.config, {"params", "cphir", "resonator", "phi_ext", "phi_start", "phi_stop", "n_phi", "coupling",
                        "n_fock", "n_qubit_levels"});
    CoupledSpec spec;
    spec.qubit = validate(params_or_default(k, "params"));
    spec.cphir = cphir_or_default(k);
    spec.resonator = resonator_params_from_json(k.at("resonator"));
    spec.coupling = coupling_operator_from_string(k.get<std::string>("coupling", "charge"));
    spec.n_fock = k.get<int>("n_fock", spec.n_fock);
    spec.n_qubit_levels = k.get<int>("n_qubit_levels", spec.n_qubit_levels);
    validate(spec);
    const auto phis = flux_grid(k);
    std::vector<std::vector<double>> rows;
    json points = json::array();
    for (double phi : phis) {
        CoupledSpec s = spec;
        s.qubit.phi_ext = phi;
        const DispersiveShift d = dispersive_shift(s);
        const double pert = dispersive_shift_perturbative(s);
        rows.push_back({phi, d.chi_mhz, pert, d.detuning_ghz, d.dressed_resonator_ghz, double(d.near_resonant),
                        double(d.resolved)});
        points.push_back({{"phi_ext", phi},
                          {"chi_mhz", d.chi_mhz},
                          {"chi_perturbative_mhz", pert},
                          {"detuning_ghz", d.detuning_ghz},
                          {"dressed_resonator_ghz", d.dressed_resonator_ghz},
                          {"near_resonant", d.near_resonant},
                          {"chi_exceeds_kappa", d.resolved}});
    }
    run.emit("dispersive.csv", io::to_csv({"phi_ext", "chi_mhz", "chi_perturbative_mhz", "detuning_ghz",
                                           "dressed_resonator_ghz", "near_resonant", "chi_exceeds_kappa"},
                                          rows));
    run.emit_json("dispersive.json", points);
}

ReflectionModel reflection_model_from(const Keys& k) {
    ReflectionModel m;
    m.f0 = k.require<double>("f0_ghz");
    m.kappa = k.require<double>("kappa_mhz");
    m.chi = k.require<double>("chi_mhz");
    m.coupling_ratio = k.get<double>("coupling_ratio", 1.0);
    return validate(m);
}

void s11_cmd(Run& run) {
    if (!run.inputs.empty()) {
        Keys k(run.config, {"fit_coupling_ratio", "coupling_ratio"});
        const io::CsvTable t = io::read_csv(single_input(run));
        const auto f = t.values("f_ghz"), pg = t.values("phase_g"), pe = t.values("phase_e");
        ReflectionData data;
        for (std::size_t i = 0; i < f.size(); ++i) {
            data.g.push_back({f[i], pg[i]});
            data.e.push_back({f[i], pe[i]});
        }
        ReflectionFitOptions o;
        o.fit_coupling_ratio = k.get<bool>("fit_coupling_ratio", false);
        o.coupling_ratio = k.get<double>("coupling_ratio", 1.0);
        run.emit_json("s11_fit.json", to_json(fit_reflection(data, o)));
        return;
    }
    Keys k(run.config, {"f0_ghz", "kappa_mhz", "chi_mhz", "coupling_ratio", "f_start_ghz", "f_stop_ghz", "n_f"});
    const ReflectionModel m = reflection_model_from(k);
    const auto freqs = linear_grid(k, "f_start_ghz", "f_stop_ghz", "n_f");
    std::vector<std::vector<double>> rows;
    for (double f : freqs) {
        const auto g = reflection_coefficient(m, f, QubitState::g);
        const auto e = reflection_coefficient(m, f, QubitState::e);
        rows.push_back({f, g.real(), g.imag(), std::arg(g), e.real(), e.imag(), std::arg(e)});
    }
    run.emit("s11.csv", io::to_csv({"f_ghz", "re_g", "im_g", "phase_g", "re_e", "im_e", "phase_e"}, rows));
}

void budget_cmd(Run& run) {
    json cfg = run.config;
    const double time_unit = cfg.value("time_unit_us", 1.0);
    cfg.erase("time_unit_us");
    json fit_json = nullptr;
    if (!run.inputs.empty()) {
        const io::CsvTable t = io::read_csv(single_input(run));
        const auto phi = t.values("phi_ext"), t2 = t.values("t2_echo"), slope = t.values("slope_ghz_per_phi0");
        std::vector<FluxNoisePoint> pts;
        json points = json::array();
        for (std::size_t i = 0; i < phi.size(); ++i) {
            pts.push_back({phi[i], t2[i], slope[i]});
            points.push_back({{"phi_ext", phi[i]}, {"t2_echo_us", t2[i] * time_unit}, {"slope_ghz_per_phi0", slope[i]}});
        }
        if (!cfg.contains("t1_us")) throw ConfigError("missing config key 't1_us'");
        FluxNoiseOptions o;
        o.prefactor = cfg.value("echo_prefactor", kEchoPrefactor);
        o.time_unit_us = time_unit;
        const FluxNoiseFit fit = flux_noise_amplitude(pts, cfg.at("t1_us").get<double>() / time_unit, o);
        fit_json = to_json(fit);
        cfg["points"] = points;
        if (!cfg.contains("a_phi_uphi0")) cfg["a_phi_uphi0"] = std::max(0.0, fit.a_phi);
    }
    const BudgetInputs in = budget_inputs_from_json(cfg);
    json out = {{"inputs", to_json(in)}, {"budget", to_json(budget_report(in))}, {"flux_noise_fit", fit_json}};
    run.emit_json("budget.json", out);
}

void analyze_jumps_cmd(Run& run) {
    Keys k(run.config, {"band", "f01_ghz", "min_dwells", "include_states"});
    const IQTrace trace = io::read_trace(single_input(run));
    const IqHistogramFit hist = histogram_iq(trace);
    const JumpRecord rec = latch_filter(trace, hist, k.get<double>("band", 2.0));
    const DwellEstimate est = dwell_mle(rec, k.get<std::size_t>("min_dwells", 20));
    json out = {{"histogram", to_json(hist)}, {"dwell", to_json(est)}, {"n_samples", trace.samples.size()},
                {"dt_us", trace.dt}};
    if (k.has("f01_ghz")) {
        const double t = effective_temperature(k.require<double>("f01_ghz"), est.t_up, est.t_down);
        out["effective_temperature_mk"] = std::isfinite(t) ? json(1e3 * t) : json(nullptr);
        out["effective_temperature_unbounded"] = !std::isfinite(t);
    }
    run.emit_json("jumps.json", out);
    run.emit_json("jump_record.json", to_json(rec, k.get<bool>("include_states", false)));
}

void ramsey_cmd(Run& run) {
    Keys k(run.config, {"alpha"});
    if (run.inputs.empty()) throw ConfigError("ramsey needs at least one --input");
    RamseyOptions o;
    o.alpha = k.get<double>("alpha", o.alpha);
    json fits = json::array();
    std::vector<RamseyFit> all;
    for (const auto& path : run.inputs) {
        const io::CsvTable t = io::read_csv(path);
        const auto times = t.values("t_us"), signal = t.values("signal");
        all.push_back(fit_ramsey_two_tone(times, signal, o));
        fits.push_back(to_json(all.back()));
    }
    json jumps = json::array();
    for (std::size_t i = 1; i < all.size(); ++i) jumps.push_back(frequency_jump(all[i - 1], all[i]));
    run.emit_json("ramsey.json", {{"records", fits}, {"frequency_jumps_mhz", jumps}});
}

void psd_cmd(Run& run) {
    Keys k(run.config, {"fit"});
    const io::CsvTable t = io::read_csv(single_input(run));
    const auto times = t.values("t_s");
    const double dt = uniform_step(times);
    std::vector<std::vector<double>> traces;
    for (const auto& col : t.columns) {
        if (col != "t_s") traces.push_back(t.values(col));
    }
    if (traces.empty()) throw DataError("PSD input has no trace columns");
    const PsdEstimate psd = estimate_psd(traces, dt * double(times.size()));
    run.emit("psd.csv", io::to_csv(psd));
    if (k.get<bool>("fit", true)) run.emit_json("rtn_fit.json", to_json(fit_rtn_psd(psd)));
}

void generate_cmd(Run& run) {
    const json& cfg = run.config;
    if (!cfg.contains("kind")) throw ConfigError("generate needs config key 'kind'");
    const GeneratorKind kind = generator_kind_from_string(cfg.at("kind").get<std::string>());
    const auto header = generator_header(run, kind);
    switch (kind) {
        case GeneratorKind::telegraph: {
            Keys k(cfg, {"kind", "t_down_us", "t_up_us", "dt_us", "n"});
            const double dt = k.require<double>("dt_us");
            const auto tel = gen_telegraph(k.require<double>("t_down_us"), k.require<double>("t_up_us"), dt,
                                           k.require<std::size_t>("n"), run.seed);
            std::vector<std::vector<double>> rows;
            for (std::size_t i = 0; i < tel.states.size(); ++i) {
                rows.push_back({double(i) * dt, tel.states[i] == QubitLevel::e ? 1.0 : 0.0});
            }
            auto h = header;
            h.push_back(std::string("coarse_sampling=") + (tel.coarse_sampling ? "true" : "false"));
            run.emit("telegraph.csv", io::to_csv({"t_us", "excited"}, rows, h));
            break;
        }
        case GeneratorKind::iq_trace: {
            Keys k(cfg, {"kind", "t_down_us", "t_up_us", "dt_us", "n", "duration_us", "mu_g", "mu_e", "sigma",
                         "rotation_deg", "format"});
            const double dt = k.require<double>("dt_us");
            const std::size_t n = k.has("n") ? k.require<std::size_t>("n")
                                             : static_cast<std::size_t>(std::ceil(k.require<double>("duration_us") / dt));
            const auto tel = gen_telegraph(k.require<double>("t_down_us"), k.require<double>("t_up_us"), dt, n,
                                           derive_seed(run.seed, 0));
            IQTrace trace = gen_iq_trace(tel, k.get<double>("mu_g", -3.0), k.get<double>("mu_e", 3.0),
                                         k.get<double>("sigma", 1.0), derive_seed(run.seed, 1),
                                         k.get<double>("rotation_deg", 0.0) * std::numbers::pi / 180.0);
            const auto format = k.get<std::string>("format", "binary");
            if (format == "binary") {
                run.emit("trace.iqt", io::to_binary(trace));
                run.emit_json("trace_spec.json", to_json(GeneratorSpec{run.seed, kind, cfg}));
            } else if (format == "csv") {
                run.emit("trace.csv", io::to_csv(trace, header));
            } else {
                throw ConfigError("format must be 'binary' or 'csv'");
            }
            break;
        }
        case GeneratorKind::spectrum: {
            Keys k(cfg, {"kind", "params", "cphir", "phi_ext", "phi_start", "phi_stop", "n_phi", "noise_mhz",
                         "delta_e_j_ghz", "labels", "basis_dim"});
            SpectrumSpec s;
            s.params = validate(params_or_default(k, "params"));
            s.cphir = cphir_or_default(k);
            s.phi_ext = flux_grid(k);
            s.noise_ghz = 1e-3 * k.get<double>("noise_mhz", 0.0);
            if (k.has("delta_e_j_ghz")) s.delta_e_j = k.require<double>("delta_e_j_ghz");
            if (k.has("labels")) {
                s.labels.clear();
                for (const auto& l : k.at("labels")) s.labels.push_back(transition_label_from_string(l.get<std::string>()));
            }
            s.basis_dim = k.get<int>("basis_dim", 0);
            const auto syn = gen_spectrum(s, run.seed);
            run.emit("spectrum.csv", io::to_csv(syn.data, header));
            if (s.delta_e_j) run.emit_json("branches.json", syn.branch);
            break;
        }
        case GeneratorKind::ramsey: {
            Keys k(cfg, {"kind", "t_start_us", "t_stop_us", "n", "tones", "t2_star_us", "offset", "noise"});
            const auto times = linear_grid(k, "t_start_us", "t_stop_us", "n");
            std::vector<RamseyTone> tones;
            for (const auto& t : k.at("tones")) {
                tones.push_back({t.value("amplitude", 0.5), t.at("frequency_mhz").get<double>(), t.value("phase", 0.0)});
            }
            const auto y = gen_ramsey(times, tones, k.require<double>("t2_star_us"), k.get<double>("offset", 0.5),
                                      k.get<double>("noise", 0.0), run.seed);
            std::vector<std::vector<double>> rows;
            for (std::size_t i = 0; i < times.size(); ++i) rows.push_back({times[i], y[i]});
            run.emit("ramsey.csv", io::to_csv({"t_us", "signal"}, rows, header));
            break;
        }
        case GeneratorKind::decay: {
            Keys k(cfg, {"kind", "t_start_us", "t_stop_us", "n", "t_us", "amplitude", "offset", "noise"});
            const auto times = linear_grid(k, "t_start_us", "t_stop_us", "n");
            const auto y = gen_decay(times, k.require<double>("t_us"), k.get<double>("amplitude", 1.0),
                                     k.get<double>("offset", 0.0), k.get<double>("noise", 0.0), run.seed);
            std::vector<std::vector<double>> rows;
            for (std::size_t i = 0; i < times.size(); ++i) rows.push_back({times[i], y[i]});
            run.emit("decay.csv", io::to_csv({"t_us", "signal"}, rows, header));
            break;
        }
        case GeneratorKind::s11: {
            Keys k(cfg, {"kind", "f0_ghz", "kappa_mhz", "chi_mhz", "coupling_ratio", "f_start_ghz", "f_stop_ghz",
                         "n_f", "phase_noise"});
            const ReflectionModel m = reflection_model_from(k);
            const auto freqs = linear_grid(k, "f_start_ghz", "f_stop_ghz", "n_f");
            const auto data = gen_s11(m, freqs, k.get<double>("phase_noise", 0.0), run.seed);
            std::vector<std::vector<double>> rows;
            for (std::size_t i = 0; i < freqs.size(); ++i) rows.push_back({freqs[i], data.g[i].phase, data.e[i].phase});
            run.emit("s11.csv", io::to_csv({"f_ghz", "phase_g", "phase_e"}, rows, header));
            break;
        }
        case GeneratorKind::rtn: {
            Keys k(cfg, {"kind", "gamma_hz", "b", "s0", "dt_s", "n_samples", "n_traces"});
            RtnSpec s;
            s.gamma_knee = k.require<double>("gamma_hz");
            s.b = k.require<double>("b");
            s.s0 = k.require<double>("s0");
            s.dt = k.require<double>("dt_s");
            s.n_samples = k.require<std::size_t>("n_samples");
            s.n_traces = k.get<std::size_t>("n_traces", 1);
            const auto traces = gen_rtn(s, run.seed);
            std::vector<std::string> cols = {"t_s"};
            for (std::size_t j = 0; j < traces.size(); ++j) cols.push_back("x" + std::to_string(j));
            std::vector<std::vector<double>> rows;
            for (std::size_t i = 0; i < s.n_samples; ++i) {
                std::vector<double> row = {double(i) * s.dt};
                for (const auto& t : traces) row.push_back(t[i]);
                rows.push_back(std::move(row));
            }
            run.emit("rtn.csv", io::to_csv(cols, rows, header));
            break;
        }
    }
}

// Config assembly and output.

json parse_value(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error&) {
        return text;
    }
}

void apply_override(json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
    const std::string key = assignment.substr(0, eq);
    json* node = &config;
    std::size_t start = 0;
    for (;;) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot - start);
        if (part.empty()) throw ConfigError("--set key '" + key + "' has an empty component");
        if (dot == std::string::npos) {
            (*node)[part] = parse_value(assignment.substr(eq + 1));
            break;
        }
        if (!node->contains(part) || !(*node)[part].is_object()) (*node)[part] = json::object();
        node = &(*node)[part];
        start = dot + 1;
    }
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_outputs(const Run& run, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    json outputs = json::array();
    for (const auto& a : run.artifacts) {
        io::atomic_write(out_dir / a.name, a.content);
        outputs.push_back({{"file", a.name}, {"fnv1a64", io::fnv1a64_hex(a.content)}});
    }
    json inputs = json::array();
    for (const auto& in : run.inputs) inputs.push_back({{"path", in}, {"fnv1a64", io::file_hash(in)}});
    json manifest = {{"tool", "fluxonium"},
                     {"version", kVersion},
                     {"command", run.command},
                     {"config", run.config},
                     {"seed", run.seed},
                     {"rng", kRngAlgorithm},
                     {"inputs", inputs},
                     {"outputs", outputs},
                     {"created_utc", utc_timestamp()}};
    io::atomic_write(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fluxonium spectrum, readout, noise and time-domain analysis"};
    app.require_subcommand(1);
    std::string config_path, out_dir = "out";
    std::vector<std::string> overrides, inputs;
    std::optional<std::uint64_t> seed;

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"simulate-spectrum", "Transition frequencies over a flux grid"},
        {"fit-spectrum", "Fit (E_J, E_C, E_L) to a spectroscopy CSV"},
        {"compare-cphir", "Refit a spectroscopy CSV with several current-phase relations"},
        {"fit-two-ej", "Joint fit of two interleaved E_J branches"},
        {"dispersive", "Dispersive shift of the readout resonator over flux"},
        {"s11", "Reflection model curve, or fit of measured phases with --input"},
        {"budget", "Decoherence budget, optionally fitting the flux-noise amplitude"},
        {"analyze-jumps", "Latching filter and dwell-time analysis of an IQ trace"},
        {"ramsey", "One/two-tone Ramsey fits of one or more records"},
        {"psd", "Power spectrum of frequency time series and Lorentzian fit"},
        {"generate", "Synthetic data"}};
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "JSON configuration file");
        sub->add_option("--out", out_dir, "output directory")->capture_default_str();
        sub->add_option("--seed", seed, "random seed (u64)");
        sub->add_option("--set", overrides, "override a config key: key=value (dotted keys nest)");
        sub->add_option("--input", inputs, "input data file (repeatable)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    Run run;
    run.command = app.get_subcommands().front()->get_name();
    run.inputs = inputs;
    try {
        if (!config_path.empty()) run.config = io::read_json(config_path);
        if (!run.config.is_object()) throw ConfigError("config must be a JSON object");
        for (const auto& o : overrides) apply_override(run.config, o);
        for (const auto& in : run.inputs) {
            if (!fs::exists(in)) throw ConfigError("input '" + in + "' does not exist");
        }
        if (seed) {
            run.seed = *seed;
        } else if (run.config.contains("seed")) {
            run.seed = run.config.at("seed").get<std::uint64_t>();
        }
        run.config.erase("seed");

        if (run.command == "simulate-spectrum") simulate_spectrum(run);
        else if (run.command == "fit-spectrum") fit_spectrum_cmd(run);
        else if (run.command == "compare-cphir") compare_cphir_cmd(run);
        else if (run.command == "fit-two-ej") fit_two_ej_cmd(run);
        else if (run.command == "dispersive") dispersive_cmd(run);
        else if (run.command == "s11") s11_cmd(run);
        else if (run.command == "budget") budget_cmd(run);
        else if (run.command == "analyze-jumps") analyze_jumps_cmd(run);
        else if (run.command == "ramsey") ramsey_cmd(run);
        else if (run.command == "psd") psd_cmd(run);
        else if (run.command == "generate") generate_cmd(run);

        write_outputs(run, out_dir);
        std::cout << "wrote " << run.artifacts.size() + 1 << " files to " << out_dir << "\n";
        return kOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const DomainError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kData;
    } catch (const ConvergenceError& e) {
        std::cerr << "convergence error: " << e.what() << "\n";
        return kConvergence;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kOther;
    }
}
