#include "fluxonium/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "fluxonium/errors.hpp"
#include "fluxonium/parallel.hpp"

namespace fluxonium {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct KindName {
    GeneratorKind kind;
    std::string_view name;
};

constexpr KindName kKinds[] = {{GeneratorKind::telegraph, "telegraph"}, {GeneratorKind::iq_trace, "iq_trace"},
                               {GeneratorKind::spectrum, "spectrum"},   {GeneratorKind::ramsey, "ramsey"},
                               {GeneratorKind::decay, "decay"},         {GeneratorKind::s11, "s11"},
                               {GeneratorKind::rtn, "rtn"}};

void require_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(std::string(name) + " must be positive", {name});
}

void require_non_negative(double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError(std::string(name) + " must be >= 0", {name});
}

}  // namespace

std::string_view to_string(GeneratorKind kind) {
    for (const auto& k : kKinds) {
        if (k.kind == kind) return k.name;
    }
    return "unknown";
}

GeneratorKind generator_kind_from_string(std::string_view text) {
    for (const auto& k : kKinds) {
        if (k.name == text) return k.kind;
    }
    throw ConfigError("unknown generator kind '" + std::string(text) + "'");
}

nlohmann::json to_json(const GeneratorSpec& spec) {
    return {{"seed", spec.seed},
            {"kind", to_string(spec.kind)},
            {"rng", kRngAlgorithm},
            {"parameters", spec.parameters}};
}

TelegraphTrace gen_telegraph(double t_down, double t_up, double dt, std::size_t n, std::uint64_t seed) {
    require_positive(t_down, "t_down");
    require_positive(t_up, "t_up");
    require_positive(dt, "dt");
    TelegraphTrace out;
    out.dt = dt;
    out.coarse_sampling = dt > std::min(t_down, t_up) / 3.0;
    out.states.resize(n);
    Rng rng(seed);
    const double p_e = t_down / (t_down + t_up);
    QubitLevel state = rng.uniform() < p_e ? QubitLevel::e : QubitLevel::g;
    out.initial = state;
    std::size_t k = 0;
    double t = 0.0;
    while (k < n) {
        const double d = rng.exponential(state == QubitLevel::e ? t_down : t_up);
        out.dwells.push_back(d);
        t += d;
        while (k < n && double(k) * dt < t) out.states[k++] = state;
        state = state == QubitLevel::e ? QubitLevel::g : QubitLevel::e;
    }
    return out;
}

IQTrace gen_iq_trace(const TelegraphTrace& telegraph, double mu_g, double mu_e, double sigma, std::uint64_t seed,
                     double rotation) {
    require_non_negative(sigma, "sigma");
    IQTrace trace;
    trace.dt = telegraph.dt;
    trace.samples.resize(telegraph.states.size());
    const std::complex<double> turn = std::polar(1.0, rotation);
    Rng rng(seed);
    for (std::size_t k = 0; k < trace.samples.size(); ++k) {
        const double mu = telegraph.states[k] == QubitLevel::e ? mu_e : mu_g;
        const double i = rng.normal(mu, sigma);
        const double q = rng.normal(0.0, sigma);
        trace.samples[k] = std::complex<double>(i, q) * turn;
    }
    trace.meta["rng"] = kRngAlgorithm;
    trace.meta["seed"] = std::to_string(seed);
    return trace;
}

SyntheticSpectrum gen_spectrum(const SpectrumSpec& spec, std::uint64_t seed) {
    validate(spec.params);
    require_non_negative(spec.noise_ghz, "noise_ghz");
    if (spec.phi_ext.empty()) throw ConfigError("spectrum generator: empty flux grid");
    if (spec.labels.empty()) throw ConfigError("spectrum generator: no transitions requested");

    std::vector<CircuitParams> branches = {spec.params};
    if (spec.delta_e_j) {
        CircuitParams high = spec.params;
        high.e_j += *spec.delta_e_j;
        branches.push_back(validate(high));
    }
    // predictions[branch][label][flux]
    std::vector<std::vector<std::vector<double>>> predictions(branches.size());
    for (std::size_t b = 0; b < branches.size(); ++b) {
        for (TransitionLabel label : spec.labels) {
            predictions[b].push_back(
                predict_transitions(branches[b], spec.cphir, spec.phi_ext, label, spec.basis_dim));
        }
    }
    SyntheticSpectrum out;
    Rng rng(seed);
    for (std::size_t k = 0; k < spec.phi_ext.size(); ++k) {
        for (std::size_t l = 0; l < spec.labels.size(); ++l) {
            const int b = branches.size() > 1 && rng.uniform() < 0.5 ? 1 : 0;
            SpectroscopyPoint p;
            p.phi_ext = spec.phi_ext[k];
            p.label = spec.labels[l];
            p.frequency = predictions[static_cast<std::size_t>(b)][l][k] + spec.noise_ghz * rng.normal();
            out.data.points.push_back(p);
            out.branch.push_back(b);
        }
    }
    return out;
}

std::vector<double> gen_decay(std::span<const double> times, double t_decay, double amplitude, double offset,
                              double noise, std::uint64_t seed) {
    require_positive(t_decay, "t_decay");
    require_non_negative(noise, "noise");
    Rng rng(seed);
    std::vector<double> out(times.size());
    for (std::size_t k = 0; k < times.size(); ++k) {
        out[k] = amplitude * std::exp(-times[k] / t_decay) + offset + noise * rng.normal();
    }
    return out;
}

std::vector<double> gen_ramsey(std::span<const double> times, std::span<const RamseyTone> tones, double t2_star,
                               double offset, double noise, std::uint64_t seed) {
    require_positive(t2_star, "t2_star");
    require_non_negative(noise, "noise");
    Rng rng(seed);
    std::vector<double> out(times.size());
    for (std::size_t k = 0; k < times.size(); ++k) {
        double sum = 0.0;
        for (const auto& tone : tones) sum += tone.amplitude * std::cos(kTwoPi * tone.frequency * times[k] + tone.phase);
        out[k] = std::exp(-times[k] / t2_star) * sum + offset + noise * rng.normal();
    }
    return out;
}

ReflectionData gen_s11(const ReflectionModel& model, std::span<const double> f_ghz, double phase_noise,
                       std::uint64_t seed) {
    validate(model);
    require_non_negative(phase_noise, "phase_noise");
    Rng rng(seed);
    ReflectionData out;
    for (double f : f_ghz) {
        out.g.push_back({f, std::remainder(std::arg(reflection_coefficient(model, f, QubitState::g)) +
                                               phase_noise * rng.normal(),
                                           kTwoPi)});
    }
    for (double f : f_ghz) {
        out.e.push_back({f, std::remainder(std::arg(reflection_coefficient(model, f, QubitState::e)) +
                                               phase_noise * rng.normal(),
                                           kTwoPi)});
    }
    return out;
}

std::vector<std::vector<double>> gen_rtn(const RtnSpec& spec, std::uint64_t seed) {
    require_positive(spec.gamma_knee, "gamma_knee");
    require_non_negative(spec.b, "b");
    require_non_negative(spec.s0, "s0");
    require_positive(spec.dt, "dt");
    if (spec.n_samples == 0 || spec.n_traces == 0) throw ConfigError("RTN generator: empty trace request");
    const double rate = std::numbers::pi * spec.gamma_knee;
    const double amplitude = std::sqrt(std::numbers::pi * spec.b * spec.gamma_knee / 2.0);
    const double white = std::sqrt(spec.s0 / (2.0 * spec.dt));
    std::vector<std::vector<double>> traces(spec.n_traces);
    parallel_for(spec.n_traces, [&](std::size_t i) {
        Rng rng(derive_seed(seed, i));
        std::vector<double> x(spec.n_samples);
        double level = rng.uniform() < 0.5 ? -amplitude : amplitude;
        double t_next = rng.exponential(1.0 / rate);
        for (std::size_t k = 0; k < spec.n_samples; ++k) {
            const double t = double(k) * spec.dt;
            while (t_next <= t) {
                level = -level;
                t_next += rng.exponential(1.0 / rate);
            }
            x[k] = level + white * rng.normal();
        }
        traces[i] = std::move(x);
    });
    return traces;
}

}  // namespace fluxonium
