#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fluxonium/cphir.hpp"
#include "fluxonium/fitting.hpp"
#include "fluxonium/params.hpp"
#include "fluxonium/random.hpp"
#include "fluxonium/timeseries.hpp"

namespace fluxonium {

enum class GeneratorKind { telegraph, iq_trace, spectrum, ramsey, decay, s11, rtn };
std::string_view to_string(GeneratorKind kind);
GeneratorKind generator_kind_from_string(std::string_view text);

/// Seed, kind and kind-specific parameters; written into output headers.
struct GeneratorSpec {
    std::uint64_t seed = 1;
    GeneratorKind kind = GeneratorKind::telegraph;
    nlohmann::json parameters = nlohmann::json::object();
};

nlohmann::json to_json(const GeneratorSpec& spec);

struct TelegraphTrace {
    std::vector<QubitLevel> states;  ///< state at t = k dt
    double dt = 0.0;
    /// Continuous dwell durations as drawn, in order, starting in `initial`.
    std::vector<double> dwells;
    QubitLevel initial = QubitLevel::g;
    bool coarse_sampling = false;  ///< dt > min(t_down, t_up) / 3
};

/// Two-state Markov process: e decays with mean lifetime t_down, g is excited
/// with mean lifetime t_up. Dwells are drawn exactly and then sampled at
/// k dt. The initial state is drawn from the stationary distribution.
TelegraphTrace gen_telegraph(double t_down, double t_up, double dt, std::size_t n, std::uint64_t seed);

/// Per-sample complex Gaussian noise (sigma per quadrature) around mu_g or
/// mu_e on the I axis, then rotated by `rotation` rad.
IQTrace gen_iq_trace(const TelegraphTrace& telegraph, double mu_g, double mu_e, double sigma, std::uint64_t seed,
                     double rotation = 0.0);

struct SpectrumSpec {
    CircuitParams params;
    CphiRModel cphir = CphiRModel::sinusoidal();
    std::vector<double> phi_ext;
    std::vector<TransitionLabel> labels = {TransitionLabel::ge, TransitionLabel::gf};
    double noise_ghz = 0.0;
    /// Second E_J branch (E_J + delta_e_j); each point picks a branch at random.
    std::optional<double> delta_e_j;
    int basis_dim = 0;
};

struct SyntheticSpectrum {
    SpectroscopyDataset data;
    std::vector<int> branch;  ///< 0 or 1 per point (all 0 without a second branch)
};

SyntheticSpectrum gen_spectrum(const SpectrumSpec& spec, std::uint64_t seed);

/// A exp(-t/T) + B plus Gaussian noise.
std::vector<double> gen_decay(std::span<const double> times, double t_decay, double amplitude, double offset,
                              double noise, std::uint64_t seed);

struct RamseyTone {
    double amplitude = 1.0;
    double frequency = 0.0;
    double phase = 0.0;
};

/// exp(-t/T2*) sum_k a_k cos(2 pi f_k t + p_k) + offset plus Gaussian noise.
std::vector<double> gen_ramsey(std::span<const double> times, std::span<const RamseyTone> tones, double t2_star,
                               double offset, double noise, std::uint64_t seed);

/// arg S11 of both qubit branches with Gaussian phase noise (rad).
ReflectionData gen_s11(const ReflectionModel& model, std::span<const double> f_ghz, double phase_noise,
                       std::uint64_t seed);

struct RtnSpec {
    double gamma_knee = 0.0;  ///< Hz, Lorentzian knee; per-direction switching rate is pi * gamma_knee
    double b = 0.0;           ///< Lorentzian plateau, units^2/Hz
    double s0 = 0.0;          ///< white floor, units^2/Hz
    double dt = 1.0;          ///< s
    std::size_t n_samples = 0;
    std::size_t n_traces = 1;
};

/// Symmetric telegraph signal +/- sqrt(pi b gamma_knee / 2) plus white noise of
/// variance s0 / (2 dt), so the one-sided spectrum is b g^2/(f^2+g^2) + s0.
/// Trace k uses derive_seed(seed, k).
std::vector<std::vector<double>> gen_rtn(const RtnSpec& spec, std::uint64_t seed);

}  // namespace fluxonium
