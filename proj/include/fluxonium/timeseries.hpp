#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fluxonium/errors.hpp"

namespace fluxonium {

// Exponential decays.

struct DecayFit {
    double t = 0.0;  ///< decay time, same unit as the input times
    double amplitude = 0.0;
    double offset = 0.0;
    double t_error = 0.0;
    double amplitude_error = 0.0;
    double offset_error = 0.0;
    double rms_residual = 0.0;
};

/// Least-squares fit of A exp(-t/T) + B. Needs >= 6 points with increasing
/// times. Throws DataError for data without a resolvable decay.
DecayFit fit_exponential_decay(std::span<const double> times, std::span<const double> values);

// Ramsey fringes.

struct RamseyFit {
    double f1 = 0.0;  ///< MHz when times are in us; f1 <= f2 for two tones
    std::optional<double> f2;
    double t2_star = 0.0;
    std::vector<double> amplitudes;  ///< one per tone
    std::vector<double> phases;      ///< rad
    double offset = 0.0;
    std::vector<double> frequency_errors;
    double t2_star_error = 0.0;
    double rss = 0.0;
    double f_statistic = 0.0;  ///< two-tone vs one-tone, 0 when not evaluated
    double p_value = 1.0;
    bool two_tone = false;
    bool under_resolved = false;  ///< span < 1.5 / f_beating
    bool converged = false;

    std::optional<double> f_beating() const;
    /// Amplitude-weighted mean frequency of the tones.
    double mean_frequency() const;
};

struct RamseyOptions {
    double alpha = 0.01;  ///< F-test level for keeping the second tone
    int max_iterations = 400;
};

/// Thrown when the two-tone optimizer fails on data where the second tone is
/// significant; carries the one-tone fit.
class RamseyConvergenceError : public ConvergenceError {
public:
    RamseyConvergenceError(const std::string& what, RamseyFit fallback)
        : ConvergenceError(what), fallback_(std::move(fallback)) {}
    const RamseyFit& fallback() const noexcept { return fallback_; }

private:
    RamseyFit fallback_;
};

/// Fits A e^{-t/T2*} [cos(2 pi f1 t + p1) + r cos(2 pi f2 t + p2)] + B and keeps
/// the second tone only when an F-test against one tone rejects at `alpha`.
/// Throws DataError when one tone is not significant against a constant.
RamseyFit fit_ramsey_two_tone(std::span<const double> times, std::span<const double> signal,
                              const RamseyOptions& options = {});

/// Difference of mean frequencies between two records (b - a).
double frequency_jump(const RamseyFit& a, const RamseyFit& b);

// IQ traces and state discrimination.

struct IQTrace {
    std::vector<std::complex<double>> samples;  ///< sqrt(photon)
    double dt = 0.0;                            ///< integration window, us
    std::map<std::string, std::string> meta;
};

/// Throws DataError for dt <= 0, an empty trace, or non-finite samples.
void validate(const IQTrace& trace);

struct IqHistogramFit {
    double rotation = 0.0;  ///< rad; I = Re(z exp(-i rotation))
    double mu_g = 0.0;
    double mu_e = 0.0;
    double sigma_g = 0.0;
    double sigma_e = 0.0;
    double p_g = 1.0;
    double p_e = 0.0;
    bool single_state = false;
    int iterations = 0;
    double log_likelihood = 0.0;

    double rotated_i(std::complex<double> z) const;
};

/// Rotates the IQ plane onto its principal axis and fits two Gaussians to the
/// marginal along I. The heavier component is g and sits at the lower I.
IqHistogramFit histogram_iq(const IQTrace& trace);

enum class QubitLevel : std::uint8_t { g = 0, e = 1 };

struct Transition {
    std::size_t index = 0;  ///< first sample in the new state
    QubitLevel to = QubitLevel::g;
};

struct LatchParams {
    double mu_g = 0.0;
    double mu_e = 0.0;
    double sigma_g = 0.0;
    double sigma_e = 0.0;
    double band = 2.0;
    double rotation = 0.0;
};

struct JumpRecord {
    std::vector<QubitLevel> states;
    std::vector<Transition> transitions;
    std::vector<double> dwell_g;  ///< complete dwells only, us
    std::vector<double> dwell_e;
    double dt = 0.0;
    LatchParams filter;
};

/// Two-threshold latching filter: the state flips when I enters the
/// mu +/- band*sigma window of the other state. Throws DataError when the
/// two windows overlap.
JumpRecord latch_filter(const IQTrace& trace, const IqHistogramFit& fit, double band = 2.0);
JumpRecord latch_filter(std::span<const double> i_values, double dt, const LatchParams& params);

struct DwellEstimate {
    double t_down = 0.0;  ///< mean e lifetime, us
    double t_up = 0.0;    ///< mean g lifetime, us
    double t1 = 0.0;      ///< (1/t_down + 1/t_up)^-1
    double t_down_error = 0.0;
    double t_up_error = 0.0;
    std::size_t n_dwell_g = 0;
    std::size_t n_dwell_e = 0;
    double raw_mean_g = 0.0;  ///< uncorrected means, us
    double raw_mean_e = 0.0;
};

/// Exponential MLE from complete dwells, corrected for sampling at dt: dwell
/// lengths in samples are geometric with p = (gamma_i / Gamma)(1 - e^{-Gamma dt}).
/// Needs >= min_dwells of each state.
DwellEstimate dwell_mle(const JumpRecord& record, std::size_t min_dwells = 20);

/// Detailed-balance temperature in K: h f01 / (k_B ln(t_up / t_down)).
/// Infinite when t_up == t_down.
double effective_temperature(double f01_ghz, double t_up, double t_down);

// Power spectra.

struct PsdEstimate {
    std::vector<double> frequencies;  ///< Hz, k / T for k = 1..N/2
    std::vector<double> power;        ///< one-sided, units^2 / Hz
    int n_averages = 0;
    double total_duration = 0.0;  ///< s, per trace
    double dt = 0.0;              ///< s
};

/// Returns the uniform step of `times` or throws DataError.
double uniform_step(std::span<const double> times, double rel_tolerance = 1e-6);

/// One-sided periodogram S_k = 2 T |F_k|^2 (T at Nyquist) with
/// F_k = (1/N) sum x_n e^{-2 pi i k n / N}, per-trace mean removed, averaged
/// over traces of equal length. Sum S_k / T equals the sample variance.
PsdEstimate estimate_psd(const std::vector<std::vector<double>>& traces, double duration_s);

struct RtnFit {
    double gamma = 0.0;  ///< Lorentzian knee, Hz
    double b = 0.0;      ///< units^2 / Hz
    double s0 = 0.0;
    double gamma_error = 0.0;
    double b_error = 0.0;
    double s0_error = 0.0;
    double rms_log_residual = 0.0;
};

/// S(f) = b gamma^2 / (f^2 + gamma^2) + s0 by least squares in log power.
/// Throws DataError when the spectrum is flat or the knee falls outside the
/// measured band.
RtnFit fit_rtn_psd(const PsdEstimate& psd);

double rtn_model(double f, double gamma, double b, double s0);

nlohmann::json to_json(const DecayFit& fit);
nlohmann::json to_json(const RamseyFit& fit);
nlohmann::json to_json(const IqHistogramFit& fit);
nlohmann::json to_json(const JumpRecord& record, bool include_states = false);
nlohmann::json to_json(const DwellEstimate& est);
nlohmann::json to_json(const RtnFit& fit);

}  // namespace fluxonium
