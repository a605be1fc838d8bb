#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fluxonium/errors.hpp"
#include "fluxonium/noise.hpp"

using namespace fluxonium;

namespace {

std::vector<FluxNoisePoint> synthetic_echo(double a_phi, double t1, double gamma_other, double time_unit = 1.0) {
    std::vector<FluxNoisePoint> pts;
    for (double slope : {0.0, 2.0, 5.0, 9.0, 14.0, 20.0}) {
        const double gamma2 = 0.5 / t1 + flux_dephasing_rate(a_phi, slope) + gamma_other;
        pts.push_back({0.5 - slope * 1e-3, 1.0 / gamma2 / time_unit, slope});
    }
    return pts;
}

}  // namespace

TEST_SUITE("noise") {

TEST_CASE("first-order flux dephasing closed form") {
    // 2 pi * sqrt(ln 2) * 3.7e-6 Phi_0 * 10 GHz/Phi_0 in 1/us
    CHECK(flux_dephasing_rate(3.7, 10.0) ==
          doctest::Approx(2 * std::numbers::pi * std::sqrt(std::log(2.0)) * 3.7e-6 * 10.0 * 1e3).epsilon(1e-14));
    CHECK(flux_dephasing_rate(3.7, -10.0) == flux_dephasing_rate(3.7, 10.0));
    CHECK(flux_dephasing_rate(3.7, 10.0, 1.0) / flux_dephasing_rate(3.7, 10.0) ==
          doctest::Approx(1.0 / std::sqrt(std::log(2.0))));
}

TEST_CASE("flux-noise amplitude is recovered from noiseless echo data") {
    const auto pts = synthetic_echo(3.7, 14.0, 0.01);
    const auto fit = flux_noise_amplitude(pts, 14.0);
    CHECK(fit.a_phi == doctest::Approx(3.7).epsilon(1e-10));
    CHECK(fit.intercept == doctest::Approx(0.01).epsilon(1e-9));
    CHECK(fit.a_phi_error < 1e-9);
    CHECK_FALSE(fit.negative_slope);
    CHECK(fit.n_points == 6);
}

TEST_CASE("flux-noise fit is invariant under the input time unit") {
    const auto us = flux_noise_amplitude(synthetic_echo(2.5, 20.0, 0.002), 20.0);
    FluxNoiseOptions ns;
    ns.time_unit_us = 1e-3;
    const auto in_ns = flux_noise_amplitude(synthetic_echo(2.5, 20.0, 0.002, 1e-3), 20.0e3, ns);
    CHECK(in_ns.a_phi == doctest::Approx(us.a_phi).epsilon(1e-12));
    CHECK(in_ns.intercept == doctest::Approx(us.intercept).epsilon(1e-10));
}

TEST_CASE("flux-noise fit with scatter gives a consistent error bar") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> jitter(0.0, 0.002);
    int inside = 0;
    const int trials = 400;
    for (int t = 0; t < trials; ++t) {
        auto pts = synthetic_echo(3.0, 14.0, 0.02);
        for (auto& p : pts) p.t2_echo = 1.0 / (1.0 / p.t2_echo + jitter(rng));
        const auto fit = flux_noise_amplitude(pts, 14.0);
        if (std::abs(fit.a_phi - 3.0) < 2.0 * fit.a_phi_error) ++inside;
    }
    // P(|t| < 2) = 0.884 for 4 degrees of freedom
    CHECK(double(inside) / trials == doctest::Approx(0.884).epsilon(0.06));
}

TEST_CASE("flux-noise fit input checks") {
    auto pts = synthetic_echo(3.0, 14.0, 0.0);
    pts.resize(3);
    CHECK_THROWS_AS(flux_noise_amplitude(pts, 14.0), DataError);
    std::vector<FluxNoisePoint> flat(5, {0.5, 10.0, 3.0});
    CHECK_THROWS_AS(flux_noise_amplitude(flat, 14.0), DataError);
    CHECK_THROWS_AS(flux_noise_amplitude(synthetic_echo(3.0, 14.0, 0.0), -1.0), DomainError);
    // rates falling with slope flag a negative amplitude
    auto inverted = synthetic_echo(3.0, 14.0, 0.0);
    std::reverse(inverted.begin(), inverted.end());
    for (std::size_t k = 0; k < inverted.size(); ++k) inverted[k].slope = synthetic_echo(3.0, 14.0, 0.0)[k].slope;
    CHECK(flux_noise_amplitude(inverted, 14.0).negative_slope);
}

TEST_CASE("shot-noise dephasing and its inverse") {
    const ResonatorParams r{7.4, 1.0, 0.1, 0.007};
    const double k = 2 * std::numbers::pi * 1.0, c = 2 * std::numbers::pi * 1.72;
    const double rate = shot_noise_dephasing(r, -1.72);
    CHECK(rate == doctest::Approx(0.007 * k * c * c / (k * k + c * c)).epsilon(1e-14));
    CHECK(implied_photon_number(rate, 1.0, -1.72) == doctest::Approx(0.007).epsilon(1e-14));
    // maximal at kappa = |chi| for fixed chi
    ResonatorParams lo = r, hi = r;
    lo.kappa = 1.5;
    hi.kappa = 1.9;
    const ResonatorParams at{7.4, 1.72, 0.1, 0.007};
    CHECK(shot_noise_dephasing(at, -1.72) > shot_noise_dephasing(lo, -1.72));
    CHECK(shot_noise_dephasing(at, -1.72) > shot_noise_dephasing(hi, -1.72));
    CHECK(shot_noise_dephasing(r, -3.0) > rate);
    CHECK_THROWS_AS(implied_photon_number(rate, 1.0, 0.0), DomainError);
}

TEST_CASE("implied photon number for a Gamma1/2 residual at T1 = 14 us") {
    // hand evaluation: (1/28) (kappa^2 + chi^2) / (kappa chi^2), angular units
    CHECK(implied_photon_number(1.0 / 28.0, 1.0, -1.72) == doctest::Approx(0.007605449455484607).epsilon(1e-12));
}

TEST_CASE("budget components add up to the measurement") {
    BudgetInputs in;
    in.t1 = 14.0;
    in.a_phi = 3.7;
    in.resonator = {7.4, 1.0, 0.1, 0.005};
    in.chi_mhz = -1.72;
    const double shot = shot_noise_dephasing(in.resonator, in.chi_mhz);
    for (double slope : {0.0, 4.0, 12.0}) {
        const double extra = 0.003;
        const double g2 = 0.5 / 14.0 + flux_dephasing_rate(3.7, slope) + shot + extra;
        in.points.push_back({0.5 - slope * 1e-3, 1.0 / g2, slope});
    }
    const auto b = budget_report(in);
    CHECK_FALSE(b.inconsistent);
    for (const auto& e : b.entries) {
        CHECK(e.gamma1_over_2 + e.gamma_flux + e.gamma_shot + e.gamma_ic_residual == doctest::Approx(e.gamma2).epsilon(1e-12));
        CHECK(e.gamma_ic_residual == doctest::Approx(0.003).epsilon(1e-9));
    }
    // sweet-spot residual excludes the shot term; it reads back as a photon number
    CHECK(b.sweet_spot_residual == doctest::Approx(shot + 0.003).epsilon(1e-10));
    CHECK(b.implied_n_photon > 0.005);
}

TEST_CASE("budget flags components that exceed the measurement") {
    BudgetInputs in;
    in.t1 = 14.0;
    in.a_phi = 10.0;
    in.points = {{0.3, 10.0, 20.0}};
    const auto b = budget_report(in);
    CHECK(b.inconsistent);
    CHECK(b.entries[0].gamma_ic_residual == 0.0);
}

TEST_CASE("second-order reading of the sweet-spot residual") {
    BudgetInputs in;
    in.t1 = 1e9;
    in.points = {{0.5, 100.0, 0.0}};
    in.sweet_spot_curvature = 4000.0;
    const auto b = budget_report(in);
    REQUIRE(b.implied_second_order_a_phi.has_value());
    const double a = *b.implied_second_order_a_phi * 1e-6;
    CHECK(2 * std::numbers::pi * a * a * 4000.0 * 1e3 == doctest::Approx(b.sweet_spot_residual).epsilon(1e-10));
}

TEST_CASE("budget JSON round trips") {
    BudgetInputs in;
    in.t1 = 14.0;
    in.a_phi = 3.7;
    in.resonator = {7.4, 1.0, 0.1, 0.005};
    in.chi_mhz = -1.72;
    in.points = {{0.5, 20.0, 0.0}, {0.45, 9.0, 5.0}};
    in.sweet_spot_curvature = 1200.0;
    const auto back = budget_inputs_from_json(to_json(in));
    CHECK(back.t1 == in.t1);
    CHECK(back.points.size() == 2);
    CHECK(back.resonator == in.resonator);
    CHECK(back.sweet_spot_curvature == in.sweet_spot_curvature);
    const auto b = budget_report(in);
    const auto b2 = decoherence_budget_from_json(to_json(b));
    CHECK(to_json(b2) == to_json(b));
    auto bad = to_json(in);
    bad["t2"] = 1.0;
    CHECK_THROWS_AS(budget_inputs_from_json(bad), ConfigError);
    CHECK_THROWS_AS(budget_inputs_from_json({{"t1_us", "x"}, {"points", nlohmann::json::array()}}), ConfigError);
}

}
