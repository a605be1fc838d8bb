#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "fluxonium/errors.hpp"
#include "fluxonium/synth.hpp"
#include "fluxonium/timeseries.hpp"
#include "support.hpp"

using namespace fluxonium;

namespace {

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> t(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) t[k] = a + (b - a) * k / (n - 1);
    return t;
}

double variance(const std::vector<double>& x) {
    const double m = std::accumulate(x.begin(), x.end(), 0.0) / double(x.size());
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / double(x.size());
}

}  // namespace

TEST_SUITE("timeseries") {

TEST_CASE("exponential decay round trip") {
    const auto t = linspace(0.0, 60.0, 121);
    const auto y = gen_decay(t, 14.0, 0.8, 0.1, 0.0, 1);
    const auto fit = fit_exponential_decay(t, y);
    CHECK(fit.t == doctest::Approx(14.0).epsilon(1e-8));
    CHECK(fit.amplitude == doctest::Approx(0.8).epsilon(1e-8));
    CHECK(fit.offset == doctest::Approx(0.1).epsilon(1e-7));
    const auto noisy = fit_exponential_decay(t, gen_decay(t, 14.0, 0.8, 0.1, 0.01, 2));
    CHECK(std::abs(noisy.t - 14.0) < 4 * noisy.t_error);
    CHECK(noisy.rms_residual == doctest::Approx(0.01).epsilon(0.2));
}

TEST_CASE("decay fit scales with the time unit") {
    const auto t = linspace(0.0, 60.0, 61);
    std::vector<double> t_ns(t.size());
    std::transform(t.begin(), t.end(), t_ns.begin(), [](double v) { return v * 1e3; });
    const auto y = gen_decay(t, 9.0, 1.0, 0.0, 0.02, 4);
    CHECK(fit_exponential_decay(t_ns, y).t == doctest::Approx(1e3 * fit_exponential_decay(t, y).t).epsilon(1e-7));
}

TEST_CASE("decay fit rejects data without a decay") {
    const auto t = linspace(0.0, 10.0, 20);
    CHECK_THROWS_AS(fit_exponential_decay(t, std::vector<double>(20, 0.3)), DataError);
    CHECK_THROWS_AS(fit_exponential_decay(std::vector<double>{0, 1, 2}, std::vector<double>{1, 0.5, 0.2}), DataError);
    std::vector<double> bad_t = t;
    bad_t[5] = bad_t[4];
    CHECK_THROWS_AS(fit_exponential_decay(bad_t, gen_decay(t, 3.0, 1.0, 0.0, 0.0, 1)), DataError);
}

TEST_CASE("Ramsey: one tone stays one tone") {
    const auto t = linspace(0.0, 10.0, 401);
    const RamseyTone tone{0.5, 2.0, 0.3};
    const auto y = gen_ramsey(t, std::span(&tone, 1), 5.0, 0.5, 0.01, 3);
    const auto fit = fit_ramsey_two_tone(t, y);
    CHECK_FALSE(fit.two_tone);
    CHECK(fit.f1 == doctest::Approx(2.0).epsilon(1e-3));
    CHECK(fit.t2_star == doctest::Approx(5.0).epsilon(0.05));
    CHECK_FALSE(fit.f_beating().has_value());
}

TEST_CASE("Ramsey: beating tones are separated") {
    const auto t = linspace(0.0, 20.0, 801);
    const RamseyTone tones[] = {{0.25, 2.0, 0.0}, {0.25, 2.2, 0.0}};
    const auto y = gen_ramsey(t, tones, 5.0, 0.5, 0.005, 7);
    const auto fit = fit_ramsey_two_tone(t, y);
    REQUIRE(fit.two_tone);
    CHECK(fit.f1 == doctest::Approx(2.0).epsilon(0.02));
    CHECK(*fit.f2 == doctest::Approx(2.2).epsilon(0.02));
    CHECK(*fit.f_beating() == doctest::Approx(0.2).epsilon(0.1));
    CHECK(fit.p_value < 0.01);
    CHECK(fit.mean_frequency() == doctest::Approx(2.1).epsilon(0.01));
}

TEST_CASE("frequency jump between records") {
    const auto t = linspace(0.0, 10.0, 401);
    const RamseyTone a{0.5, 2.0, 0.0}, b{0.5, 2.35, 0.0};
    const auto fa = fit_ramsey_two_tone(t, gen_ramsey(t, std::span(&a, 1), 6.0, 0.5, 0.005, 1));
    const auto fb = fit_ramsey_two_tone(t, gen_ramsey(t, std::span(&b, 1), 6.0, 0.5, 0.005, 2));
    CHECK(frequency_jump(fa, fb) == doctest::Approx(0.35).epsilon(0.01));
}

TEST_CASE("Ramsey rejects noise without fringes") {
    const auto t = linspace(0.0, 10.0, 200);
    CHECK_THROWS_AS(fit_ramsey_two_tone(t, std::vector<double>(200, 0.5)), DataError);
}

TEST_CASE("continuous telegraph dwells are exponential") {
    const auto tel = gen_telegraph(9.9, 50.0, 0.784, 400000, 11);
    std::vector<double> e, g;
    QubitLevel s = tel.initial;
    for (double d : tel.dwells) {
        (s == QubitLevel::e ? e : g).push_back(d);
        s = s == QubitLevel::e ? QubitLevel::g : QubitLevel::e;
    }
    REQUIRE(e.size() > 1000);
    CHECK(test::ks_exponential_p(e, 9.9) > 1e-3);
    CHECK(test::ks_exponential_p(g, 50.0) > 1e-3);
    // the wrong mean is rejected
    CHECK(test::ks_exponential_p(e, 12.0) < 1e-6);
}

TEST_CASE("telegraph generator is seed deterministic") {
    const auto a = gen_telegraph(9.9, 1100.0, 0.784, 50000, 42);
    const auto b = gen_telegraph(9.9, 1100.0, 0.784, 50000, 42);
    const auto c = gen_telegraph(9.9, 1100.0, 0.784, 50000, 43);
    CHECK(a.states == b.states);
    CHECK(a.dwells == b.dwells);
    CHECK(a.dwells != c.dwells);
    CHECK_FALSE(a.coarse_sampling);
    CHECK(gen_telegraph(1.0, 1100.0, 0.784, 10, 1).coarse_sampling);
}

TEST_CASE("IQ histogram finds both states") {
    const auto tel = gen_telegraph(9.9, 200.0, 0.784, 100000, 5);
    const auto trace = gen_iq_trace(tel, -3.0, 3.0, 1.0, 6);
    const auto fit = histogram_iq(trace);
    CHECK_FALSE(fit.single_state);
    CHECK(fit.mu_g == doctest::Approx(-3.0).epsilon(0.01));
    CHECK(fit.mu_e == doctest::Approx(3.0).epsilon(0.02));
    CHECK(fit.sigma_g == doctest::Approx(1.0).epsilon(0.02));
    CHECK(fit.p_e == doctest::Approx(9.9 / 209.9).epsilon(0.1));
}

TEST_CASE("IQ histogram is invariant under a rotation of the IQ plane") {
    const auto tel = gen_telegraph(9.9, 200.0, 0.784, 50000, 5);
    const auto a = histogram_iq(gen_iq_trace(tel, -3.0, 3.0, 1.0, 6, 0.0));
    for (double rot : {0.4, 1.7, -2.5}) {
        const auto b = histogram_iq(gen_iq_trace(tel, -3.0, 3.0, 1.0, 6, rot));
        CAPTURE(rot);
        CHECK(b.mu_e - b.mu_g == doctest::Approx(a.mu_e - a.mu_g).epsilon(1e-9));
        CHECK(b.sigma_g == doctest::Approx(a.sigma_g).epsilon(1e-9));
        CHECK(b.p_e == doctest::Approx(a.p_e).epsilon(1e-9));
        CHECK(std::remainder(b.rotation - a.rotation - rot, 2 * std::numbers::pi) == doctest::Approx(0.0).scale(1));
    }
}

TEST_CASE("IQ histogram reports a single state") {
    const auto tel = gen_telegraph(9.9, 1e9, 0.784, 20000, 5);
    IQTrace trace = gen_iq_trace(tel, -3.0, 3.0, 1.0, 6);
    const auto fit = histogram_iq(trace);
    CHECK(fit.single_state);
    CHECK_THROWS_AS(latch_filter(trace, fit), DataError);
}

TEST_CASE("latch filter reconstructs a clean telegraph exactly") {
    const auto tel = gen_telegraph(9.9, 300.0, 0.784, 200000, 8);
    const auto trace = gen_iq_trace(tel, -3.0, 3.0, 0.05, 9);
    // a 10 sigma band never misses a sample, so the latch follows the telegraph exactly
    const auto rec = latch_filter(trace, histogram_iq(trace), 10.0);
    CHECK(rec.states == tel.states);
    std::size_t flips = 0;
    for (std::size_t k = 1; k < tel.states.size(); ++k) flips += tel.states[k] != tel.states[k - 1];
    CHECK(rec.transitions.size() == flips);
    // complete dwells sum to the span between first and last transition
    const double total = std::accumulate(rec.dwell_g.begin(), rec.dwell_g.end(), 0.0) +
                         std::accumulate(rec.dwell_e.begin(), rec.dwell_e.end(), 0.0);
    CHECK(total == doctest::Approx(double(rec.transitions.back().index - rec.transitions.front().index) * tel.dt));
}

TEST_CASE("latch filter is deterministic and holds inside the dead band") {
    LatchParams p{-3.0, 3.0, 1.0, 1.0, 2.0, 0.0};
    const std::vector<double> i = {-3.0, 0.0, 0.9, 1.1, 0.0, -0.9, -1.2, 0.5};
    const auto a = latch_filter(i, 1.0, p);
    const auto b = latch_filter(i, 1.0, p);
    CHECK(a.states == b.states);
    using L = QubitLevel;
    CHECK(a.states == std::vector<L>{L::g, L::g, L::g, L::e, L::e, L::e, L::g, L::g});
    p.sigma_g = p.sigma_e = 2.0;
    CHECK_THROWS_AS(latch_filter(i, 1.0, p), DataError);
}

TEST_CASE("dwell MLE corrects for sampling") {
    const double dt = 0.784;
    const auto tel = gen_telegraph(9.9, 200.0, dt, 600000, 21);
    const auto trace = gen_iq_trace(tel, -3.0, 3.0, 0.05, 22);
    const auto est = dwell_mle(latch_filter(trace, histogram_iq(trace)));
    CHECK(std::abs(est.t_down - 9.9) < 4 * est.t_down_error);
    CHECK(std::abs(est.t_up - 200.0) < 4 * est.t_up_error);
    CHECK(est.t1 == doctest::Approx(1.0 / (1.0 / est.t_down + 1.0 / est.t_up)));
    // error bars scale as 1/sqrt(N)
    CHECK(est.t_down_error == doctest::Approx(est.t_down / std::sqrt(double(est.n_dwell_e))));
    CHECK_THROWS_AS(dwell_mle(latch_filter(trace, histogram_iq(trace)), 1000000), DataError);
}

TEST_CASE("effective temperature from detailed balance") {
    CHECK(effective_temperature(4.0419, 1100.0, 9.9) == doctest::Approx(0.041180201991807434).epsilon(1e-12));
    CHECK(std::isinf(effective_temperature(4.0, 10.0, 10.0)));
    CHECK_THROWS_AS(effective_temperature(-1.0, 10.0, 1.0), DomainError);
}

TEST_CASE("uniform step detection") {
    CHECK(uniform_step(linspace(0.0, 2.0, 21)) == doctest::Approx(0.1));
    CHECK_THROWS_AS(uniform_step(std::vector<double>{0.0, 0.1, 0.3}), DataError);
    CHECK_THROWS_AS(uniform_step(std::vector<double>{0.0}), DataError);
}

TEST_CASE("periodogram satisfies Parseval") {
    Rng rng(4);
    for (std::size_t n : {64u, 101u, 400u}) {
        std::vector<std::vector<double>> traces(3, std::vector<double>(n));
        for (auto& t : traces)
            for (auto& v : t) v = rng.normal() + 0.3;
        const double duration = double(n) * 2.08;
        const auto psd = estimate_psd(traces, duration);
        double sum = 0.0;
        for (double s : psd.power) sum += s;
        double var = 0.0;
        for (const auto& t : traces) var += variance(t);
        CHECK(sum / duration == doctest::Approx(var / 3.0).epsilon(1e-12));
        CHECK(psd.frequencies.front() == doctest::Approx(1.0 / duration));
        CHECK(psd.n_averages == 3);
    }
}

TEST_CASE("white noise has a flat one-sided level of 2 sigma^2 dt") {
    RtnSpec s{1.0, 0.0, 0.5, 0.01, 1024, 200};
    const auto traces = gen_rtn(s, 3);
    const auto psd = estimate_psd(traces, 1024 * 0.01);
    const double mean = std::accumulate(psd.power.begin(), psd.power.end() - 1, 0.0) / double(psd.power.size() - 1);
    CHECK(mean == doctest::Approx(0.5).epsilon(0.02));
    CHECK_THROWS_AS(fit_rtn_psd(psd), DataError);
}

TEST_CASE("RTN spectrum fit recovers a well-sampled Lorentzian") {
    RtnSpec s{2.0, 1.0, 0.01, 0.005, 4096, 100};
    const auto psd = estimate_psd(gen_rtn(s, 17), 4096 * 0.005);
    const auto fit = fit_rtn_psd(psd);
    CHECK(fit.gamma == doctest::Approx(2.0).epsilon(0.1));
    CHECK(fit.b == doctest::Approx(1.0).epsilon(0.1));
    CHECK(fit.s0 == doctest::Approx(0.01).epsilon(0.25));
    CHECK(rtn_model(fit.gamma, fit.gamma, fit.b, 0.0) == doctest::Approx(fit.b / 2));
}

TEST_CASE("RTN fit reports a knee outside the band") {
    RtnSpec s{500.0, 1.0, 0.0001, 0.005, 512, 50};
    const auto psd = estimate_psd(gen_rtn(s, 2), 512 * 0.005);
    CHECK_THROWS_AS(fit_rtn_psd(psd), DataError);
}

TEST_CASE("PSD input checks") {
    CHECK_THROWS_AS(estimate_psd({}, 1.0), DataError);
    CHECK_THROWS_AS(estimate_psd({{1, 2, 3, 4}, {1, 2, 3}}, 1.0), DataError);
    CHECK_THROWS_AS(estimate_psd({{1, 2, 3, 4}}, 0.0), DataError);
}

}
