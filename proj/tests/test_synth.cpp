#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "fluxonium/errors.hpp"
#include "fluxonium/random.hpp"
#include "fluxonium/synth.hpp"
#include "support.hpp"

using namespace fluxonium;

TEST_SUITE("synth") {

TEST_CASE("engine output is the standard sequence") {
    Rng rng(5489);
    std::uint64_t v = 0;
    for (int k = 0; k < 10000; ++k) v = rng.next();
    CHECK(v == 9981545732273789042ULL);
}

TEST_CASE("uniform and normal moments") {
    Rng rng(1);
    double su = 0, sn = 0, sn2 = 0;
    const int n = 200000;
    for (int k = 0; k < n; ++k) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        su += u;
        const double z = rng.normal();
        sn += z;
        sn2 += z * z;
    }
    CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(std::abs(sn / n) < 0.01);
    CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("derived seeds differ per index and are reproducible") {
    CHECK(derive_seed(7, 0) != derive_seed(7, 1));
    CHECK(derive_seed(7, 0) != derive_seed(8, 0));
    CHECK(derive_seed(7, 3) == derive_seed(7, 3));
}

TEST_CASE("generator kinds round trip") {
    for (auto k : {GeneratorKind::telegraph, GeneratorKind::iq_trace, GeneratorKind::spectrum, GeneratorKind::ramsey,
                   GeneratorKind::decay, GeneratorKind::s11, GeneratorKind::rtn}) {
        CHECK(generator_kind_from_string(to_string(k)) == k);
    }
    CHECK_THROWS_AS(generator_kind_from_string("pink"), ConfigError);
    const auto j = to_json(GeneratorSpec{9, GeneratorKind::rtn, {{"n", 3}}});
    CHECK(j.at("rng") == kRngAlgorithm);
    CHECK(j.at("seed") == 9);
}

TEST_CASE("telegraph occupation follows detailed balance") {
    const auto tel = gen_telegraph(9.9, 90.0, 0.5, 400000, 3);
    const double e = double(std::count(tel.states.begin(), tel.states.end(), QubitLevel::e)) / double(tel.states.size());
    CHECK(e == doctest::Approx(9.9 / 99.9).epsilon(0.08));
    CHECK_THROWS_AS(gen_telegraph(0.0, 1.0, 1.0, 10, 1), DomainError);
}

TEST_CASE("IQ trace noise has the requested width") {
    const auto tel = gen_telegraph(1e9, 1e9, 1.0, 100000, 3);
    const auto trace = gen_iq_trace(tel, -3.0, 3.0, 0.7, 4);
    double sq = 0.0;
    for (const auto& z : trace.samples) sq += z.imag() * z.imag();
    CHECK(std::sqrt(sq / double(trace.samples.size())) == doctest::Approx(0.7).epsilon(0.01));
    CHECK(trace.meta.at("seed") == "4");
}

TEST_CASE("synthetic spectrum: noise and branches") {
    SpectrumSpec s;
    s.params = test::device();
    s.phi_ext = uniform_grid(0.0, 0.5, 11);
    const auto clean = gen_spectrum(s, 1);
    s.noise_ghz = 0.001;
    const auto noisy = gen_spectrum(s, 1);
    REQUIRE(clean.data.points.size() == 22);
    double sq = 0.0;
    for (std::size_t k = 0; k < 22; ++k) sq += std::pow(noisy.data.points[k].frequency - clean.data.points[k].frequency, 2);
    CHECK(std::sqrt(sq / 22) == doctest::Approx(0.001).epsilon(0.5));
    CHECK(clean.data.points[0].frequency == doctest::Approx(10.8047206883).epsilon(1e-6));
    s.delta_e_j = 0.19;
    s.noise_ghz = 0.0;
    const auto split = gen_spectrum(s, 2);
    const int high = std::accumulate(split.branch.begin(), split.branch.end(), 0);
    CHECK(high > 0);
    CHECK(high < 22);
    s.phi_ext.clear();
    CHECK_THROWS_AS(gen_spectrum(s, 1), ConfigError);
}

TEST_CASE("decay and Ramsey generators are noiseless at zero noise") {
    const std::vector<double> t = {0.0, 1.0, 2.0};
    const auto d = gen_decay(t, 2.0, 1.0, 0.5, 0.0, 1);
    CHECK(d[2] == doctest::Approx(std::exp(-1.0) + 0.5));
    const RamseyTone tone{1.0, 0.25, 0.0};
    const auto r = gen_ramsey(t, std::span(&tone, 1), 1e9, 0.0, 0.0, 1);
    CHECK(std::abs(r[1]) < 1e-12);
    CHECK(r[2] == doctest::Approx(-1.0));
}

TEST_CASE("S11 phases are wrapped and seed deterministic") {
    const ReflectionModel m{7.4086, 1.0, -1.72, 1.0};
    const auto f = uniform_grid(7.40, 7.42, 101);
    const auto a = gen_s11(m, f, 0.5, 3);
    const auto b = gen_s11(m, f, 0.5, 3);
    for (std::size_t k = 0; k < f.size(); ++k) {
        CHECK(std::abs(a.g[k].phase) <= std::numbers::pi);
        CHECK(a.g[k].phase == b.g[k].phase);
    }
}

TEST_CASE("RTN generator: per-trace seeds, amplitude and variance") {
    RtnSpec s{0.5, 2.0, 0.0, 0.01, 20000, 4};
    const auto a = gen_rtn(s, 7);
    const auto b = gen_rtn(s, 7);
    CHECK(a == b);
    CHECK(a[0] != a[1]);
    const double amp = std::sqrt(std::numbers::pi * 2.0 * 0.5 / 2.0);
    for (double v : a[2]) REQUIRE(std::abs(std::abs(v) - amp) < 1e-12);
    s.n_traces = 0;
    CHECK_THROWS_AS(gen_rtn(s, 1), ConfigError);
}

}
