#include <doctest.h>

#include <cmath>

#include "fluxonium/cphir.hpp"
#include "fluxonium/errors.hpp"
#include "fluxonium/params.hpp"
#include "support.hpp"

using namespace fluxonium;

TEST_SUITE("params") {

TEST_CASE("charging and inductive energies of the device") {
    // Reference values from CODATA 2018 constants in double precision.
    CHECK(charging_energy_from_capacitance(1.26) == doctest::Approx(15.373197876714).epsilon(1e-11));
    CHECK(inductive_energy_from_inductance(285.0) == doctest::Approx(0.573549167743).epsilon(1e-11));
}

TEST_CASE("unit conversions invert each other") {
    for (double c : {0.1, 1.26, 7.0, 55.0}) {
        CHECK(capacitance_from_charging_energy(charging_energy_from_capacitance(c)) ==
              doctest::Approx(c).epsilon(1e-14));
    }
    for (double l : {1.0, 285.0, 3000.0}) {
        CHECK(inductance_from_inductive_energy(inductive_energy_from_inductance(l)) ==
              doctest::Approx(l).epsilon(1e-14));
    }
    // E_C scales as 1/C and E_L as 1/L.
    CHECK(charging_energy_from_capacitance(2.52) == doctest::Approx(charging_energy_from_capacitance(1.26) / 2));
    CHECK(inductive_energy_from_inductance(570) == doctest::Approx(inductive_energy_from_inductance(285) / 2));
}

TEST_CASE("non-positive inputs are rejected") {
    CHECK_THROWS_AS(charging_energy_from_capacitance(0.0), DomainError);
    CHECK_THROWS_AS(charging_energy_from_capacitance(-1.0), DomainError);
    CHECK_THROWS_AS(inductive_energy_from_inductance(0.0), DomainError);
    CHECK_THROWS_AS(inductive_energy_from_inductance(NAN), DomainError);
}

TEST_CASE("validate names every bad field") {
    try {
        validate(CircuitParams{-1.0, 15.0, 0.0, 0.0});
        FAIL("expected DomainError");
    } catch (const DomainError& e) {
        CHECK(e.fields() == std::vector<std::string>{"e_j", "e_l"});
    }
    CHECK_NOTHROW(validate(test::device(0.3)));
    CHECK_THROWS_AS(validate(CircuitParams{1, 1, 1, INFINITY}), DomainError);
    CHECK_THROWS_AS(validate(ResonatorParams{7.4, 0.0, 0.1, 0.0}), DomainError);
}

TEST_CASE("capacitance decomposition sums exactly") {
    const auto c = CapacitanceDecomposition::make(0.9, 0.36);
    CHECK(c.c_sigma == c.c_q + c.c_j);
    CHECK_THROWS_AS(CapacitanceDecomposition::make(-0.1, 0.3), DomainError);
}

TEST_CASE("circuit JSON accepts each capacitance form") {
    const auto a = circuit_params_from_json({{"e_j_ghz", 23.4}, {"c_sigma_ff", 1.26}, {"l_q_nh", 285}});
    const auto b = circuit_params_from_json({{"e_j_ghz", 23.4}, {"c_q_ff", 0.9}, {"c_j_ff", 0.36}, {"l_q_nh", 285}});
    const auto c = circuit_params_from_json(
        {{"e_j_ghz", 23.4}, {"e_c_sigma_ghz", a.e_c_sigma}, {"e_l_ghz", a.e_l}, {"phi_ext_phi0", 0.5}});
    CHECK(a.e_c_sigma == doctest::Approx(b.e_c_sigma).epsilon(1e-14));
    CHECK(c.phi_ext == 0.5);
    CHECK(circuit_params_from_json(to_json(c)) == c);
}

TEST_CASE("circuit JSON rejects unknown, missing and duplicate keys") {
    CHECK_THROWS_AS(circuit_params_from_json({{"e_j_ghz", 1}, {"c_sigma_ff", 1}, {"l_q_nh", 1}, {"ej", 2}}),
                    ConfigError);
    CHECK_THROWS_AS(circuit_params_from_json({{"c_sigma_ff", 1}, {"l_q_nh", 1}}), ConfigError);
    CHECK_THROWS_AS(circuit_params_from_json({{"e_j_ghz", 1}, {"c_sigma_ff", 1}, {"e_c_sigma_ghz", 1}, {"l_q_nh", 1}}),
                    ConfigError);
    CHECK_THROWS_AS(circuit_params_from_json({{"e_j_ghz", 1}, {"c_q_ff", 1}, {"l_q_nh", 1}}), ConfigError);
    CHECK_THROWS_AS(circuit_params_from_json({{"e_j_ghz", "x"}, {"c_sigma_ff", 1}, {"l_q_nh", 1}}), ConfigError);
}

TEST_CASE("resonator JSON round trip") {
    const ResonatorParams r{7.4086, 1.0, 0.1, 0.007};
    CHECK(resonator_params_from_json(to_json(r)) == r);
    CHECK_THROWS_AS(resonator_params_from_json({{"f_r_ghz", 7}, {"kappa", 1}}), ConfigError);
}

TEST_CASE("CphiR models") {
    const auto sin = CphiRModel::sinusoidal();
    const auto slant = CphiRModel::slanted();
    const auto saw = CphiRModel::sawtooth(10);
    CHECK(saw.order() == 10);
    CHECK(saw.harmonics()[1] == doctest::Approx(-0.5));
    CHECK(slant.current(0.7) == doctest::Approx(std::sin(0.7) - 0.25 * std::sin(1.4) + 0.05 * std::sin(2.1)));
    for (double phi : {-2.0, 0.3, 1.9}) {
        CHECK(sin.josephson_potential(phi, 23.4) == doctest::Approx(-23.4 * std::cos(phi)));
        // current is the phase derivative of the potential over E_J
        const double h = 1e-5;
        const double dU = (saw.josephson_potential(phi + h, 1.0) - saw.josephson_potential(phi - h, 1.0)) / (2 * h);
        CHECK(dU == doctest::Approx(saw.current(phi)).epsilon(1e-8));
    }
    CHECK_THROWS_AS(CphiRModel({0.5, 0.1}), DomainError);
    CHECK_THROWS_AS(CphiRModel({}), DomainError);
    CHECK(cphir_from_json("slanted") == slant);
    CHECK(cphir_from_json(to_json(saw)) == saw);
    CHECK_THROWS_AS(cphir_from_json("triangle"), ConfigError);
}

}
