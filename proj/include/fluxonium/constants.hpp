#pragma once

#include <numbers>

// CODATA 2018 exact SI values. Every unit conversion in the library goes
// through this table.
namespace fluxonium::constants {

inline constexpr double elementary_charge = 1.602176634e-19;  // C
inline constexpr double planck = 6.62607015e-34;              // J s
inline constexpr double boltzmann = 1.380649e-23;             // J / K
inline constexpr double flux_quantum = planck / (2.0 * elementary_charge);  // Wb
inline constexpr double reduced_flux_quantum = flux_quantum / (2.0 * std::numbers::pi);

inline constexpr double femto = 1e-15;
inline constexpr double nano = 1e-9;
inline constexpr double giga = 1e9;

}  // namespace fluxonium::constants
