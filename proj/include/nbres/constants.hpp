#pragma once

#include <numbers>

namespace nbres::constants {

inline constexpr double pi = std::numbers::pi;

// CODATA 2018, 10 significant digits.
inline constexpr double planck = 6.626070150e-34;           // J s
inline constexpr double hbar = 1.054571817e-34;             // J s
inline constexpr double boltzmann = 1.380649000e-23;        // J/K
inline constexpr double vacuum_permittivity = 8.854187813e-12;  // F/m
inline constexpr double vacuum_permeability = 1.256637062e-6;   // H/m
inline constexpr double elementary_charge = 1.602176634e-19;    // C
inline constexpr double speed_of_light = 2.99792458e8;          // m/s

inline constexpr double ppm = 1e-6;
inline constexpr double nm = 1e-9;
inline constexpr double um = 1e-6;

}  // namespace nbres::constants
