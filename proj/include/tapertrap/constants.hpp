#pragma once

// Physical constants, CODATA 2018 exact/recommended values. Strict SI.
namespace tapertrap::constants {

inline constexpr double pi = 3.141592653589793238462643383279502884;
inline constexpr double two_pi = 2.0 * pi;

inline constexpr double elementary_charge = 1.602176634e-19;   // C
inline constexpr double atomic_mass_unit = 1.66053906660e-27;  // kg
inline constexpr double vacuum_permittivity = 8.8541878128e-12;  // F/m
inline constexpr double planck = 6.62607015e-34;               // J s
inline constexpr double hbar = 1.054571817e-34;                // J s
inline constexpr double boltzmann = 1.380649e-23;              // J/K
inline constexpr double bohr_magneton = 9.2740100783e-24;      // J/T

// 1/(4 pi eps0), the Coulomb kernel prefactor
inline constexpr double coulomb = 1.0 / (4.0 * pi * vacuum_permittivity);

}  // namespace tapertrap::constants
