#pragma once

// CODATA 2018 values, SI units.
namespace ptrap::constants {

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double epsilon0 = 8.8541878128e-12;      // F/m
inline constexpr double elementary_charge = 1.602176634e-19;  // C
inline constexpr double atomic_mass_unit = 1.66053906660e-27;  // kg
inline constexpr double hbar = 1.054571817e-34;            // J s
inline constexpr double planck = 6.62607015e-34;           // J s
inline constexpr double coulomb_k = 1.0 / (4.0 * pi * epsilon0);

inline constexpr double um = 1e-6;
inline constexpr double us = 1e-6;

}  // namespace ptrap::constants
