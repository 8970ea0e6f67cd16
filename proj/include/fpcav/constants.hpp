#pragma once

#include <numbers>

namespace fpcav::constants
{
inline constexpr double pi = std::numbers::pi;
inline constexpr double speed_of_light = 299792458.0;        // m/s
inline constexpr double planck = 6.62607015e-34;             // J s
inline constexpr double hbar = planck / (2.0 * pi);          // J s
inline constexpr double vacuum_permittivity = 8.8541878128e-12; // F/m

inline constexpr double nm = 1e-9;
inline constexpr double um = 1e-6;
inline constexpr double pm = 1e-12;

// Photon energy h c / lambda in joules.
constexpr double photon_energy(double wavelength_nm)
{
    return planck * speed_of_light / (wavelength_nm * nm);
}

} // namespace fpcav::constants
