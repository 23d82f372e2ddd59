#pragma once

#include <numbers>

namespace eet::units {

// Internal units: time in ps, angular frequency and rates in rad/ps (1/ps).

inline constexpr double kSpeedOfLightCmPerPs = 2.99792458e-2;

/// 1 cm^-1 expressed as an angular frequency, 2*pi*c*(1 cm^-1) ~= 0.188365 rad/ps.
inline constexpr double kRadPerPsPerWavenumber = 2.0 * std::numbers::pi * kSpeedOfLightCmPerPs;

constexpr double wavenumber_to_rad_per_ps(double cm_inv) { return cm_inv * kRadPerPsPerWavenumber; }
constexpr double rad_per_ps_to_wavenumber(double w) { return w / kRadPerPsPerWavenumber; }

constexpr double fs_to_ps(double fs) { return fs * 1e-3; }

}  // namespace eet::units
