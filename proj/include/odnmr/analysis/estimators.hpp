// Copyright 2026 The odnmr-sim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace odnmr {

namespace constants {
inline constexpr double kMu0Over4Pi = 1.00000000055e-7; // T m / A
inline constexpr double kPlanck = 6.62607015e-34;       // J s
inline constexpr double kHbar = kPlanck / (2.0 * std::numbers::pi);
inline constexpr double kBohrMagneton = 9.2740100783e-24; // J / T
inline constexpr double kGammaEu151 = 6.65e7;           // rad / (s T)
inline constexpr double kGammaProton = 2.675e8;          // rad / (s T)
} // namespace constants

// Nuclear moment gamma hbar I in J/T.
inline double nuclear_moment(double gamma_rad_per_s_t, double spin)
{
    return gamma_rad_per_s_t * constants::kHbar * spin;
}

// Electron moment g mu_B S in J/T.
inline double electron_moment(double g, double spin)
{
    return g * constants::kBohrMagneton * spin;
}

// Point-dipole interaction (mu0 / 4 pi) mu_a mu_b / r^3 expressed as E / h in Hz.
inline double dipolar_coupling(double mu_a, double mu_b, double r_m)
{
    if (!(r_m > 0.0)) throw std::invalid_argument("dipolar_coupling: r must be > 0");
    return constants::kMu0Over4Pi * mu_a * mu_b / (r_m * r_m * r_m) / constants::kPlanck;
}

// Distance (m) at which two moments couple with `coupling_hz`.
inline double dipolar_distance(double mu_a, double mu_b, double coupling_hz)
{
    if (!(coupling_hz > 0.0)) throw std::invalid_argument("dipolar_distance: coupling must be > 0");
    return std::cbrt(constants::kMu0Over4Pi * mu_a * mu_b / (coupling_hz * constants::kPlanck));
}

// N = C V eta_h eta_151 eta_s.
inline double probed_ion_count(double c_per_cm3, double v_cm3, double eta_h, double eta_151, double eta_s)
{
    for (double f : {c_per_cm3, v_cm3, eta_h, eta_151, eta_s}) {
        if (!(f >= 0.0)) throw std::invalid_argument("probed_ion_count: factors must be >= 0");
    }
    return c_per_cm3 * v_cm3 * eta_h * eta_151 * eta_s;
}

// T2* = 1 / (pi Gamma) in us for a FWHM in kHz.
inline double linewidth_to_t2star(double gamma_khz)
{
    if (!(gamma_khz > 0.0)) throw std::invalid_argument("linewidth_to_t2star: linewidth must be > 0");
    return 1e3 / (std::numbers::pi * gamma_khz);
}

struct HoleT2Star {
    double from_hole_width_us; // hole FWHM taken as the homogeneous width
    double from_half_width_us; // hole FWHM taken as twice the homogeneous width
};

// A burned hole is a convolution of burn and read profiles, so its width maps to
// T2* in two common ways; both are returned.
inline HoleT2Star hole_width_to_t2star(double hole_fwhm_khz)
{
    return {linewidth_to_t2star(hole_fwhm_khz), linewidth_to_t2star(0.5 * hole_fwhm_khz)};
}

} // namespace odnmr
