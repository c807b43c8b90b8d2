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
#include <vector>

#include "odnmr/dynamics/models.hpp"
#include "odnmr/dynamics/state.hpp"
#include "odnmr/sequence/events.hpp"

namespace odnmr {

// Time integral (us) of the peak-normalised Lorentzian overlap between a laser
// sweeping linearly from nu0 to nu1 over `duration_us` and an ion at `delta_mhz`.
inline double overlap_dose(double nu0_mhz, double nu1_mhz, double duration_us, double delta_mhz, double hw_mhz)
{
    if (nu0_mhz == nu1_mhz) {
        const double d = (nu0_mhz - delta_mhz) / hw_mhz;
        return duration_us / (1.0 + d * d);
    }
    const double arc = std::atan((nu1_mhz - delta_mhz) / hw_mhz) - std::atan((nu0_mhz - delta_mhz) / hw_mhz);
    return duration_us / (nu1_mhz - nu0_mhz) * hw_mhz * arc;
}

namespace optics_detail {

// Fluorescence integral of a level emptied at rate `a` per unit dose: p0 (1 - e^{-aD}) / a.
inline double fluorescence(double p0, double a, double dose)
{
    if (a * dose < 1e-12) return p0 * dose;
    return -p0 * std::expm1(-a * dose) / a;
}

} // namespace optics_detail

// Burn/Erase pump the ensemble; Probe returns the fluorescence integral
// sum_i weight_i * int overlap_i(t) p_pumped,i(t) dt and pumps weakly if power > 0.
inline double apply_optical_pulse(SimState& state, const OpticalPulse& pulse, const OpticalModel& optics)
{
    const double hw = optics.half_width_mhz();
    const int m = optics.pumped_level;
    const double back = optics.branching[m][m];
    const double rate = optics.pump_efficiency * pulse.power * (1.0 - back); // per unit dose
    double signal = 0.0;

    for (auto& ion : state.ensemble) {
        const double dose =
            overlap_dose(pulse.detuning_start_mhz, pulse.detuning_stop_mhz, pulse.duration_us, ion.delta_opt_mhz, hw);
        if (pulse.role == OpticalRole::Probe) {
            signal += ion.weight * optics_detail::fluorescence(ion.populations[m], rate, dose);
        }
        if (pulse.power <= 0.0 || dose <= 0.0) continue;

        const Populations before = ion.populations;
        if (pulse.role == OpticalRole::Erase) {
            const double keep = std::exp(-optics.pump_efficiency * pulse.power * dose);
            const auto th = thermal_populations();
            for (int k = 0; k < kNumLevels; ++k) ion.populations[k] = th[k] + (before[k] - th[k]) * keep;
            commit_populations(ion, before, state.fast_fraction, keep);
            continue;
        }
        if (back >= 1.0) continue;
        const double removed = -before[m] * std::expm1(-rate * dose);
        ion.populations[m] = before[m] - removed;
        for (int k = 0; k < kNumLevels; ++k) {
            if (k != m) ion.populations[k] += removed * optics.branching[m][k] / (1.0 - back);
        }
        const auto [lo, hi] = levels_of(ion.pair);
        const double scale = (lo == m || hi == m) ? std::exp(-rate * dose) : 1.0;
        commit_populations(ion, before, state.fast_fraction, scale);
    }
    state.clock_us += pulse.duration_us;
    return signal;
}

// Non-pumping readout at a fixed detuning.
inline double apply_readout(SimState& state, const ReadoutWindow& window, const OpticalModel& optics)
{
    const double hw = optics.half_width_mhz();
    const int m = optics.pumped_level;
    double signal = 0.0;
    for (const auto& ion : state.ensemble) {
        signal += ion.weight * ion.populations[m] *
                  overlap_dose(window.detuning_mhz, window.detuning_mhz, window.duration_us, ion.delta_opt_mhz, hw);
    }
    state.clock_us += window.duration_us;
    return signal;
}

// Heterodyne optical free-induction decay e^{-t/T2*} cos(2 pi f_het t); t in us, f in MHz.
inline std::vector<double> optical_fid_signal(const std::vector<double>& t_grid_us, double t2_star_us, double f_het_mhz)
{
    if (!(t2_star_us > 0.0)) throw ConfigError("optical_fid_signal: t2_star must be > 0");
    std::vector<double> out;
    out.reserve(t_grid_us.size());
    for (double t : t_grid_us) {
        out.push_back(std::exp(-t / t2_star_us) * std::cos(2.0 * std::numbers::pi * f_het_mhz * t));
    }
    return out;
}

// Two-pulse photon echo amplitude A0 e^{-2tau/T2} against the total delay 2tau (us).
inline std::vector<double> photon_echo_amplitude(const std::vector<double>& two_tau_grid_us, double t2_opt_us,
                                                 double a0 = 1.0)
{
    if (!(t2_opt_us > 0.0)) throw ConfigError("photon_echo_amplitude: t2_opt must be > 0");
    std::vector<double> out;
    out.reserve(two_tau_grid_us.size());
    for (double t : two_tau_grid_us) out.push_back(a0 * std::exp(-t / t2_opt_us));
    return out;
}

} // namespace odnmr
