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

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>

#include "odnmr/core/error.hpp"
#include "odnmr/core/level_scheme.hpp"

namespace odnmr {

enum class NoiseMode { Analytic, MonteCarlo };

struct MonteCarloSettings {
    std::size_t n_trajectories = 2000;
    double dt_s = 0.0; // RF sub-step; 0 selects tau_c / 100
};

// Spin bath and relaxation channels. The OU bath (sigma in rad/s, tau_c in s) acts on
// the spin detuning; population relaxation is a two-channel T1 process.
struct NoiseModel {
    double ou_sigma = 0.0;   // rad/s
    double ou_tau_c = 13e-3; // s
    double t1_short = 4.4;   // s
    double t1_long = 120.0;  // s
    double t1_weight = 0.5;  // share of the short channel
    NoiseMode mode = NoiseMode::Analytic;
    MonteCarloSettings mc;

    double dt_s() const { return mc.dt_s > 0.0 ? mc.dt_s : ou_tau_c / 100.0; }

    // Transverse damping rate in 1/s; the rate-weighted mean of the T1 channels.
    double transverse_rate() const { return t1_weight / t1_short + (1.0 - t1_weight) / t1_long; }

    void validate() const
    {
        if (!(ou_sigma >= 0.0) || !std::isfinite(ou_sigma)) throw ConfigError("noise: ou_sigma must be >= 0");
        if (!(ou_tau_c > 0.0)) throw ConfigError("noise: ou_tau_c must be > 0");
        if (!(t1_short > 0.0) || !(t1_long > 0.0)) throw ConfigError("noise: T1 constants must be > 0");
        if (t1_short > t1_long) throw ConfigError("noise: t1_short must not exceed t1_long");
        if (!(t1_weight >= 0.0 && t1_weight <= 1.0)) throw ConfigError("noise: t1_weight must lie in [0, 1]");
        if (mode == NoiseMode::MonteCarlo) {
            if (mc.n_trajectories < 1) throw ConfigError("noise: n_trajectories must be >= 1");
            if (!(dt_s() > 0.0) || !(dt_s() < ou_tau_c / 10.0)) {
                throw ConfigError("noise: Monte Carlo dt must be positive and below tau_c / 10");
            }
        }
    }
};

// Bath coupling quoted as a linewidth b (kHz, cycles) converted to rad/s.
inline double sigma_from_khz(double b_khz)
{
    return 2.0 * std::numbers::pi * 1e3 * b_khz;
}

inline double sigma_to_khz(double sigma_rad_s)
{
    return sigma_rad_s / (2.0 * std::numbers::pi * 1e3);
}

using BranchingMatrix = std::array<std::array<double, kNumLevels>, kNumLevels>;

// Decay from the pumped level spreads evenly over the two other ground levels.
inline BranchingMatrix default_branching()
{
    BranchingMatrix b{};
    for (int i = 0; i < kNumLevels; ++i) {
        for (int j = 0; j < kNumLevels; ++j) b[i][j] = i == j ? 0.0 : 0.5;
    }
    return b;
}

struct OpticalModel {
    double gamma_h_khz = 310.0;  // homogeneous linewidth (FWHM)
    double t2_opt_us = 2.13;     // photon-echo coherence time
    double t2_star_opt_us = 0.77; // FID dephasing time
    // Pump probability per us and unit power at full overlap. The default empties
    // the pit centre to 40 % of thermal with the standard 20-chirp preparation.
    double pump_efficiency = 3.2e-6;
    int pumped_level = kThreeHalves;
    BranchingMatrix branching = default_branching();

    double half_width_mhz() const { return 0.5e-3 * gamma_h_khz; }

    void validate() const
    {
        if (!(gamma_h_khz > 0.0)) throw ConfigError("optics: gamma_h must be > 0");
        if (!(t2_opt_us > 0.0) || !(t2_star_opt_us > 0.0)) throw ConfigError("optics: coherence times must be > 0");
        if (!(pump_efficiency >= 0.0)) throw ConfigError("optics: pump_efficiency must be >= 0");
        if (pumped_level < 0 || pumped_level >= kNumLevels) throw ConfigError("optics: pumped_level out of range");
        for (const auto& row : branching) {
            double sum = 0.0;
            for (double v : row) {
                if (!(v >= 0.0)) throw ConfigError("optics: branching entries must be >= 0");
                sum += v;
            }
            if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("optics: branching rows must sum to 1");
        }
    }
};

// Exact: finite pulses integrated with detuning and bath. Hard: instantaneous
// rotations by the nominal angle, detuning and bath ignored, clock not advanced.
enum class PulseModel { Exact, Hard };

} // namespace odnmr
