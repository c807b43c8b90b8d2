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

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "odnmr/core/ensemble.hpp"
#include "odnmr/core/random.hpp"
#include "odnmr/dynamics/ou.hpp"

namespace odnmr {

// Toggling-frame record used by the analytic bath: opened by a non-refocusing RF
// pulse, extended by waits, sign-flipped by refocusing pulses, and evaluated (then
// cleared) at the next non-refocusing pulse.
struct DephasingFilter {
    bool armed = false;
    int sign = 1;
    std::vector<FilterSegment> segments;

    void reset()
    {
        armed = false;
        sign = 1;
        segments.clear();
    }
};

struct SimState {
    std::vector<IonClass> ensemble;
    double clock_us = 0.0;
    LevelScheme levels;
    Rng rng{0};
    double rf_reference_mhz = std::numeric_limits<double>::quiet_NaN(); // carrier of the last RF pulse
    double fast_fraction = 0.5; // share of population changes assigned to the short T1 channel
    OuBath bath;
    DephasingFilter filter;
};

// Populations were changed from `before`; assign the change to the relaxation
// channels and make the Bloch vector consistent with the new pair populations.
inline void commit_populations(IonClass& ion, const Populations& before, double fast_fraction,
                               double transverse_scale = 1.0)
{
    for (int k = 0; k < kNumLevels; ++k) {
        double& p = ion.populations[k];
        if (p < 0.0) {
            // Only rounding may push a population below zero.
            p = 0.0;
        }
        ion.fast_deviation[k] += fast_fraction * (p - before[k]);
    }
    const double w = pair_polarization(ion.populations, ion.pair);
    double u = ion.bloch.x() * transverse_scale;
    double v = ion.bloch.y() * transverse_scale;
    const double t2 = u * u + v * v;
    const double room = std::max(0.0, 1.0 - w * w);
    if (t2 > room) {
        const double s = t2 > 0.0 ? std::sqrt(room / t2) : 0.0;
        u *= s;
        v *= s;
    }
    ion.bloch = BlochVector(u, v, w);
}

} // namespace odnmr
