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
#include <string>
#include <vector>

#include "odnmr/core/error.hpp"

namespace odnmr {

// Ground quadrupole doublets of Eu-151 (I = 5/2) at zero field. The +-m pairs are
// degenerate and collapsed into one level each.
enum Level : int { kHalf = 0, kThreeHalves = 1, kFiveHalves = 2 };

inline constexpr int kNumLevels = 3;

// The two allowed RF transitions between adjacent doublets.
enum class Transition { Low, High }; // Low: |1/2>-|3/2>, High: |3/2>-|5/2>

struct LevelPair {
    int lower;
    int upper;
};

inline constexpr LevelPair levels_of(Transition t)
{
    return t == Transition::Low ? LevelPair{kHalf, kThreeHalves} : LevelPair{kThreeHalves, kFiveHalves};
}

struct LevelScheme {
    double f12_mhz = 21.475; // |+-1/2> <-> |+-3/2>
    double f23_mhz = 33.944; // |+-3/2> <-> |+-5/2>
    std::vector<double> excited_splittings_mhz; // optional, informational only

    double frequency_mhz(Transition t) const { return t == Transition::Low ? f12_mhz : f23_mhz; }

    // Transition whose centre frequency is nearest to `rf_mhz`.
    Transition nearest(double rf_mhz) const
    {
        return std::abs(rf_mhz - f12_mhz) <= std::abs(rf_mhz - f23_mhz) ? Transition::Low : Transition::High;
    }

    void validate() const
    {
        if (!(f12_mhz > 0.0) || !(f23_mhz > 0.0)) {
            throw ConfigError("level scheme: transition frequencies must be positive");
        }
        if (f12_mhz == f23_mhz) {
            throw ConfigError("level scheme: f12 and f23 must differ");
        }
        for (double s : excited_splittings_mhz) {
            if (!(s > 0.0)) {
                throw ConfigError("level scheme: excited splittings must be positive");
            }
        }
    }
};

} // namespace odnmr
