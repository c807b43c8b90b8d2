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
#include <numeric>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

namespace odnmr {

enum class OpticalRole { Burn, Probe, Erase };

inline const char* to_string(OpticalRole r)
{
    switch (r) {
    case OpticalRole::Burn: return "burn";
    case OpticalRole::Probe: return "probe";
    case OpticalRole::Erase: return "erase";
    }
    return "?";
}

// Laser pulse, optionally chirped from detuning_start to detuning_stop.
struct OpticalPulse {
    double detuning_start_mhz = 0.0;
    double detuning_stop_mhz = 0.0;
    double power = 0.0; // pump-rate units
    double duration_us = 1.0;
    OpticalRole role = OpticalRole::Probe;

    bool chirped() const { return detuning_start_mhz != detuning_stop_mhz; }
    bool operator==(const OpticalPulse&) const = default;
};

struct RfPulse {
    double frequency_mhz = 0.0;
    double power_w = 0.0;
    double phase_deg = 0.0;
    double duration_us = 1.0;
    bool operator==(const RfPulse&) const = default;
};

struct Wait {
    double duration_us = 1.0;
    bool operator==(const Wait&) const = default;
};

// Non-pumping fluorescence readout at a fixed laser detuning.
struct ReadoutWindow {
    double detuning_mhz = 0.0;
    double duration_us = 1.0;
    bool operator==(const ReadoutWindow&) const = default;
};

using PulseEvent = std::variant<OpticalPulse, RfPulse, Wait, ReadoutWindow>;

inline double duration_us(const PulseEvent& e)
{
    return std::visit([](const auto& ev) { return ev.duration_us; }, e);
}

inline double normalize_phase_deg(double phase)
{
    double p = std::fmod(phase, 360.0);
    if (p < 0.0) p += 360.0;
    if (p >= 360.0) p -= 360.0;
    return p;
}

struct PulseSequence {
    std::vector<PulseEvent> events;
    std::string label;

    double total_duration_us() const
    {
        return std::accumulate(events.begin(), events.end(), 0.0,
                               [](double acc, const PulseEvent& e) { return acc + duration_us(e); });
    }

    PulseSequence& append(const PulseSequence& other)
    {
        events.insert(events.end(), other.events.begin(), other.events.end());
        return *this;
    }
};

enum class SweepParameter { RfFrequency, RfDuration, Delay, RfPower, OpticalDetuning, PulseCount };

struct SweepSpec {
    SweepParameter parameter = SweepParameter::RfFrequency;
    std::vector<double> values;
    std::size_t repetitions_per_point = 5;

    bool valid() const
    {
        if (values.empty() || repetitions_per_point == 0) return false;
        for (double v : values) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }
};

} // namespace odnmr
