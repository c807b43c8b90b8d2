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
#include <stdexcept>
#include <string>
#include <vector>

#include "odnmr/sequence/dsl.hpp"
#include "odnmr/sequence/events.hpp"

namespace odnmr {

// Shared timing and power settings of the optical preparation/readout blocks.
struct ProtocolOptions {
    double pit_center_mhz = 0.0;
    double pit_span_mhz = 10.0;
    double chirp_duration_us = 300e3;
    int pit_repeats = 20;
    double burn_power = 1.0;

    double erase_span_mhz = 100.0;
    int erase_repeats = 20;
    double erase_power = 100.0;

    double reference_span_mhz = 15.0;
    double reference_duration_us = 1000.0;
    double probe_duration_us = 100.0;
    double probe_power = 1e-3;

    double default_rf_duration_us = 1000.0;
    double hahn_pi_phase_deg = 0.0; // same axis as the pi/2 pulses
    bool bare = false;              // skip pit preparation and erase
};

inline constexpr double kDefaultRabiKhzPerSqrtW = 1.48;

// Rabi frequency in kHz (cycles) at `power_w`.
inline double rabi_frequency_khz(double power_w, double k_rabi = kDefaultRabiKhzPerSqrtW)
{
    return k_rabi * std::sqrt(power_w);
}

// pi-pulse length 1 / (2 Omega_R) in us.
inline double pi_pulse_us(double power_w, double k_rabi = kDefaultRabiKhzPerSqrtW)
{
    const double f = rabi_frequency_khz(power_w, k_rabi);
    if (!(f > 0.0)) throw std::invalid_argument("pi pulse undefined at zero Rabi frequency");
    return 1e3 / (2.0 * f);
}

// Phase of the final pi/2 pulse that maps a refocused echo onto full population
// transfer, for a pi/2(0) start followed by n pi pulses at `pi_phase_deg`.
inline double inverting_final_phase(int n_pi, double pi_phase_deg)
{
    const double echo_axis = n_pi % 2 == 1 ? 2.0 * pi_phase_deg + 90.0 : 270.0;
    return normalize_phase_deg(echo_axis - 270.0);
}

inline PulseSequence build_pit_preparation(const ProtocolOptions& o = {})
{
    PulseSequence seq;
    seq.label = "pit-preparation";
    const double half = 0.5 * o.pit_span_mhz;
    for (int i = 0; i < o.pit_repeats; ++i) {
        seq.events.push_back(OpticalPulse{o.pit_center_mhz - half, o.pit_center_mhz + half, o.burn_power,
                                          o.chirp_duration_us, OpticalRole::Burn});
    }
    return seq;
}

inline PulseSequence build_erase(const ProtocolOptions& o = {})
{
    PulseSequence seq;
    seq.label = "erase";
    const double half = 0.5 * o.erase_span_mhz;
    for (int i = 0; i < o.erase_repeats; ++i) {
        seq.events.push_back(OpticalPulse{o.pit_center_mhz - half, o.pit_center_mhz + half, o.erase_power,
                                          o.chirp_duration_us, OpticalRole::Erase});
    }
    return seq;
}

inline OpticalPulse reference_probe(const ProtocolOptions& o)
{
    const double half = 0.5 * o.reference_span_mhz;
    return {o.pit_center_mhz - half, o.pit_center_mhz + half, o.probe_power, o.reference_duration_us,
            OpticalRole::Probe};
}

inline OpticalPulse center_probe(const ProtocolOptions& o)
{
    return {o.pit_center_mhz, o.pit_center_mhz, o.probe_power, o.probe_duration_us, OpticalRole::Probe};
}

namespace builder_detail {

// prep + reference probe + body + centre probe + erase
inline PulseSequence wrap(std::vector<PulseEvent> body, const ProtocolOptions& o, std::string label)
{
    PulseSequence seq;
    seq.label = std::move(label);
    if (!o.bare) seq.append(build_pit_preparation(o));
    seq.events.push_back(reference_probe(o));
    seq.events.insert(seq.events.end(), body.begin(), body.end());
    seq.events.push_back(center_probe(o));
    if (!o.bare) seq.append(build_erase(o));
    return seq;
}

inline void require_positive(double v, const char* what)
{
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(what) + " must be positive");
}

} // namespace builder_detail

inline PulseSequence build_rabi(double duration_us, double frequency_mhz, double power_w,
                                const ProtocolOptions& o = {})
{
    builder_detail::require_positive(duration_us, "rabi pulse duration");
    return builder_detail::wrap({RfPulse{frequency_mhz, power_w, 0.0, duration_us}}, o, "rabi");
}

inline PulseSequence build_hahn_echo(double tau_us, double frequency_mhz, double power_w, double final_phase_deg,
                                     double k_rabi = kDefaultRabiKhzPerSqrtW, const ProtocolOptions& o = {})
{
    const double t_pi = pi_pulse_us(power_w, k_rabi);
    if (!(tau_us > t_pi)) {
        throw std::invalid_argument("hahn echo: tau (" + dsl_detail::fmt_num(tau_us) +
                                    " us) must exceed the pi pulse (" + dsl_detail::fmt_num(t_pi) + " us)");
    }
    std::vector<PulseEvent> body{
        RfPulse{frequency_mhz, power_w, 0.0, 0.5 * t_pi},
        Wait{tau_us},
        RfPulse{frequency_mhz, power_w, normalize_phase_deg(o.hahn_pi_phase_deg), t_pi},
        Wait{tau_us},
        RfPulse{frequency_mhz, power_w, normalize_phase_deg(final_phase_deg), 0.5 * t_pi},
    };
    return builder_detail::wrap(std::move(body), o, "hahn-echo");
}

// pi/2(0) - [tau/2 - pi(90) - tau/2] x n - pi/2(final)
inline PulseSequence build_cpmg(int n, double tau_us, double frequency_mhz, double power_w, double final_phase_deg,
                                double k_rabi = kDefaultRabiKhzPerSqrtW, const ProtocolOptions& o = {})
{
    if (n < 1) throw std::invalid_argument("cpmg: n must be >= 1");
    const double t_pi = pi_pulse_us(power_w, k_rabi);
    if (!(tau_us > t_pi)) {
        throw std::invalid_argument("cpmg: tau (" + dsl_detail::fmt_num(tau_us) + " us) must exceed the pi pulse (" +
                                    dsl_detail::fmt_num(t_pi) + " us)");
    }
    std::vector<PulseEvent> body;
    body.push_back(RfPulse{frequency_mhz, power_w, 0.0, 0.5 * t_pi});
    for (int i = 0; i < n; ++i) {
        body.push_back(Wait{0.5 * tau_us});
        body.push_back(RfPulse{frequency_mhz, power_w, 90.0, t_pi});
        body.push_back(Wait{0.5 * tau_us});
    }
    body.push_back(RfPulse{frequency_mhz, power_w, normalize_phase_deg(final_phase_deg), 0.5 * t_pi});
    return builder_detail::wrap(std::move(body), o, "cpmg-" + std::to_string(n));
}

inline std::vector<PulseSequence> build_odnmr_scan(const std::vector<double>& f_list_mhz, double rf_power_w,
                                                   double rf_duration_us = 0.0, const ProtocolOptions& o = {})
{
    if (f_list_mhz.empty()) throw std::invalid_argument("odnmr scan: frequency list is empty");
    const double duration = rf_duration_us > 0.0 ? rf_duration_us : o.default_rf_duration_us;
    std::vector<PulseSequence> out;
    out.reserve(f_list_mhz.size());
    for (double f : f_list_mhz) {
        out.push_back(builder_detail::wrap({RfPulse{f, rf_power_w, 0.0, duration}}, o, "odnmr"));
    }
    return out;
}

// ODNMR scan preceded by a resonant pi pulse at `burn_freq_mhz`. A zero burn power
// leaves the plain scan.
inline std::vector<PulseSequence> build_spin_holeburn(double burn_freq_mhz, double burn_power_w,
                                                      const std::vector<double>& scan_mhz, double scan_power_w,
                                                      double scan_duration_us = 0.0,
                                                      double k_rabi = kDefaultRabiKhzPerSqrtW,
                                                      const ProtocolOptions& o = {})
{
    if (scan_mhz.empty()) throw std::invalid_argument("spin holeburn: scan list is empty");
    const double duration = scan_duration_us > 0.0 ? scan_duration_us : o.default_rf_duration_us;
    std::vector<PulseSequence> out;
    out.reserve(scan_mhz.size());
    for (double f : scan_mhz) {
        PulseSequence seq;
        seq.label = "spin-holeburn";
        if (!o.bare) seq.append(build_pit_preparation(o));
        if (burn_power_w > 0.0) {
            seq.events.push_back(RfPulse{burn_freq_mhz, burn_power_w, 0.0, pi_pulse_us(burn_power_w, k_rabi)});
        }
        seq.events.push_back(reference_probe(o));
        seq.events.push_back(RfPulse{f, scan_power_w, 0.0, duration});
        seq.events.push_back(center_probe(o));
        if (!o.bare) seq.append(build_erase(o));
        out.push_back(std::move(seq));
    }
    return out;
}

} // namespace odnmr
