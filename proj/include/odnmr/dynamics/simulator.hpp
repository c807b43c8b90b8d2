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
#include <cstdint>
#include <numbers>
#include <optional>
#include <type_traits>
#include <variant>
#include <vector>

#include <Eigen/Geometry>

#include "odnmr/core/ensemble.hpp"
#include "odnmr/core/parallel.hpp"
#include "odnmr/core/random.hpp"
#include "odnmr/dynamics/models.hpp"
#include "odnmr/dynamics/optics.hpp"
#include "odnmr/dynamics/ou.hpp"
#include "odnmr/dynamics/state.hpp"
#include "odnmr/sequence/events.hpp"

namespace odnmr {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Rabi angular frequency in rad/us for k_rabi in kHz/sqrt(W).
inline double rabi_angular_rad_per_us(double power_w, double k_rabi)
{
    return kTwoPi * k_rabi * std::sqrt(std::max(power_w, 0.0)) * 1e-3;
}

// Static detuning (rad/us) of `ion` from an RF carrier at `carrier_mhz`.
inline double rf_detuning_rad_per_us(const IonClass& ion, const LevelScheme& levels, double carrier_mhz)
{
    return kTwoPi * (carrier_mhz - levels.frequency_mhz(ion.pair) - ion.delta_spin_khz * 1e-3);
}

inline SimState make_state(std::vector<IonClass> ensemble, const LevelScheme& levels, const NoiseModel& noise,
                           std::uint64_t seed = 0)
{
    SimState s;
    s.ensemble = std::move(ensemble);
    s.levels = levels;
    s.rng.seed(seed);
    s.fast_fraction = noise.t1_weight;
    s.bath = OuBath(noise.ou_sigma, noise.ou_tau_c);
    return s;
}

namespace sim_detail {

// Angle within 5 % of an odd multiple of pi counts as refocusing.
inline bool is_refocusing(double angle)
{
    const double r = std::fmod(std::abs(angle), kTwoPi);
    return std::abs(r - std::numbers::pi) < 0.05 * std::numbers::pi;
}

inline void switch_pair(IonClass& ion, Transition t)
{
    if (ion.pair == t) return;
    ion.pair = t;
    ion.bloch = BlochVector(0.0, 0.0, pair_polarization(ion.populations, t));
}

inline void write_back_pair(IonClass& ion, double fast_fraction)
{
    const auto [lo, hi] = levels_of(ion.pair);
    const Populations before = ion.populations;
    const double n = before[lo] + before[hi];
    const double w = std::clamp(ion.bloch.z(), -1.0, 1.0);
    ion.populations[lo] = 0.5 * n * (1.0 + w);
    ion.populations[hi] = n - ion.populations[lo];
    for (int k : {lo, hi}) ion.fast_deviation[k] += fast_fraction * (ion.populations[k] - before[k]);
}

} // namespace sim_detail

// Rotates every class's Bloch vector by the exact constant-field propagator with
// field (Omega cos phi, Omega sin phi, Delta). Classes switch to the transition
// nearest the carrier, dropping coherence of the previously addressed pair.
inline void apply_rf_pulse(SimState& state, const RfPulse& pulse, double k_rabi, const NoiseModel& noise = {},
                           PulseModel model = PulseModel::Exact)
{
    const Transition target = state.levels.nearest(pulse.frequency_mhz);
    const double omega = rabi_angular_rad_per_us(pulse.power_w, k_rabi);
    const double phi = pulse.phase_deg * std::numbers::pi / 180.0;
    const double nominal_angle = omega * pulse.duration_us;
    const bool refocus = sim_detail::is_refocusing(nominal_angle);

    // Analytic bath: a non-refocusing pulse closes the pending toggling-frame record.
    if (noise.mode == NoiseMode::Analytic) {
        if (!refocus) {
            if (state.filter.armed) {
                const double decay = std::exp(-ou_filter_exponent(state.filter.segments, noise.ou_sigma, noise.ou_tau_c));
                for (auto& ion : state.ensemble) {
                    ion.bloch.x() *= decay;
                    ion.bloch.y() *= decay;
                }
            }
            state.filter.reset();
            state.filter.armed = omega > 0.0 && pulse.duration_us > 0.0;
        } else if (state.filter.armed) {
            // The toggling frame flips at the pulse centre.
            const double half_s = model == PulseModel::Exact ? 0.5e-6 * pulse.duration_us : 0.0;
            if (half_s > 0.0) state.filter.segments.push_back({state.clock_us * 1e-6, half_s, state.filter.sign});
            state.filter.sign = -state.filter.sign;
            if (half_s > 0.0) {
                state.filter.segments.push_back({state.clock_us * 1e-6 + half_s, half_s, state.filter.sign});
            }
        }
    }

    if (model == PulseModel::Hard) {
        const Eigen::Matrix3d rot =
            Eigen::AngleAxisd(nominal_angle, Eigen::Vector3d(std::cos(phi), std::sin(phi), 0.0)).toRotationMatrix();
        for (auto& ion : state.ensemble) {
            sim_detail::switch_pair(ion, target);
            ion.bloch = rot * ion.bloch;
            sim_detail::write_back_pair(ion, state.fast_fraction);
        }
        state.rf_reference_mhz = pulse.frequency_mhz;
        return;
    }

    // Bath offsets (rad/us) per sub-step, shared by all classes of this realisation.
    std::vector<double> steps{pulse.duration_us};
    std::vector<double> offsets{0.0};
    if (noise.mode == NoiseMode::MonteCarlo && noise.ou_sigma > 0.0) {
        const double dt_us = noise.dt_s() * 1e6;
        const auto n = static_cast<std::size_t>(std::max(1.0, std::ceil(pulse.duration_us / dt_us)));
        const double h = pulse.duration_us / static_cast<double>(n);
        steps.assign(n, h);
        offsets.assign(n, 0.0);
        for (std::size_t k = 0; k < n; ++k) offsets[k] = state.bath.advance(h * 1e-6, state.rng) / h;
    }

    const double ox = omega * std::cos(phi);
    const double oy = omega * std::sin(phi);
    for (auto& ion : state.ensemble) {
        sim_detail::switch_pair(ion, target);
        const double delta = rf_detuning_rad_per_us(ion, state.levels, pulse.frequency_mhz);
        for (std::size_t k = 0; k < steps.size(); ++k) {
            const Eigen::Vector3d field(ox, oy, delta + offsets[k]);
            const double norm = field.norm();
            if (norm == 0.0) continue;
            ion.bloch = Eigen::AngleAxisd(norm * steps[k], field / norm) * ion.bloch;
        }
        sim_detail::write_back_pair(ion, state.fast_fraction);
    }
    state.rf_reference_mhz = pulse.frequency_mhz;
    state.clock_us += pulse.duration_us;
}

// Free evolution: precession at the static detuning (plus the bath phase in Monte
// Carlo mode) and two-channel relaxation of populations and coherences.
inline void apply_wait(SimState& state, const Wait& wait, const NoiseModel& noise)
{
    const double t_us = wait.duration_us;
    const double t_s = t_us * 1e-6;
    double bath_phase = 0.0;
    if (noise.mode == NoiseMode::MonteCarlo) {
        bath_phase = state.bath.advance(t_s, state.rng);
    } else if (state.filter.armed) {
        state.filter.segments.push_back({state.clock_us * 1e-6, t_s, state.filter.sign});
    }

    const double decay_short = std::exp(-t_s / noise.t1_short);
    const double decay_long = std::exp(-t_s / noise.t1_long);
    const double transverse = std::exp(-t_s * noise.transverse_rate());
    const auto th = thermal_populations();
    const bool has_carrier = !std::isnan(state.rf_reference_mhz);

    for (auto& ion : state.ensemble) {
        for (int k = 0; k < kNumLevels; ++k) {
            const double fast = ion.fast_deviation[k];
            const double slow = ion.populations[k] - th[k] - fast;
            ion.fast_deviation[k] = fast * decay_short;
            ion.populations[k] = th[k] + ion.fast_deviation[k] + slow * decay_long;
        }
        double u = ion.bloch.x();
        double v = ion.bloch.y();
        if (has_carrier && (u != 0.0 || v != 0.0)) {
            const double angle = rf_detuning_rad_per_us(ion, state.levels, state.rf_reference_mhz) * t_us + bath_phase;
            const double c = std::cos(angle);
            const double s = std::sin(angle);
            const double nu = u * c - v * s;
            v = u * s + v * c;
            u = nu;
        }
        ion.bloch.x() = u * transverse;
        ion.bloch.y() = v * transverse;
        const Populations unchanged = ion.populations;
        commit_populations(ion, unchanged, 0.0);
    }
    state.clock_us += t_us;
}

// Applies one event; returns the signal for probe and readout events.
inline std::optional<double> apply_event(SimState& state, const PulseEvent& event, const NoiseModel& noise,
                                         const OpticalModel& optics, double k_rabi, PulseModel model)
{
    return std::visit(
        [&](const auto& e) -> std::optional<double> {
            using T = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<T, OpticalPulse>) {
                const double s = apply_optical_pulse(state, e, optics);
                if (e.role == OpticalRole::Probe) return s;
                return std::nullopt;
            } else if constexpr (std::is_same_v<T, RfPulse>) {
                apply_rf_pulse(state, e, k_rabi, noise, model);
                return std::nullopt;
            } else if constexpr (std::is_same_v<T, Wait>) {
                apply_wait(state, e, noise);
                return std::nullopt;
            } else {
                return apply_readout(state, e, optics);
            }
        },
        event);
}

struct SignalSample {
    std::size_t event_index = 0;
    double signal = 0.0;
    double std_error = 0.0; // Monte Carlo standard error of the mean; 0 otherwise
};

struct SimOptions {
    PulseModel pulse_model = PulseModel::Exact;
    std::optional<std::uint64_t> noise_seed; // defaults to the ensemble seed
    std::size_t jobs = 1;
    bool keep_trajectories = false;
};

struct SimulationResult {
    std::vector<SignalSample> samples;
    std::vector<std::vector<double>> trajectories; // [trajectory][sample], Monte Carlo only, on request
};

namespace sim_detail {

inline void run_events(SimState& state, const PulseSequence& seq, std::size_t begin, const NoiseModel& noise,
                       const OpticalModel& optics, double k_rabi, PulseModel model, std::vector<SignalSample>& out)
{
    for (std::size_t i = begin; i < seq.events.size(); ++i) {
        if (auto s = apply_event(state, seq.events[i], noise, optics, k_rabi, model)) out.push_back({i, *s, 0.0});
    }
}

} // namespace sim_detail

// Folds the sequence over `initial`. In Monte Carlo mode the noise-free prefix up
// to the first RF pulse is evaluated once, then every trajectory continues from a
// copy with its own bath realisation seeded by derive_seed(seed, {r}); averages are
// accumulated in trajectory order, independent of `jobs`.
inline SimulationResult simulate_from(const PulseSequence& seq, SimState initial, const NoiseModel& noise,
                                      const OpticalModel& optics, double k_rabi, std::uint64_t seed,
                                      const SimOptions& opts = {})
{
    noise.validate();
    optics.validate();
    initial.fast_fraction = noise.t1_weight;
    initial.bath = OuBath(noise.ou_sigma, noise.ou_tau_c);

    SimulationResult result;
    const bool stochastic = noise.mode == NoiseMode::MonteCarlo && noise.ou_sigma > 0.0;
    std::size_t first_rf = seq.events.size();
    for (std::size_t i = 0; i < seq.events.size(); ++i) {
        if (std::holds_alternative<RfPulse>(seq.events[i])) {
            first_rf = i;
            break;
        }
    }

    if (!stochastic || first_rf == seq.events.size()) {
        SimState state = std::move(initial);
        state.rng.seed(seed);
        state.bath.reset(state.rng);
        sim_detail::run_events(state, seq, 0, noise, optics, k_rabi, opts.pulse_model, result.samples);
        return result;
    }

    SimState prefix = std::move(initial);
    std::vector<SignalSample> head;
    for (std::size_t i = 0; i < first_rf; ++i) {
        if (auto s = apply_event(prefix, seq.events[i], noise, optics, k_rabi, opts.pulse_model)) {
            head.push_back({i, *s, 0.0});
        }
    }

    const std::size_t n_traj = noise.mc.n_trajectories;
    std::vector<std::vector<SignalSample>> per_traj(n_traj);
    parallel_for(n_traj, opts.jobs, [&](std::size_t r) {
        SimState state = prefix;
        state.rng.seed(derive_seed(seed, {r}));
        state.bath.reset(state.rng);
        sim_detail::run_events(state, seq, first_rf, noise, optics, k_rabi, opts.pulse_model, per_traj[r]);
    });

    result.samples = head;
    const std::size_t n_tail = per_traj.empty() ? 0 : per_traj.front().size();
    for (std::size_t j = 0; j < n_tail; ++j) {
        double sum = 0.0;
        for (std::size_t r = 0; r < n_traj; ++r) sum += per_traj[r][j].signal;
        const double mean = sum / static_cast<double>(n_traj);
        double ss = 0.0;
        for (std::size_t r = 0; r < n_traj; ++r) {
            const double d = per_traj[r][j].signal - mean;
            ss += d * d;
        }
        const double se = n_traj > 1 ? std::sqrt(ss / static_cast<double>(n_traj - 1) / static_cast<double>(n_traj)) : 0.0;
        result.samples.push_back({per_traj.front()[j].event_index, mean, se});
    }
    if (opts.keep_trajectories) {
        result.trajectories.resize(n_traj);
        for (std::size_t r = 0; r < n_traj; ++r) {
            for (const auto& h : head) result.trajectories[r].push_back(h.signal);
            for (const auto& s : per_traj[r]) result.trajectories[r].push_back(s.signal);
        }
    }
    return result;
}

inline SimulationResult simulate_sequence(const PulseSequence& seq, const EnsembleConfig& cfg, const NoiseModel& noise,
                                          const OpticalModel& optics, double k_rabi, const SimOptions& opts = {})
{
    SimState initial = make_state(sample_ensemble(cfg), cfg.levels, noise);
    const std::uint64_t seed = opts.noise_seed.value_or(derive_seed(cfg.rng_seed, {0x6f75ULL}));
    return simulate_from(seq, std::move(initial), noise, optics, k_rabi, seed, opts);
}

} // namespace odnmr
