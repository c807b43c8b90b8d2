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
#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "odnmr/core/error.hpp"
#include "odnmr/core/parallel.hpp"
#include "odnmr/core/random.hpp"
#include "odnmr/dynamics/ou.hpp"
#include "odnmr/dynamics/simulator.hpp"
#include "odnmr/sequence/builders.hpp"

namespace odnmr {

// Monte Carlo vs closed-form CPMG visibility of a single polarised ion.
struct OracleSettings {
    double sigma = 0.0;     // rad/s; 0 picks a coupling with visible decay
    double tau_c = 13e-3;   // s
    std::size_t n_trajectories = 2000;
    std::vector<int> n_list{1, 2, 4, 8};
    std::size_t points = 10;
    double tau_min_fraction = 0.01; // of tau_c
    double tau_max_fraction = 1.0;
    double z_threshold = 3.0; // pass iff |z| < threshold
    std::optional<double> analytic_sigma; // compare against a different coupling
    std::uint64_t seed = 1;
    double rf_power_w = 92.0;
    double k_rabi = kDefaultRabiKhzPerSqrtW;

    void validate() const
    {
        if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("oracle: sigma must be >= 0");
        if (!(tau_c > 0.0)) throw ConfigError("oracle: tau_c must be > 0");
        if (n_list.empty()) throw ConfigError("oracle: n_list is empty");
        for (int n : n_list) {
            if (n < 1) throw ConfigError("oracle: pulse counts must be >= 1");
        }
        if (points < 1) throw ConfigError("oracle: points must be >= 1");
        if (!(tau_min_fraction > 0.0) || !(tau_max_fraction >= tau_min_fraction)) {
            throw ConfigError("oracle: need 0 < tau_min_fraction <= tau_max_fraction");
        }
        if (!(z_threshold > 0.0)) throw ConfigError("oracle: z_threshold must be > 0");
        if (analytic_sigma && !(*analytic_sigma >= 0.0)) throw ConfigError("oracle: analytic_sigma must be >= 0");
        if (!(rf_power_w > 0.0) || !(k_rabi > 0.0)) throw ConfigError("oracle: rf power and k_rabi must be > 0");
    }
};

// Coupling at which CPMG-1 at tau = tau_c / 3 has decayed to 1/e.
inline double default_oracle_sigma(double tau_c)
{
    return 1.0 / std::sqrt(ou_cpmg_exponent(1, tau_c / 3.0, 1.0, tau_c));
}

struct OracleCase {
    int n = 1;
    double tau_s = 0.0;
    double mc_visibility = 0.0;
    double std_error = 0.0;
    double analytic = 0.0;
    double z = 0.0;
    bool pass = false;
};

struct OracleReport {
    double sigma = 0.0;
    double analytic_sigma = 0.0;
    double tau_c = 0.0;
    std::size_t n_trajectories = 0;
    double z_threshold = 0.0;
    std::vector<OracleCase> cases;
    bool inconclusive = false;
    bool passed = false;
    double max_abs_z = 0.0;
};

namespace oracle_detail {

inline PulseSequence oracle_sequence(int n, double tau_us, double final_phase, const OracleSettings& s)
{
    const double t_pi = pi_pulse_us(s.rf_power_w, s.k_rabi);
    std::vector<PulseEvent> ev;
    ev.push_back(RfPulse{0.0, s.rf_power_w, 0.0, 0.5 * t_pi});
    for (int i = 0; i < n; ++i) {
        ev.push_back(Wait{0.5 * tau_us});
        ev.push_back(RfPulse{0.0, s.rf_power_w, 90.0, t_pi});
        ev.push_back(Wait{0.5 * tau_us});
    }
    ev.push_back(RfPulse{0.0, s.rf_power_w, normalize_phase_deg(final_phase), 0.5 * t_pi});
    ev.push_back(ReadoutWindow{0.0, 1.0});
    PulseSequence seq;
    seq.label = "oracle-cpmg-" + std::to_string(n);
    seq.events = std::move(ev);
    return seq;
}

} // namespace oracle_detail

inline OracleReport run_oracle(OracleSettings s, std::size_t jobs = 1)
{
    s.validate();
    if (s.sigma == 0.0) s.sigma = default_oracle_sigma(s.tau_c);
    OracleReport rep;
    rep.sigma = s.sigma;
    rep.analytic_sigma = s.analytic_sigma.value_or(s.sigma);
    rep.tau_c = s.tau_c;
    rep.n_trajectories = s.n_trajectories;
    rep.z_threshold = s.z_threshold;
    if (s.n_trajectories < 2) {
        rep.inconclusive = true;
        return rep;
    }

    NoiseModel noise;
    noise.ou_sigma = s.sigma;
    noise.ou_tau_c = s.tau_c;
    noise.t1_short = 1e15;
    noise.t1_long = 1e15;
    noise.mode = NoiseMode::MonteCarlo;
    noise.mc.n_trajectories = s.n_trajectories;
    OpticalModel optics;
    optics.pumped_level = kThreeHalves;

    IonClass ion;
    ion.populations = {1.0, 0.0, 0.0};
    ion.bloch = BlochVector(0.0, 0.0, 1.0);
    ion.pair = Transition::Low;
    LevelScheme levels;

    std::vector<double> taus;
    for (std::size_t i = 0; i < s.points; ++i) {
        const double a = std::log(s.tau_min_fraction * s.tau_c);
        const double b = std::log(s.tau_max_fraction * s.tau_c);
        taus.push_back(s.points == 1 ? std::exp(a) : std::exp(a + (b - a) * static_cast<double>(i) / (s.points - 1)));
    }

    // Common random numbers: every case replays the same bath trajectories.
    const std::uint64_t seed = derive_seed(s.seed, {0x6f7263ULL});
    SimOptions opts;
    opts.pulse_model = PulseModel::Hard;
    opts.keep_trajectories = true;
    opts.jobs = jobs;
    for (std::size_t j = 0; j < s.n_list.size(); ++j) {
        const int n = s.n_list[j];
        const double inv = inverting_final_phase(n, 90.0);
        for (std::size_t i = 0; i < taus.size(); ++i) {
            const double tau_us = taus[i] * 1e6;
            // RF carrier sits on the ion's own transition.
            SimState base = make_state({ion}, levels, noise);
            auto plus_seq = oracle_detail::oracle_sequence(n, tau_us, inv, s);
            auto minus_seq = oracle_detail::oracle_sequence(n, tau_us, inv + 180.0, s);
            for (auto* seq : {&plus_seq, &minus_seq}) {
                for (auto& e : seq->events) {
                    if (auto* rf = std::get_if<RfPulse>(&e)) rf->frequency_mhz = levels.f12_mhz;
                }
            }
            const auto plus = simulate_from(plus_seq, base, noise, optics, s.k_rabi, seed, opts);
            const auto minus = simulate_from(minus_seq, base, noise, optics, s.k_rabi, seed, opts);
            const std::size_t nt = plus.trajectories.size();
            if (nt != s.n_trajectories || minus.trajectories.size() != nt) {
                throw SimulationError("oracle: trajectory count mismatch");
            }
            double sum = 0.0;
            std::vector<double> v(nt);
            for (std::size_t r = 0; r < nt; ++r) {
                const double p = plus.trajectories[r].back();
                const double m = minus.trajectories[r].back();
                v[r] = (p - m) / (p + m);
                sum += v[r];
            }
            const double mean = sum / static_cast<double>(nt);
            double ss = 0.0;
            for (double x : v) ss += (x - mean) * (x - mean);
            const double se = std::sqrt(ss / static_cast<double>(nt - 1) / static_cast<double>(nt));

            OracleCase oc;
            oc.n = n;
            oc.tau_s = taus[i];
            oc.mc_visibility = mean;
            oc.std_error = se;
            oc.analytic = ou_visibility_analytic(n, taus[i], rep.analytic_sigma, s.tau_c);
            // A vanishing spread only passes on exact agreement.
            oc.z = se > 0.0 ? (mean - oc.analytic) / se : (mean == oc.analytic ? 0.0 : INFINITY);
            oc.pass = std::abs(oc.z) < s.z_threshold;
            rep.max_abs_z = std::max(rep.max_abs_z, std::abs(oc.z));
            rep.cases.push_back(oc);
        }
    }
    rep.passed = true;
    for (const auto& oc : rep.cases) rep.passed = rep.passed && oc.pass;
    return rep;
}

inline nlohmann::json to_json(const OracleReport& r)
{
    nlohmann::json cases = nlohmann::json::array();
    for (const auto& c : r.cases) {
        cases.push_back({{"n", c.n},
                         {"tau_s", c.tau_s},
                         {"mc_visibility", c.mc_visibility},
                         {"std_error", c.std_error},
                         {"analytic", c.analytic},
                         {"z", std::isfinite(c.z) ? nlohmann::json(c.z) : nlohmann::json(nullptr)},
                         {"pass", c.pass}});
    }
    return {{"status", r.inconclusive ? "inconclusive" : (r.passed ? "pass" : "fail")},
            {"sigma_rad_s", r.sigma},
            {"analytic_sigma_rad_s", r.analytic_sigma},
            {"tau_c_s", r.tau_c},
            {"n_trajectories", r.n_trajectories},
            {"z_threshold", r.z_threshold},
            {"max_abs_z", r.max_abs_z},
            {"cases", cases}};
}

} // namespace odnmr
