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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "odnmr/dynamics/simulator.hpp"
#include "odnmr/experiments/calibrate.hpp"
#include "odnmr/experiments/runner.hpp"

using namespace odnmr;

namespace {

EnsembleConfig small_ensemble(std::size_t n = 400)
{
    EnsembleConfig cfg;
    cfg.n_classes = n;
    cfg.rng_seed = 3;
    return cfg;
}

ExperimentResult run_small(ExperimentKind kind, nlohmann::json params, std::size_t jobs = 1,
                           NoiseModel noise = {}, std::size_t n_classes = 400)
{
    ExperimentSpec spec{kind, std::move(params), 11};
    return run_experiment(spec, small_ensemble(n_classes), noise, OpticalModel{}, 1.48, RunOptions{jobs});
}

// Single-ion Hahn visibility at total free time t_s, Hard pulses, analytic bath.
double hahn_visibility(double t_s, double sigma, double tau_c)
{
    NoiseModel n;
    n.ou_sigma = sigma;
    n.ou_tau_c = tau_c;
    n.t1_short = n.t1_long = 1e15;
    const double t_pi = pi_pulse_us(92.0);
    double s[2];
    for (int k = 0; k < 2; ++k) {
        IonClass ion;
        ion.populations = {1.0, 0.0, 0.0};
        ion.bloch = BlochVector(0.0, 0.0, 1.0);
        SimState st = make_state({ion}, LevelScheme{}, n);
        apply_rf_pulse(st, RfPulse{21.475, 92.0, 0.0, 0.5 * t_pi}, 1.48, n, PulseModel::Hard);
        apply_wait(st, Wait{0.5 * t_s * 1e6}, n);
        apply_rf_pulse(st, RfPulse{21.475, 92.0, 0.0, t_pi}, 1.48, n, PulseModel::Hard);
        apply_wait(st, Wait{0.5 * t_s * 1e6}, n);
        apply_rf_pulse(st, RfPulse{21.475, 92.0, 180.0 * k, 0.5 * t_pi}, 1.48, n, PulseModel::Hard);
        apply_wait(st, Wait{0.0}, n);
        s[k] = st.ensemble[0].populations[kThreeHalves];
    }
    return std::abs(s[0] - s[1]) / (s[0] + s[1]);
}

} // namespace

TEST(Spec, ResolveParams)
{
    const auto p = resolve_params({ExperimentKind::Rabi, {{"points", 12}}, 1});
    EXPECT_EQ(p["points"], 12);
    EXPECT_EQ(p["repetitions"], 5);
    EXPECT_DOUBLE_EQ(p["rf_power_w"].get<double>(), 92.0);
    EXPECT_THROW(resolve_params({ExperimentKind::Rabi, {{"bogus", 1}}, 1}), ConfigError);
    EXPECT_THROW(resolve_params({ExperimentKind::Rabi, {{"points", 1.5}}, 1}), ConfigError);
    EXPECT_THROW(resolve_params({ExperimentKind::Rabi, {{"points", 1}}, 1}), ConfigError);
    EXPECT_THROW(resolve_params({ExperimentKind::Rabi, {{"repetitions", 0}}, 1}), ConfigError);
    EXPECT_THROW(resolve_params({ExperimentKind::Cpmg, {{"n_list", nlohmann::json::array()}}, 1}), ConfigError);
    EXPECT_THROW(resolve_params({ExperimentKind::Rabi, nlohmann::json::array(), 1}), ConfigError);
    for (const auto& [k, name] : kExperimentNames) EXPECT_EQ(experiment_kind_from_string(name), k);
    EXPECT_THROW(experiment_kind_from_string("Nmr"), ConfigError);
}

TEST(RawTable, CsvLayout)
{
    RawTable t;
    t.value_columns = {"signal", "visibility"};
    const auto m = t.add_point(0.5, {{1.0, 0.1}, {3.0, 0.3}});
    EXPECT_DOUBLE_EQ(m[0], 2.0);
    EXPECT_EQ(t.point_count(), 1u);
    EXPECT_EQ(t.to_csv(), "sweep_param,repetition,signal,visibility\n0.5,0,1,0.1\n0.5,1,3,0.3\n0.5,mean,2,0.2\n");
    EXPECT_THROW(t.add_point(1.0, {}), std::invalid_argument);
    EXPECT_THROW(t.add_point(1.0, {{1.0}}), std::invalid_argument);
    EXPECT_EQ(format_number(0.1), "0.1");
    EXPECT_EQ(format_number(1e-300), "1e-300");
}

TEST(Calibration, HahnTimeMatchesTarget)
{
    const double sigma = calibrate_bath(0.61, 13.0);
    // 1/e point of an independently simulated single-ion echo.
    double lo = 1e-5, hi = 1e-2;
    for (int i = 0; i < 100; ++i) {
        const double mid = 0.5 * (lo + hi);
        (hahn_visibility(mid, sigma, 13e-3) > 1.0 / std::numbers::e ? lo : hi) = mid;
    }
    EXPECT_NEAR(lo, 0.61e-3, 0.001 * 0.61e-3);
}

TEST(Calibration, LimitsAndScaling)
{
    EXPECT_EQ(calibrate_bath(std::numeric_limits<double>::infinity(), 13.0), 0.0);
    EXPECT_GT(calibrate_bath(1.0, 13.0), calibrate_bath(10.0, 13.0));
    // sigma^2 / tau_c fixed in the small-delay regime.
    const double a = calibrate_bath(0.01, 13.0);
    const double b = calibrate_bath(0.01, 26.0);
    EXPECT_NEAR(b / a, std::numbers::sqrt2, 0.01);
    EXPECT_THROW(calibrate_bath(0.0, 13.0), ConfigError);
    EXPECT_THROW(calibrate_bath(1.0, -1.0), ConfigError);
    EXPECT_TRUE(std::isinf(cpmg_one_over_e_time(1, 0.0, 0.013)));
}

TEST(Runner, EveryKindFillsItsTable)
{
    NoiseModel noise;
    noise.ou_sigma = calibrate_bath(0.61, 13.0);
    const std::vector<std::pair<ExperimentKind, nlohmann::json>> cases{
        {ExperimentKind::PleScan, {{"points", 9}, {"repetitions", 2}}},
        {ExperimentKind::Shb, {{"points", 9}, {"repetitions", 2}}},
        {ExperimentKind::OpticalFid, {{"points", 30}, {"repetitions", 2}}},
        {ExperimentKind::PhotonEcho, {{"points", 12}, {"repetitions", 2}}},
        {ExperimentKind::PitT1, {{"points", 12}, {"repetitions", 2}}},
        {ExperimentKind::OdnmrScan, {{"points", 15}, {"repetitions", 2}}},
        {ExperimentKind::SpinHoleburn, {{"points", 15}, {"repetitions", 2}}},
        {ExperimentKind::CorrelationScan, {{"points", 15}, {"repetitions", 1}, {"detunings_ghz", {-1.0, 0.0, 1.0}}}},
        {ExperimentKind::Rabi, {{"points", 20}, {"repetitions", 3}}},
        {ExperimentKind::RabiPowerSweep, {{"points", 20}, {"repetitions", 1}, {"powers_w", {23.0, 92.0}}}},
        {ExperimentKind::HahnEcho, {{"points", 10}, {"repetitions", 2}}},
        {ExperimentKind::Cpmg, {{"points", 8}, {"repetitions", 1}, {"n_list", {1, 2}}}},
        {ExperimentKind::ScalingStudy, {{"points", 12}, {"repetitions", 1}, {"n_list", {1, 2, 4}}}},
    };
    for (const auto& [kind, params] : cases) {
        SCOPED_TRACE(to_string(kind));
        const auto r = run_small(kind, params, 1, noise, 200);
        const auto p = resolve_params({kind, params, 1});
        const std::size_t reps = p["repetitions"].get<std::size_t>();
        const std::size_t points = r.raw.point_count();
        EXPECT_EQ(r.raw.rows.size(), points * (reps + 1));
        EXPECT_GE(points, p["points"].get<std::size_t>());
        EXPECT_EQ(r.summary["kind"], to_string(kind));
        EXPECT_FALSE(r.fits.empty());
        for (const auto& row : r.raw.rows) EXPECT_EQ(row.values.size(), r.raw.value_columns.size());
    }
}

TEST(Runner, DeterministicAcrossJobs)
{
    NoiseModel noise;
    noise.ou_sigma = calibrate_bath(0.61, 13.0);
    noise.mode = NoiseMode::MonteCarlo;
    noise.mc.n_trajectories = 8;
    const nlohmann::json p{{"points", 6}, {"repetitions", 2}, {"readout_noise", 0.01}};
    const auto a = run_small(ExperimentKind::HahnEcho, p, 1, noise, 100);
    const auto b = run_small(ExperimentKind::HahnEcho, p, 3, noise, 100);
    EXPECT_EQ(a.raw.to_csv(), b.raw.to_csv());
    const auto c = run_small(ExperimentKind::OdnmrScan, {{"points", 9}, {"readout_noise", 0.02}}, 1);
    const auto d = run_small(ExperimentKind::OdnmrScan, {{"points", 9}, {"readout_noise", 0.02}}, 4);
    EXPECT_EQ(c.raw.to_csv(), d.raw.to_csv());
    const auto e = run_small(ExperimentKind::OdnmrScan, {{"points", 9}, {"readout_noise", 0.02}}, 1);
    EXPECT_EQ(c.raw.to_csv(), e.raw.to_csv());
}

TEST(Runner, SeedChangesNoise)
{
    const nlohmann::json p{{"points", 9}, {"readout_noise", 0.02}};
    const auto a = run_experiment({ExperimentKind::OdnmrScan, p, 1}, small_ensemble(), {}, {}, 1.48);
    const auto b = run_experiment({ExperimentKind::OdnmrScan, p, 2}, small_ensemble(), {}, {}, 1.48);
    EXPECT_NE(a.raw.to_csv(), b.raw.to_csv());
}

TEST(Runner, RabiFrequencyAtOnePower)
{
    const auto r = run_small(ExperimentKind::Rabi, {{"rf_power_w", 52.0}}, 1, {}, 1000);
    const double expect = 1.48 * std::sqrt(52.0);
    EXPECT_NEAR(r.summary["rabi_khz"].get<double>(), expect, 0.05 * expect);
}

TEST(Runner, CpmgScalingInPaperRange)
{
    NoiseModel noise;
    noise.ou_sigma = calibrate_bath(0.61, 13.0);
    const auto r = run_small(ExperimentKind::Cpmg, {{"points", 30}, {"repetitions", 1}}, 1, noise, 1000);
    EXPECT_EQ(r.summary["t2_monotone_in_n"], true);
    const double beta = r.summary["beta"].get<double>();
    EXPECT_GE(beta, 0.5);
    EXPECT_LE(beta, 0.7);
}

TEST(Runner, ErrorsBeforeSimulating)
{
    EnsembleConfig bad = small_ensemble();
    bad.isotope_fraction = 2.0;
    EXPECT_THROW(run_experiment({ExperimentKind::Rabi, {}, 1}, bad, {}, {}, 1.48), ConfigError);
    EXPECT_THROW(run_experiment({ExperimentKind::Rabi, {}, 1}, small_ensemble(), {}, {}, 0.0), ConfigError);
    EXPECT_THROW(run_experiment({ExperimentKind::Rabi, {{"frequency"}}, 1}, small_ensemble(), {}, {}, 1.48),
                 ConfigError);
}
