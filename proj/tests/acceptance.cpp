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

// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.
// Links the randomized invariant suites from test_invariants.cpp.

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "odnmr/analysis/estimators.hpp"
#include "odnmr/cli/commands.hpp"
#include "odnmr/experiments/calibrate.hpp"
#include "odnmr/experiments/oracle.hpp"
#include "odnmr/experiments/runner.hpp"

using namespace odnmr;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

bool within(double v, double target, double rel) { return std::abs(v - target) <= rel * std::abs(target); }

std::size_t jobs() { return default_jobs(); }

ExperimentResult run(ExperimentKind kind, nlohmann::json params, const EnsembleConfig& cfg = {},
                     const NoiseModel& noise = {})
{
    return run_experiment({kind, std::move(params), 1}, cfg, noise, OpticalModel{}, kDefaultRabiKhzPerSqrtW,
                          RunOptions{jobs(), PulseModel::Exact});
}

double get(const nlohmann::json& j, const char* key)
{
    return j.contains(key) && j[key].is_number() ? j[key].get<double>() : std::nan("");
}

Outcome rabi_power_law()
{
    const auto r = run(ExperimentKind::RabiPowerSweep, {{"powers_w", {6.0, 23.0, 52.0, 92.0}}});
    Outcome o{true, ""};
    for (const auto& p : r.summary["points"]) {
        const double got = get(p, "rabi_khz");
        const double want = 1.48 * std::sqrt(p["rf_power_w"].get<double>());
        o.pass = o.pass && within(got, want, 0.05);
        o.detail += fmt("%.0fW %.3f/%.3f kHz; ", p["rf_power_w"].get<double>(), got, want);
    }
    const double k = get(r.summary, "k_rabi_khz_per_sqrt_w");
    o.pass = o.pass && std::abs(k - 1.48) <= 0.05;
    o.detail += fmt("k = %.4f kHz/sqrt(W)", k);
    return o;
}

Outcome ou_oracle()
{
    OracleSettings s; // N in {1,2,4,8}, 10 delays, 2000 trajectories
    const auto rep = run_oracle(s, jobs());
    const bool ok = !rep.inconclusive && rep.passed && rep.cases.size() == 40 && rep.n_trajectories == 2000;
    return {ok, fmt("%zu cases, max |z| = %.3f (< 3), sigma = %.1f rad/s, tau_c = %.3g s", rep.cases.size(),
                    rep.max_abs_z, rep.sigma, rep.tau_c)};
}

Outcome small_tau_scaling()
{
    NoiseModel n;
    n.ou_tau_c = 1.0;
    n.ou_sigma = 2e5;
    const auto r = run(ExperimentKind::ScalingStudy, {{"repetitions", 1}}, EnsembleConfig{}, n);
    const double beta = get(r.summary, "beta");
    const double x = get(r.summary, "max_tau_over_tau_c");
    return {std::abs(beta - 2.0 / 3.0) <= 0.02 && x < 0.01,
            fmt("beta = %.4f (target 0.667 +- 0.02), max tau/tau_c = %.2g", beta, x)};
}

Outcome hahn_calibration()
{
    NoiseModel n;
    n.ou_tau_c = 13e-3;
    n.ou_sigma = calibrate_bath(0.61, 13.0);
    const auto hahn = run(ExperimentKind::HahnEcho, {{"repetitions", 1}}, EnsembleConfig{}, n);
    const double t2 = get(hahn.summary, "t2_echo_ms");
    const auto cpmg = run(ExperimentKind::Cpmg, {{"repetitions", 1}, {"n_list", {8}}}, EnsembleConfig{}, n);
    const double t8 = get(cpmg.summary["curves"][0], "t2_ms");
    const double t8_closed = cpmg_one_over_e_time(8, n.ou_sigma, n.ou_tau_c) * 1e3;
    return {within(t2, 0.61, 0.05) && t8 >= 1.4 && t8 <= 2.6,
            fmt("sigma = %.1f rad/s; Hahn T2 = %.4f ms (0.61 +- 5%%); CPMG-8 T2 = %.3f ms in [1.4, 2.6] "
                "(closed form %.3f ms)",
                n.ou_sigma, t2, t8, t8_closed)};
}

Outcome pit_t1()
{
    NoiseModel n;
    n.t1_short = 4.4;
    n.t1_long = 120.0;
    const auto r = run(ExperimentKind::PitT1, {{"readout_noise", 0.01}}, EnsembleConfig{}, n);
    const double a = get(r.summary, "t1_short_s"), b = get(r.summary, "t1_long_s");
    return {within(a, 4.4, 0.10) && within(b, 120.0, 0.10), fmt("T1 = %.3f s (4.4), %.2f s (120)", a, b)};
}

Outcome odnmr_lines()
{
    Outcome o{true, ""};
    const auto low = run(ExperimentKind::OdnmrScan, {{"center_mhz", 21.475}});
    EnsembleConfig high_cfg;
    high_cfg.spin_dist.fwhm = 88.0;
    const auto high = run(ExperimentKind::OdnmrScan, {{"center_mhz", 33.944}, {"span_mhz", 0.5}}, high_cfg);
    for (const auto& [r, c, w] : {std::tuple{&low, 21.475, 154.0}, std::tuple{&high, 33.944, 88.0}}) {
        const double got_c = get(r->summary, "center_mhz"), got_w = get(r->summary, "fwhm_khz");
        o.pass = o.pass && std::abs(got_c - c) <= 1e-3 && within(got_w, w, 0.10);
        o.detail += fmt("%.6f MHz (%.3f), FWHM %.2f kHz (%.0f); ", got_c, c, got_w, w);
    }
    double prev = 0.0;
    o.detail += "FWHM vs power:";
    for (double p : {0.01, 10.0, 92.0, 400.0}) {
        const double w = get(run(ExperimentKind::OdnmrScan, {{"rf_power_w", p}}).summary, "fwhm_khz");
        o.pass = o.pass && w > prev;
        prev = w;
        o.detail += fmt(" %gW %.2f", p, w);
    }
    return o;
}

Outcome correlation()
{
    const auto r = run(ExperimentKind::CorrelationScan, nlohmann::json::object());
    const double g = get(r.summary, "gradient_khz_per_ghz");
    return {std::abs(g + 4.0) <= 0.4, fmt("slope = %.3f kHz/GHz (-4 +- 0.4)", g)};
}

Outcome closed_forms()
{
    const double eu = nuclear_moment(constants::kGammaEu151, 2.5);
    const double h = nuclear_moment(2.68e8, 0.5);
    const double c4 = dipolar_coupling(eu, h, 4e-10), c8 = dipolar_coupling(eu, h, 8e-10);
    const double r13 = dipolar_distance(electron_moment(2.0, 0.5), eu, 12e3) * 1e10;
    const double np = probed_ion_count(9.6e20, 1e-4, 1.0 / 23000.0, 0.5, 0.2 * 11.6 / 154.0);
    const double t2 = linewidth_to_t2star(310.0);
    const bool ok = within(c4, 583.0, 0.03) && within(c8, 72.0, 0.03) && within(r13, 13.0, 0.03) && np >= 1e10 &&
                    np < 1e11 && std::abs(t2 - 1.03) <= 0.01;
    return {ok, fmt("%.1f Hz @4A, %.2f Hz @8A, %.2f A @12kHz, N_p = %.2e, T2* = %.4f us", c4, c8, r13, np, t2)};
}

Outcome invariants()
{
    ::testing::GTEST_FLAG(filter) = "Invariants.*";
    auto& listeners = ::testing::UnitTest::GetInstance()->listeners();
    delete listeners.Release(listeners.default_result_printer());
    const int rc = RUN_ALL_TESTS();
    const auto* unit = ::testing::UnitTest::GetInstance();
    std::string detail;
    int suites = 0;
    for (int i = 0; i < unit->total_test_suite_count(); ++i) {
        const auto* s = unit->GetTestSuite(i);
        for (int j = 0; j < s->total_test_count(); ++j) {
            const auto* t = s->GetTestInfo(j);
            if (!t->should_run()) continue;
            ++suites;
            detail += std::string(t->name()) + (t->result()->Passed() ? " ok; " : " FAILED; ");
        }
    }
    return {rc == 0 && suites >= 5, detail + "1000 randomized cases each"};
}

Outcome determinism()
{
    const fs::path dir = fs::temp_directory_path() / "odnmr_acceptance_determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string cfg = (dir / "hahn_mc.toml").string();
    std::ofstream(cfg) << "output_dir = \"" << (dir / "a").string() << R"("
[ensemble]
n_classes = 2000
[noise]
ou_sigma = "26447.2rad/s"
mode = "monte_carlo"
n_trajectories = 64
[experiment]
kind = "HahnEcho"
seed = 2024
[experiment.params]
points = 12
repetitions = 3
readout_noise = 0.01
)";
    const auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    std::ostringstream out, err;
    std::vector<std::string> csv;
    for (std::size_t j : {1u, 2u, 4u, 7u}) {
        cli::RunFlags f;
        f.jobs = j;
        f.output = (dir / ("j" + std::to_string(j))).string();
        if (cli::cmd_run(cfg, f, out, err) != cli::kOk) return {false, "run failed: " + err.str()};
        csv.push_back(slurp(fs::path(*f.output) / "raw.csv"));
    }
    cli::RunFlags again;
    again.jobs = 3;
    again.output = (dir / "manifest").string();
    if (cli::cmd_run((dir / "j1" / "manifest.json").string(), again, out, err) != cli::kOk) {
        return {false, "manifest rerun failed: " + err.str()};
    }
    csv.push_back(slurp(dir / "manifest" / "raw.csv"));
    bool same = !csv[0].empty();
    for (const auto& c : csv) same = same && c == csv[0];
    fs::remove_all(dir);
    return {same, fmt("raw.csv (%zu bytes) identical at jobs 1, 2, 4, 7 and from manifest with jobs 3", csv[0].size())};
}

} // namespace

int main(int argc, char** argv)
{
    ::testing::InitGoogleTest(&argc, argv);
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
        double limit_s; // 0: no runtime bound
    };
    const std::vector<Criterion> criteria{
        {1, "Rabi power law", rabi_power_law, 120.0},
        {2, "OU oracle", ou_oracle, 600.0},
        {3, "small-tau scaling", small_tau_scaling, 0.0},
        {4, "Hahn-echo calibration", hahn_calibration, 0.0},
        {5, "spin T1 round trip", pit_t1, 60.0},
        {6, "ODNMR lines", odnmr_lines, 0.0},
        {7, "correlation scan", correlation, 0.0},
        {8, "closed-form checks", closed_forms, 0.0},
        {9, "invariant suites", invariants, 300.0},
        {10, "determinism", determinism, 0.0},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.limit_s > 0.0 && s >= c.limit_s) {
            o.pass = false;
            o.detail += fmt(" [runtime %.1f s over %.0f s]", s, c.limit_s);
        }
        failed += o.pass ? 0 : 1;
        std::printf("%s %d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), s);
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
