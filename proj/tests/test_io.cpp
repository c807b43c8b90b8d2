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
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>

#include "odnmr/io/config.hpp"
#include "odnmr/io/toml.hpp"

using namespace odnmr;
using nlohmann::json;

namespace fs = std::filesystem;

namespace {

RunConfig from_toml(const std::string& text) { return run_config_from_json(parse_toml(text)); }

void expect_parse_error(const std::string& text, std::size_t line, std::size_t column)
{
    try {
        parse_toml(text);
        ADD_FAILURE() << "no error for: " << text;
    } catch (const ConfigParseError& e) {
        EXPECT_EQ(e.line(), line) << e.what();
        EXPECT_EQ(e.column(), column) << e.what();
    }
}

} // namespace

TEST(Toml, Values)
{
    const auto j = parse_toml(R"(# comment
title = "a \"b\"\n"  # trailing
n = 1_000
x = -2.5e-3
flag = true
off = false
[a.b]
list = [1, 2.5,
        [3, 4], # inner
       ]
empty = []
[c]
key-with-dash = 'x'
)");
    EXPECT_EQ(j["title"], "a \"b\"\n");
    EXPECT_EQ(j["n"], 1000);
    EXPECT_TRUE(j["n"].is_number_integer());
    EXPECT_DOUBLE_EQ(j["x"].get<double>(), -2.5e-3);
    EXPECT_EQ(j["flag"], true);
    EXPECT_EQ(j["off"], false);
    EXPECT_EQ(j["a"]["b"]["list"], json::parse("[1, 2.5, [3, 4]]"));
    EXPECT_TRUE(j["a"]["b"]["empty"].is_array());
    EXPECT_EQ(j["c"]["key-with-dash"], "x");
}

TEST(Toml, Errors)
{
    expect_parse_error("a = 1\na = 2\n", 2, 1);
    expect_parse_error("x = 13ms\n", 1, 5);
    expect_parse_error("x = \"open\n", 1, 5);
    expect_parse_error("[t\nx = 1\n", 1, 3);
    expect_parse_error("x = 'open\n", 1, 5);
    expect_parse_error("n = 18446744073709551615\n", 1, 5);
    expect_parse_error("x 1\n", 1, 3);
    expect_parse_error("x = [1, 2\n", 2, 1);
    expect_parse_error("[t]\nx = 1\n[t]\ny = 2\n", 3, 1);
    EXPECT_NO_THROW(parse_toml("[t.a]\nx = 1\n[t]\ny = 2\n"));
    EXPECT_NO_THROW(parse_toml(""));
}

TEST(Config, Defaults)
{
    const RunConfig rc = from_toml("");
    EXPECT_EQ(rc.ensemble.n_classes, 20000u);
    EXPECT_DOUBLE_EQ(rc.k_rabi, 1.48);
    EXPECT_FALSE(rc.experiment.has_value());
    EXPECT_EQ(rc.pulse_model, PulseModel::Exact);
    EXPECT_DOUBLE_EQ(rc.oracle.tau_c, rc.noise.ou_tau_c);
}

TEST(Config, UnitConversions)
{
    const RunConfig rc = from_toml(R"(
[ensemble.spin_dist]
fwhm = "0.088MHz"
center = 5
[ensemble.optical_dist]
fwhm = "1.94GHz"
[ensemble.levels]
f12 = "21475kHz"
[noise]
ou_sigma = "1kHz"
ou_tau_c = "13ms"
t1_short = "4400ms"
t1_long = "120s"
[optics]
gamma_h = "0.31MHz"
t2_opt = "2130ns"
)");
    EXPECT_NEAR(rc.ensemble.spin_dist.fwhm, 88.0, 1e-12);
    EXPECT_NEAR(rc.ensemble.spin_dist.center, 5e3, 1e-9); // bare spin numbers are MHz
    EXPECT_NEAR(rc.ensemble.optical_dist.fwhm, 1940.0, 1e-9);
    EXPECT_NEAR(rc.ensemble.levels.f12_mhz, 21.475, 1e-12);
    EXPECT_NEAR(rc.noise.ou_sigma, 2.0 * std::numbers::pi * 1e3, 1e-9);
    EXPECT_NEAR(rc.noise.ou_tau_c, 0.013, 1e-15);
    EXPECT_NEAR(rc.noise.t1_short, 4.4, 1e-12);
    EXPECT_NEAR(rc.noise.t1_long, 120.0, 1e-12);
    EXPECT_THROW(from_toml("[noise]\nt1_long = 120\n"), ConfigError); // 120 us < t1_short
    EXPECT_NEAR(rc.optics.gamma_h_khz, 310.0, 1e-9);
    EXPECT_NEAR(rc.optics.t2_opt_us, 2.13, 1e-12);

    const RunConfig bare = from_toml("[noise]\nou_sigma = 26447.2\nou_tau_c = 13000\n");
    EXPECT_DOUBLE_EQ(bare.noise.ou_sigma, 26447.2);
    EXPECT_NEAR(bare.noise.ou_tau_c, 0.013, 1e-15); // bare times are us
}

TEST(Config, Rejections)
{
    EXPECT_THROW(from_toml("bogus = 1\n"), ConfigError);
    EXPECT_THROW(from_toml("[noise]\nou_tau = 1\n"), ConfigError);
    EXPECT_THROW(from_toml("[noise]\nou_tau_c = \"13 parsecs\"\n"), ConfigError);
    EXPECT_THROW(from_toml("[noise]\nou_tau_c = \"13MHz\"\n"), ConfigError);
    EXPECT_THROW(from_toml("[noise]\nou_tau_c = \"-1ms\"\n"), ConfigError);
    EXPECT_THROW(from_toml("[noise]\nmode = \"quantum\"\n"), ConfigError);
    EXPECT_THROW(from_toml("[experiment]\nseed = 3\n"), ConfigError);
    EXPECT_THROW(from_toml("[experiment]\nkind = \"Rabi\"\n[experiment.params]\nbogus = 1\n"), ConfigError);
    EXPECT_THROW(from_toml("pulse_model = \"soft\"\n"), ConfigError);
    EXPECT_THROW(from_toml("k_rabi = -1\n"), ConfigError);
    EXPECT_THROW(from_toml("[ensemble]\nn_classes = -3\n"), ConfigError);
    EXPECT_THROW(from_toml("ensemble = 3\n"), ConfigError);
    EXPECT_THROW(load_run_config("/nonexistent/odnmr.toml"), ConfigError);
}

TEST(Config, EchoRoundTripIsExact)
{
    const RunConfig rc = from_toml(R"(
k_rabi = 1.4799999999999
pulse_model = "hard"
output_dir = "out/x"
[ensemble]
n_classes = 1234
rng_seed = 99
optical_window = ["-0.3MHz", 0.7]
[ensemble.spin_dist]
shape = "Gaussian"
fwhm = "88.123456789kHz"
[ensemble.correlation]
gradient_khz_per_ghz = -4.1
broadening_profile = [[0, 0], [1.5, 12.25]]
[noise]
ou_sigma = "26447.21234rad/s"
ou_tau_c = "13.1ms"
mode = "monte_carlo"
n_trajectories = 33
dt = "0.1ms"
[oracle]
n_list = [1, 3]
analytic_sigma = 100.5
[experiment]
kind = "Cpmg"
seed = 9223372036854775807
[experiment.params]
n_list = [1, 2]
fit_bath = true
)");
    const json echo = to_json(rc);
    const RunConfig back = run_config_from_json(echo);
    EXPECT_EQ(to_json(back), echo);
    EXPECT_EQ(back.k_rabi, rc.k_rabi);
    EXPECT_EQ(back.noise.ou_sigma, rc.noise.ou_sigma);
    EXPECT_EQ(back.noise.ou_tau_c, rc.noise.ou_tau_c);
    EXPECT_EQ(back.noise.mc.dt_s, rc.noise.mc.dt_s);
    EXPECT_EQ(back.ensemble.spin_dist.fwhm, rc.ensemble.spin_dist.fwhm);
    EXPECT_EQ(back.ensemble.optical_window->lo_mhz, -0.3);
    EXPECT_EQ(back.experiment->seed, 9223372036854775807ULL);
    EXPECT_EQ(back.pulse_model, PulseModel::Hard);
    EXPECT_EQ(*back.oracle.analytic_sigma, 100.5);
    EXPECT_EQ(back.oracle.n_list, (std::vector<int>{1, 3}));
}

TEST(Config, ShippedConfigsLoad)
{
    const fs::path dir = fs::path(ODNMR_SOURCE_DIR) / "configs";
    int n = 0;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".toml") continue;
        SCOPED_TRACE(entry.path().string());
        const RunConfig rc = load_run_config(entry.path());
        EXPECT_EQ(to_json(run_config_from_json(to_json(rc))), to_json(rc));
        ++n;
    }
    EXPECT_GE(n, 5);
}

TEST(Config, ManifestLoads)
{
    const fs::path dir = fs::temp_directory_path() / "odnmr_test_io";
    fs::create_directories(dir);
    const RunConfig rc = from_toml("[experiment]\nkind = \"Rabi\"\nseed = 5\n");
    {
        std::ofstream out(dir / "manifest.json");
        out << json{{"command", "run"}, {"config", to_json(rc)}}.dump(2);
    }
    const RunConfig back = load_run_config(dir / "manifest.json");
    EXPECT_EQ(to_json(back), to_json(rc));
    {
        std::ofstream out(dir / "broken.json");
        out << "{";
    }
    EXPECT_THROW(load_run_config(dir / "broken.json"), ConfigError);
    fs::remove_all(dir);
}
