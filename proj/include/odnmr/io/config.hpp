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
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "odnmr/core/ensemble.hpp"
#include "odnmr/core/error.hpp"
#include "odnmr/dynamics/models.hpp"
#include "odnmr/experiments/oracle.hpp"
#include "odnmr/experiments/spec.hpp"
#include "odnmr/io/toml.hpp"
#include "odnmr/sequence/builders.hpp"

// Run configuration files.
//
// Bare numbers are read as MHz (frequencies), us (times) and W (powers); the
// bath coupling as rad/s. Strings such as "13ms", "1.94GHz", "12kHz" or
// "26447rad/s" carry their own unit. A bath coupling in Hz/kHz is a linewidth b
// and becomes sigma = 2 pi b.

namespace odnmr {

inline constexpr std::string_view kVersion = "0.1.0";

enum class Dim { Frequency, Time, Angular };

namespace config_detail {

struct Unit {
    std::string_view name;
    Dim dim;
    double si; // Hz, s or rad/s
};

inline constexpr std::array<Unit, 9> kUnits{{
    {"Hz", Dim::Frequency, 1.0},
    {"kHz", Dim::Frequency, 1e3},
    {"MHz", Dim::Frequency, 1e6},
    {"GHz", Dim::Frequency, 1e9},
    {"ns", Dim::Time, 1e-9},
    {"us", Dim::Time, 1e-6},
    {"ms", Dim::Time, 1e-3},
    {"s", Dim::Time, 1.0},
    {"rad/s", Dim::Angular, 1.0},
}};

inline const Unit* find_unit(std::string_view name, Dim dim)
{
    for (const auto& u : kUnits) {
        if (u.name == name && u.dim == dim) return &u;
    }
    return nullptr;
}

inline std::string fmt(double v)
{
    std::array<char, 64> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

inline std::string with_unit(double v, std::string_view unit)
{
    return fmt(v) + std::string(unit);
}

// Reads an object field by field and rejects leftovers.
class Table {
public:
    Table(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) throw ConfigError((path_.empty() ? std::string("config") : path_) + ": expected a table");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const nlohmann::json& raw(const std::string& key)
    {
        used_.insert(key);
        return j_.at(key);
    }

    std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    double number(const std::string& key, double fallback)
    {
        if (!has(key)) return fallback;
        const auto& v = raw(key);
        if (!v.is_number()) throw ConfigError(name(key) + ": expected a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw ConfigError(name(key) + ": must be finite");
        return d;
    }

    std::uint64_t integer(const std::string& key, std::uint64_t fallback)
    {
        if (!has(key)) return fallback;
        const auto& v = raw(key);
        if (v.is_number_unsigned()) return v.get<std::uint64_t>();
        if (!v.is_number_integer() || v.get<long long>() < 0) {
            throw ConfigError(name(key) + ": expected a non-negative integer");
        }
        return static_cast<std::uint64_t>(v.get<long long>());
    }

    std::string string(const std::string& key, std::string fallback)
    {
        if (!has(key)) return fallback;
        const auto& v = raw(key);
        if (!v.is_string()) throw ConfigError(name(key) + ": expected a string");
        return v.get<std::string>();
    }

    // `native` and `bare` are SI scales of the stored value and of unsuffixed numbers.
    double quantity(const std::string& key, double fallback, Dim dim, double native, double bare)
    {
        if (!has(key)) return fallback;
        return parse_quantity(raw(key), name(key), dim, native, bare);
    }

    Table sub(const std::string& key)
    {
        used_.insert(key);
        return Table(j_.at(key), name(key));
    }

    void finish() const
    {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!used_.count(it.key())) throw ConfigError("unknown key '" + name(it.key()) + "'");
        }
    }

    static double parse_quantity(const nlohmann::json& v, const std::string& what, Dim dim, double native, double bare)
    {
        if (v.is_number()) {
            const double d = v.get<double>();
            if (!std::isfinite(d)) throw ConfigError(what + ": must be finite");
            return bare == native ? d : d * bare / native;
        }
        if (!v.is_string()) throw ConfigError(what + ": expected a number or a string with unit");
        const std::string s = v.get<std::string>();
        double d = 0.0;
        const char* first = s.data() + (!s.empty() && s[0] == '+' ? 1 : 0);
        const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), d);
        if (ec != std::errc() || ptr == first || !std::isfinite(d)) {
            throw ConfigError(what + ": cannot read quantity '" + s + "'");
        }
        std::string_view unit(ptr, static_cast<std::size_t>(s.data() + s.size() - ptr));
        while (!unit.empty() && unit.front() == ' ') unit.remove_prefix(1);
        if (dim == Dim::Angular) {
            if (unit == "rad/s" || unit.empty()) return d;
            if (const Unit* u = find_unit(unit, Dim::Frequency)) return 2.0 * std::numbers::pi * u->si * d;
            throw ConfigError(what + ": unknown unit '" + std::string(unit) + "' (use rad/s, Hz or kHz)");
        }
        if (unit.empty()) return bare == native ? d : d * bare / native;
        const Unit* u = find_unit(unit, dim);
        if (!u) throw ConfigError(what + ": unknown unit '" + std::string(unit) + "' in '" + s + "'");
        return u->si == native ? d : d * u->si / native;
    }

private:
    const nlohmann::json& j_;
    std::string path_;
    std::set<std::string> used_;
};

} // namespace config_detail

struct RunConfig {
    EnsembleConfig ensemble;
    NoiseModel noise;
    OpticalModel optics;
    double k_rabi = kDefaultRabiKhzPerSqrtW;
    std::optional<ExperimentSpec> experiment;
    PulseModel pulse_model = PulseModel::Exact;
    std::string output_dir = "out";
    OracleSettings oracle;

    void validate() const
    {
        ensemble.validate();
        noise.validate();
        optics.validate();
        if (!(k_rabi > 0.0) || !std::isfinite(k_rabi)) throw ConfigError("k_rabi must be > 0");
        if (experiment) resolve_params(*experiment);
        oracle.validate();
    }
};

namespace config_detail {

inline InhomogeneousDistribution read_distribution(Table t, InhomogeneousDistribution d, double native)
{
    d.shape = line_shape_from_string(t.string("shape", to_string(d.shape)));
    d.center = t.quantity("center", d.center, Dim::Frequency, native, 1e6);
    d.fwhm = t.quantity("fwhm", d.fwhm, Dim::Frequency, native, 1e6);
    t.finish();
    return d;
}

inline std::vector<double> number_list(const nlohmann::json& v, const std::string& what)
{
    if (!v.is_array()) throw ConfigError(what + ": expected an array");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number() || !std::isfinite(x.get<double>())) throw ConfigError(what + ": expected numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

inline void read_ensemble(Table t, EnsembleConfig& e)
{
    e.n_classes = t.integer("n_classes", e.n_classes);
    e.rng_seed = t.integer("rng_seed", e.rng_seed);
    e.isotope_fraction = t.number("isotope_fraction", e.isotope_fraction);
    if (t.has("optical_dist")) e.optical_dist = read_distribution(t.sub("optical_dist"), e.optical_dist, 1e6);
    if (t.has("spin_dist")) e.spin_dist = read_distribution(t.sub("spin_dist"), e.spin_dist, 1e3);
    if (t.has("optical_window")) {
        const std::string what = t.name("optical_window");
        const auto& w = t.raw("optical_window");
        if (!w.is_array() || w.size() != 2) throw ConfigError(what + ": expected [lo, hi]");
        e.optical_window = OpticalWindow{Table::parse_quantity(w[0], what, Dim::Frequency, 1e6, 1e6),
                                         Table::parse_quantity(w[1], what, Dim::Frequency, 1e6, 1e6)};
    }
    if (t.has("levels")) {
        Table l = t.sub("levels");
        e.levels.f12_mhz = l.quantity("f12", e.levels.f12_mhz, Dim::Frequency, 1e6, 1e6);
        e.levels.f23_mhz = l.quantity("f23", e.levels.f23_mhz, Dim::Frequency, 1e6, 1e6);
        if (l.has("excited_splittings")) {
            const std::string what = l.name("excited_splittings");
            const auto& arr = l.raw("excited_splittings");
            if (!arr.is_array()) throw ConfigError(what + ": expected an array");
            e.levels.excited_splittings_mhz.clear();
            for (const auto& x : arr) {
                e.levels.excited_splittings_mhz.push_back(Table::parse_quantity(x, what, Dim::Frequency, 1e6, 1e6));
            }
        }
        l.finish();
    }
    if (t.has("correlation")) {
        Table c = t.sub("correlation");
        e.correlation.gradient_khz_per_ghz = c.number("gradient_khz_per_ghz", e.correlation.gradient_khz_per_ghz);
        if (c.has("broadening_profile")) {
            const std::string what = c.name("broadening_profile");
            const auto& arr = c.raw("broadening_profile");
            if (!arr.is_array()) throw ConfigError(what + ": expected an array of [ghz, khz] pairs");
            e.correlation.broadening_profile.clear();
            for (const auto& p : arr) {
                const auto v = number_list(p, what);
                if (v.size() != 2) throw ConfigError(what + ": entries are [ghz, khz]");
                e.correlation.broadening_profile.emplace_back(v[0], v[1]);
            }
        }
        c.finish();
    }
    t.finish();
}

inline NoiseMode noise_mode_from_string(const std::string& s)
{
    if (s == "analytic") return NoiseMode::Analytic;
    if (s == "monte_carlo") return NoiseMode::MonteCarlo;
    throw ConfigError("noise.mode: expected 'analytic' or 'monte_carlo', got '" + s + "'");
}

inline PulseModel pulse_model_from_string(const std::string& s)
{
    if (s == "exact") return PulseModel::Exact;
    if (s == "hard") return PulseModel::Hard;
    throw ConfigError("pulse_model: expected 'exact' or 'hard', got '" + s + "'");
}

inline void read_noise(Table t, NoiseModel& n)
{
    n.ou_sigma = t.quantity("ou_sigma", n.ou_sigma, Dim::Angular, 1.0, 1.0);
    n.ou_tau_c = t.quantity("ou_tau_c", n.ou_tau_c, Dim::Time, 1.0, 1e-6);
    n.t1_short = t.quantity("t1_short", n.t1_short, Dim::Time, 1.0, 1e-6);
    n.t1_long = t.quantity("t1_long", n.t1_long, Dim::Time, 1.0, 1e-6);
    n.t1_weight = t.number("t1_weight", n.t1_weight);
    n.mode = noise_mode_from_string(t.string("mode", n.mode == NoiseMode::Analytic ? "analytic" : "monte_carlo"));
    n.mc.n_trajectories = t.integer("n_trajectories", n.mc.n_trajectories);
    n.mc.dt_s = t.quantity("dt", n.mc.dt_s, Dim::Time, 1.0, 1e-6);
    t.finish();
}

inline void read_optics(Table t, OpticalModel& o)
{
    o.gamma_h_khz = t.quantity("gamma_h", o.gamma_h_khz, Dim::Frequency, 1e3, 1e6);
    o.t2_opt_us = t.quantity("t2_opt", o.t2_opt_us, Dim::Time, 1e-6, 1e-6);
    o.t2_star_opt_us = t.quantity("t2_star_opt", o.t2_star_opt_us, Dim::Time, 1e-6, 1e-6);
    o.pump_efficiency = t.number("pump_efficiency", o.pump_efficiency);
    const auto lvl = t.integer("pumped_level", static_cast<std::uint64_t>(o.pumped_level));
    if (lvl >= static_cast<std::uint64_t>(kNumLevels)) throw ConfigError("optics.pumped_level must be 0, 1 or 2");
    o.pumped_level = static_cast<int>(lvl);
    if (t.has("branching")) {
        const auto& b = t.raw("branching");
        if (!b.is_array() || b.size() != static_cast<std::size_t>(kNumLevels)) {
            throw ConfigError("optics.branching: expected a 3x3 matrix");
        }
        for (int i = 0; i < kNumLevels; ++i) {
            const auto row = number_list(b[static_cast<std::size_t>(i)], "optics.branching");
            if (row.size() != static_cast<std::size_t>(kNumLevels)) {
                throw ConfigError("optics.branching: expected a 3x3 matrix");
            }
            for (int k = 0; k < kNumLevels; ++k) o.branching[i][k] = row[static_cast<std::size_t>(k)];
        }
    }
    t.finish();
}

inline void read_oracle(Table t, OracleSettings& o)
{
    o.sigma = t.quantity("sigma", o.sigma, Dim::Angular, 1.0, 1.0);
    o.tau_c = t.quantity("tau_c", o.tau_c, Dim::Time, 1.0, 1e-6);
    o.n_trajectories = t.integer("n_trajectories", o.n_trajectories);
    if (t.has("n_list")) {
        o.n_list.clear();
        for (double v : number_list(t.raw("n_list"), "oracle.n_list")) {
            if (v != std::floor(v) || v < 1 || v > 1e6) throw ConfigError("oracle.n_list: expected positive integers");
            o.n_list.push_back(static_cast<int>(v));
        }
    }
    o.points = t.integer("points", o.points);
    o.tau_min_fraction = t.number("tau_min_fraction", o.tau_min_fraction);
    o.tau_max_fraction = t.number("tau_max_fraction", o.tau_max_fraction);
    o.z_threshold = t.number("z_threshold", o.z_threshold);
    if (t.has("analytic_sigma")) {
        o.analytic_sigma = Table::parse_quantity(t.raw("analytic_sigma"), "oracle.analytic_sigma", Dim::Angular, 1.0, 1.0);
    }
    o.seed = t.integer("seed", o.seed);
    o.rf_power_w = t.number("rf_power_w", o.rf_power_w);
    t.finish();
}

} // namespace config_detail

// Builds a RunConfig from a parsed document (TOML tables or a manifest's "config").
inline RunConfig run_config_from_json(const nlohmann::json& doc)
{
    using config_detail::Table;
    RunConfig rc;
    Table t(doc, "");
    rc.k_rabi = t.number("k_rabi", rc.k_rabi);
    rc.output_dir = t.string("output_dir", rc.output_dir);
    rc.pulse_model = config_detail::pulse_model_from_string(
        t.string("pulse_model", rc.pulse_model == PulseModel::Exact ? "exact" : "hard"));
    if (t.has("ensemble")) config_detail::read_ensemble(t.sub("ensemble"), rc.ensemble);
    if (t.has("noise")) config_detail::read_noise(t.sub("noise"), rc.noise);
    if (t.has("optics")) config_detail::read_optics(t.sub("optics"), rc.optics);
    rc.oracle.tau_c = rc.noise.ou_tau_c;
    rc.oracle.sigma = rc.noise.ou_sigma;
    rc.oracle.n_trajectories = rc.noise.mc.n_trajectories;
    rc.oracle.k_rabi = rc.k_rabi;
    if (t.has("oracle")) config_detail::read_oracle(t.sub("oracle"), rc.oracle);
    if (t.has("experiment")) {
        Table e = t.sub("experiment");
        ExperimentSpec spec;
        const std::string kind = e.string("kind", "");
        if (kind.empty()) throw ConfigError("experiment.kind is required");
        spec.kind = experiment_kind_from_string(kind);
        spec.seed = e.integer("seed", spec.seed);
        spec.params = e.has("params") ? e.raw("params") : nlohmann::json::object();
        if (!spec.params.is_object()) throw ConfigError("experiment.params: expected a table");
        e.finish();
        rc.experiment = spec;
    }
    t.finish();
    rc.validate();
    return rc;
}

// Canonical echo. Quantities keep their internal units and shortest round-trip
// digits, so reading the echo back reproduces the config bit for bit.
inline nlohmann::json to_json(const RunConfig& rc)
{
    using config_detail::with_unit;
    using nlohmann::json;
    const auto dist = [](const InhomogeneousDistribution& d, std::string_view unit) {
        return json{{"shape", to_string(d.shape)}, {"center", with_unit(d.center, unit)}, {"fwhm", with_unit(d.fwhm, unit)}};
    };
    const auto& e = rc.ensemble;
    json ens{{"n_classes", e.n_classes},
             {"rng_seed", e.rng_seed},
             {"isotope_fraction", e.isotope_fraction},
             {"optical_dist", dist(e.optical_dist, "MHz")},
             {"spin_dist", dist(e.spin_dist, "kHz")}};
    if (e.optical_window) {
        ens["optical_window"] =
            json::array({with_unit(e.optical_window->lo_mhz, "MHz"), with_unit(e.optical_window->hi_mhz, "MHz")});
    }
    json splittings = json::array();
    for (double s : e.levels.excited_splittings_mhz) splittings.push_back(with_unit(s, "MHz"));
    ens["levels"] = {{"f12", with_unit(e.levels.f12_mhz, "MHz")},
                     {"f23", with_unit(e.levels.f23_mhz, "MHz")},
                     {"excited_splittings", splittings}};
    json profile = json::array();
    for (const auto& [g, k] : e.correlation.broadening_profile) profile.push_back({g, k});
    ens["correlation"] = {{"gradient_khz_per_ghz", e.correlation.gradient_khz_per_ghz}, {"broadening_profile", profile}};

    const auto& n = rc.noise;
    json noise{{"ou_sigma", with_unit(n.ou_sigma, "rad/s")},
               {"ou_tau_c", with_unit(n.ou_tau_c, "s")},
               {"t1_short", with_unit(n.t1_short, "s")},
               {"t1_long", with_unit(n.t1_long, "s")},
               {"t1_weight", n.t1_weight},
               {"mode", n.mode == NoiseMode::Analytic ? "analytic" : "monte_carlo"},
               {"n_trajectories", n.mc.n_trajectories},
               {"dt", with_unit(n.mc.dt_s, "s")}};

    const auto& o = rc.optics;
    json branching = json::array();
    for (const auto& row : o.branching) branching.push_back(json(std::vector<double>(row.begin(), row.end())));
    json optics{{"gamma_h", with_unit(o.gamma_h_khz, "kHz")},
                {"t2_opt", with_unit(o.t2_opt_us, "us")},
                {"t2_star_opt", with_unit(o.t2_star_opt_us, "us")},
                {"pump_efficiency", o.pump_efficiency},
                {"pumped_level", o.pumped_level},
                {"branching", branching}};

    const auto& q = rc.oracle;
    json oracle{{"sigma", with_unit(q.sigma, "rad/s")},
                {"tau_c", with_unit(q.tau_c, "s")},
                {"n_trajectories", q.n_trajectories},
                {"n_list", q.n_list},
                {"points", q.points},
                {"tau_min_fraction", q.tau_min_fraction},
                {"tau_max_fraction", q.tau_max_fraction},
                {"z_threshold", q.z_threshold},
                {"seed", q.seed},
                {"rf_power_w", q.rf_power_w}};
    if (q.analytic_sigma) oracle["analytic_sigma"] = with_unit(*q.analytic_sigma, "rad/s");

    json out{{"k_rabi", rc.k_rabi},
             {"output_dir", rc.output_dir},
             {"pulse_model", rc.pulse_model == PulseModel::Exact ? "exact" : "hard"},
             {"ensemble", ens},
             {"noise", noise},
             {"optics", optics},
             {"oracle", oracle}};
    if (rc.experiment) {
        out["experiment"] = {{"kind", to_string(rc.experiment->kind)},
                             {"seed", rc.experiment->seed},
                             {"params", rc.experiment->params}};
    }
    return out;
}

inline std::string read_text_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Loads a TOML config, or a manifest.json written by a previous run.
inline RunConfig load_run_config(const std::filesystem::path& path)
{
    const std::string text = read_text_file(path);
    if (path.extension() == ".json") {
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError(path.string() + ": " + e.what());
        }
        if (doc.is_object() && doc.contains("config")) return run_config_from_json(doc.at("config"));
        return run_config_from_json(doc);
    }
    return run_config_from_json(parse_toml(text));
}

} // namespace odnmr
