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
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "odnmr/core/error.hpp"

namespace odnmr {

enum class ExperimentKind {
    PleScan,
    Shb,
    OpticalFid,
    PhotonEcho,
    PitT1,
    OdnmrScan,
    SpinHoleburn,
    CorrelationScan,
    Rabi,
    RabiPowerSweep,
    HahnEcho,
    Cpmg,
    ScalingStudy,
};

inline constexpr std::array<std::pair<ExperimentKind, std::string_view>, 13> kExperimentNames{{
    {ExperimentKind::PleScan, "PleScan"},
    {ExperimentKind::Shb, "Shb"},
    {ExperimentKind::OpticalFid, "OpticalFid"},
    {ExperimentKind::PhotonEcho, "PhotonEcho"},
    {ExperimentKind::PitT1, "PitT1"},
    {ExperimentKind::OdnmrScan, "OdnmrScan"},
    {ExperimentKind::SpinHoleburn, "SpinHoleburn"},
    {ExperimentKind::CorrelationScan, "CorrelationScan"},
    {ExperimentKind::Rabi, "Rabi"},
    {ExperimentKind::RabiPowerSweep, "RabiPowerSweep"},
    {ExperimentKind::HahnEcho, "HahnEcho"},
    {ExperimentKind::Cpmg, "Cpmg"},
    {ExperimentKind::ScalingStudy, "ScalingStudy"},
}};

inline std::string to_string(ExperimentKind k)
{
    for (const auto& [kind, name] : kExperimentNames) {
        if (kind == k) return std::string(name);
    }
    return "?";
}

inline ExperimentKind experiment_kind_from_string(std::string_view name)
{
    for (const auto& [kind, n] : kExperimentNames) {
        if (n == name) return kind;
    }
    throw ConfigError("unknown experiment kind '" + std::string(name) + "'");
}

enum class ParamType { Number, Integer, NumberList, IntegerList, Bool, String };

struct ParamSpec {
    ParamType type;
    nlohmann::json default_value;
};

using ParamSchema = std::map<std::string, ParamSpec>;

struct ExperimentSpec {
    ExperimentKind kind = ExperimentKind::Rabi;
    nlohmann::json params = nlohmann::json::object();
    std::uint64_t seed = 1;
};

namespace spec_detail {

inline ParamSpec num(double v) { return {ParamType::Number, v}; }
inline ParamSpec integer(long long v) { return {ParamType::Integer, v}; }
inline ParamSpec nums(std::vector<double> v) { return {ParamType::NumberList, v}; }
inline ParamSpec ints(std::vector<long long> v) { return {ParamType::IntegerList, v}; }
inline ParamSpec str(std::string v) { return {ParamType::String, v}; }

inline void add_common(ParamSchema& s)
{
    s["repetitions"] = integer(5);
    s["readout_noise"] = num(0.0); // relative Gaussian noise per repetition
    s["window_mhz"] = num(1.0);    // half-width of the simulated optical window around the pit
}

} // namespace spec_detail

inline ParamSchema experiment_schema(ExperimentKind kind)
{
    using namespace spec_detail;
    ParamSchema s;
    add_common(s);
    switch (kind) {
    case ExperimentKind::PleScan:
        s["span_mhz"] = num(6000.0);
        s["points"] = integer(41);
        s["readout_us"] = num(100.0);
        break;
    case ExperimentKind::Shb:
        s["span_mhz"] = num(3.0);
        s["points"] = integer(41);
        s["burn_power"] = num(0.05);
        s["burn_duration_us"] = num(1000.0);
        s["readout_us"] = num(100.0);
        break;
    case ExperimentKind::OpticalFid:
        s["t_max_us"] = num(4.0);
        s["points"] = integer(81);
        s["f_het_mhz"] = num(2.0);
        break;
    case ExperimentKind::PhotonEcho:
        s["two_tau_min_us"] = num(0.2);
        s["two_tau_max_us"] = num(8.0);
        s["points"] = integer(41);
        break;
    case ExperimentKind::PitT1:
        s["wait_min_s"] = num(0.1);
        s["wait_max_s"] = num(600.0);
        s["points"] = integer(40);
        break;
    case ExperimentKind::OdnmrScan:
        s["center_mhz"] = num(21.475);
        s["span_mhz"] = num(0.8);
        s["points"] = integer(41);
        s["rf_power_w"] = num(0.01);
        s["rf_duration_us"] = num(1000.0);
        s["fit_shape"] = str("Lorentzian");
        break;
    case ExperimentKind::SpinHoleburn:
        s["burn_mhz"] = num(21.475);
        s["burn_power_w"] = num(92.0);
        s["span_mhz"] = num(0.1);
        s["points"] = integer(41);
        s["scan_power_w"] = num(0.01);
        s["scan_duration_us"] = num(1000.0);
        break;
    case ExperimentKind::CorrelationScan:
        s["detunings_ghz"] = nums({-2.91, -1.94, -0.97, 0.0, 0.97, 1.94, 2.91});
        s["center_mhz"] = num(21.475);
        s["span_mhz"] = num(0.8);
        s["points"] = integer(41);
        s["rf_power_w"] = num(0.01);
        s["rf_duration_us"] = num(1000.0);
        break;
    case ExperimentKind::Rabi:
        s["frequency_mhz"] = num(21.475);
        s["rf_power_w"] = num(92.0);
        s["duration_min_us"] = num(0.0); // 0 selects duration_max_us / points
        s["duration_max_us"] = num(0.0); // 0 selects `periods` Rabi periods
        s["periods"] = num(6.0);
        s["points"] = integer(40);
        break;
    case ExperimentKind::RabiPowerSweep:
        s["frequency_mhz"] = num(21.475);
        s["powers_w"] = nums({6.0, 23.0, 52.0, 92.0});
        s["duration_min_us"] = num(0.0); // 0 selects duration_max_us / points
        s["duration_max_us"] = num(0.0); // 0 selects `periods` Rabi periods
        s["periods"] = num(6.0);
        s["points"] = integer(40);
        break;
    case ExperimentKind::HahnEcho:
        s["frequency_mhz"] = num(21.475);
        s["rf_power_w"] = num(92.0);
        s["tau_min_us"] = num(0.0); // 0 selects a grid around the expected decay
        s["tau_max_us"] = num(0.0);
        s["points"] = integer(40);
        s["pi_phase_deg"] = num(0.0);
        break;
    case ExperimentKind::Cpmg:
        s["frequency_mhz"] = num(21.475);
        s["rf_power_w"] = num(92.0);
        s["n_list"] = ints({1, 2, 4, 8});
        s["t_max_ms"] = num(0.0); // 0 selects per-N grids around the expected decay
        s["points"] = integer(40);
        s["fit_bath"] = {ParamType::Bool, false};
        break;
    case ExperimentKind::ScalingStudy:
        s["n_list"] = ints({1, 2, 4, 8, 16, 32});
        s["points"] = integer(60);
        break;
    }
    return s;
}

namespace spec_detail {

inline bool matches(const nlohmann::json& v, ParamType t)
{
    switch (t) {
    case ParamType::Number: return v.is_number();
    case ParamType::Integer: return v.is_number_integer();
    case ParamType::Bool: return v.is_boolean();
    case ParamType::String: return v.is_string();
    case ParamType::NumberList:
    case ParamType::IntegerList:
        if (!v.is_array() || v.empty()) return false;
        for (const auto& e : v) {
            if (t == ParamType::NumberList ? !e.is_number() : !e.is_number_integer()) return false;
        }
        return true;
    }
    return false;
}

inline const char* type_name(ParamType t)
{
    switch (t) {
    case ParamType::Number: return "number";
    case ParamType::Integer: return "integer";
    case ParamType::NumberList: return "non-empty number list";
    case ParamType::IntegerList: return "non-empty integer list";
    case ParamType::Bool: return "boolean";
    case ParamType::String: return "string";
    }
    return "?";
}

} // namespace spec_detail

// Checks spec.params against the kind's schema and returns them with defaults filled in.
inline nlohmann::json resolve_params(const ExperimentSpec& spec)
{
    if (!spec.params.is_object()) throw ConfigError("experiment parameters must be a table");
    const ParamSchema schema = experiment_schema(spec.kind);
    const std::string kind = to_string(spec.kind);
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [key, value] : spec.params.items()) {
        const auto it = schema.find(key);
        if (it == schema.end()) throw ConfigError(kind + ": unknown parameter '" + key + "'");
        if (!spec_detail::matches(value, it->second.type)) {
            throw ConfigError(kind + ": parameter '" + key + "' must be a " + spec_detail::type_name(it->second.type));
        }
        if (value.is_number() && !std::isfinite(value.get<double>())) {
            throw ConfigError(kind + ": parameter '" + key + "' must be finite");
        }
        out[key] = value;
    }
    for (const auto& [key, ps] : schema) {
        if (!out.contains(key)) out[key] = ps.default_value;
    }
    if (out["repetitions"].get<long long>() < 1) throw ConfigError(kind + ": repetitions must be >= 1");
    if (out["readout_noise"].get<double>() < 0.0) throw ConfigError(kind + ": readout_noise must be >= 0");
    if (out["window_mhz"].get<double>() <= 0.0) throw ConfigError(kind + ": window_mhz must be > 0");
    if (out.contains("points") && out["points"].get<long long>() < 2) throw ConfigError(kind + ": points must be >= 2");
    return out;
}

} // namespace odnmr
