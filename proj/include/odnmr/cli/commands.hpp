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

#include <Eigen/Core>
#include <boost/version.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "odnmr/analysis/fit.hpp"
#include "odnmr/analysis/report.hpp"
#include "odnmr/core/error.hpp"
#include "odnmr/core/parallel.hpp"
#include "odnmr/experiments/oracle.hpp"
#include "odnmr/experiments/runner.hpp"
#include "odnmr/io/config.hpp"
#include "odnmr/sequence/dsl.hpp"

namespace odnmr::cli {

enum ExitCode : int { kOk = 0, kRuntimeFailure = 1, kUsageError = 2 };

struct RunFlags {
    std::optional<std::uint64_t> seed;
    std::size_t jobs = default_jobs();
    std::optional<std::string> output;
    std::string format = "csv";
};

struct FitFlags {
    std::string model;
    std::optional<std::string> x_column;
    std::optional<std::string> y_column;
    std::optional<std::string> sigma_column;
    int n_pulses = 1;
    bool all_rows = false;
    std::optional<std::string> output;
};

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw SimulationError("cannot write '" + path.string() + "'");
    f << text;
    if (!f) throw SimulationError("failed writing '" + path.string() + "'");
}

inline std::filesystem::path prepare_dir(const std::string& dir)
{
    std::filesystem::path p(dir);
    std::error_code ec;
    std::filesystem::create_directories(p, ec);
    if (ec || !std::filesystem::is_directory(p)) throw SimulationError("cannot create output directory '" + dir + "'");
    return p;
}

inline nlohmann::json versions()
{
    return {{"odnmr_sim", std::string(kVersion)},
            {"compiler", std::string(__VERSION__)},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"boost", std::to_string(BOOST_VERSION / 100000) + "." + std::to_string(BOOST_VERSION / 100 % 1000) + "." +
                          std::to_string(BOOST_VERSION % 100)},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
}

inline nlohmann::json raw_to_json(const RawTable& t)
{
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : t.rows) {
        nlohmann::json row{{"sweep_param", report_detail::number(r.sweep)},
                           {"repetition", r.repetition == RawTable::kMeanRow ? nlohmann::json("mean")
                                                                             : nlohmann::json(r.repetition)}};
        for (std::size_t c = 0; c < t.value_columns.size(); ++c) {
            row[t.value_columns[c]] = report_detail::number(r.values[c]);
        }
        rows.push_back(row);
    }
    return {{"columns", t.value_columns}, {"rows", rows}};
}

// Splits a simple CSV line; quoted fields are not supported.
inline std::vector<std::string> split_csv(const std::string& line)
{
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline std::optional<double> to_double(const std::string& s)
{
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    const char* first = s.data() + (!s.empty() && s[0] == '+' ? 1 : 0);
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

inline std::string fixed(double v)
{
    char buf[128];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed);
    return res.ec == std::errc() ? std::string(buf, res.ptr) : format_number(v);
}

} // namespace detail

inline int cmd_run(const std::string& config_path, const RunFlags& flags, std::ostream& out, std::ostream& err)
{
    RunConfig rc;
    try {
        if (flags.format != "csv" && flags.format != "json") {
            throw ConfigError("--format must be csv or json");
        }
        rc = load_run_config(config_path);
        if (!rc.experiment) throw ConfigError(config_path + ": no [experiment] table");
        if (flags.seed) rc.experiment->seed = *flags.seed;
        if (flags.output) rc.output_dir = *flags.output;
    } catch (const ConfigParseError& e) {
        err << "error: " << config_path << ": " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kUsageError;
    }

    try {
        RunOptions opts;
        opts.jobs = flags.jobs;
        opts.pulse_model = rc.pulse_model;
        const ExperimentResult result =
            run_experiment(*rc.experiment, rc.ensemble, rc.noise, rc.optics, rc.k_rabi, opts);
        const auto dir = detail::prepare_dir(rc.output_dir);
        if (flags.format == "csv") {
            detail::write_file(dir / "raw.csv", result.raw.to_csv());
        } else {
            detail::write_file(dir / "raw.json", detail::raw_to_json(result.raw).dump(2) + "\n");
        }
        nlohmann::json fits = nlohmann::json::array();
        for (const auto& f : result.fits) fits.push_back(to_json(f));
        detail::write_file(dir / "fits.json",
                           nlohmann::json{{"fits", fits}, {"summary", result.summary}}.dump(2) + "\n");
        const nlohmann::json manifest{{"command", "run"},
                                      {"config", to_json(rc)},
                                      {"seed", rc.experiment->seed},
                                      {"format", flags.format},
                                      {"jobs", flags.jobs},
                                      {"versions", detail::versions()}};
        detail::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
        out << to_string(result.kind) << ": " << result.raw.point_count() << " points written to " << dir.string()
            << "\n";
        return kOk;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        err << "error: " << to_string(rc.experiment->kind) << " run failed: " << e.what() << "\n";
        return kRuntimeFailure;
    }
}

inline int cmd_oracle(const std::optional<std::string>& config_path, const RunFlags& flags, std::ostream& out,
                      std::ostream& err)
{
    RunConfig rc;
    try {
        if (config_path) rc = load_run_config(*config_path);
        if (flags.seed) rc.oracle.seed = *flags.seed;
        if (flags.output) rc.output_dir = *flags.output;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kUsageError;
    }
    try {
        const OracleReport rep = run_oracle(rc.oracle, flags.jobs);
        const auto dir = detail::prepare_dir(rc.output_dir);
        nlohmann::json j = to_json(rep);
        j["seed"] = rc.oracle.seed;
        j["versions"] = detail::versions();
        detail::write_file(dir / "oracle_report.json", j.dump(2) + "\n");
        if (rep.inconclusive) {
            err << "oracle inconclusive: " << rep.n_trajectories << " trajectories give no error estimate\n";
            return kRuntimeFailure;
        }
        out << "oracle: " << rep.cases.size() << " cases, max |z| = " << rep.max_abs_z << "\n";
        if (!rep.passed) {
            for (const auto& c : rep.cases) {
                if (!c.pass) {
                    err << "FAIL n=" << c.n << " tau=" << c.tau_s << " s: mc=" << c.mc_visibility << " +- "
                        << c.std_error << ", analytic=" << c.analytic << ", z=" << c.z << "\n";
                }
            }
            return kRuntimeFailure;
        }
        return kOk;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        err << "error: oracle failed: " << e.what() << "\n";
        return kRuntimeFailure;
    }
}

inline int cmd_parse(const std::string& path, std::ostream& out, std::ostream& err)
{
    try {
        const std::string text = read_text_file(path);
        const PulseSequence seq = parse_sequence(text, std::filesystem::path(path).filename().string());
        out << format_sequence(seq);
        const double us = seq.total_duration_us();
        out << "events: " << seq.events.size() << "\n";
        out << "total duration: " << detail::fixed(us) << " us (" << detail::fixed(us * 1e-6) << " s)\n";
        return kOk;
    } catch (const ParseError& e) {
        err << path << ":" << e.line() << ":" << e.column() << ": error: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kUsageError;
    }
}

// Fits two columns of a CSV file. Tables with a `repetition` column (as written
// by `run`) are reduced to their mean rows unless all rows are requested.
inline int cmd_fit(const std::string& csv_path, const FitFlags& flags, std::ostream& out, std::ostream& err)
{
    FitModel model;
    std::vector<double> x, y, w;
    try {
        model.kind = model_kind_from_string(flags.model);
        model.n_pulses = flags.n_pulses;
        if (model.n_pulses < 1) throw ConfigError("--n-pulses must be >= 1");
        std::istringstream in(read_text_file(csv_path));
        std::string line;
        if (!std::getline(in, line)) throw ConfigError(csv_path + ": empty file");
        const auto header = detail::split_csv(line);
        const auto column = [&](const std::optional<std::string>& name, std::size_t fallback) -> std::size_t {
            if (!name) {
                if (fallback >= header.size()) throw ConfigError(csv_path + ": not enough columns");
                return fallback;
            }
            for (std::size_t i = 0; i < header.size(); ++i) {
                if (header[i] == *name) return i;
            }
            throw ConfigError(csv_path + ": no column '" + *name + "'");
        };
        std::optional<std::size_t> rep_col;
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == "repetition") rep_col = i;
        }
        const std::size_t xc = column(flags.x_column, 0);
        const std::size_t yc = column(flags.y_column, rep_col && *rep_col == 1 ? 2 : 1);
        const std::optional<std::size_t> sc =
            flags.sigma_column ? std::optional<std::size_t>(column(flags.sigma_column, 0)) : std::nullopt;
        std::size_t line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty() || line == "\r") continue;
            const auto cells = detail::split_csv(line);
            if (cells.size() != header.size()) {
                throw ConfigError(csv_path + ":" + std::to_string(line_no) + ": expected " +
                                  std::to_string(header.size()) + " fields");
            }
            if (rep_col && !flags.all_rows && cells[*rep_col] != "mean") continue;
            const auto xv = detail::to_double(cells[xc]);
            const auto yv = detail::to_double(cells[yc]);
            if (!xv || !yv) throw ConfigError(csv_path + ":" + std::to_string(line_no) + ": non-numeric value");
            x.push_back(*xv);
            y.push_back(*yv);
            if (sc) {
                const auto s = detail::to_double(cells[*sc]);
                if (!s || !(*s > 0.0)) throw ConfigError(csv_path + ":" + std::to_string(line_no) + ": bad sigma");
                w.push_back(1.0 / (*s * *s));
            }
        }
        if (x.size() < model.arity()) {
            throw ConfigError(csv_path + ": " + std::to_string(x.size()) + " points, model needs at least " +
                              std::to_string(model.arity()));
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kUsageError;
    }
    try {
        const FitResult f = fit_auto(model, x, y, w);
        const nlohmann::json j = to_json(f);
        if (flags.output) {
            const auto dir = detail::prepare_dir(*flags.output);
            detail::write_file(dir / "fits.json", nlohmann::json{{"fits", {j}}}.dump(2) + "\n");
        }
        out << j.dump(2) << "\n";
        if (!f.converged) err << "warning: fit did not converge\n";
        return kOk;
    } catch (const std::exception& e) {
        err << "error: fit failed: " << e.what() << "\n";
        return kRuntimeFailure;
    }
}

} // namespace odnmr::cli
