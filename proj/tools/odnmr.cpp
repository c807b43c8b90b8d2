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

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "odnmr/cli/commands.hpp"

int main(int argc, char** argv)
{
    using namespace odnmr::cli;

    CLI::App app{"Optically detected NMR simulator"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(odnmr::kVersion));

    RunFlags flags;
    std::optional<std::uint64_t> seed;
    std::string format = "csv";
    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--seed", seed, "Override the seed in the config");
        sub->add_option("--jobs,-j", flags.jobs, "Worker threads (default: available cores)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--output,-o", flags.output, "Output directory");
    };

    std::string config_path;
    auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
    run->add_option("config", config_path, "TOML config or manifest.json")->required();
    add_common(run);
    run->add_option("--format", format, "Raw data format")->check(CLI::IsMember({"csv", "json"}));

    std::optional<std::string> oracle_config;
    auto* oracle = app.add_subcommand("oracle", "Compare Monte Carlo echoes with the closed-form bath model");
    oracle->add_option("config", oracle_config, "TOML config ([oracle] and [noise] tables)");
    add_common(oracle);

    std::string sequence_path;
    auto* parse = app.add_subcommand("parse", "Parse a pulse-sequence file and print it normalised");
    parse->add_option("file", sequence_path, "Sequence file")->required();

    FitFlags fit_flags;
    std::string csv_path;
    auto* fit = app.add_subcommand("fit", "Fit a model to two columns of a CSV file");
    fit->add_option("csv", csv_path, "Input CSV with a header row")->required();
    fit->add_option("--model,-m", fit_flags.model, "Model name, e.g. Lorentzian, StretchedExponential")->required();
    fit->add_option("--x", fit_flags.x_column, "x column (default: first)");
    fit->add_option("--y", fit_flags.y_column, "y column (default: first value column)");
    fit->add_option("--sigma", fit_flags.sigma_column, "Column of 1-sigma errors for weighting");
    fit->add_option("--n-pulses", fit_flags.n_pulses, "Pulse count for the OuCpmg model");
    fit->add_flag("--all-rows", fit_flags.all_rows, "Keep repetition rows, not only means");
    fit->add_option("--output,-o", fit_flags.output, "Write fits.json to this directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsageError;
    }

    flags.seed = seed;
    flags.format = format;
    if (*run) return cmd_run(config_path, flags, std::cout, std::cerr);
    if (*oracle) return cmd_oracle(oracle_config, flags, std::cout, std::cerr);
    if (*parse) return cmd_parse(sequence_path, std::cout, std::cerr);
    if (*fit) return cmd_fit(csv_path, fit_flags, std::cout, std::cerr);
    return kUsageError;
}
