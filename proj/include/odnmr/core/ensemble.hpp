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
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "odnmr/core/distribution.hpp"
#include "odnmr/core/error.hpp"
#include "odnmr/core/level_scheme.hpp"
#include "odnmr/core/random.hpp"

namespace odnmr {

using Populations = std::array<double, kNumLevels>;
using BlochVector = Eigen::Vector3d; // (u, v, w) of the addressed pair, normalised to the pair population

inline Populations thermal_populations()
{
    return {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
}

// Strain correlation between optical and spin transition frequencies.
struct CorrelationModel {
    double gradient_khz_per_ghz = -4.0;
    // (optical detuning in GHz, additional spin FWHM in kHz), sorted by detuning.
    std::vector<std::pair<double, double>> broadening_profile;

    double shift_khz(double delta_opt_mhz) const { return gradient_khz_per_ghz * delta_opt_mhz * 1e-3; }

    double extra_fwhm_khz(double delta_opt_mhz) const
    {
        const auto& p = broadening_profile;
        if (p.empty()) return 0.0;
        const double x = delta_opt_mhz * 1e-3;
        if (x <= p.front().first) return p.front().second;
        if (x >= p.back().first) return p.back().second;
        for (std::size_t i = 1; i < p.size(); ++i) {
            if (x <= p[i].first) {
                const auto [x0, y0] = p[i - 1];
                const auto [x1, y1] = p[i];
                return x1 == x0 ? y1 : y0 + (y1 - y0) * (x - x0) / (x1 - x0);
            }
        }
        return p.back().second;
    }

    void validate() const
    {
        if (!std::isfinite(gradient_khz_per_ghz)) throw ConfigError("correlation: gradient must be finite");
        for (std::size_t i = 0; i < broadening_profile.size(); ++i) {
            if (broadening_profile[i].second < 0.0) {
                throw ConfigError("correlation: broadening profile entries must be >= 0");
            }
            if (i > 0 && broadening_profile[i].first < broadening_profile[i - 1].first) {
                throw ConfigError("correlation: broadening profile must be sorted by detuning");
            }
        }
    }
};

// One homogeneous sub-ensemble of ions.
struct IonClass {
    double delta_opt_mhz = 0.0;  // optical detuning from the line centre
    double delta_spin_khz = 0.0; // spin detuning from the nominal transition
    double weight = 1.0;
    Populations populations = thermal_populations();
    BlochVector bloch = BlochVector::Zero();
    Transition pair = Transition::Low;
    // Part of (populations - thermal) that relaxes on the short T1 channel.
    Populations fast_deviation{0.0, 0.0, 0.0};

    double pair_population() const
    {
        const auto [lo, hi] = levels_of(pair);
        return populations[lo] + populations[hi];
    }
};

// Restricts optical detunings to [lo, hi] (MHz); weights then follow the line density.
struct OpticalWindow {
    double lo_mhz = -10.0;
    double hi_mhz = 10.0;
};

struct EnsembleConfig {
    std::size_t n_classes = 20000;
    InhomogeneousDistribution optical_dist{LineShape::Lorentzian, 0.0, 1940.0}; // MHz
    InhomogeneousDistribution spin_dist{LineShape::Lorentzian, 0.0, 154.0};    // kHz
    CorrelationModel correlation;
    std::uint64_t rng_seed = 1;
    double isotope_fraction = 0.5;
    LevelScheme levels;
    std::optional<OpticalWindow> optical_window;

    void validate() const
    {
        if (n_classes < 1) throw ConfigError("ensemble: n_classes must be >= 1");
        optical_dist.validate();
        spin_dist.validate();
        correlation.validate();
        levels.validate();
        if (!(isotope_fraction >= 0.0 && isotope_fraction <= 1.0)) {
            throw ConfigError("ensemble: isotope_fraction must lie in [0, 1]");
        }
        if (optical_window && !(optical_window->hi_mhz >= optical_window->lo_mhz)) {
            throw ConfigError("ensemble: optical window must satisfy lo <= hi");
        }
    }
};

// Config for partition `index` of a sub-ensemble sampled in parallel.
inline EnsembleConfig partition_config(EnsembleConfig cfg, std::uint64_t index)
{
    cfg.rng_seed = derive_seed(cfg.rng_seed, {index});
    return cfg;
}

// Pair polarisation w = (p_lower - p_upper) / (p_lower + p_upper); zero for an empty pair.
inline double pair_polarization(const Populations& p, Transition t)
{
    const auto [lo, hi] = levels_of(t);
    const double n = p[lo] + p[hi];
    return n > 0.0 ? (p[lo] - p[hi]) / n : 0.0;
}

namespace detail {

inline double fractional(double x)
{
    return x - std::floor(x);
}

inline double clamp_open(double u)
{
    constexpr double eps = 1e-15;
    return std::min(std::max(u, eps), 1.0 - eps);
}

// Additive recurrence constants of the R2 low-discrepancy sequence (plastic number).
inline constexpr double kR2a1 = 0.7548776662466927;
inline constexpr double kR2a2 = 0.5698402909980532;

} // namespace detail

// Draws the ensemble as a randomised quasi-Monte Carlo point set: optical detunings
// are stratified on i/n, spin and broadening coordinates follow a randomly shifted R2
// sequence, so every contiguous block of optical classes still covers the spin line
// evenly. Classes are ordered by optical detuning.
inline std::vector<IonClass> sample_ensemble(const EnsembleConfig& cfg)
{
    cfg.validate();
    Rng rng(cfg.rng_seed);
    const double s_opt = open_unit(rng);
    const double s_spin = open_unit(rng);
    const double s_broad = open_unit(rng);

    const std::size_t n = cfg.n_classes;
    std::vector<IonClass> ions(n);
    double weight_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        IonClass& ion = ions[i];
        const double u_opt = (static_cast<double>(i) + s_opt) / static_cast<double>(n);
        if (cfg.optical_window) {
            const auto& w = *cfg.optical_window;
            ion.delta_opt_mhz = w.lo_mhz + u_opt * (w.hi_mhz - w.lo_mhz);
            ion.weight = cfg.optical_dist.pdf(ion.delta_opt_mhz);
        } else {
            ion.delta_opt_mhz = cfg.optical_dist.quantile(u_opt);
            ion.weight = 1.0;
        }
        weight_sum += ion.weight;

        const double k = static_cast<double>(i + 1);
        const double u_spin = detail::clamp_open(detail::fractional(s_spin + k * detail::kR2a1));
        const double u_broad = detail::clamp_open(detail::fractional(s_broad + k * detail::kR2a2));
        double spin = cfg.spin_dist.quantile(u_spin) + cfg.correlation.shift_khz(ion.delta_opt_mhz);
        const double extra = cfg.correlation.extra_fwhm_khz(ion.delta_opt_mhz);
        if (extra > 0.0) {
            spin += InhomogeneousDistribution{cfg.spin_dist.shape, 0.0, extra}.quantile(u_broad);
        }
        ion.delta_spin_khz = spin;
        ion.populations = thermal_populations();
        ion.pair = Transition::Low;
        ion.bloch = BlochVector(0.0, 0.0, pair_polarization(ion.populations, ion.pair));
    }
    if (weight_sum > 0.0) {
        for (auto& ion : ions) ion.weight /= weight_sum;
    } else {
        for (auto& ion : ions) ion.weight = 1.0 / static_cast<double>(n);
    }
    return ions;
}

} // namespace odnmr
