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

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>
#include <vector>

#include "odnmr/core/distribution.hpp"
#include "odnmr/core/ensemble.hpp"
#include "odnmr/core/level_scheme.hpp"
#include "odnmr/core/parallel.hpp"
#include "odnmr/core/random.hpp"

using namespace odnmr;

namespace {

double quantile_of(std::vector<double> v, double q)
{
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto i = static_cast<std::size_t>(pos);
    const double f = pos - static_cast<double>(i);
    return i + 1 < v.size() ? v[i] * (1.0 - f) + v[i + 1] * f : v[i];
}

std::vector<double> spin_detunings(const std::vector<IonClass>& ions)
{
    std::vector<double> out;
    for (const auto& ion : ions) out.push_back(ion.delta_spin_khz);
    return out;
}

} // namespace

TEST(LevelScheme, DefaultsAndNearestTransition)
{
    LevelScheme s;
    EXPECT_DOUBLE_EQ(s.f12_mhz, 21.475);
    EXPECT_DOUBLE_EQ(s.f23_mhz, 33.944);
    EXPECT_TRUE(s.excited_splittings_mhz.empty());
    EXPECT_EQ(s.nearest(21.0), Transition::Low);
    EXPECT_EQ(s.nearest(34.5), Transition::High);
    EXPECT_EQ(levels_of(Transition::Low).lower, kHalf);
    EXPECT_EQ(levels_of(Transition::High).upper, kFiveHalves);
}

TEST(LevelScheme, RejectsBadFrequencies)
{
    LevelScheme s;
    s.f12_mhz = -1.0;
    EXPECT_THROW(s.validate(), ConfigError);
    s.f12_mhz = s.f23_mhz;
    EXPECT_THROW(s.validate(), ConfigError);
    s = LevelScheme{};
    s.excited_splittings_mhz = {10.0, 0.0};
    EXPECT_THROW(s.validate(), ConfigError);
}

TEST(ThermalPopulations, EqualAndNormalised)
{
    const auto p = thermal_populations();
    for (double x : p) EXPECT_DOUBLE_EQ(x, 1.0 / 3.0);
    EXPECT_NEAR(p[0] + p[1] + p[2], 1.0, 1e-15);
    EXPECT_EQ(thermal_populations(), p);
}

TEST(Distribution, QuantileInvertsCdf)
{
    for (auto shape : {LineShape::Lorentzian, LineShape::Gaussian}) {
        InhomogeneousDistribution d{shape, 3.0, 154.0};
        for (double u : {1e-6, 0.01, 0.25, 0.5, 0.75, 0.99, 1.0 - 1e-6}) {
            EXPECT_NEAR(d.cdf(d.quantile(u)), u, 1e-9) << to_string(shape) << " u=" << u;
        }
        EXPECT_NEAR(d.quantile(0.5), 3.0, 1e-9);
    }
}

TEST(Distribution, HalfMaximumAtHalfWidth)
{
    for (auto shape : {LineShape::Lorentzian, LineShape::Gaussian}) {
        InhomogeneousDistribution d{shape, 0.0, 88.0};
        EXPECT_NEAR(d.pdf(44.0) / d.pdf(0.0), 0.5, 1e-12);
        EXPECT_NEAR(d.pdf(-44.0) / d.pdf(0.0), 0.5, 1e-12);
    }
}

TEST(Distribution, PdfIntegratesToCdf)
{
    // Simpson rule against the closed-form cdf.
    for (auto shape : {LineShape::Lorentzian, LineShape::Gaussian}) {
        InhomogeneousDistribution d{shape, 1.0, 2.0};
        const double a = -3.0, b = 4.0;
        const int n = 2000;
        const double h = (b - a) / n;
        double s = d.pdf(a) + d.pdf(b);
        for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * d.pdf(a + i * h);
        EXPECT_NEAR(s * h / 3.0, d.cdf(b) - d.cdf(a), 1e-10);
    }
}

TEST(Distribution, ShapeNamesAndValidation)
{
    EXPECT_EQ(line_shape_from_string("Gaussian"), LineShape::Gaussian);
    EXPECT_EQ(line_shape_from_string("lorentzian"), LineShape::Lorentzian);
    EXPECT_THROW(line_shape_from_string("voigt"), ConfigError);
    InhomogeneousDistribution d{LineShape::Gaussian, 0.0, 0.0};
    EXPECT_THROW(d.validate(), ConfigError);
    d.fwhm = NAN;
    EXPECT_THROW(d.validate(), ConfigError);
}

TEST(Correlation, ShiftAtOneGigahertz)
{
    EnsembleConfig cfg;
    cfg.n_classes = 1;
    cfg.spin_dist = {LineShape::Lorentzian, 0.0, 1e-12};
    cfg.optical_dist = {LineShape::Lorentzian, 0.0, 1e-12};
    cfg.correlation.gradient_khz_per_ghz = -4.0;
    cfg.optical_window = OpticalWindow{1000.0, 1000.0};
    const auto ions = sample_ensemble(cfg);
    ASSERT_EQ(ions.size(), 1u);
    EXPECT_DOUBLE_EQ(ions[0].delta_opt_mhz, 1000.0);
    EXPECT_NEAR(ions[0].delta_spin_khz, -4.0, 1e-9);
}

TEST(Correlation, ZeroGradientLeavesCentre)
{
    EnsembleConfig cfg;
    cfg.n_classes = 4001;
    cfg.correlation.gradient_khz_per_ghz = 0.0;
    cfg.optical_window = OpticalWindow{2900.0, 3000.0};
    const auto d = spin_detunings(sample_ensemble(cfg));
    EXPECT_NEAR(quantile_of(d, 0.5), 0.0, 0.5);
}

TEST(Correlation, BroadeningProfileInterpolates)
{
    CorrelationModel c;
    c.broadening_profile = {{-1.0, 10.0}, {0.0, 0.0}, {2.0, 20.0}};
    EXPECT_DOUBLE_EQ(c.extra_fwhm_khz(-5000.0), 10.0);
    EXPECT_DOUBLE_EQ(c.extra_fwhm_khz(-500.0), 5.0);
    EXPECT_DOUBLE_EQ(c.extra_fwhm_khz(1000.0), 10.0);
    EXPECT_DOUBLE_EQ(c.extra_fwhm_khz(9000.0), 20.0);
    c.broadening_profile = {{1.0, 1.0}, {0.0, 1.0}};
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Ensemble, LorentzianSpinWidthFromSamples)
{
    // For a Lorentzian the interquartile range equals the FWHM.
    EnsembleConfig cfg;
    cfg.n_classes = 100000;
    cfg.correlation.gradient_khz_per_ghz = 0.0;
    const auto d = spin_detunings(sample_ensemble(cfg));
    const double iqr = quantile_of(d, 0.75) - quantile_of(d, 0.25);
    EXPECT_NEAR(iqr, 154.0, 0.05 * 154.0);
}

TEST(Ensemble, GaussianSpinWidthFromSamples)
{
    EnsembleConfig cfg;
    cfg.n_classes = 50000;
    cfg.correlation.gradient_khz_per_ghz = 0.0;
    cfg.spin_dist = {LineShape::Gaussian, 5.0, 100.0};
    const auto d = spin_detunings(sample_ensemble(cfg));
    const double sigma = 100.0 / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    EXPECT_NEAR(quantile_of(d, 0.75) - quantile_of(d, 0.25), 2.0 * 0.6744897501960817 * sigma, 0.02 * 100.0);
    EXPECT_NEAR(quantile_of(d, 0.5), 5.0, 1.0);
}

TEST(Ensemble, WeightsNormalisedAndThermal)
{
    EnsembleConfig cfg;
    cfg.n_classes = 500;
    cfg.optical_window = OpticalWindow{-5.0, 5.0};
    const auto ions = sample_ensemble(cfg);
    double w = 0.0;
    for (const auto& ion : ions) {
        w += ion.weight;
        EXPECT_GE(ion.delta_opt_mhz, -5.0);
        EXPECT_LE(ion.delta_opt_mhz, 5.0);
        EXPECT_EQ(ion.populations, thermal_populations());
        EXPECT_EQ(ion.pair, Transition::Low);
        EXPECT_DOUBLE_EQ(ion.bloch.norm(), 0.0);
    }
    EXPECT_NEAR(w, 1.0, 1e-12);
}

TEST(Ensemble, SeededAndReproducible)
{
    EnsembleConfig cfg;
    cfg.n_classes = 200;
    const auto a = sample_ensemble(cfg);
    const auto b = sample_ensemble(cfg);
    cfg.rng_seed = 2;
    const auto c = sample_ensemble(cfg);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].delta_opt_mhz, b[i].delta_opt_mhz);
        EXPECT_EQ(a[i].delta_spin_khz, b[i].delta_spin_khz);
    }
    EXPECT_NE(a[7].delta_spin_khz, c[7].delta_spin_khz);
}

TEST(Ensemble, ValidationErrors)
{
    EnsembleConfig cfg;
    cfg.n_classes = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = EnsembleConfig{};
    cfg.isotope_fraction = 1.5;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = EnsembleConfig{};
    cfg.optical_window = OpticalWindow{1.0, -1.0};
    EXPECT_THROW(sample_ensemble(cfg), ConfigError);
}

TEST(PairPolarization, Definition)
{
    const Populations p{0.5, 0.3, 0.2};
    EXPECT_NEAR(pair_polarization(p, Transition::Low), 0.2 / 0.8, 1e-15);
    EXPECT_NEAR(pair_polarization(p, Transition::High), 0.1 / 0.5, 1e-15);
    EXPECT_EQ(pair_polarization({1.0, 0.0, 0.0}, Transition::High), 0.0);
}

TEST(Random, DerivedSeedsDistinct)
{
    std::set<std::uint64_t> seen;
    for (std::uint64_t s = 0; s < 20; ++s) {
        for (std::uint64_t i = 0; i < 50; ++i) seen.insert(derive_seed(s, {i}));
    }
    EXPECT_EQ(seen.size(), 1000u);
    EXPECT_EQ(derive_seed(3, {1, 2}), derive_seed(3, {1, 2}));
    EXPECT_NE(derive_seed(3, {1, 2}), derive_seed(3, {2, 1}));
    EXPECT_EQ(partition_config(EnsembleConfig{}, 4).rng_seed, derive_seed(1, {4}));
}

TEST(Random, OpenUnitStaysInside)
{
    Rng rng(5);
    double lo = 1.0, hi = 0.0, sum = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double u = open_unit(rng);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
        sum += u;
    }
    EXPECT_GT(lo, 0.0);
    EXPECT_LT(hi, 1.0);
    EXPECT_NEAR(sum / 100000.0, 0.5, 0.005);
}

TEST(Parallel, VisitsEveryIndexOnce)
{
    for (std::size_t jobs : {1u, 3u, 8u}) {
        std::vector<int> hits(1000, 0);
        parallel_for(hits.size(), jobs, [&](std::size_t i) { hits[i] += 1; });
        EXPECT_EQ(std::accumulate(hits.begin(), hits.end(), 0), 1000);
        EXPECT_EQ(*std::min_element(hits.begin(), hits.end()), 1);
    }
}

TEST(Parallel, PropagatesExceptions)
{
    EXPECT_THROW(parallel_for(100, 4,
                              [](std::size_t i) {
                                  if (i == 37) throw std::runtime_error("boom");
                              }),
                 std::runtime_error);
    EXPECT_GE(default_jobs(), 1u);
}
