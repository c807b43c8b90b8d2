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

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <string>
#include <string_view>

#include <boost/math/special_functions/erf.hpp>

#include "odnmr/core/error.hpp"

namespace odnmr {

enum class LineShape { Lorentzian, Gaussian };

inline std::string to_string(LineShape s)
{
    return s == LineShape::Lorentzian ? "lorentzian" : "gaussian";
}

inline LineShape line_shape_from_string(std::string_view name)
{
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "lorentzian") return LineShape::Lorentzian;
    if (lower == "gaussian") return LineShape::Gaussian;
    throw ConfigError("unknown line shape '" + std::string(name) + "'");
}

inline constexpr double kFwhmToSigma = 0.42466090014400953; // 1 / (2 sqrt(2 ln 2))

// A symmetric inhomogeneous line. `center` and `fwhm` share whatever unit the
// owner uses (MHz for the optical line, kHz for the spin line).
struct InhomogeneousDistribution {
    LineShape shape = LineShape::Lorentzian;
    double center = 0.0;
    double fwhm = 1.0;

    void validate() const
    {
        if (!(fwhm > 0.0) || !std::isfinite(fwhm)) {
            throw ConfigError("distribution: fwhm must be positive and finite");
        }
        if (!std::isfinite(center)) {
            throw ConfigError("distribution: center must be finite");
        }
    }

    // Inverse CDF, u in (0, 1).
    double quantile(double u) const
    {
        if (shape == LineShape::Lorentzian) {
            return center + 0.5 * fwhm * std::tan(std::numbers::pi * (u - 0.5));
        }
        const double sigma = fwhm * kFwhmToSigma;
        const double z = u < 0.5 ? -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * u)
                                 : std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * (1.0 - u));
        return center + sigma * z;
    }

    double cdf(double x) const
    {
        if (shape == LineShape::Lorentzian) {
            return 0.5 + std::atan((x - center) / (0.5 * fwhm)) / std::numbers::pi;
        }
        const double sigma = fwhm * kFwhmToSigma;
        return 0.5 * std::erfc(-(x - center) / (sigma * std::numbers::sqrt2));
    }

    double pdf(double x) const
    {
        if (shape == LineShape::Lorentzian) {
            const double hw = 0.5 * fwhm;
            const double d = (x - center) / hw;
            return 1.0 / (std::numbers::pi * hw * (1.0 + d * d));
        }
        const double sigma = fwhm * kFwhmToSigma;
        const double d = (x - center) / sigma;
        return std::exp(-0.5 * d * d) / (sigma * std::sqrt(2.0 * std::numbers::pi));
    }
};

} // namespace odnmr
