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

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "odnmr/core/random.hpp"
#include "odnmr/dynamics/models.hpp"

namespace odnmr {

// Samples delta(k dt), k = 0..floor(duration/dt), of a stationary OU process
// with standard deviation sigma and correlation time tau_c.
inline std::vector<double> ou_trajectory(const NoiseModel& noise, double duration_s, double dt_s, Rng& rng)
{
    if (!(dt_s > 0.0)) throw ConfigError("ou_trajectory: dt must be > 0");
    const std::size_t n = static_cast<std::size_t>(std::floor(duration_s / dt_s)) + 1;
    std::vector<double> out(n, 0.0);
    if (noise.ou_sigma == 0.0) return out;
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double a = std::exp(-dt_s / noise.ou_tau_c);
    const double kick = noise.ou_sigma * std::sqrt(-std::expm1(-2.0 * dt_s / noise.ou_tau_c));
    out[0] = noise.ou_sigma * gauss(rng);
    for (std::size_t k = 1; k < n; ++k) out[k] = out[k - 1] * a + kick * gauss(rng);
    return out;
}

// Stationary OU bath that also yields the exact time integral over each step, so
// free-evolution phases carry no discretisation error.
class OuBath {
public:
    OuBath() = default;
    OuBath(double sigma, double tau_c) : sigma_(sigma), tau_c_(tau_c) {}

    void reset(Rng& rng)
    {
        value_ = sigma_ > 0.0 ? sigma_ * gauss_(rng) : 0.0;
    }

    double value() const { return value_; }

    // Advances by h seconds and returns the integral of delta over the step (rad).
    double advance(double h, Rng& rng)
    {
        if (sigma_ == 0.0 || h <= 0.0) return 0.0;
        const long double x = static_cast<long double>(h) / tau_c_;
        const long double m = std::expm1(-x); // a - 1
        const long double a = 1.0L + m;
        const long double s2 = static_cast<long double>(sigma_) * sigma_;
        const long double tau = tau_c_;
        const long double var_x = s2 * -std::expm1(-2.0L * x);
        const long double var_i = s2 * tau * tau * (2.0L * (x + m) - m * m);
        const long double cov = s2 * tau * m * m;
        const long double x0 = value_;
        const long double xi1 = gauss_(rng);
        const long double xi2 = gauss_(rng);
        const long double sd_x = std::sqrt(var_x);
        const long double x1 = a * x0 + sd_x * xi1;
        const long double cond = std::max(0.0L, var_i - cov * cov / var_x);
        const long double integral = -tau * m * x0 + (cov / sd_x) * xi1 + std::sqrt(cond) * xi2;
        value_ = static_cast<double>(x1);
        return static_cast<double>(integral);
    }

private:
    double sigma_ = 0.0;
    double tau_c_ = 1.0;
    double value_ = 0.0;
    std::normal_distribution<double> gauss_{0.0, 1.0};
};

// A free-evolution interval in the toggling frame: sign flips at each refocusing pulse.
struct FilterSegment {
    double start_s;
    double length_s;
    int sign;
};

// Dephasing exponent chi = (sigma^2 / 2) * sum_ij s_i s_j int_i int_j exp(-|t - t'| / tau_c);
// the coherence is attenuated by exp(-chi).
inline double ou_filter_exponent(const std::vector<FilterSegment>& segments, double sigma, double tau_c)
{
    if (sigma == 0.0 || segments.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const double xi = segments[i].length_s / tau_c;
        total += 2.0 * tau_c * tau_c * (xi + std::expm1(-xi));
        for (std::size_t j = i + 1; j < segments.size(); ++j) {
            const auto& a = segments[i];
            const auto& b = segments[j];
            const auto& first = a.start_s <= b.start_s ? a : b;
            const auto& second = a.start_s <= b.start_s ? b : a;
            const double gap = second.start_s - (first.start_s + first.length_s);
            const double cross = tau_c * tau_c * std::exp(-std::max(gap, 0.0) / tau_c) *
                                 std::expm1(-first.length_s / tau_c) * std::expm1(-second.length_s / tau_c);
            total += 2.0 * a.sign * b.sign * cross;
        }
    }
    return 0.5 * sigma * sigma * total;
}

// Exponent of the closed-form CPMG visibility for an OU bath (t = n tau); the
// visibility is amplitude * exp(-exponent).
inline double ou_cpmg_exponent(int n, double tau, double sigma, double tau_c)
{
    if (sigma == 0.0 || tau <= 0.0) return 0.0;
    const double t = n * tau;
    const double x = tau / (2.0 * tau_c);
    // 1/tau_c - (2/tau) tanh(x) = (1 - tanh(x)/x) / tau_c
    const double x2 = x * x;
    const double bracket = x < 1e-2 ? x2 * (1.0 / 3.0 - x2 * (2.0 / 15.0 - x2 * (17.0 / 315.0 - x2 * 62.0 / 2835.0)))
                                    : 1.0 - std::tanh(x) / x;
    const double linear = bracket / tau_c * t;
    // 1 - sech(x) = 2 sinh^2(x/2) / cosh(x)
    const double sh = std::sinh(0.5 * x);
    const double one_minus_sech = 2.0 * sh * sh / std::cosh(x);
    const double parity = (n % 2 == 1) ? 1.0 : -1.0; // (-1)^(n+1)
    const double boundary = (1.0 + parity * std::exp(-t / tau_c)) * one_minus_sech * one_minus_sech;
    return sigma * tau_c * sigma * tau_c * (linear - boundary);
}

inline double ou_visibility_analytic(int n, double tau, double sigma, double tau_c, double amplitude = 1.0)
{
    return amplitude * std::exp(-ou_cpmg_exponent(n, tau, sigma, tau_c));
}

// Toggling-frame segments of an ideal CPMG-n train with spacing tau (tau/2 padding).
inline std::vector<FilterSegment> cpmg_filter(int n, double tau)
{
    std::vector<FilterSegment> segs;
    segs.push_back({0.0, 0.5 * tau, 1});
    for (int k = 1; k < n; ++k) {
        segs.push_back({(k - 0.5) * tau, tau, k % 2 == 1 ? -1 : 1});
    }
    segs.push_back({(n - 0.5) * tau, 0.5 * tau, n % 2 == 1 ? -1 : 1});
    return segs;
}

} // namespace odnmr
