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
#include <limits>
#include <sstream>
#include <string>

#include "odnmr/core/error.hpp"
#include "odnmr/dynamics/ou.hpp"

namespace odnmr {

// Total free-evolution time t = n tau at which the closed-form CPMG-n visibility
// drops to 1/e of its amplitude, in seconds.
inline double cpmg_one_over_e_time(int n, double sigma, double tau_c)
{
    if (!(sigma > 0.0)) return std::numeric_limits<double>::infinity();
    auto chi = [&](double t) { return ou_cpmg_exponent(n, t / n, sigma, tau_c); };
    // Small-tau estimate as the starting bracket.
    double hi = std::cbrt(12.0 * tau_c * n * n / (sigma * sigma));
    double lo = 0.0;
    for (int i = 0; i < 400 && chi(hi) < 1.0; ++i) {
        lo = hi;
        hi *= 2.0;
    }
    if (chi(hi) < 1.0) throw SimulationError("cpmg_one_over_e_time: no 1/e crossing found");
    for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (chi(mid) < 1.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// Bath coupling sigma (rad/s) for which the Hahn-echo visibility falls to 1/e at a
// total free-evolution time of `target_t2_echo_ms`, for correlation time `tau_c_ms`.
inline double calibrate_bath(double target_t2_echo_ms, double tau_c_ms)
{
    if (!(target_t2_echo_ms > 0.0) || !(tau_c_ms > 0.0)) {
        throw ConfigError("calibrate_bath: targets must be > 0");
    }
    if (std::isinf(target_t2_echo_ms)) return 0.0;
    const double target = target_t2_echo_ms * 1e-3;
    const double tau_c = tau_c_ms * 1e-3;
    auto t_of = [&](double s) { return cpmg_one_over_e_time(1, s, tau_c); };

    double s0 = std::sqrt(12.0 * tau_c / (target * target * target));
    double lo = s0, hi = s0;
    int k = 0;
    while (t_of(lo) <= target && k++ < 200) lo *= 0.5;
    k = 0;
    while (t_of(hi) >= target && k++ < 200) hi *= 2.0;
    if (!(t_of(lo) > target && t_of(hi) < target)) {
        std::ostringstream msg;
        msg << "calibrate_bath: could not bracket target " << target_t2_echo_ms << " ms; sigma in [" << lo << ", " << hi
            << "] rad/s gives t_1/e in [" << t_of(hi) * 1e3 << ", " << t_of(lo) * 1e3 << "] ms";
        throw SimulationError(msg.str());
    }
    for (int i = 0; i < 200 && hi - lo > 1e-13 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (t_of(mid) > target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace odnmr
