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
#include <string>
#include <vector>

#include <json.hpp>

#include "odnmr/analysis/fit.hpp"

namespace odnmr {

namespace report_detail {

inline nlohmann::json number(double v)
{
    if (std::isfinite(v)) return v;
    return nullptr;
}

} // namespace report_detail

inline nlohmann::json to_json(const FitResult& r)
{
    nlohmann::json params = nlohmann::json::object();
    nlohmann::json errors = nlohmann::json::object();
    const auto names = r.model.param_names();
    for (std::size_t i = 0; i < names.size(); ++i) {
        params[names[i]] = report_detail::number(r.params[i]);
        errors[names[i]] = report_detail::number(r.std_errors[i]);
    }
    nlohmann::json j{{"model", r.model.name()},
                     {"params", params},
                     {"std_errors", errors},
                     {"residual_norm", report_detail::number(r.residual_norm)},
                     {"converged", r.converged},
                     {"n_points", r.n_points},
                     {"n_iterations", r.n_iterations}};
    if (r.model.kind == ModelKind::OuCpmg) j["n_pulses"] = r.model.n_pulses;
    if (!r.diagnostic.empty()) j["diagnostic"] = r.diagnostic;
    return j;
}

} // namespace odnmr
