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

#include <charconv>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace odnmr {

// Shortest round-trip decimal form; "nan"/"inf" for non-finite values.
inline std::string format_number(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

// Raw sweep table: per sweep point, one row per repetition followed by a "mean" row.
struct RawTable {
    static constexpr int kMeanRow = -1;

    struct Row {
        double sweep = 0.0;
        int repetition = 0;
        std::vector<double> values; // signal, then derived columns
    };

    std::vector<std::string> value_columns{"signal"};
    std::vector<Row> rows;

    // Appends repetition rows and their column-wise mean; returns the mean values.
    std::vector<double> add_point(double sweep, const std::vector<std::vector<double>>& reps)
    {
        if (reps.empty()) throw std::invalid_argument("RawTable: a sweep point needs at least one repetition");
        std::vector<double> mean(value_columns.size(), 0.0);
        for (std::size_t r = 0; r < reps.size(); ++r) {
            if (reps[r].size() != value_columns.size()) throw std::invalid_argument("RawTable: row width mismatch");
            rows.push_back({sweep, static_cast<int>(r), reps[r]});
            for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += reps[r][c];
        }
        for (double& m : mean) m /= static_cast<double>(reps.size());
        rows.push_back({sweep, kMeanRow, mean});
        return mean;
    }

    std::size_t point_count() const
    {
        std::size_t n = 0;
        for (const auto& r : rows) n += r.repetition == kMeanRow ? 1 : 0;
        return n;
    }

    std::string to_csv() const
    {
        std::string out = "sweep_param,repetition";
        for (const auto& c : value_columns) out += "," + c;
        out += "\n";
        for (const auto& r : rows) {
            out += format_number(r.sweep);
            out += ",";
            out += r.repetition == kMeanRow ? std::string("mean") : std::to_string(r.repetition);
            for (double v : r.values) {
                out += ",";
                out += format_number(v);
            }
            out += "\n";
        }
        return out;
    }
};

} // namespace odnmr
