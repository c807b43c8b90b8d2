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
#include <array>
#include <cctype>
#include <charconv>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "odnmr/sequence/events.hpp"

// Line-oriented pulse-sequence text format.
//
//   optical burn|probe|erase <det>[ -> <det>] <power> <time>
//   rf <freq> <power>W <time> [phase=<deg>]
//   wait <time>
//   readout <det> <time>
//
// Frequencies take GHz/MHz/kHz, times us/ms/s, phases an optional `deg`.
// Keywords are case-insensitive, units are not. '#' starts a comment.

namespace odnmr {

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, std::size_t column, std::string token, const std::string& message)
        : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
                             message + (token.empty() ? "" : " ('" + token + "')")),
          line_(line), column_(column), token_(std::move(token))
    {
    }

    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }
    const std::string& token() const { return token_; }

private:
    std::size_t line_;
    std::size_t column_;
    std::string token_;
};

namespace dsl_detail {

struct Token {
    std::string text;
    std::size_t column; // 1-based
};

enum class UnitKind { Frequency, Time, Power, Phase };

struct UnitInfo {
    std::string_view name;
    UnitKind kind;
    double scale; // to MHz, us, W, deg
};

inline constexpr std::array<UnitInfo, 8> kUnits{{
    {"GHz", UnitKind::Frequency, 1e3},
    {"MHz", UnitKind::Frequency, 1.0},
    {"kHz", UnitKind::Frequency, 1e-3},
    {"us", UnitKind::Time, 1.0},
    {"ms", UnitKind::Time, 1e3},
    {"s", UnitKind::Time, 1e6},
    {"W", UnitKind::Power, 1.0},
    {"deg", UnitKind::Phase, 1.0},
}};

inline const UnitInfo* find_unit(std::string_view s)
{
    for (const auto& u : kUnits) {
        if (u.name == s) return &u;
    }
    return nullptr;
}

inline const char* kind_name(UnitKind k)
{
    switch (k) {
    case UnitKind::Frequency: return "frequency";
    case UnitKind::Time: return "time";
    case UnitKind::Power: return "power";
    case UnitKind::Phase: return "phase";
    }
    return "?";
}

inline std::string lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

inline std::vector<Token> tokenize(std::string_view line)
{
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < line.size()) {
        if (std::isspace(static_cast<unsigned char>(line[i]))) {
            ++i;
            continue;
        }
        if (line.compare(i, 2, "->") == 0) {
            out.push_back({"->", i + 1});
            i += 2;
            continue;
        }
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i])) && line.compare(i, 2, "->") != 0) {
            ++i;
        }
        out.push_back({std::string(line.substr(start, i - start)), start + 1});
    }
    return out;
}

// Splits "21.475MHz" into (21.475, "MHz"); nullopt if no numeric prefix.
inline std::optional<std::pair<double, std::string>> split_number(std::string_view text)
{
    std::string_view s = text;
    bool plus = false;
    if (!s.empty() && s.front() == '+') {
        plus = true;
        s.remove_prefix(1);
    }
    if (plus && !s.empty() && s.front() == '-') return std::nullopt;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value, std::chars_format::general);
    if (ec != std::errc() || ptr == s.data()) return std::nullopt;
    // from_chars accepts "inf"/"nan"; the grammar does not.
    if (!std::isfinite(value)) return std::nullopt;
    return std::make_pair(value, std::string(ptr, s.data() + s.size()));
}

class LineParser {
public:
    LineParser(std::vector<Token> tokens, std::size_t line_no) : tokens_(std::move(tokens)), line_(line_no) {}

    bool done() const { return pos_ >= tokens_.size(); }

    const Token& peek() const { return tokens_[pos_]; }

    [[noreturn]] void fail(const Token& t, const std::string& msg) const { throw ParseError(line_, t.column, t.text, msg); }

    [[noreturn]] void fail_end(const std::string& msg) const
    {
        const std::size_t col = tokens_.empty() ? 1 : tokens_.back().column + tokens_.back().text.size();
        throw ParseError(line_, col, "", msg);
    }

    const Token& next(const std::string& expected)
    {
        if (done()) fail_end("expected " + expected);
        return tokens_[pos_++];
    }

    // A number with a unit of `kind`, either joined ("300ms") or as two tokens ("300 ms").
    double quantity(UnitKind kind, bool unit_optional = false)
    {
        const Token& t = next(std::string(kind_name(kind)) + " value");
        auto split = split_number(t.text);
        if (!split) fail(t, std::string("expected a number with ") + kind_name(kind) + " unit");
        auto [value, unit] = *split;
        const Token* unit_tok = &t;
        if (unit.empty() && !done() && find_unit(peek().text)) {
            unit_tok = &tokens_[pos_++];
            unit = unit_tok->text;
        }
        if (unit.empty()) {
            if (unit_optional) return value;
            fail(t, std::string("missing ") + kind_name(kind) + " unit");
        }
        const UnitInfo* info = find_unit(unit);
        if (!info) fail(*unit_tok, "unknown unit '" + unit + "'");
        if (info->kind != kind) {
            fail(*unit_tok, "unit '" + unit + "' is not a " + kind_name(kind) + " unit");
        }
        return value * info->scale;
    }

    double duration()
    {
        const Token& t = peek();
        const double d = quantity(UnitKind::Time);
        if (!(d > 0.0)) fail(t, "duration must be positive");
        return d;
    }

    double power(bool unit_optional)
    {
        const Token& t = done() ? tokens_.back() : peek();
        const double p = quantity(UnitKind::Power, unit_optional);
        if (p < 0.0) fail(t, "power must be non-negative");
        return p;
    }

    void expect_end()
    {
        if (!done()) fail(peek(), "unexpected trailing token");
    }

    std::size_t& pos() { return pos_; }

private:
    std::vector<Token> tokens_;
    std::size_t line_;
    std::size_t pos_ = 0;
};

inline PulseEvent parse_line(LineParser& p)
{
    const Token& kw = p.next("keyword");
    const std::string key = lower(kw.text);
    if (key == "optical") {
        const Token& role_tok = p.next("optical role");
        const std::string role = lower(role_tok.text);
        OpticalPulse pulse;
        if (role == "burn") {
            pulse.role = OpticalRole::Burn;
        } else if (role == "probe") {
            pulse.role = OpticalRole::Probe;
        } else if (role == "erase") {
            pulse.role = OpticalRole::Erase;
        } else {
            p.fail(role_tok, "expected burn, probe or erase");
        }
        pulse.detuning_start_mhz = p.quantity(UnitKind::Frequency);
        pulse.detuning_stop_mhz = pulse.detuning_start_mhz;
        if (!p.done() && p.peek().text == "->") {
            ++p.pos();
            pulse.detuning_stop_mhz = p.quantity(UnitKind::Frequency);
        }
        pulse.power = p.power(true);
        pulse.duration_us = p.duration();
        p.expect_end();
        return pulse;
    }
    if (key == "rf") {
        RfPulse pulse;
        pulse.frequency_mhz = p.quantity(UnitKind::Frequency);
        pulse.power_w = p.power(false);
        pulse.duration_us = p.duration();
        if (!p.done()) {
            const Token& t = p.next("phase");
            const std::string lt = lower(t.text);
            if (lt.rfind("phase=", 0) != 0) p.fail(t, "expected phase=<degrees>");
            auto split = split_number(std::string_view(t.text).substr(6));
            if (!split) p.fail(t, "expected a number after phase=");
            if (!split->second.empty() && split->second != "deg") p.fail(t, "unknown unit '" + split->second + "'");
            pulse.phase_deg = normalize_phase_deg(split->first);
        }
        p.expect_end();
        return pulse;
    }
    if (key == "wait") {
        Wait w;
        w.duration_us = p.duration();
        p.expect_end();
        return w;
    }
    if (key == "readout") {
        ReadoutWindow r;
        r.detuning_mhz = p.quantity(UnitKind::Frequency);
        r.duration_us = p.duration();
        p.expect_end();
        return r;
    }
    p.fail(kw, "unknown keyword");
}

inline std::string fmt_num(double v)
{
    std::array<char, 64> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

} // namespace dsl_detail

inline PulseSequence parse_sequence(std::string_view text, std::string label = {})
{
    PulseSequence seq;
    seq.label = std::move(label);
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        ++line_no;
        std::string_view line = text.substr(start, end - start);
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        auto tokens = dsl_detail::tokenize(line);
        if (!tokens.empty()) {
            dsl_detail::LineParser p(std::move(tokens), line_no);
            seq.events.push_back(dsl_detail::parse_line(p));
        }
        if (end == text.size()) break;
        start = end + 1;
    }
    if (seq.events.empty()) throw ParseError(1, 1, "", "empty sequence");
    return seq;
}

inline std::string format_event(const PulseEvent& event)
{
    using dsl_detail::fmt_num;
    return std::visit(
        [](const auto& e) -> std::string {
            using T = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<T, OpticalPulse>) {
                std::string s = std::string("optical ") + to_string(e.role) + " " + fmt_num(e.detuning_start_mhz) + "MHz";
                if (e.chirped()) s += " -> " + fmt_num(e.detuning_stop_mhz) + "MHz";
                return s + " " + fmt_num(e.power) + " " + fmt_num(e.duration_us) + "us";
            } else if constexpr (std::is_same_v<T, RfPulse>) {
                return "rf " + fmt_num(e.frequency_mhz) + "MHz " + fmt_num(e.power_w) + "W " + fmt_num(e.duration_us) +
                       "us phase=" + fmt_num(e.phase_deg);
            } else if constexpr (std::is_same_v<T, Wait>) {
                return "wait " + fmt_num(e.duration_us) + "us";
            } else {
                return "readout " + fmt_num(e.detuning_mhz) + "MHz " + fmt_num(e.duration_us) + "us";
            }
        },
        event);
}

// Canonical text: MHz, us, W, degrees, shortest round-trip numbers.
inline std::string format_sequence(const PulseSequence& seq)
{
    std::string out;
    if (!seq.label.empty()) out += "# " + seq.label + "\n";
    for (const auto& e : seq.events) {
        out += format_event(e);
        out += '\n';
    }
    return out;
}

} // namespace odnmr
