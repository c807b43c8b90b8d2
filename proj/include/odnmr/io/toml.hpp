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

#include <cctype>
#include <charconv>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace odnmr {

class ConfigParseError : public std::runtime_error {
public:
    ConfigParseError(std::size_t line, std::size_t column, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + msg),
          line_(line), column_(column)
    {
    }

    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

namespace toml_detail {

// Reader for the TOML subset used by run configs: [dotted.tables], bare keys,
// strings, booleans, integers, floats and (nested, multi-line) arrays.
class Reader {
public:
    explicit Reader(std::string_view text) : s_(text) {}

    nlohmann::json parse()
    {
        nlohmann::json root = nlohmann::json::object();
        nlohmann::json* table = &root;
        while (true) {
            skip_blank_lines();
            if (eof()) break;
            if (peek() == '[') {
                table = &open_table(root);
            } else {
                const std::size_t kl = line_, kc = col();
                const std::string key = read_key();
                skip_ws();
                expect('=');
                skip_ws();
                nlohmann::json value = read_value();
                if (table->contains(key)) throw ConfigParseError(kl, kc, "duplicate key '" + key + "'");
                (*table)[key] = std::move(value);
            }
            end_of_line();
        }
        return root;
    }

private:
    std::string_view s_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t line_start_ = 0;
    std::set<std::string> headers_;

    bool eof() const { return pos_ >= s_.size(); }
    char peek() const { return eof() ? '\0' : s_[pos_]; }
    std::size_t col() const { return pos_ - line_start_ + 1; }

    [[noreturn]] void fail(const std::string& msg) const { throw ConfigParseError(line_, col(), msg); }

    void advance()
    {
        if (s_[pos_] == '\n') {
            ++line_;
            line_start_ = pos_ + 1;
        }
        ++pos_;
    }

    void skip_ws()
    {
        while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) advance();
    }

    void skip_comment()
    {
        if (peek() == '#') {
            while (!eof() && peek() != '\n') advance();
        }
    }

    void skip_blank_lines()
    {
        while (!eof()) {
            skip_ws();
            skip_comment();
            if (peek() == '\n') {
                advance();
            } else {
                break;
            }
        }
    }

    // Whitespace, comments and newlines inside arrays.
    void skip_array_space()
    {
        while (!eof()) {
            skip_ws();
            skip_comment();
            if (peek() == '\n') {
                advance();
            } else {
                break;
            }
        }
    }

    void end_of_line()
    {
        skip_ws();
        skip_comment();
        if (eof()) return;
        if (peek() != '\n') fail("unexpected '" + std::string(1, peek()) + "' after value");
        advance();
    }

    void expect(char c)
    {
        if (peek() != c) fail(std::string("expected '") + c + "'");
        advance();
    }

    static bool key_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; }

    std::string read_key()
    {
        const std::size_t b = pos_;
        while (!eof() && key_char(peek())) advance();
        if (pos_ == b) fail("expected a key");
        return std::string(s_.substr(b, pos_ - b));
    }

    nlohmann::json& open_table(nlohmann::json& root)
    {
        const std::size_t hl = line_, hc = col();
        advance(); // '['
        skip_ws();
        nlohmann::json* t = &root;
        std::string path;
        while (true) {
            const std::string k = read_key();
            path += (path.empty() ? "" : ".") + k;
            if (!t->contains(k)) (*t)[k] = nlohmann::json::object();
            t = &(*t)[k];
            if (!t->is_object()) fail("'" + k + "' is not a table");
            skip_ws();
            if (peek() == '.') {
                advance();
                skip_ws();
                continue;
            }
            break;
        }
        expect(']');
        if (!headers_.insert(path).second) throw ConfigParseError(hl, hc, "table [" + path + "] defined twice");
        return *t;
    }

    nlohmann::json read_value()
    {
        const char c = peek();
        if (c == '"') return read_string();
        if (c == '\'') return read_literal_string();
        if (c == '[') return read_array();
        if (s_.substr(pos_, 4) == "true") {
            for (int i = 0; i < 4; ++i) advance();
            return true;
        }
        if (s_.substr(pos_, 5) == "false") {
            for (int i = 0; i < 5; ++i) advance();
            return false;
        }
        return read_number();
    }

    nlohmann::json read_literal_string()
    {
        const std::size_t c0 = col();
        advance();
        const std::size_t b = pos_;
        while (!eof() && peek() != '\'' && peek() != '\n') advance();
        if (peek() != '\'') throw ConfigParseError(line_, c0, "unterminated string");
        std::string out(s_.substr(b, pos_ - b));
        advance();
        return out;
    }

    nlohmann::json read_string()
    {
        const std::size_t c0 = col();
        advance();
        std::string out;
        while (true) {
            if (eof() || peek() == '\n') throw ConfigParseError(line_, c0, "unterminated string");
            char c = peek();
            advance();
            if (c == '"') break;
            if (c == '\\') {
                if (eof()) fail("unterminated escape");
                const char e = peek();
                advance();
                switch (e) {
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                default: fail(std::string("unknown escape '\\") + e + "'");
                }
            } else {
                out += c;
            }
        }
        return out;
    }

    nlohmann::json read_array()
    {
        advance();
        nlohmann::json arr = nlohmann::json::array();
        skip_array_space();
        if (peek() == ']') {
            advance();
            return arr;
        }
        while (true) {
            skip_array_space();
            arr.push_back(read_value());
            skip_array_space();
            if (peek() == ',') {
                advance();
                skip_array_space();
                if (peek() == ']') {
                    advance();
                    return arr;
                }
                continue;
            }
            expect(']');
            return arr;
        }
    }

    nlohmann::json read_number()
    {
        const std::size_t b = pos_;
        const std::size_t c0 = col();
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '.' || peek() == '+' ||
                          peek() == '-' || peek() == '_')) {
            advance();
        }
        std::string tok(s_.substr(b, pos_ - b));
        std::erase(tok, '_');
        if (tok.empty()) throw ConfigParseError(line_, c0, "expected a value");
        const char* first = tok.data() + (tok[0] == '+' ? 1 : 0);
        const char* last = tok.data() + tok.size();
        const bool is_int = tok.find_first_of(".eE") == std::string::npos;
        if (is_int) {
            long long v = 0;
            const auto r = std::from_chars(first, last, v);
            if (r.ec == std::errc() && r.ptr == last) return v;
            if (r.ec == std::errc::result_out_of_range) throw ConfigParseError(line_, c0, "integer '" + tok + "' out of range");
        }
        double d = 0.0;
        const auto r = std::from_chars(first, last, d);
        if (r.ec != std::errc() || r.ptr != last) {
            throw ConfigParseError(line_, c0, "invalid value '" + tok + "' (strings need quotes)");
        }
        return d;
    }
};

} // namespace toml_detail

inline nlohmann::json parse_toml(std::string_view text)
{
    return toml_detail::Reader(text).parse();
}

} // namespace odnmr
