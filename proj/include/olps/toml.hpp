#pragma once

// Reader and writer for the TOML subset used by experiment configs: tables and
// dotted headers, dotted keys, basic and literal strings, integers, floats,
// booleans, (multi-line) arrays and inline tables. Dates are read as strings.
// Arrays of tables and multi-line strings are not supported.

#include "olps/core.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace olps::toml {

struct Value;
using Array = std::vector<Value>;
using Table = std::map<std::string, Value>;

struct Value {
    std::variant<bool, std::int64_t, double, std::string, Array, Table> v;

    Value() : v(Table{}) {}
    Value(bool b) : v(b) {}
    Value(std::int64_t i) : v(i) {}
    Value(int i) : v(static_cast<std::int64_t>(i)) {}
    Value(double d) : v(d) {}
    Value(std::string s) : v(std::move(s)) {}
    Value(const char* s) : v(std::string(s)) {}
    Value(Array a) : v(std::move(a)) {}
    Value(Table t) : v(std::move(t)) {}

    bool is_bool() const { return std::holds_alternative<bool>(v); }
    bool is_int() const { return std::holds_alternative<std::int64_t>(v); }
    bool is_float() const { return std::holds_alternative<double>(v); }
    bool is_number() const { return is_int() || is_float(); }
    bool is_string() const { return std::holds_alternative<std::string>(v); }
    bool is_array() const { return std::holds_alternative<Array>(v); }
    bool is_table() const { return std::holds_alternative<Table>(v); }

    bool as_bool() const { return std::get<bool>(v); }
    std::int64_t as_int() const { return std::get<std::int64_t>(v); }
    double as_number() const { return is_int() ? static_cast<double>(as_int()) : std::get<double>(v); }
    const std::string& as_string() const { return std::get<std::string>(v); }
    const Array& as_array() const { return std::get<Array>(v); }
    Array& as_array() { return std::get<Array>(v); }
    const Table& as_table() const { return std::get<Table>(v); }
    Table& as_table() { return std::get<Table>(v); }

    friend bool operator==(const Value&, const Value&) = default;
};

inline std::string type_name(const Value& v) {
    switch (v.v.index()) {
    case 0: return "boolean";
    case 1: return "integer";
    case 2: return "float";
    case 3: return "string";
    case 4: return "array";
    default: return "table";
    }
}

namespace detail {

class Parser {
public:
    explicit Parser(std::string_view text) : s_(text) {}

    Table parse_document() {
        Table root;
        Table* current = &root;
        while (true) {
            skip_blank_lines();
            if (at_end()) break;
            if (peek() == '[') {
                ++pos_;
                if (!at_end() && peek() == '[') fail("arrays of tables are not supported");
                skip_ws();
                const auto path = parse_key_path();
                skip_ws();
                expect(']');
                std::string joined;
                for (const auto& k : path) joined += (joined.empty() ? "" : ".") + k;
                if (!headers_.insert(joined).second) fail("table [" + joined + "] defined twice");
                current = &open_table(root, path);
            } else {
                const auto path = parse_key_path();
                skip_ws();
                expect('=');
                skip_ws();
                Value val = parse_value();
                Table& t = open_table(*current, {path.begin(), path.end() - 1});
                if (t.count(path.back())) fail("duplicate key '" + path.back() + "'");
                t.emplace(path.back(), std::move(val));
            }
            skip_ws();
            skip_comment();
            if (!at_end() && peek() != '\n' && peek() != '\r') fail("expected end of line");
        }
        return root;
    }

    Value parse_value() {
        if (at_end()) fail("expected a value");
        const char c = peek();
        if (c == '"') return Value(parse_basic_string());
        if (c == '\'') return Value(parse_literal_string());
        if (c == '[') return parse_array();
        if (c == '{') return parse_inline_table();
        if (s_.substr(pos_, 4) == "true") return pos_ += 4, Value(true);
        if (s_.substr(pos_, 5) == "false") return pos_ += 5, Value(false);
        return parse_number();
    }

    bool at_end() const { return pos_ >= s_.size(); }
    void skip_ws() {
        while (!at_end() && (peek() == ' ' || peek() == '\t')) ++pos_;
    }

private:
    std::string_view s_;
    std::size_t pos_ = 0;
    std::set<std::string> headers_;

    char peek() const { return s_[pos_]; }

    [[noreturn]] void fail(const std::string& msg) const {
        std::size_t line = 1;
        for (std::size_t i = 0; i < pos_ && i < s_.size(); ++i) line += s_[i] == '\n';
        throw Error(errc::config, "TOML line " + std::to_string(line) + ": " + msg);
    }

    void expect(char c) {
        if (at_end() || peek() != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    void skip_comment() {
        if (!at_end() && peek() == '#')
            while (!at_end() && peek() != '\n') ++pos_;
    }

    void skip_blank_lines() {
        while (!at_end()) {
            skip_ws();
            skip_comment();
            if (!at_end() && (peek() == '\n' || peek() == '\r'))
                ++pos_;
            else
                break;
        }
    }

    // Whitespace, newlines and comments inside arrays.
    void skip_space_in_array() {
        while (!at_end()) {
            skip_blank_lines();
            skip_ws();
            if (at_end() || (peek() != '\n' && peek() != '#' && peek() != '\r')) break;
        }
    }

    std::string parse_bare_key() {
        const std::size_t start = pos_;
        while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) ++pos_;
        if (pos_ == start) fail("expected a key");
        return std::string(s_.substr(start, pos_ - start));
    }

    std::vector<std::string> parse_key_path() {
        std::vector<std::string> path;
        while (true) {
            skip_ws();
            if (!at_end() && peek() == '"')
                path.push_back(parse_basic_string());
            else if (!at_end() && peek() == '\'')
                path.push_back(parse_literal_string());
            else
                path.push_back(parse_bare_key());
            skip_ws();
            if (at_end() || peek() != '.') break;
            ++pos_;
        }
        return path;
    }

    Table& open_table(Table& root, const std::vector<std::string>& path) {
        Table* t = &root;
        for (const auto& k : path) {
            auto it = t->find(k);
            if (it == t->end()) it = t->emplace(k, Value(Table{})).first;
            if (!it->second.is_table()) fail("key '" + k + "' is not a table");
            t = &it->second.as_table();
        }
        return *t;
    }

    std::string parse_basic_string() {
        expect('"');
        std::string out;
        while (true) {
            if (at_end() || peek() == '\n') fail("unterminated string");
            const char c = s_[pos_++];
            if (c == '"') break;
            if (c != '\\') {
                out += c;
                continue;
            }
            if (at_end()) fail("unterminated escape");
            switch (s_[pos_++]) {
            case 'n': out += '\n'; break;
            case 't': out += '\t'; break;
            case 'r': out += '\r'; break;
            case '"': out += '"'; break;
            case '\\': out += '\\'; break;
            case 'b': out += '\b'; break;
            case 'f': out += '\f'; break;
            case 'u': append_utf8(out, parse_hex(4)); break;
            case 'U': append_utf8(out, parse_hex(8)); break;
            default: fail("unsupported escape sequence");
            }
        }
        return out;
    }

    std::uint32_t parse_hex(std::size_t digits) {
        if (pos_ + digits > s_.size()) fail("truncated unicode escape");
        std::uint32_t cp = 0;
        for (std::size_t i = 0; i < digits; ++i) {
            const char h = s_[pos_++];
            cp <<= 4;
            if (h >= '0' && h <= '9') cp |= static_cast<std::uint32_t>(h - '0');
            else if (h >= 'a' && h <= 'f') cp |= static_cast<std::uint32_t>(h - 'a' + 10);
            else if (h >= 'A' && h <= 'F') cp |= static_cast<std::uint32_t>(h - 'A' + 10);
            else fail("bad unicode escape");
        }
        if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) fail("unicode escape is not a scalar value");
        return cp;
    }

    static void append_utf8(std::string& out, std::uint32_t cp) {
        if (cp < 0x80) {
            out += static_cast<char>(cp);
        } else if (cp < 0x800) {
            out += static_cast<char>(0xC0 | (cp >> 6));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        } else if (cp < 0x10000) {
            out += static_cast<char>(0xE0 | (cp >> 12));
            out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        } else {
            out += static_cast<char>(0xF0 | (cp >> 18));
            out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
            out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        }
    }

    std::string parse_literal_string() {
        expect('\'');
        const std::size_t start = pos_;
        while (!at_end() && peek() != '\'' && peek() != '\n') ++pos_;
        if (at_end() || peek() != '\'') fail("unterminated string");
        std::string out(s_.substr(start, pos_ - start));
        ++pos_;
        return out;
    }

    Value parse_array() {
        expect('[');
        Array out;
        while (true) {
            skip_space_in_array();
            if (!at_end() && peek() == ']') {
                ++pos_;
                break;
            }
            out.push_back(parse_value());
            skip_space_in_array();
            if (!at_end() && peek() == ',') {
                ++pos_;
                continue;
            }
            expect(']');
            break;
        }
        return Value(std::move(out));
    }

    Value parse_inline_table() {
        expect('{');
        Table out;
        skip_ws();
        if (!at_end() && peek() == '}') {
            ++pos_;
            return Value(std::move(out));
        }
        while (true) {
            const auto path = parse_key_path();
            skip_ws();
            expect('=');
            skip_ws();
            Value val = parse_value();
            Table& t = open_table(out, {path.begin(), path.end() - 1});
            if (t.count(path.back())) fail("duplicate key '" + path.back() + "'");
            t.emplace(path.back(), std::move(val));
            skip_ws();
            if (!at_end() && peek() == ',') {
                ++pos_;
                skip_ws();
                continue;
            }
            expect('}');
            break;
        }
        return Value(std::move(out));
    }

    Value parse_number() {
        const std::size_t start = pos_;
        while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' || peek() == '-' ||
                             peek() == '.' || peek() == '_'))
            ++pos_;
        std::string tok;
        for (char c : s_.substr(start, pos_ - start))
            if (c != '_') tok += c;
        if (tok.empty()) fail("expected a value");
        const std::string body = (tok[0] == '+' || tok[0] == '-') ? tok.substr(1) : tok;
        if (body == "inf" || body == "nan") {
            const double x = body == "inf" ? INFINITY : NAN;
            return Value(tok[0] == '-' ? -x : x);
        }
        const bool is_float = tok.find_first_of(".eE") != std::string::npos;
        const char* b = tok.data() + (tok[0] == '+' ? 1 : 0);
        const char* e = tok.data() + tok.size();
        if (is_float) {
            double d = 0;
            const auto r = std::from_chars(b, e, d);
            if (r.ec != std::errc{} || r.ptr != e) fail("invalid number '" + tok + "'");
            return Value(d);
        }
        std::int64_t i = 0;
        const auto r = std::from_chars(b, e, i);
        if (r.ec != std::errc{} || r.ptr != e) fail("invalid value '" + tok + "'");
        return Value(i);
    }
};

inline void write_quoted(std::ostream& out, const std::string& s) {
    out << '"';
    for (char c : s) {
        if (c == '\n') {
            out << "\\n";
            continue;
        }
        if (c == '"' || c == '\\') out << '\\';
        out << c;
    }
    out << '"';
}

inline void write_key(std::ostream& out, const std::string& k) {
    const bool bare = !k.empty() && std::all_of(k.begin(), k.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
    });
    if (bare)
        out << k;
    else
        write_quoted(out, k);
}

inline void write_inline(std::ostream& out, const Value& v) {
    if (v.is_bool()) {
        out << (v.as_bool() ? "true" : "false");
    } else if (v.is_int()) {
        out << v.as_int();
    } else if (v.is_float()) {
        const double d = std::get<double>(v.v);
        if (std::isnan(d)) {
            out << "nan";
        } else if (std::isinf(d)) {
            out << (d > 0 ? "inf" : "-inf");
        } else {
            char buf[32];
            const auto r = std::to_chars(buf, buf + sizeof buf, d);
            std::string s(buf, r.ptr);
            if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
            out << s;
        }
    } else if (v.is_string()) {
        write_quoted(out, v.as_string());
    } else if (v.is_array()) {
        out << '[';
        bool first = true;
        for (const auto& x : v.as_array()) {
            if (!first) out << ", ";
            first = false;
            write_inline(out, x);
        }
        out << ']';
    } else {
        out << '{';
        bool first = true;
        for (const auto& [k, x] : v.as_table()) {
            if (!first) out << ", ";
            first = false;
            write_key(out, k);
            out << " = ";
            write_inline(out, x);
        }
        out << '}';
    }
}

inline void write_table(std::ostream& out, const Table& t, const std::string& prefix) {
    for (const auto& [k, v] : t) {
        if (v.is_table()) continue;
        write_key(out, k);
        out << " = ";
        write_inline(out, v);
        out << '\n';
    }
    for (const auto& [k, v] : t) {
        if (!v.is_table()) continue;
        std::ostringstream name;
        if (!prefix.empty()) name << prefix << '.';
        write_key(name, k);
        out << '\n' << '[' << name.str() << "]\n";
        write_table(out, v.as_table(), name.str());
    }
}

} // namespace detail

inline Table parse(std::string_view text) { return detail::Parser(text).parse_document(); }

inline Table parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(errc::io, "cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

/// Parses a single value expression such as `0.01`, `"ppo"` or `[1, 2]`.
inline Value parse_value(std::string_view text) {
    detail::Parser p(text);
    p.skip_ws();
    Value v = p.parse_value();
    p.skip_ws();
    if (!p.at_end()) throw Error(errc::config, "trailing characters in value '" + std::string(text) + "'");
    return v;
}

/// Deterministic serialization: keys sorted, scalars before sub-tables.
inline std::string dump(const Table& t) {
    std::ostringstream out;
    detail::write_table(out, t, "");
    return out.str();
}

inline std::string dump_value(const Value& v) {
    std::ostringstream out;
    detail::write_inline(out, v);
    return out.str();
}

/// Looks up a dotted path; nullptr when absent.
inline const Value* find(const Table& t, std::string_view dotted) {
    const Table* cur = &t;
    std::size_t start = 0;
    while (true) {
        const auto dot = dotted.find('.', start);
        const std::string key(dotted.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
        auto it = cur->find(key);
        if (it == cur->end()) return nullptr;
        if (dot == std::string_view::npos) return &it->second;
        if (!it->second.is_table()) return nullptr;
        cur = &it->second.as_table();
        start = dot + 1;
    }
}

/// Sets a dotted path, creating intermediate tables.
inline void set(Table& t, std::string_view dotted, Value v) {
    Table* cur = &t;
    std::size_t start = 0;
    while (true) {
        const auto dot = dotted.find('.', start);
        const std::string key(dotted.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start));
        if (dot == std::string_view::npos) {
            (*cur)[key] = std::move(v);
            return;
        }
        auto& slot = (*cur)[key];
        if (!slot.is_table()) slot = Value(Table{});
        cur = &slot.as_table();
        start = dot + 1;
    }
}

} // namespace olps::toml
