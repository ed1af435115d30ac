#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace gexp::cli {

/// Bad input file: the message names the line and the field path.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::size_t line, const std::string& path, const std::string& what)
        : std::runtime_error(format(line, path, what)), line_(line), path_(path) {}

    std::size_t line() const noexcept { return line_; }
    const std::string& path() const noexcept { return path_; }

private:
    static std::string format(std::size_t line, const std::string& path, const std::string& what) {
        std::string out = "config";
        if (line > 0) out += " line " + std::to_string(line);
        if (!path.empty()) out += ": " + path;
        return out + ": " + what;
    }

    std::size_t line_;
    std::string path_;
};

struct Value {
    enum class Kind { Number, String, List } kind = Kind::Number;
    double number = 0.0;
    std::string text;
    std::vector<Value> items;
    std::size_t line = 0;
};

namespace detail {

class ValueParser {
public:
    ValueParser(std::string_view src, std::size_t line, std::string path) : s_(src), line_(line), path_(path) {}

    Value parse_all() {
        Value v = parse();
        skip_ws();
        if (pos_ != s_.size()) fail("unexpected text after value: '" + std::string(s_.substr(pos_)) + "'");
        return v;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(line_, path_, msg); }

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    Value parse() {
        skip_ws();
        if (pos_ >= s_.size()) fail("missing value");
        Value v;
        v.line = line_;
        const char c = s_[pos_];
        if (c == '[') {
            v.kind = Value::Kind::List;
            ++pos_;
            skip_ws();
            if (pos_ < s_.size() && s_[pos_] == ']') {
                ++pos_;
                return v;
            }
            for (;;) {
                v.items.push_back(parse());
                skip_ws();
                if (pos_ >= s_.size()) fail("unterminated list");
                if (s_[pos_] == ',') {
                    ++pos_;
                    continue;
                }
                if (s_[pos_] == ']') {
                    ++pos_;
                    return v;
                }
                fail(std::string("expected ',' or ']' in list, found '") + s_[pos_] + "'");
            }
        }
        if (c == '"') {
            v.kind = Value::Kind::String;
            const auto end = s_.find('"', pos_ + 1);
            if (end == std::string_view::npos) fail("unterminated string");
            v.text = std::string(s_.substr(pos_ + 1, end - pos_ - 1));
            pos_ = end + 1;
            return v;
        }
        std::size_t end = pos_;
        while (end < s_.size() && s_[end] != ',' && s_[end] != ']' && s_[end] != '[' &&
               !std::isspace(static_cast<unsigned char>(s_[end])))
            ++end;
        const std::string_view token = s_.substr(pos_, end - pos_);
        if (token.empty()) fail(std::string("unexpected character '") + c + "'");
        pos_ = end;
        double number = 0.0;
        const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), number);
        if (ec == std::errc() && ptr == token.data() + token.size()) {
            if (!std::isfinite(number)) fail("number must be finite");
            v.kind = Value::Kind::Number;
            v.number = number;
            return v;
        }
        if (std::isdigit(static_cast<unsigned char>(token[0])) || token[0] == '-' || token[0] == '+' ||
            token[0] == '.')
            fail("malformed number '" + std::string(token) + "'");
        v.kind = Value::Kind::String;
        v.text = std::string(token);
        return v;
    }

    std::string_view s_;
    std::size_t pos_ = 0;
    std::size_t line_;
    std::string path_;
};

inline std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

inline std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

inline bool valid_name(std::string_view name) {
    if (name.empty()) return false;
    for (char c : name)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.')) return false;
    return name.front() != '.' && name.back() != '.' && name.find("..") == std::string_view::npos;
}

inline int bracket_balance(std::string_view s) {
    int depth = 0;
    bool quoted = false;
    for (char c : s) {
        if (c == '"') quoted = !quoted;
        if (quoted) continue;
        if (c == '[') ++depth;
        if (c == ']') --depth;
    }
    return depth;
}

}  // namespace detail

/// Parsed experiment file:
///
///   # comment
///   [section.sub]
///   key = 1.5            number
///   key = name           bare word or "quoted string"
///   key = [[1, 0],       nested lists; a list may continue over lines
///          [0, 1]]
///
/// Every key is addressed by its full dotted path; finish() rejects keys
/// outside the known schema.
class Config {
public:
    static Config parse(const std::string& text) {
        Config cfg;
        std::istringstream in(text);
        std::string raw, section;
        std::size_t line_no = 0;
        while (std::getline(in, raw)) {
            ++line_no;
            std::string line = detail::trim(detail::strip_comment(raw));
            if (line.empty()) continue;
            if (line.front() == '[' && line.find('=') == std::string::npos) {
                if (line.back() != ']') throw ConfigError(line_no, "", "section header must end with ']'");
                section = detail::trim(std::string_view(line).substr(1, line.size() - 2));
                if (!detail::valid_name(section))
                    throw ConfigError(line_no, section, "invalid section name");
                cfg.sections_.insert(section);
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw ConfigError(line_no, section, "expected 'key = value'");
            const std::string key = detail::trim(std::string_view(line).substr(0, eq));
            if (!detail::valid_name(key) || key.find('.') != std::string::npos)
                throw ConfigError(line_no, section, "invalid key '" + key + "'");
            const std::string path = section.empty() ? key : section + "." + key;
            std::string value = detail::trim(std::string_view(line).substr(eq + 1));
            const std::size_t first_line = line_no;
            while (detail::bracket_balance(value) > 0) {
                if (!std::getline(in, raw)) throw ConfigError(first_line, path, "unterminated list");
                ++line_no;
                value += " " + detail::trim(detail::strip_comment(raw));
            }
            if (detail::bracket_balance(value) < 0) throw ConfigError(first_line, path, "unbalanced ']'");
            if (cfg.values_.count(path)) throw ConfigError(first_line, path, "duplicate key");
            cfg.values_[path] = detail::ValueParser(value, first_line, path).parse_all();
        }
        return cfg;
    }

    bool has(const std::string& path) const { return values_.count(path) > 0; }
    bool has_section(const std::string& name) const {
        if (sections_.count(name)) return true;
        const std::string prefix = name + ".";
        for (const auto& [k, v] : values_)
            if (k.rfind(prefix, 0) == 0) return true;
        return false;
    }

    const Value& raw(const std::string& path) const {
        const auto it = values_.find(path);
        if (it == values_.end()) throw ConfigError(0, path, "missing required field");
        used_.insert(path);
        return it->second;
    }

    std::size_t line_of(const std::string& path) const {
        const auto it = values_.find(path);
        return it == values_.end() ? 0 : it->second.line;
    }

    double number(const std::string& path) const {
        const Value& v = raw(path);
        if (v.kind != Value::Kind::Number) throw ConfigError(v.line, path, "expected a number");
        return v.number;
    }
    double number(const std::string& path, double fallback) const { return has(path) ? number(path) : fallback; }

    std::size_t count(const std::string& path) const {
        const double x = number(path);
        if (x < 0.0 || x != std::floor(x) || x > 1e15)
            throw ConfigError(line_of(path), path, "expected a non-negative integer");
        return static_cast<std::size_t>(x);
    }
    std::size_t count(const std::string& path, std::size_t fallback) const {
        return has(path) ? count(path) : fallback;
    }

    std::string word(const std::string& path) const {
        const Value& v = raw(path);
        if (v.kind != Value::Kind::String) throw ConfigError(v.line, path, "expected a name");
        return v.text;
    }
    std::string word(const std::string& path, const std::string& fallback) const {
        return has(path) ? word(path) : fallback;
    }

    std::vector<double> numbers(const std::string& path) const {
        const Value& v = raw(path);
        if (v.kind == Value::Kind::Number) return {v.number};
        if (v.kind != Value::Kind::List) throw ConfigError(v.line, path, "expected a list of numbers");
        std::vector<double> out;
        for (const auto& item : v.items) {
            if (item.kind != Value::Kind::Number) throw ConfigError(v.line, path, "expected a list of numbers");
            out.push_back(item.number);
        }
        return out;
    }

    /// Row-major matrix literal [[a, b], [c, d]]; a bare number is 1 x 1 and
    /// a flat list is a column vector.
    Eigen::MatrixXd matrix(const std::string& path) const {
        const Value& v = raw(path);
        if (v.kind == Value::Kind::Number) return Eigen::MatrixXd::Constant(1, 1, v.number);
        if (v.kind != Value::Kind::List || v.items.empty()) throw ConfigError(v.line, path, "expected a matrix");
        if (v.items.front().kind != Value::Kind::List) {
            const auto col = numbers(path);
            return Eigen::Map<const Eigen::VectorXd>(col.data(), static_cast<Eigen::Index>(col.size()));
        }
        const auto rows = static_cast<Eigen::Index>(v.items.size());
        const auto cols = static_cast<Eigen::Index>(v.items.front().items.size());
        Eigen::MatrixXd out(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r) {
            const auto& row = v.items[static_cast<std::size_t>(r)];
            if (row.kind != Value::Kind::List || static_cast<Eigen::Index>(row.items.size()) != cols)
                throw ConfigError(v.line, path, "matrix rows must be lists of equal length");
            for (Eigen::Index c = 0; c < cols; ++c) {
                const auto& e = row.items[static_cast<std::size_t>(c)];
                if (e.kind != Value::Kind::Number) throw ConfigError(v.line, path, "matrix entries must be numbers");
                out(r, c) = e.number;
            }
        }
        return out;
    }

    Eigen::VectorXd vector(const std::string& path) const {
        const auto v = numbers(path);
        return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }

    /// Rejects keys that were neither read nor listed in `schema`, so fields
    /// meant for another command pass but typos do not.
    void finish(const std::set<std::string>& schema) const {
        for (const auto& [path, value] : values_)
            if (!used_.count(path) && !schema.count(path))
                throw ConfigError(value.line, path, "unknown field");
    }

private:
    std::map<std::string, Value> values_;
    std::set<std::string> sections_;
    mutable std::set<std::string> used_;
};

}  // namespace gexp::cli
