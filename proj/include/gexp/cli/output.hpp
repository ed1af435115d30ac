#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gexp/gcore/error.hpp"

namespace gexp::cli {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kVersion = "0.1.0";

/// 64-bit FNV-1a of the config bytes, as 16 hex digits.
inline std::string config_hash(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = digits[h & 0xf];
    return out;
}

/// Shortest round-trip decimal form, so equal doubles print equal bytes.
inline std::string format_number(double x) {
    if (x == 0.0) return "0";  // no "-0"
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return ec == std::errc() ? std::string(buf, end) : std::string("nan");
}

inline std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

/// In-memory CSV table written in one go; lines end with CRLF.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : width_(header.size()) { add(header); }

    void row(const std::vector<double>& values) {
        std::vector<std::string> cells;
        cells.reserve(values.size());
        for (double v : values) cells.push_back(format_number(v));
        add(cells);
    }

    void row(const std::vector<std::string>& cells) { add(cells); }

    const std::string& text() const noexcept { return text_; }

private:
    void add(const std::vector<std::string>& cells) {
        require(cells.size() == width_, ErrorCode::DimensionMismatch, "CSV row width differs from the header");
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i > 0) text_ += ',';
            text_ += csv_field(cells[i]);
        }
        text_ += "\r\n";
    }

    std::size_t width_;
    std::string text_;
};

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << bytes;
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

inline std::string json_text(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace gexp::cli
