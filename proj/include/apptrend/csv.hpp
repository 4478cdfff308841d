// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace apptrend {

/// Shortest round-trip decimal form of a double. Used for every numeric
/// cell the artifact writes so reruns are byte-identical.
inline std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

/// Minimal CSV emitter: header + rows, comma-delimited, no quoting
/// (ids and category names are token-like by contract).
class CsvWriter {
public:
    explicit CsvWriter(std::ostream& out) : out_(out) {}

    CsvWriter& field(std::string_view s) {
        sep();
        out_ << s;
        return *this;
    }
    CsvWriter& field(double v) { return field(format_double(v)); }
    CsvWriter& field(std::int64_t v) { return field(std::to_string(v)); }
    CsvWriter& field(int v) { return field(static_cast<std::int64_t>(v)); }
    CsvWriter& field(std::size_t v) { return field(std::to_string(v)); }

    /// Empty cell, e.g. a metric that is undefined for the row.
    CsvWriter& blank() {
        sep();
        return *this;
    }

    void endrow() {
        out_ << '\n';
        first_ = true;
        ++rows_;
    }

    /// Data rows written so far (the first endrow is counted as the header).
    std::size_t data_rows() const { return rows_ > 0 ? rows_ - 1 : 0; }

private:
    void sep() {
        if (!first_) out_ << ',';
        first_ = false;
    }

    std::ostream& out_;
    bool first_ = true;
    std::size_t rows_ = 0;
};

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.emplace_back(line.substr(start));
            break;
        }
        out.emplace_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline std::ofstream open_output_file(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    return out;
}

} // namespace apptrend
