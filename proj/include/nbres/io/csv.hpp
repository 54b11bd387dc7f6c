#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nbres/errors.hpp"

namespace nbres::io {

/// Header plus string cells. Lines starting with '#' are provenance comments
/// and are kept separately; blank lines are skipped.
struct CsvTable {
    std::string source;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_of_row;  // 1-based file line for each row
    std::vector<std::string> comments;

    std::optional<std::size_t> column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        return std::nullopt;
    }

    std::size_t require(const std::string& name) const {
        if (auto c = column(name)) return *c;
        throw ParseError(source, 1, "missing column '" + name + "'");
    }

    double number(std::size_t row, std::size_t col) const {
        const std::string& s = rows[row][col];
        double v = 0.0;
        const auto* end = s.data() + s.size();
        auto [p, ec] = std::from_chars(s.data(), end, v);
        if (ec != std::errc() || p != end)
            throw ParseError(source, line_of_row[row], "column '" + header[col] + "': not a number: '" + s + "'");
        return v;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace detail

inline CsvTable parse_csv(std::istream& in, const std::string& source) {
    CsvTable t;
    t.source = source;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        const std::string s = detail::trim(line);
        if (s.empty()) continue;
        if (s.front() == '#') {
            t.comments.push_back(detail::trim(s.substr(1)));
            continue;
        }
        auto cells = detail::split(s);
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size())
            throw ParseError(source, n, "expected " + std::to_string(t.header.size()) + " fields, found " +
                                            std::to_string(cells.size()));
        t.rows.push_back(std::move(cells));
        t.line_of_row.push_back(n);
    }
    if (t.header.empty()) throw ParseError(source, n, "empty file");
    return t;
}

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, 0, "cannot open file");
    return parse_csv(in, path);
}

// Shortest text that reads back to the same double.
inline std::string format_number(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc() ? std::string(buf, p) : std::string("nan");
}

/// Tidy CSV writer: one observation per row.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

    void comment(const std::string& c) { comments_.push_back(c); }

    void row(const std::vector<std::string>& cells) {
        if (cells.size() != header_.size()) throw InvalidParameter("csv row width does not match header");
        rows_.push_back(cells);
    }

    std::string str() const {
        std::string out;
        for (const auto& c : comments_) out += "# " + c + "\n";
        append(out, header_);
        for (const auto& r : rows_) append(out, r);
        return out;
    }

private:
    static void append(std::string& out, const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += cells[i];
        }
        out += '\n';
    }

    std::vector<std::string> header_;
    std::vector<std::string> comments_;
    std::vector<std::vector<std::string>> rows_;
};

}  // namespace nbres::io
