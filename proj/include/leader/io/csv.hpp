#pragma once

// Comma-separated tables with RFC 4180 quoting.

#include <leader/io/errors.hpp>
#include <leader/io/files.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace leader::io {

using CsvRow = std::vector<std::string>;

inline std::string csv_field(std::string_view v) {
    if (v.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(v);
    std::string out = "\"";
    for (char c : v) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

/// Shortest round-trip text for a double.
inline std::string csv_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    std::string s = buf;
    for (int prec = 1; prec < 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    return s;
}

inline std::string format_csv(const std::vector<CsvRow>& rows) {
    std::string out;
    for (const auto& row : rows) {
        for (std::size_t k = 0; k < row.size(); ++k) {
            if (k) out += ',';
            out += csv_field(row[k]);
        }
        out += "\r\n";
    }
    return out;
}

inline std::vector<CsvRow> parse_csv(std::string_view text) {
    std::vector<CsvRow> rows;
    CsvRow row;
    std::string field;
    bool quoted = false;      // inside a quoted field
    bool was_quoted = false;  // current field started with a quote
    bool row_open = false;
    std::size_t line = 1;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line;
                field += c;
            }
            continue;
        }
        if (c == '"') {
            if (!field.empty() || was_quoted) {
                throw FormatError("CSV line " + std::to_string(line) + ": stray quote inside a field");
            }
            quoted = was_quoted = row_open = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
            was_quoted = false;
            row_open = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            if (row_open || !field.empty()) {
                row.push_back(std::move(field));
                rows.push_back(std::move(row));
            }
            row.clear();
            field.clear();
            was_quoted = row_open = false;
            ++line;
        } else {
            if (was_quoted) throw FormatError("CSV line " + std::to_string(line) + ": text after closing quote");
            field += c;
            row_open = true;
        }
    }
    if (quoted) throw FormatError("CSV: unterminated quoted field");
    if (row_open || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::vector<CsvRow> read_csv(const std::filesystem::path& path) {
    try {
        return parse_csv(read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

inline void write_csv(const std::filesystem::path& path, const std::vector<CsvRow>& rows) {
    write_file_atomic(path, format_csv(rows));
}

}  // namespace leader::io
