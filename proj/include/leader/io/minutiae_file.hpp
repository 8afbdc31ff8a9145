#pragma once

// Tab-separated minutiae lists:
//   # free comment lines
//   <width>\t<height>
//   <x>\t<y>\t<theta radians>\t<E|B>\t<quality>

#include <leader/io/errors.hpp>
#include <leader/io/files.hpp>
#include <leader/minutiae.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace leader::io {

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t tab = line.find('\t', start);
        fields.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
        if (tab == std::string_view::npos) break;
        start = tab + 1;
    }
    return fields;
}

inline double parse_double(std::string_view s, std::size_t line, const char* what) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v)) {
        throw FormatError("line " + std::to_string(line) + ": invalid " + what + " '" + std::string(s) + "'");
    }
    return v;
}

inline std::size_t parse_size(std::string_view s, std::size_t line, const char* what) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
        throw FormatError("line " + std::to_string(line) + ": invalid " + what + " '" + std::string(s) + "'");
    }
    return v;
}

}  // namespace detail

inline MinutiaSet parse_minutiae(std::string_view text) {
    MinutiaSet set;
    bool have_header = false;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;
        const auto f = detail::split_tabs(line);
        if (!have_header) {
            if (f.size() != 2) {
                throw FormatError("line " + std::to_string(line_no) + ": expected header '<width>\\t<height>', got " +
                                  std::to_string(f.size()) + " fields");
            }
            set.width = detail::parse_size(f[0], line_no, "width");
            set.height = detail::parse_size(f[1], line_no, "height");
            have_header = true;
            continue;
        }
        if (f.size() != 5) {
            throw FormatError("line " + std::to_string(line_no) + ": expected 5 tab-separated fields, got " +
                              std::to_string(f.size()));
        }
        Minutia m;
        m.x = detail::parse_double(f[0], line_no, "x");
        m.y = detail::parse_double(f[1], line_no, "y");
        m.theta = wrap_angle(detail::parse_double(f[2], line_no, "theta"));
        if (f[3] == "E") {
            m.kind = MinutiaKind::ridge_ending;
        } else if (f[3] == "B") {
            m.kind = MinutiaKind::bifurcation;
        } else {
            throw FormatError("line " + std::to_string(line_no) + ": type must be E or B, got '" + std::string(f[3]) + "'");
        }
        m.quality = detail::parse_double(f[4], line_no, "quality");
        set.items.push_back(m);
    }
    if (!have_header) throw FormatError("missing '<width>\\t<height>' header line");
    return set;
}

/// Six decimals per real field.
inline std::string format_minutiae(const MinutiaSet& set) {
    std::string out = "# x\ty\ttheta\ttype\tquality\n";
    out += std::to_string(set.width) + "\t" + std::to_string(set.height) + "\n";
    char buf[160];
    for (const Minutia& m : set.items) {
        std::snprintf(buf, sizeof buf, "%.6f\t%.6f\t%.6f\t%c\t%.6f\n", m.x, m.y, m.theta,
                      m.kind == MinutiaKind::ridge_ending ? 'E' : 'B', m.quality);
        out += buf;
    }
    return out;
}

inline MinutiaSet read_minutiae(const std::filesystem::path& path) {
    try {
        return parse_minutiae(read_file(path));
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

inline void write_minutiae(const std::filesystem::path& path, const MinutiaSet& set) {
    write_file_atomic(path, format_minutiae(set));
}

}  // namespace leader::io
