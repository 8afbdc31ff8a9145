#pragma once

// Minimal static line plot: unit-square axes with ticks and one polyline per series.

#include <cstdio>
#include <string>
#include <utility>
#include <vector>

namespace leader::io {

struct PlotSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;  // (x, y) in [0, 1]
    std::string color = "#1f77b4";
};

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string unit_plot_svg(const std::vector<PlotSeries>& series, const std::string& x_label,
                                 const std::string& y_label, const std::string& title) {
    constexpr double left = 60, top = 40, size = 400;
    char buf[256];
    auto px = [&](double x) { return left + x * size; };
    auto py = [&](double y) { return top + (1.0 - y) * size; };

    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"500\" height=\"510\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">%s</text>\n",
                  left + size / 2, xml_escape(title).c_str());
    s += buf;
    std::snprintf(buf, sizeof buf, "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" stroke=\"black\"/>\n",
                  left, top, size, size);
    s += buf;
    for (int k = 0; k <= 10; ++k) {
        const double v = k / 10.0;
        std::snprintf(buf, sizeof buf,
                      "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#ddd\"/>"
                      "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#ddd\"/>\n",
                      px(v), top, px(v), top + size, left, py(v), left + size, py(v));
        s += buf;
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">%.1f</text>"
                      "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\">%.1f</text>\n",
                      px(v), top + size + 16, v, left - 6, py(v) + 4, v);
        s += buf;
    }
    std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">%s</text>\n", left + size / 2,
                  top + size + 36, xml_escape(x_label).c_str());
    s += buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"16\" y=\"%.1f\" text-anchor=\"middle\" transform=\"rotate(-90 16 %.1f)\">%s</text>\n",
                  top + size / 2, top + size / 2, xml_escape(y_label).c_str());
    s += buf;
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& sr = series[k];
        s += "<polyline fill=\"none\" stroke=\"" + xml_escape(sr.color) + "\" stroke-width=\"2\" points=\"";
        for (const auto& [x, y] : sr.points) {
            std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(x), py(y));
            s += buf;
        }
        s += "\"/>\n";
        std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" fill=\"%s\">%s</text>\n", left + size - 120,
                      top + 20 + 16.0 * static_cast<double>(k), xml_escape(sr.color).c_str(), xml_escape(sr.label).c_str());
        s += buf;
    }
    return s + "</svg>\n";
}

}  // namespace leader::io
