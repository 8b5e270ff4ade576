#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "ftcl/errors.hpp"

namespace ftcl {

struct Series {
    std::string name;
    std::vector<std::pair<double, double>> points;
};

struct SvgStyle {
    double width = 1000;
    double height = 600;
    std::string title;
    std::string x_label;
    std::string y_label;
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
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

inline std::string fmt_coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

inline std::string fmt_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

} // namespace detail

// Standalone line chart: axes, ticks, legend, one polyline per series.
// 1000x600 viewBox, linear axes, no external resources.
inline void emit_svg_plot(std::span<const Series> series, const std::filesystem::path& path,
                          const SvgStyle& style = {}) {
    if (series.empty()) throw EmptySeriesError("emit_svg_plot: no series");
    for (const auto& s : series)
        if (s.points.empty())
            throw EmptySeriesError("emit_svg_plot: series '" + s.name + "' is empty");

    double xmin = series[0].points[0].first, xmax = xmin;
    double ymin = series[0].points[0].second, ymax = ymin;
    for (const auto& s : series) {
        for (const auto& [x, y] : s.points) {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    }
    if (xmax == xmin) { xmax += 1.0; xmin -= 1.0; }
    if (ymax == ymin) { ymax += 1.0; ymin -= 1.0; }

    const double ml = 70, mr = 20, mt = style.title.empty() ? 20 : 40, mb = 50;
    const double pw = style.width - ml - mr;
    const double ph = style.height - mt - mb;
    auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto sy = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

    static const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                     "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
                                     "#bcbd22", "#17becf"};
    constexpr std::size_t kPaletteSize = 10;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("emit_svg_plot: cannot open " + path.string());
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << style.width << " "
        << style.height << "\">\n";
    out << "<rect width=\"" << style.width << "\" height=\"" << style.height
        << "\" fill=\"white\"/>\n";
    if (!style.title.empty())
        out << "<text x=\"" << style.width / 2
            << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" font-family=\"sans-serif\">"
            << detail::xml_escape(style.title) << "</text>\n";

    // axes
    out << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
        << mt + ph << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
        << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 5; ++t) {
        const double fx = xmin + (xmax - xmin) * t / 5.0;
        const double fy = ymin + (ymax - ymin) * t / 5.0;
        out << "<line x1=\"" << detail::fmt_coord(sx(fx)) << "\" y1=\"" << mt + ph << "\" x2=\""
            << detail::fmt_coord(sx(fx)) << "\" y2=\"" << mt + ph + 5 << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << detail::fmt_coord(sx(fx)) << "\" y=\"" << mt + ph + 20
            << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">"
            << detail::fmt_tick(fx) << "</text>\n";
        out << "<line x1=\"" << ml - 5 << "\" y1=\"" << detail::fmt_coord(sy(fy)) << "\" x2=\""
            << ml << "\" y2=\"" << detail::fmt_coord(sy(fy)) << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << ml - 8 << "\" y=\"" << detail::fmt_coord(sy(fy) + 4)
            << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">"
            << detail::fmt_tick(fy) << "</text>\n";
    }
    if (!style.x_label.empty())
        out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << style.height - 10
            << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">"
            << detail::xml_escape(style.x_label) << "</text>\n";
    if (!style.y_label.empty())
        out << "<text x=\"16\" y=\"" << mt + ph / 2
            << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" "
               "transform=\"rotate(-90 16 "
            << mt + ph / 2 << ")\">" << detail::xml_escape(style.y_label) << "</text>\n";

    for (std::size_t i = 0; i < series.size(); ++i) {
        const char* color = kPalette[i % kPaletteSize];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : series[i].points)
            out << detail::fmt_coord(sx(x)) << ',' << detail::fmt_coord(sy(y)) << ' ';
        out << "\"/>\n";
    }

    // legend, top right
    for (std::size_t i = 0; i < series.size(); ++i) {
        const char* color = kPalette[i % kPaletteSize];
        const double ly = mt + 16 + 18 * static_cast<double>(i);
        out << "<line x1=\"" << ml + pw - 150 << "\" y1=\"" << ly << "\" x2=\"" << ml + pw - 126
            << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << ml + pw - 120 << "\" y=\"" << ly + 4
            << "\" font-size=\"12\" font-family=\"sans-serif\">" << detail::xml_escape(series[i].name)
            << "</text>\n";
    }

    out << "</svg>\n";
    if (!out) throw IoError("emit_svg_plot: write failed for " + path.string());
}

} // namespace ftcl
