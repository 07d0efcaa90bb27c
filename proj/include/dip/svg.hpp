#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dip/errors.hpp"
#include "dip/experiment.hpp"
#include "dip/serialize.hpp"

namespace dip {

namespace detail {

// Five-stop dark-blue-to-yellow ramp for success frequencies in [0, 1].
inline std::string heat_color(double v) {
    static const double stops[5][3] = {{68, 1, 84},      // 0.00
                                       {59, 82, 139},    // 0.25
                                       {33, 145, 140},   // 0.50
                                       {94, 201, 98},    // 0.75
                                       {253, 231, 37}};  // 1.00
    v = std::clamp(v, 0.0, 1.0);
    const double pos = v * 4.0;
    const int lo = std::min(3, static_cast<int>(pos));
    const double f = pos - lo;
    std::ostringstream out;
    out << "rgb(";
    for (int c = 0; c < 3; ++c) {
        const int val = static_cast<int>(std::lround(stops[lo][c] + f * (stops[lo + 1][c] - stops[lo][c])));
        out << val << (c < 2 ? "," : ")");
    }
    return out.str();
}

inline std::string svg_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '&') out += "&amp;";
        else if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else out += c;
    }
    return out;
}

}  // namespace detail

/// Standalone heatmap of per-cell success frequency; axes are labeled with
/// the grid's parameter names and values. provenance, when nonempty, is
/// embedded as an XML comment.
inline void write_heatmap_svg(std::ostream& out, const GridResult& result,
                              const std::string& provenance = "") {
    const long n1 = static_cast<long>(result.spec.axis1.values.size());
    const long n2 = static_cast<long>(result.spec.axis2.values.size());
    const double cell = 46.0, left = 86.0, top = 46.0, legend = 88.0, bottom = 66.0;
    const double width = left + n1 * cell + legend + 20.0;
    const double height = top + n2 * cell + bottom;

    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    if (!provenance.empty())
        out << "<!-- " << detail::svg_escape(provenance) << " -->\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << left << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">"
        << "success frequency</text>\n";

    // cells: axis1 along x, axis2 along y (first value at the bottom)
    for (long i1 = 0; i1 < n1; ++i1) {
        for (long i2 = 0; i2 < n2; ++i2) {
            const CellStats& s = result.cells[result.cell_index(i1, i2)];
            const bool done = result.cell_done[result.cell_index(i1, i2)] != 0;
            const double x = left + i1 * cell;
            const double y = top + (n2 - 1 - i2) * cell;
            out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\""
                << cell << "\" fill=\"" << (done ? detail::heat_color(s.success_freq()) : "#dddddd")
                << "\" stroke=\"white\"/>\n";
            if (done)
                out << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4
                    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\" fill=\""
                    << (s.success_freq() > 0.6 ? "black" : "white") << "\">"
                    << format_double(std::round(s.success_freq() * 100.0) / 100.0) << "</text>\n";
        }
    }

    // axis tick labels
    for (long i1 = 0; i1 < n1; ++i1)
        out << "<text x=\"" << left + i1 * cell + cell / 2 << "\" y=\"" << top + n2 * cell + 18
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
            << result.spec.axis1.values[i1] << "</text>\n";
    for (long i2 = 0; i2 < n2; ++i2)
        out << "<text x=\"" << left - 8 << "\" y=\"" << top + (n2 - 1 - i2) * cell + cell / 2 + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">"
            << result.spec.axis2.values[i2] << "</text>\n";

    // axis names
    out << "<text x=\"" << left + n1 * cell / 2 << "\" y=\"" << top + n2 * cell + 42
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
        << detail::svg_escape(result.spec.axis1.name) << "</text>\n";
    out << "<text x=\"22\" y=\"" << top + n2 * cell / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 22 "
        << top + n2 * cell / 2 << ")\">" << detail::svg_escape(result.spec.axis2.name)
        << "</text>\n";

    // legend
    const double lx = left + n1 * cell + 26.0;
    for (int i = 0; i < 50; ++i) {
        const double v = 1.0 - i / 49.0;
        out << "<rect x=\"" << lx << "\" y=\"" << top + i * (n2 * cell) / 50.0 << "\" width=\"16\" height=\""
            << (n2 * cell) / 50.0 + 0.5 << "\" fill=\"" << detail::heat_color(v) << "\"/>\n";
    }
    out << "<text x=\"" << lx + 22 << "\" y=\"" << top + 10
        << "\" font-family=\"sans-serif\" font-size=\"11\">1.0</text>\n";
    out << "<text x=\"" << lx + 22 << "\" y=\"" << top + n2 * cell
        << "\" font-family=\"sans-serif\" font-size=\"11\">0.0</text>\n";
    out << "</svg>\n";
}

/// Residual decay curve on a log10 scale, with the theoretical envelope
/// overlaid when a positive rate is supplied.
inline void write_decay_svg(std::ostream& out, const Trajectory& traj, double envelope_rate = 0.0,
                            const std::string& provenance = "") {
    std::vector<double> ts, rs;
    for (const TrajectorySample& s : traj.samples) {
        if (s.residual_y > 0.0 && std::isfinite(s.residual_y)) {
            ts.push_back(s.time);
            rs.push_back(std::log10(s.residual_y));
        }
    }
    const double width = 560.0, height = 380.0, left = 70.0, right = 20.0, top = 34.0,
                 bottom = 52.0;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    if (!provenance.empty())
        out << "<!-- " << detail::svg_escape(provenance) << " -->\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << left << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">"
        << "residual decay |y(t) - y|</text>\n";
    if (ts.size() < 2) {
        out << "<text x=\"" << left << "\" y=\"60\" font-family=\"sans-serif\" font-size=\"12\">"
        << "not enough positive samples to plot</text>\n</svg>\n";
        return;
    }
    const double t_min = ts.front(), t_max = std::max(ts.back(), t_min + 1e-12);
    double r_min = rs[0], r_max = rs[0];
    for (double r : rs) {
        r_min = std::min(r_min, r);
        r_max = std::max(r_max, r);
    }
    if (envelope_rate > 0.0)
        r_max = std::max(r_max, rs[0] + std::log10(1.05));
    if (r_max - r_min < 1e-9) r_max = r_min + 1.0;
    const double plot_w = width - left - right, plot_h = height - top - bottom;
    auto X = [&](double t) { return left + (t - t_min) / (t_max - t_min) * plot_w; };
    auto Y = [&](double r) { return top + (r_max - r) / (r_max - r_min) * plot_h; };

    out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\""
        << plot_h << "\" fill=\"none\" stroke=\"#888\"/>\n";
    // measured curve
    out << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < ts.size(); ++i)
        out << format_double(X(ts[i])) << ',' << format_double(Y(rs[i])) << ' ';
    out << "\"/>\n";
    // envelope 1.05 r0 exp(-rate t)
    if (envelope_rate > 0.0) {
        const double log10e = std::log10(std::exp(1.0));
        out << "<polyline fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.2\" stroke-dasharray=\"6 4\" points=\"";
        for (int i = 0; i <= 100; ++i) {
            const double t = t_min + (t_max - t_min) * i / 100.0;
            const double r = rs[0] + std::log10(1.05) - envelope_rate * (t - t_min) * log10e;
            out << format_double(X(t)) << ',' << format_double(Y(std::max(r, r_min))) << ' ';
        }
        out << "\"/>\n";
        out << "<text x=\"" << width - right - 150 << "\" y=\"" << top + 16
            << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#d62728\">envelope e^(-rate t)</text>\n";
    }
    // axis labels and end ticks
    out << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 14
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">time t</text>\n";
    out << "<text x=\"20\" y=\"" << top + plot_h / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 20 "
        << top + plot_h / 2 << ")\">log10 residual</text>\n";
    out << "<text x=\"" << left << "\" y=\"" << height - bottom + 16
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << format_double(t_min) << "</text>\n";
    out << "<text x=\"" << left + plot_w << "\" y=\"" << height - bottom + 16
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << format_double(t_max) << "</text>\n";
    out << "<text x=\"" << left - 6 << "\" y=\"" << Y(r_max) + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << format_double(std::round(r_max * 100.0) / 100.0) << "</text>\n";
    out << "<text x=\"" << left - 6 << "\" y=\"" << Y(r_min) + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << format_double(std::round(r_min * 100.0) / 100.0) << "</text>\n";
    out << "</svg>\n";
}

}  // namespace dip
