#pragma once

// Standalone SVG figures: persistence diagrams (diagonal, markers per
// degree) and order-statistic null distributions (replicate histograms with
// the observed value marked).

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rst/diagram.hpp"
#include "rst/inference.hpp"

namespace rst {

namespace detail {

inline std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

}  // namespace detail

inline void emit_svg(const PersistenceDiagram& pd, const std::string& path) {
    const double size = 480.0, margin = 48.0, plot = size - 2.0 * margin;

    double lo = 0.0, hi = 1.0;
    bool first = true;
    for (const auto& p : pd.points()) {
        if (first) { lo = p.birth; hi = p.death; first = false; }
        lo = std::min({lo, p.birth, p.death});
        hi = std::max({hi, p.birth, p.death});
    }
    if (hi <= lo) hi = lo + 1.0;
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    auto sx = [&](double v) { return margin + (v - lo) / (hi - lo) * plot; };
    auto sy = [&](double v) { return size - margin - (v - lo) / (hi - lo) * plot; };

    std::ofstream os(path);
    if (!os) throw error("cannot write " + path);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\""
       << size << "\" viewBox=\"0 0 " << size << " " << size << "\">\n";
    os << "<rect width=\"" << size << "\" height=\"" << size << "\" fill=\"white\"/>\n";
    // axes
    os << "<line x1=\"" << margin << "\" y1=\"" << size - margin << "\" x2=\"" << size - margin
       << "\" y2=\"" << size - margin << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
       << size - margin << "\" stroke=\"black\"/>\n";
    // diagonal
    os << "<line x1=\"" << sx(lo) << "\" y1=\"" << sy(lo) << "\" x2=\"" << sx(hi) << "\" y2=\""
       << sy(hi) << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
    for (const auto& p : pd.points()) {
        const double cx = sx(p.birth), cy = sy(p.death);
        if (p.degree == 0) {
            os << "<circle cx=\"" << detail::fmt(cx) << "\" cy=\"" << detail::fmt(cy)
               << "\" r=\"3\" fill=\"" << (p.essential ? "none" : "black")
               << "\" stroke=\"black\"/>\n";
        } else {
            os << "<path d=\"M " << detail::fmt(cx) << " " << detail::fmt(cy - 4.0) << " L "
               << detail::fmt(cx - 3.5) << " " << detail::fmt(cy + 3.0) << " L "
               << detail::fmt(cx + 3.5) << " " << detail::fmt(cy + 3.0)
               << " Z\" fill=\"red\"/>\n";
        }
    }
    os << "<text x=\"" << size / 2 << "\" y=\"" << size - 12
       << "\" text-anchor=\"middle\" font-size=\"13\">birth</text>\n";
    os << "<text x=\"14\" y=\"" << size / 2 << "\" text-anchor=\"middle\" font-size=\"13\" "
       << "transform=\"rotate(-90 14 " << size / 2 << ")\">death</text>\n";
    os << "</svg>\n";
}

// One histogram panel per T_j with the observed statistic marked.
inline void emit_svg(const OrderStatReport& report, const ReplicateEnsemble& ensemble,
                     const std::string& path) {
    const int J = static_cast<int>(report.rows.size());
    const double panel_w = 300.0, panel_h = 170.0, margin = 36.0;
    const double width = panel_w + 2.0 * margin;
    const double height = J * (panel_h + margin) + margin;

    std::ofstream os(path);
    if (!os) throw error("cannot write " + path);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
       << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    os << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";

    for (int j = 0; j < J; ++j) {
        std::vector<double> stats;
        for (const auto& rep : ensemble.replicates)
            stats.push_back(order_statistics(rep, j + 1)[j]);
        double lo = *std::min_element(stats.begin(), stats.end());
        double hi = *std::max_element(stats.begin(), stats.end());
        lo = std::min(lo, report.rows[j].observed);
        hi = std::max(hi, report.rows[j].observed);
        if (hi <= lo) hi = lo + 1.0;
        const double pad = 0.05 * (hi - lo);
        lo -= pad;
        hi += pad;

        const int bins = 30;
        std::vector<int> counts(bins, 0);
        for (double v : stats) {
            int b = static_cast<int>((v - lo) / (hi - lo) * bins);
            counts[std::clamp(b, 0, bins - 1)]++;
        }
        const int peak = *std::max_element(counts.begin(), counts.end());

        const double top = margin + j * (panel_h + margin);
        const double base = top + panel_h;
        auto sx = [&](double v) { return margin + (v - lo) / (hi - lo) * panel_w; };
        for (int b = 0; b < bins; ++b) {
            const double bh = peak > 0 ? panel_h * counts[b] / peak : 0.0;
            os << "<rect x=\"" << detail::fmt(margin + b * panel_w / bins) << "\" y=\""
               << detail::fmt(base - bh) << "\" width=\"" << detail::fmt(panel_w / bins)
               << "\" height=\"" << detail::fmt(bh)
               << "\" fill=\"steelblue\" stroke=\"white\" stroke-width=\"0.5\"/>\n";
        }
        const double ox = sx(report.rows[j].observed);
        os << "<line x1=\"" << detail::fmt(ox) << "\" y1=\"" << detail::fmt(top) << "\" x2=\""
           << detail::fmt(ox) << "\" y2=\"" << detail::fmt(base)
           << "\" stroke=\"red\" stroke-width=\"2\"/>\n";
        os << "<line x1=\"" << margin << "\" y1=\"" << detail::fmt(base) << "\" x2=\""
           << margin + panel_w << "\" y2=\"" << detail::fmt(base) << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << margin << "\" y=\"" << detail::fmt(top - 6.0)
           << "\" font-size=\"12\">T_" << (j + 1)
           << "  observed=" << detail::fmt(report.rows[j].observed)
           << "  p=" << detail::fmt(report.rows[j].p_value) << "</text>\n";
    }
    os << "</svg>\n";
}

}  // namespace rst
