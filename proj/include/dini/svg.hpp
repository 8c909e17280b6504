#pragma once

// Standalone SVG line plots of report tables. Output depends only on the rows.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "dini/error.hpp"
#include "dini/report.hpp"

namespace dini::experiments {

struct Plot {
    std::string filename;
    std::string svg;
};

namespace svg_detail {

inline constexpr int kWidth = 640, kHeight = 420;
inline constexpr int kLeft = 70, kRight = 190, kTop = 40, kBottom = 50;
inline constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                          "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

inline std::string escape(const std::string& s) {
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

struct Axis {
    bool log = false;
    double lo = 0.0, hi = 1.0; // in transformed units

    double map(double v) const { return log ? std::log10(v) : v; }
    bool usable(double v) const { return std::isfinite(v) && (!log || v > 0.0); }

    void fit(const std::vector<double>& vals) {
        bool any = false;
        for (double v : vals) {
            if (!usable(v)) continue;
            const double t = map(v);
            if (!any) lo = hi = t;
            lo = std::min(lo, t);
            hi = std::max(hi, t);
            any = true;
        }
        if (!any) {
            lo = 0.0;
            hi = 1.0;
        }
        if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
            lo -= 0.5;
            hi += 0.5;
        }
    }

    std::vector<double> ticks() const {
        std::vector<double> t;
        for (int i = 0; i <= 4; ++i) t.push_back(lo + (hi - lo) * i / 4.0);
        return t;
    }
    double value(double t) const { return log ? std::pow(10.0, t) : t; }
};

} // namespace svg_detail

/// One polyline per series; legend entries come from report.legend when set.
inline std::string render_table(const ExperimentReport& report, const TableInfo& info) {
    using namespace svg_detail;
    const auto rows = report.table_rows(info.name);
    std::vector<std::string> series;
    for (const auto& r : rows)
        if (std::find(series.begin(), series.end(), r.series) == series.end()) series.push_back(r.series);

    Axis ax{info.log_x}, ay{info.log_y};
    std::vector<double> xs, ys;
    for (const auto& r : rows) {
        if (!ax.usable(r.x) || !ay.usable(r.y)) continue;
        xs.push_back(r.x);
        ys.push_back(r.y);
    }
    ax.fit(xs);
    ay.fit(ys);
    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    auto px = [&](double v) { return kLeft + pw * (ax.map(v) - ax.lo) / (ax.hi - ax.lo); };
    auto py = [&](double v) { return kTop + ph * (1.0 - (ay.map(v) - ay.lo) / (ay.hi - ay.lo)); };

    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(kWidth) + "\" height=\"" +
         std::to_string(kHeight) + "\" viewBox=\"0 0 " + std::to_string(kWidth) + " " + std::to_string(kHeight) +
         "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    s += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(kWidth) + "\" height=\"" + std::to_string(kHeight) +
         "\" fill=\"white\"/>\n";
    const std::string title = info.title.empty() ? info.name : info.title;
    s += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
         escape(title) + "</text>\n";
    s += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double t : ax.ticks()) {
        const double x = kLeft + pw * (t - ax.lo) / (ax.hi - ax.lo);
        s += "<line x1=\"" + num(x) + "\" y1=\"" + num(kTop + ph) + "\" x2=\"" + num(x) + "\" y2=\"" +
             num(kTop + ph + 5) + "\" stroke=\"black\"/>\n";
        s += "<text x=\"" + num(x) + "\" y=\"" + num(kTop + ph + 18) + "\" text-anchor=\"middle\">" +
             escape(tick_label(ax.value(t))) + "</text>\n";
    }
    for (double t : ay.ticks()) {
        const double y = kTop + ph * (1.0 - (t - ay.lo) / (ay.hi - ay.lo));
        s += "<line x1=\"" + num(kLeft - 5) + "\" y1=\"" + num(y) + "\" x2=\"" + num(kLeft) + "\" y2=\"" + num(y) +
             "\" stroke=\"black\"/>\n";
        s += "<text x=\"" + num(kLeft - 8) + "\" y=\"" + num(y + 4) + "\" text-anchor=\"end\">" +
             escape(tick_label(ay.value(t))) + "</text>\n";
    }
    s += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kHeight - 12) + "\" text-anchor=\"middle\">" +
         escape(info.x_label + (info.log_x ? " (log)" : "")) + "</text>\n";
    s += "<text x=\"16\" y=\"" + num(kTop + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         num(kTop + ph / 2) + ")\">" + escape(info.y_label + (info.log_y ? " (log)" : "")) + "</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const char* color = kColors[k % std::size(kColors)];
        std::string pts;
        for (const auto& r : rows) {
            if (r.series != series[k] || !ax.usable(r.x) || !ay.usable(r.y)) continue;
            if (!pts.empty()) pts += ' ';
            pts += num(px(r.x)) + "," + num(py(r.y));
        }
        if (!pts.empty())
            s += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" + pts +
                 "\"/>\n";
        const auto it = report.legend.find(info.name + "/" + series[k]);
        const std::string label = it != report.legend.end() ? it->second : series[k];
        const double ly = kTop + 14.0 + 16.0 * k;
        s += "<line x1=\"" + num(kWidth - kRight + 12) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" +
             num(kWidth - kRight + 32) + "\" y2=\"" + num(ly - 4) + "\" stroke=\"" + color +
             "\" stroke-width=\"2\"/>\n";
        s += "<text x=\"" + num(kWidth - kRight + 36) + "\" y=\"" + num(ly) + "\">" + escape(label) + "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

/// One plot per table; a report without tables yields a single empty plot.
inline std::vector<Plot> emit_plots(const ExperimentReport& report) {
    std::vector<Plot> out;
    for (const auto& t : report.tables) out.push_back({t.name + ".svg", render_table(report, t)});
    if (out.empty()) {
        TableInfo t;
        t.name = report.experiment.empty() ? "report" : report.experiment;
        t.title = t.name;
        out.push_back({t.name + ".svg", render_table(report, t)});
    }
    return out;
}

inline void write_plots(const ExperimentReport& report, const std::filesystem::path& dir) {
    for (const auto& p : emit_plots(report)) {
        std::ofstream f(dir / p.filename, std::ios::binary);
        if (!(f << p.svg)) throw DomainError("cannot write " + (dir / p.filename).string());
    }
}

} // namespace dini::experiments
