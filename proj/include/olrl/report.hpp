// Report rendering: turns the benchmark's CSV outputs into self-contained
// SVG line plots. Rendering is pure string formatting over the parsed
// numbers, so identical inputs produce byte-identical files.
#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "olrl/bench.hpp"
#include "olrl/core.hpp"
#include "olrl/serialize.hpp"

namespace olrl {

struct PlotSeries {
    std::string name;
    std::vector<Vec2> points;  // NaN points are skipped
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '&')
            out += "&amp;";
        else if (c == '<')
            out += "&lt;";
        else if (c == '>')
            out += "&gt;";
        else
            out += c;
    }
    return out;
}

inline std::string svg_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

inline std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

}  // namespace detail

// Renders series as polylines over labeled axes with a legend. Throws
// UsageError when no series has a finite point.
inline std::string line_plot_svg(const std::string& title, const std::string& x_label,
                                 const std::string& y_label,
                                 const std::vector<PlotSeries>& series) {
    static const char* kColors[] = {"#1b6ca8", "#c0392b", "#1e8449", "#8e44ad",
                                    "#d68910", "#17a589"};
    constexpr int kW = 720, kH = 480;
    constexpr double kLeft = 72, kRight = 24, kTop = 48, kBottom = 56;

    double x_min = 0, x_max = 0, y_min = 0, y_max = 0;
    bool any = false;
    for (const PlotSeries& s : series) {
        for (const Vec2& p : s.points) {
            if (!std::isfinite(p.x) || !std::isfinite(p.y)) continue;
            if (!any) {
                x_min = x_max = p.x;
                y_min = y_max = p.y;
                any = true;
            } else {
                x_min = std::min(x_min, p.x);
                x_max = std::max(x_max, p.x);
                y_min = std::min(y_min, p.y);
                y_max = std::max(y_max, p.y);
            }
        }
    }
    if (!any) throw UsageError("nothing to plot: no finite points");
    if (x_max == x_min) {
        x_min -= 1.0;
        x_max += 1.0;
    }
    if (y_max == y_min) {
        y_min -= 1.0;
        y_max += 1.0;
    }
    const double plot_w = kW - kLeft - kRight, plot_h = kH - kTop - kBottom;
    auto px = [&](double x) { return kLeft + (x - x_min) / (x_max - x_min) * plot_w; };
    auto py = [&](double y) { return kTop + (y_max - y) / (y_max - y_min) * plot_h; };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"480\" "
           "viewBox=\"0 0 720 480\">\n";
    svg += "<rect width=\"720\" height=\"480\" fill=\"#ffffff\"/>\n";
    svg += "<text x=\"360\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"16\">" +
           detail::xml_escape(title) + "</text>\n";

    // Axes with five ticks per side.
    for (int i = 0; i < 5; ++i) {
        double fx = x_min + (x_max - x_min) * i / 4.0;
        double fy = y_min + (y_max - y_min) * i / 4.0;
        std::string gx = detail::svg_num(px(fx));
        std::string gy = detail::svg_num(py(fy));
        svg += "<line x1=\"" + gx + "\" y1=\"" + detail::svg_num(kTop) + "\" x2=\"" + gx +
               "\" y2=\"" + detail::svg_num(kH - kBottom) +
               "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
        svg += "<line x1=\"" + detail::svg_num(kLeft) + "\" y1=\"" + gy + "\" x2=\"" +
               detail::svg_num(kW - kRight) + "\" y2=\"" + gy +
               "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
        svg += "<text x=\"" + gx + "\" y=\"" + detail::svg_num(kH - kBottom + 18) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
               detail::tick_label(fx) + "</text>\n";
        svg += "<text x=\"" + detail::svg_num(kLeft - 6) + "\" y=\"" +
               detail::svg_num(py(fy) + 4) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" +
               detail::tick_label(fy) + "</text>\n";
    }
    svg += "<rect x=\"" + detail::svg_num(kLeft) + "\" y=\"" + detail::svg_num(kTop) +
           "\" width=\"" + detail::svg_num(plot_w) + "\" height=\"" + detail::svg_num(plot_h) +
           "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    svg += "<text x=\"" + detail::svg_num(kLeft + plot_w / 2) + "\" y=\"" +
           detail::svg_num(kH - 12) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" +
           detail::xml_escape(x_label) + "</text>\n";
    svg += "<text x=\"18\" y=\"" + detail::svg_num(kTop + plot_h / 2) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
           "transform=\"rotate(-90 18 " +
           detail::svg_num(kTop + plot_h / 2) + ")\">" + detail::xml_escape(y_label) +
           "</text>\n";

    for (size_t si = 0; si < series.size(); ++si) {
        const char* color = kColors[si % (sizeof(kColors) / sizeof(kColors[0]))];
        std::string pts;
        for (const Vec2& p : series[si].points) {
            if (!std::isfinite(p.x) || !std::isfinite(p.y)) continue;
            if (!pts.empty()) pts += ' ';
            pts += detail::svg_num(px(p.x)) + "," + detail::svg_num(py(p.y));
        }
        if (!pts.empty())
            svg += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color +
                   "\" stroke-width=\"2\"/>\n";
        double ly = kTop + 16 + 16 * double(si);
        svg += "<line x1=\"" + detail::svg_num(kW - 190) + "\" y1=\"" + detail::svg_num(ly) +
               "\" x2=\"" + detail::svg_num(kW - 166) + "\" y2=\"" + detail::svg_num(ly) +
               "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
        svg += "<text x=\"" + detail::svg_num(kW - 160) + "\" y=\"" + detail::svg_num(ly + 4) +
               "\" font-family=\"sans-serif\" font-size=\"12\">" +
               detail::xml_escape(series[si].name) + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

// ---------------------------------------------------------------------------
// Report generation from a benchmark output directory.

namespace detail {

// Mean score across seeds per episode, x = mean cumulative environment steps.
inline PlotSeries learning_curve_series(const std::string& name, const CsvTable& t) {
    std::map<int, std::pair<double, int>> score_by_episode;  // episode -> (sum, n)
    std::map<int, double> cum_by_episode;                    // episode -> summed cum steps
    std::map<int, double> cum_by_seed;                       // running per-seed step count
    for (const std::vector<double>& r : t.rows) {
        int seed = int(r[0]);
        int episode = int(r[1]);
        cum_by_seed[seed] += r[2];
        score_by_episode[episode].first += r[3];
        score_by_episode[episode].second += 1;
        cum_by_episode[episode] += cum_by_seed[seed];
    }
    PlotSeries s;
    s.name = name;
    for (const auto& [episode, acc] : score_by_episode) {
        double x = cum_by_episode[episode] / acc.second;
        s.points.push_back({x, acc.first / acc.second});
    }
    return s;
}

}  // namespace detail

// Reads metrics_<variant>.csv and dynamics.csv from `in_dir` and renders
// learning_curves.svg and dynamics_error.svg next to them. Returns the paths
// written. Missing files are skipped; having none at all is an IoError, as
// is any malformed CSV (the error names the offending row).
inline std::vector<std::string> render_report(const std::string& in_dir) {
    namespace fs = std::filesystem;
    std::vector<std::string> written;

    std::vector<PlotSeries> curves;
    for (Variant v : {Variant::olrl, Variant::olrl_minus_m, Variant::random_policy}) {
        std::string path = in_dir + "/metrics_" + variant_name(v) + ".csv";
        if (!fs::exists(path)) continue;
        CsvTable t = read_csv(path, metrics_header());
        curves.push_back(detail::learning_curve_series(variant_name(v), t));
    }
    if (!curves.empty()) {
        std::string path = in_dir + "/learning_curves.svg";
        std::ofstream out = open_output(path);
        out << line_plot_svg("Episode score by variant", "environment steps",
                             "mean episode score", curves);
        if (!out) throw IoError("failed while writing " + path);
        written.push_back(path);
    }

    std::string dyn_path = in_dir + "/dynamics.csv";
    if (fs::exists(dyn_path)) {
        CsvTable t = read_csv(dyn_path, dynamics_header());
        PlotSeries model_all{"model (all tracks)", {}}, model_agent{"model (agent)", {}};
        PlotSeries base_all{"const-velocity (all)", {}}, base_agent{"const-velocity (agent)", {}};
        for (const std::vector<double>& r : t.rows) {
            model_all.points.push_back({r[0], r[1]});
            model_agent.points.push_back({r[0], r[2]});
            base_all.points.push_back({r[0], r[3]});
            base_agent.points.push_back({r[0], r[4]});
        }
        std::string path = in_dir + "/dynamics_error.svg";
        std::ofstream out = open_output(path);
        out << line_plot_svg("Open-loop prediction error", "horizon (steps)",
                             "mean position error (pixels)",
                             {model_all, model_agent, base_all, base_agent});
        if (!out) throw IoError("failed while writing " + path);
        written.push_back(path);
    }

    if (written.empty())
        throw IoError("no report inputs found in " + in_dir +
                      " (expected metrics_<variant>.csv or dynamics.csv)");
    return written;
}

}  // namespace olrl
