#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <fmt/format.h>

#include "budgetab/error.hpp"
#include "budgetab/io.hpp"
#include "budgetab/sim.hpp"

namespace budgetab {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

/// Round tick positions covering [lo, hi].
std::vector<double> ticks(double lo, double hi) {
    const double span = hi - lo;
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double f : {1.0, 2.0, 5.0, 10.0}) {
        step = f * mag;
        if (step >= raw) break;
    }
    std::vector<double> out;
    for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) out.push_back(t);
    return out;
}

}  // namespace

std::string svg_line_chart(std::string_view title, std::string_view x_label, std::string_view y_label,
                           std::span<const ChartSeries> series) {
    constexpr double width = 640, height = 420, left = 70, right = 150, top = 40, bottom = 55;
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
    for (const auto& s : series) {
        for (auto [x, y] : s.points) {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    }
    if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    if (xmax == xmin) xmin -= 0.5, xmax += 0.5;
    if (ymax == ymin) ymin -= 0.5, ymax += 0.5;
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;
    const double pw = width - left - right, ph = height - top - bottom;
    auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
    auto sy = [&](double y) { return top + (ymax - y) / (ymax - ymin) * ph; };

    std::string out = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
        "font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
        width, height);
    out += fmt::format("<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
                       left + pw / 2, escape(title));
    out += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>\n", left,
                       top, pw, ph);
    for (double t : ticks(xmin, xmax)) {
        out += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1}\" x2=\"{0:.2f}\" y2=\"{2}\" stroke=\"#ddd\"/>"
                           "<text x=\"{0:.2f}\" y=\"{3}\" text-anchor=\"middle\">{4:g}</text>\n",
                           sx(t), top, top + ph, top + ph + 16, t);
    }
    for (double t : ticks(ymin, ymax)) {
        out += fmt::format("<line x1=\"{1}\" y1=\"{0:.2f}\" x2=\"{2}\" y2=\"{0:.2f}\" stroke=\"#ddd\"/>"
                           "<text x=\"{3}\" y=\"{4:.2f}\" text-anchor=\"end\">{5:.4g}</text>\n",
                           sy(t), left, left + pw, left - 6, sy(t) + 4, std::abs(t) < 1e-12 ? 0.0 : t);
    }
    out += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", left + pw / 2, height - 12,
                       escape(x_label));
    out += fmt::format("<text x=\"16\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0})\">{1}</text>\n",
                       top + ph / 2, escape(y_label));
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto* colour = kPalette[k % std::size(kPalette)];
        std::string path;
        for (auto [x, y] : series[k].points) {
            path += fmt::format("{}{:.2f},{:.2f}", path.empty() ? "" : " ", sx(x), sy(y));
        }
        out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n", colour, path);
        for (auto [x, y] : series[k].points) {
            out += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"2.5\" fill=\"{}\"/>\n", sx(x), sy(y), colour);
        }
        const double ly = top + 14 + 18.0 * static_cast<double>(k);
        out += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"{3}\" stroke-width=\"2\"/>"
                           "<text x=\"{4}\" y=\"{5}\">{6}</text>\n",
                           left + pw + 10, ly, left + pw + 30, colour, left + pw + 36, ly + 4,
                           escape(series[k].label));
    }
    out += "</svg>\n";
    return out;
}

namespace {

enum class Axis { r1, r2, r3 };

double axis_value(const SweepRow& r, Axis a) {
    switch (a) {
        case Axis::r1: return r.r1;
        case Axis::r2: return r.r2;
        case Axis::r3: return r.r3;
    }
    return 0.0;
}

std::string_view axis_name(Axis a) {
    switch (a) {
        case Axis::r1: return "supply-demand rate r1";
        case Axis::r2: return "budget-cost rate r2";
        case Axis::r3: return "consistency rate r3";
    }
    return "";
}

/// Series keyed by design plus every non-x parameter that varies.
std::vector<ChartSeries> collect(const SweepGrid& grid, std::span<const SweepRow> rows, Axis x,
                                 double (*metric)(const SweepRow&)) {
    std::map<std::string, ChartSeries> by_label;
    std::vector<std::string> order;
    for (const auto& r : rows) {
        std::string label(to_string(r.design));
        if (x != Axis::r1 && grid.r1.size() > 1) label += fmt::format(" r1={:g}", r.r1);
        if (x != Axis::r2 && grid.r2.size() > 1) label += fmt::format(" r2={:g}", r.r2);
        if (x != Axis::r3 && grid.r3.size() > 1) label += fmt::format(" r3={:g}", r.r3);
        auto [it, inserted] = by_label.try_emplace(label, ChartSeries{label, {}});
        if (inserted) order.push_back(label);
        it->second.points.emplace_back(axis_value(r, x), metric(r));
    }
    std::vector<ChartSeries> out;
    for (const auto& label : order) {
        auto s = std::move(by_label[label]);
        std::ranges::sort(s.points);
        out.push_back(std::move(s));
    }
    return out;
}

double bias_per_item(const SweepRow& r) { return r.stats.bias / static_cast<double>(r.items); }
double abs_bias_per_item(const SweepRow& r) { return r.stats.abs_bias / static_cast<double>(r.items); }
double stddev_metric(const SweepRow& r) { return r.stats.stddev; }
double rel_stddev_metric(const SweepRow& r) { return r.stats.rel_stddev; }

}  // namespace

std::vector<std::filesystem::path> write_sweep(const SweepGrid& grid, std::span<const SweepRow> rows,
                                               const std::filesystem::path& dir, bool svg) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(ErrorCode::io, fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
    std::vector<std::filesystem::path> written;
    const auto csv = dir / (grid.name + ".csv");
    write_text(csv, sweep_csv(rows));
    written.push_back(csv);
    if (!svg) return written;

    Axis x = Axis::r1;
    if (grid.r1.size() <= 1) x = grid.r2.size() > 1 && grid.r3.size() <= 1 ? Axis::r2 : Axis::r3;
    if (grid.r1.size() <= 1 && grid.r2.size() <= 1 && grid.r3.size() <= 1) x = Axis::r1;
    auto emit = [&](const std::string& file, std::string_view title, std::string_view ylabel,
                    double (*metric)(const SweepRow&)) {
        const auto series = collect(grid, rows, x, metric);
        const auto path = dir / (file + ".svg");
        write_text(path, svg_line_chart(title, axis_name(x), ylabel, series));
        written.push_back(path);
    };
    if (grid.name == "fig3") {
        emit("fig3_bias", "Average bias per item", "bias / m", bias_per_item);
        emit("fig3_std", "Standard deviation", "stddev", stddev_metric);
    } else if (grid.name == "fig4") {
        emit("fig4", "Bias per item, constrained vs unconstrained", "bias / m", bias_per_item);
    } else if (grid.name == "fig5") {
        emit("fig5", "Relative standard deviation, offline vs online", "stddev / |tte|", rel_stddev_metric);
    } else if (grid.name == "fig6") {
        emit("fig6", "Bias magnitude per item by consistency rate", "|bias| / m", abs_bias_per_item);
    } else {
        emit(grid.name + "_bias", "Bias per item", "bias / m", bias_per_item);
        emit(grid.name + "_std", "Standard deviation", "stddev", stddev_metric);
    }
    return written;
}

}  // namespace budgetab
