#include "conceptscope/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace conceptscope::svg {

namespace {

const char * const kPalette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
                                 "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"};

const char * palette(std::size_t i) {
    return kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))];
}

std::string header(double w, double h) {
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(w) << "\" height=\"" << fmt(h)
       << "\" viewBox=\"0 0 " << fmt(w) << ' ' << fmt(h) << "\" font-family=\"sans-serif\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    return os.str();
}

std::string text(double x, double y, const std::string & s, int size = 11, const char * anchor = "middle",
                 double rotate = 0.0) {
    std::ostringstream os;
    os << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" font-size=\"" << size << "\" text-anchor=\"" << anchor
       << '"';
    if (rotate != 0.0) {
        os << " transform=\"rotate(" << fmt(rotate) << ' ' << fmt(x) << ' ' << fmt(y) << ")\"";
    }
    os << '>' << escape(s) << "</text>\n";
    return os.str();
}

struct Axis {
    double lo;
    double hi;
};

Axis value_axis(const std::vector<Series> & series, std::optional<double> y_min, std::optional<double> y_max,
                const std::vector<std::pair<std::string, double>> & refs = {}) {
    double lo = 0.0;
    double hi = 0.0;
    bool any = false;
    for (const auto & s : series) {
        for (double v : s.values) {
            if (std::isfinite(v)) {
                lo = any ? std::min(lo, v) : v;
                hi = any ? std::max(hi, v) : v;
                any = true;
            }
        }
    }
    for (const auto & r : refs) {
        lo = std::min(lo, r.second);
        hi = std::max(hi, r.second);
    }
    lo = std::min(lo, 0.0);
    if (y_min) {
        lo = *y_min;
    }
    if (y_max) {
        hi = *y_max;
    }
    if (hi <= lo) {
        hi = lo + 1.0;
    }
    return {lo, hi};
}

std::string y_ticks(const Axis & a, double x0, double y_top, double height, double x1) {
    std::ostringstream os;
    for (int k = 0; k <= 4; ++k) {
        const double v = a.lo + (a.hi - a.lo) * k / 4.0;
        const double y = y_top + height * (1.0 - k / 4.0);
        os << "<line x1=\"" << fmt(x0) << "\" y1=\"" << fmt(y) << "\" x2=\"" << fmt(x1) << "\" y2=\"" << fmt(y)
           << "\" stroke=\"#e0e0e0\"/>\n";
        os << text(x0 - 6, y + 4, fmt(std::round(v * 1000.0) / 1000.0), 10, "end");
    }
    return os.str();
}

} // namespace

std::string fmt(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string escape(const std::string & s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        case '\n': out += "\\n"; break;
        default: out += c;
        }
    }
    return out;
}

std::string diverging_color(double v, double vmin, double vmax) {
    if (std::isnan(v)) {
        return "#cccccc";
    }
    const double mid = 0.5 * (vmin + vmax);
    const double t = std::clamp((v - mid) / (0.5 * (vmax - vmin)), -1.0, 1.0);
    // white -> #2166ac for negative, white -> #b2182b for positive
    const int r0 = t < 0 ? 0x21 : 0xb2;
    const int g0 = t < 0 ? 0x66 : 0x18;
    const int b0 = t < 0 ? 0xac : 0x2b;
    const double a = std::abs(t);
    const auto mix = [&](int c) { return static_cast<int>(std::lround(255.0 + (c - 255.0) * a)); };
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", mix(r0), mix(g0), mix(b0));
    return buf;
}

std::string render_heatmap(const Heatmap & h) {
    const std::size_t rows = h.values.rows();
    const std::size_t cols = h.values.cols();
    const double cell = std::clamp(560.0 / static_cast<double>(std::max<std::size_t>({rows, cols, 1})), 1.0, 28.0);
    const bool labels = (!h.row_labels.empty() || !h.col_labels.empty()) && cell >= 8.0;
    const double left = labels || !h.row_groups.empty() ? 170.0 : 40.0;
    const double top = labels || !h.col_groups.empty() ? 150.0 : 50.0;
    const double width = left + cell * static_cast<double>(cols) + 110.0;
    const double height = top + cell * static_cast<double>(rows) + 40.0;

    std::ostringstream os;
    os << header(width, height);
    os << text(width / 2, 22, h.title, 14);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const double v = h.values(r, c);
            os << "<rect class=\"cell\" x=\"" << fmt(left + c * cell) << "\" y=\"" << fmt(top + r * cell) << "\" width=\""
               << fmt(cell) << "\" height=\"" << fmt(cell) << "\" fill=\"" << diverging_color(v, h.vmin, h.vmax)
               << "\"/>\n";
            if (h.annotate && cell >= 24.0) {
                os << text(left + (c + 0.5) * cell, top + (r + 0.5) * cell + 3, fmt(std::round(v * 100.0) / 100.0), 8);
            }
        }
    }
    if (labels) {
        for (std::size_t r = 0; r < h.row_labels.size() && r < rows; ++r) {
            os << text(left - 4, top + (r + 0.5) * cell + 3, h.row_labels[r], 9, "end");
        }
        for (std::size_t c = 0; c < h.col_labels.size() && c < cols; ++c) {
            os << text(left + (c + 0.5) * cell, top - 4, h.col_labels[c], 9, "start", -60);
        }
    }
    const auto group_lines = [&](const std::vector<Group> & groups, bool row) {
        for (const auto & g : groups) {
            const double pos = (row ? top : left) + g.begin * cell;
            const double mid = (row ? top : left) + 0.5 * (g.begin + g.end) * cell;
            // The frame already marks the outer edge.
            const bool interior = g.begin > 0;
            if (row) {
                if (interior) {
                    os << "<line class=\"grid\" x1=\"" << fmt(left) << "\" y1=\"" << fmt(pos) << "\" x2=\"" << fmt(left + cols * cell)
                       << "\" y2=\"" << fmt(pos) << "\" stroke=\"black\" stroke-width=\"0.6\"/>\n";
                }
                if (!labels) {
                    os << text(left - 4, mid + 3, g.label, 9, "end");
                }
            } else {
                if (interior) {
                    os << "<line class=\"grid\" x1=\"" << fmt(pos) << "\" y1=\"" << fmt(top) << "\" x2=\"" << fmt(pos)
                       << "\" y2=\"" << fmt(top + rows * cell) << "\" stroke=\"black\" stroke-width=\"0.6\"/>\n";
                }
                if (!labels) {
                    os << text(mid, top - 4, g.label, 9, "start", -60);
                }
            }
        }
    };
    group_lines(h.row_groups, true);
    group_lines(h.col_groups, false);
    os << "<rect x=\"" << fmt(left) << "\" y=\"" << fmt(top) << "\" width=\"" << fmt(cols * cell) << "\" height=\""
       << fmt(rows * cell) << "\" fill=\"none\" stroke=\"black\" stroke-width=\"0.8\"/>\n";

    // colour bar
    const double bx = left + cols * cell + 30;
    const double bh = std::min(200.0, rows * cell);
    for (int k = 0; k < 40; ++k) {
        const double v = h.vmax - (h.vmax - h.vmin) * (k + 0.5) / 40.0;
        os << "<rect x=\"" << fmt(bx) << "\" y=\"" << fmt(top + bh * k / 40.0) << "\" width=\"14\" height=\""
           << fmt(bh / 40.0 + 0.5) << "\" fill=\"" << diverging_color(v, h.vmin, h.vmax) << "\"/>\n";
    }
    os << text(bx + 18, top + 8, fmt(h.vmax), 10, "start");
    os << text(bx + 18, top + bh / 2 + 4, fmt(0.5 * (h.vmin + h.vmax)), 10, "start");
    os << text(bx + 18, top + bh, fmt(h.vmin), 10, "start");
    os << "</svg>\n";
    return os.str();
}

std::string render_bar_chart(const BarChart & b) {
    const double left = 70;
    const double top = 50;
    const double plot_h = 280;
    const double group_w = std::max(40.0, 18.0 * static_cast<double>(b.series.size()) + 20.0);
    const double plot_w = group_w * static_cast<double>(b.categories.size());
    const double width = left + plot_w + 180;
    const double height = top + plot_h + 110;
    const Axis ax = value_axis(b.series, b.y_min, b.y_max, b.reference_lines);
    const auto ypos = [&](double v) { return top + plot_h * (1.0 - (v - ax.lo) / (ax.hi - ax.lo)); };

    std::ostringstream os;
    os << header(width, height);
    os << text(width / 2, 22, b.title, 14);
    os << y_ticks(ax, left, top, plot_h, left + plot_w);
    os << text(18, top + plot_h / 2, b.y_label, 11, "middle", -90);
    const double bar_w = (group_w - 20.0) / static_cast<double>(std::max<std::size_t>(1, b.series.size()));
    for (std::size_t c = 0; c < b.categories.size(); ++c) {
        const double gx = left + c * group_w + 10.0;
        for (std::size_t s = 0; s < b.series.size(); ++s) {
            const double v = c < b.series[s].values.size() ? b.series[s].values[c] : std::nan("");
            if (!std::isfinite(v)) {
                continue;
            }
            const double y0 = ypos(std::max(ax.lo, 0.0));
            const double y1 = ypos(v);
            os << "<rect class=\"bar\" x=\"" << fmt(gx + s * bar_w) << "\" y=\"" << fmt(std::min(y0, y1)) << "\" width=\""
               << fmt(bar_w - 1) << "\" height=\"" << fmt(std::abs(y0 - y1)) << "\" fill=\"" << palette(s)
               << "\"/>\n";
        }
        os << text(gx + (group_w - 20.0) / 2, top + plot_h + 14, b.categories[c], 10, "end", -35);
    }
    for (std::size_t r = 0; r < b.reference_lines.size(); ++r) {
        const double y = ypos(b.reference_lines[r].second);
        os << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(y) << "\" x2=\"" << fmt(left + plot_w) << "\" y2=\""
           << fmt(y) << "\" stroke=\"#333\" stroke-dasharray=\"4 3\"/>\n";
        os << text(left + plot_w + 4, y + 4, b.reference_lines[r].first, 9, "start");
    }
    os << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(top) << "\" x2=\"" << fmt(left) << "\" y2=\""
       << fmt(top + plot_h) << "\" stroke=\"black\"/>\n";
    for (std::size_t s = 0; s < b.series.size(); ++s) {
        const double ly = top + 16.0 * s + 40;
        os << "<rect x=\"" << fmt(left + plot_w + 60) << "\" y=\"" << fmt(ly - 9) << "\" width=\"10\" height=\"10\" fill=\""
           << palette(s) << "\"/>\n";
        os << text(left + plot_w + 74, ly, b.series[s].name, 10, "start");
    }
    os << "</svg>\n";
    return os.str();
}

std::string render_line_chart(const LineChart & l) {
    const double left = 70;
    const double top = 50;
    const double plot_h = 280;
    const double plot_w = 420;
    const double width = left + plot_w + 200;
    const double height = top + plot_h + 60;
    const Axis ay = value_axis(l.series, l.y_min, l.y_max);
    if (l.x.empty()) {
        throw std::invalid_argument("render_line_chart: no x values");
    }
    const double xlo = *std::min_element(l.x.begin(), l.x.end());
    const double xhi = std::max(xlo + 1e-9, *std::max_element(l.x.begin(), l.x.end()));
    const auto xpos = [&](double x) { return left + plot_w * (x - xlo) / (xhi - xlo); };
    const auto ypos = [&](double v) { return top + plot_h * (1.0 - (v - ay.lo) / (ay.hi - ay.lo)); };

    std::ostringstream os;
    os << header(width, height);
    os << text(width / 2, 22, l.title, 14);
    os << y_ticks(ay, left, top, plot_h, left + plot_w);
    os << text(18, top + plot_h / 2, l.y_label, 11, "middle", -90);
    os << text(left + plot_w / 2, top + plot_h + 40, l.x_label, 11);
    const std::size_t stride = std::max<std::size_t>(1, l.x.size() / 10);
    for (std::size_t i = 0; i < l.x.size(); i += stride) {
        os << text(xpos(l.x[i]), top + plot_h + 16, fmt(l.x[i]), 10);
    }
    for (std::size_t s = 0; s < l.series.size(); ++s) {
        os << "<polyline fill=\"none\" stroke=\"" << palette(s) << "\" stroke-width=\"1.8\" points=\"";
        for (std::size_t i = 0; i < l.x.size() && i < l.series[s].values.size(); ++i) {
            if (std::isfinite(l.series[s].values[i])) {
                os << fmt(xpos(l.x[i])) << ',' << fmt(ypos(l.series[s].values[i])) << ' ';
            }
        }
        os << "\"/>\n";
        if (l.x.size() <= 20) {
            for (std::size_t i = 0; i < l.x.size() && i < l.series[s].values.size(); ++i) {
                if (std::isfinite(l.series[s].values[i])) {
                    os << "<circle class=\"point\" cx=\"" << fmt(xpos(l.x[i])) << "\" cy=\"" << fmt(ypos(l.series[s].values[i]))
                       << "\" r=\"3\" fill=\"" << palette(s) << "\"/>\n";
                }
            }
        }
        const double ly = top + 16.0 * s + 10;
        os << "<rect x=\"" << fmt(left + plot_w + 20) << "\" y=\"" << fmt(ly - 9) << "\" width=\"10\" height=\"10\" fill=\""
           << palette(s) << "\"/>\n";
        os << text(left + plot_w + 34, ly, l.series[s].name, 10, "start");
    }
    os << "<rect x=\"" << fmt(left) << "\" y=\"" << fmt(top) << "\" width=\"" << fmt(plot_w) << "\" height=\""
       << fmt(plot_h) << "\" fill=\"none\" stroke=\"black\"/>\n";
    os << "</svg>\n";
    return os.str();
}

void write_file(const std::string & path, const std::string & content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw std::runtime_error("cannot write " + path);
    }
    f << content;
}

} // namespace conceptscope::svg
