#pragma once

#include "conceptscope/numerics.hpp"

#include <optional>
#include <string>
#include <vector>

namespace conceptscope::svg {

// A labelled block of consecutive rows/columns (e.g. one dataset).
struct Group {
    std::string label;
    std::size_t begin = 0;
    std::size_t end = 0;
};

struct Heatmap {
    std::string title;
    Matrix values;
    std::vector<std::string> row_labels; // optional, drawn when small enough
    std::vector<std::string> col_labels;
    std::vector<Group> row_groups; // gridlines at group boundaries
    std::vector<Group> col_groups;
    double vmin = -1.0;
    double vmax = 1.0;
    bool annotate = false; // print values inside cells
};

struct Series {
    std::string name;
    std::vector<double> values;
};

struct BarChart {
    std::string title;
    std::string y_label;
    std::vector<std::string> categories;
    std::vector<Series> series; // one bar per series within each category
    std::vector<std::pair<std::string, double>> reference_lines;
    std::optional<double> y_min;
    std::optional<double> y_max;
};

struct LineChart {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<double> x;
    std::vector<Series> series;
    std::optional<double> y_min;
    std::optional<double> y_max;
};

// RGB hex colour for v on a blue-white-red scale clamped to [vmin, vmax].
std::string diverging_color(double v, double vmin, double vmax);

std::string render_heatmap(const Heatmap & h);
std::string render_bar_chart(const BarChart & b);
std::string render_line_chart(const LineChart & l);

std::string escape(const std::string & text);
// Shortest round-trippable-enough decimal used in SVG and CSV output.
std::string fmt(double v);

void write_file(const std::string & path, const std::string & content);

} // namespace conceptscope::svg
