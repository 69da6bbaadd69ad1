#include "conceptscope/acceptance.hpp"
#include "conceptscope/svg.hpp"

#include "doctest.h"

#include <cmath>

using namespace conceptscope;

namespace {

std::size_t count(const std::string & s, const std::string & needle) {
    std::size_t n = 0;
    for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) {
        ++n;
    }
    return n;
}

} // namespace

TEST_CASE("diverging colours run blue-white-red and clamp") {
    CHECK(svg::diverging_color(0.0, -1.0, 1.0) == "#ffffff");
    CHECK(svg::diverging_color(-1.0, -1.0, 1.0) == svg::diverging_color(-5.0, -1.0, 1.0));
    CHECK(svg::diverging_color(1.0, -1.0, 1.0) == svg::diverging_color(3.0, -1.0, 1.0));
    CHECK(svg::diverging_color(-1.0, -1.0, 1.0) != svg::diverging_color(1.0, -1.0, 1.0));
}

TEST_CASE("heatmaps draw one cell per entry and gridlines between groups") {
    svg::Heatmap h;
    h.title = "t <&>";
    h.values = Matrix(4, 4, 0.5);
    h.row_groups = {{"a", 0, 2}, {"b", 2, 4}};
    h.col_groups = h.row_groups;
    const std::string out = svg::render_heatmap(h);
    CHECK(out.rfind("<svg", 0) == 0);
    CHECK(count(out, "class=\"cell\"") == 16);
    CHECK(count(out, "class=\"grid\"") == 2);
    CHECK(out.find("t &lt;&amp;&gt;") != std::string::npos);
    CHECK(svg::render_heatmap(h) == out);
}

TEST_CASE("charts render every bar and point") {
    svg::BarChart b;
    b.categories = {"x", "y"};
    b.series = {{"s1", {0.1, 0.2}}, {"s2", {0.3, std::nan("")}}};
    const std::string bars = svg::render_bar_chart(b);
    CHECK(count(bars, "class=\"bar\"") == 3);

    svg::LineChart l;
    l.x = {1, 2, 3};
    l.series = {{"a", {0.1, 0.2, 0.3}}};
    const std::string lines = svg::render_line_chart(l);
    CHECK(count(lines, "class=\"point\"") == 3);
}

TEST_CASE("number formatting is stable") {
    CHECK(svg::fmt(0.25) == "0.25");
    CHECK(svg::fmt(std::nan("")) == "nan");
    CHECK(svg::fmt(1.0 / 3.0) == "0.3333333333");
}

TEST_CASE("acceptance check lines and JSON") {
    const acceptance::Check c{4, "training gate", false, "acc 0.5"};
    CHECK(acceptance::format_line(c) == "[FAIL] 4 training gate: acc 0.5");
    const auto back = acceptance::check_from_json(acceptance::to_json(c));
    CHECK(back.criterion == 4);
    CHECK(back.name == c.name);
    CHECK_FALSE(back.passed);
    CHECK_FALSE(acceptance::all_passed({c}));
    CHECK(acceptance::all_passed({}));
}
