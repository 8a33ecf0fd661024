#pragma once

#include <string>
#include <utility>
#include <vector>

namespace tomopair {

// Minimal SVG line plotter for FSC and precision/recall curves: two axes,
// ticks, one polyline per series, legend. Output is deterministic text.
struct PlotSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;
};

std::string render_line_plot(const std::string& title, const std::string& x_label,
                             const std::string& y_label, const std::vector<PlotSeries>& series);

void write_text_file(const std::string& path, const std::string& content);

} // namespace tomopair
