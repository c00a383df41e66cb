#pragma once

#include <string>
#include <vector>

namespace volfilter {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  double width = 1.5;
  double opacity = 1.0;
};

// Standalone SVG line chart with axes, tick labels and a legend of the labelled series.
std::string svg_line_chart(const std::vector<Series>& series, const std::string& title,
                           const std::string& x_label, const std::string& y_label,
                           int width = 800, int height = 450);

}  // namespace volfilter
