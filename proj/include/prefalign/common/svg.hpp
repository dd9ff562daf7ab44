#pragma once

#include <string>
#include <vector>

namespace prefalign {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  bool line = false;  // polyline instead of markers
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  int width = 640;
  int height = 420;
  bool log_x = false;
};

/// Self-contained SVG document with axes, ticks and a legend.
std::string render_svg(const PlotSpec& spec, const std::vector<Series>& series);

}  // namespace prefalign
