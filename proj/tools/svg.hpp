#pragma once

// Minimal SVG charts for the plot and ablate commands. Output is plain text
// with fixed number formatting, so identical data renders identical bytes.

#include <optional>
#include <string>
#include <vector>

namespace mmtrack::cli {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  std::optional<double> reference_y;  // dashed horizontal line
  std::string reference_label;
};

struct BarGroup {
  std::string label;
  std::vector<double> values;  // one per series
};

struct BarChart {
  std::string title;
  std::string y_label;
  std::vector<std::string> series;
  std::vector<BarGroup> groups;
};

std::string render_line_chart(const LineChart& chart);
std::string render_bar_chart(const BarChart& chart);

}  // namespace mmtrack::cli
