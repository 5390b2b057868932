#pragma once
// Minimal SVG line and scatter plots for the run reports.
#include <string>
#include <vector>

namespace hda::svg {

struct Series {
  std::string name;
  std::string color;
  std::vector<double> y;         // line plots: x is the index
  std::vector<double> x = {};    // scatter plots only
  bool dashed = false;
};

std::string line_plot(const std::string& title, const std::vector<Series>& series, const std::string& x_label = "t");
std::string scatter_plot(const std::string& title, const std::vector<Series>& series, const std::string& x_label,
                         const std::string& y_label);

}  // namespace hda::svg
