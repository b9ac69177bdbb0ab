#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace temple {

struct PlotSeries {
  std::string label;
  std::vector<double> values;  // x = index
};

// Minimal self-contained SVG line chart: axes, y-range labels, one polyline
// per series with a small legend. Deterministic output for fixed input.
void write_line_chart(const std::filesystem::path& path, const std::string& title,
                      const std::vector<PlotSeries>& series);

}  // namespace temple
