#pragma once

#include <string>
#include <vector>

namespace skewlap {

struct SvgSeries {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> band_lo;  // optional shaded spread, same length as x
  std::vector<double> band_hi;
  std::string color = "#1f77b4";
  std::string label;
};

// Minimal log-log line plot with optional shaded bands; no plotting
// dependency, just enough for the rate figures.
void write_loglog_svg(const std::string& path, const std::vector<SvgSeries>& series,
                      const std::string& title, const std::string& xlabel,
                      const std::string& ylabel);

}  // namespace skewlap
