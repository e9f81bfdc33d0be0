#pragma once

#include <string>
#include <vector>

namespace coag {

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
  bool line = true;    // connect the points
  bool marks = true;   // draw the points
};

// Self-contained log-log SVG: decade gridlines and ticks, one color per
// series, legend in the top-right corner. Nonpositive coordinates are
// dropped (they have no place on a log axis).
std::string svg_loglog(const std::vector<PlotSeries>& series, const std::string& x_label,
                       const std::string& y_label);

}  // namespace coag
