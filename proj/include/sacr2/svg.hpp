#pragma once

#include <string>
#include <vector>

#include "sacr2/types.hpp"

namespace sacr2 {

/// One plottable curve: a mean line with a shaded +/- band.
struct PlotCurve {
  std::vector<Scalar> mean;
  std::vector<Scalar> band;  // half-width per point (standard error); may be empty
  std::string label;
};

/// Dependency-free line chart with shaded error bands, legend and axes,
/// written as plain-text SVG. Curves are truncated to the shortest length.
void write_svg_plot(const std::vector<PlotCurve>& curves, const std::string& x_label,
                    const std::string& y_label, const std::string& path);

}  // namespace sacr2
