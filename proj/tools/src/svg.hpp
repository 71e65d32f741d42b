#pragma once

#include <string>
#include <vector>

// Minimal dependency-free SVG line charts for run reports.  Each chart
// draws the per-step median of a metric as a polyline plus a shaded
// median +/- sd band.  Steps where the median is not finite are skipped.

namespace ggtde::cli {

// Returns a complete standalone SVG document.  `steps`, `median` and `sd`
// must have equal lengths; `sd` entries may be NaN (band omitted there).
std::string line_chart_svg(const std::string& title,
                           const std::vector<double>& steps,
                           const std::vector<double>& median,
                           const std::vector<double>& sd);

}  // namespace ggtde::cli
