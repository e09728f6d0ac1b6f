#pragma once

#include <string>
#include <vector>

#include "resdob/run_log.hpp"

namespace resdob {

/// Linear map from data interval [lo, hi] to pixel interval [p0, p1].
/// A zero-width data interval is widened by 0.5 on each side.
struct Axis {
  double lo = 0.0;
  double hi = 1.0;
  double p0 = 0.0;
  double p1 = 1.0;

  Axis(double lo_, double hi_, double p0_, double p1_);
  double map(double v) const;
};

/// One labelled group of runs (typically all seeds of one filter mode).
struct PlotSeries {
  std::string label;
  std::vector<std::vector<double>> runs;
};

/// Mean curve per series with a min-max band across runs, and a legend.
/// Throws std::invalid_argument when there is nothing to draw.
std::string render_svg(const std::string& title, const std::string& y_label,
                       const std::vector<PlotSeries>& series);

/// Groups logs by mode and writes reward.svg and cost.svg into out_dir.
/// Returns the written paths.
std::vector<std::string> plot_logs(const std::vector<RunLog>& logs, const std::string& out_dir);

}  // namespace resdob
