#pragma once

#include <iosfwd>
#include <span>
#include <string>

#include "m3ot/scenario.hpp"
#include "m3ot/tracker.hpp"

namespace m3ot {

struct PlotOptions {
  int size_px = 640;
  /// Half-width of the view in metres; grows in steps of `grid` to fit the data.
  double min_half_extent = 30.0;
  double grid = 10.0;
  std::string title;
};

/// Top-down, ego-centred SVG: forward is up, left is left. One polyline per
/// target id (colour derived from the id only), ground truth as grey dashed
/// polylines when `truth` is given. Output depends only on the inputs.
void write_svg(std::ostream& out, std::span<const TrackRecord> tracks, const Scenario* truth = nullptr,
               const PlotOptions& options = {});

/// The stroke colour used for a target id, "#rrggbb".
std::string track_color(int target_id);

}  // namespace m3ot
