#pragma once

#include <deque>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "m3ot/appearance.hpp"
#include "m3ot/detection.hpp"
#include "m3ot/geometry.hpp"

namespace m3ot {

enum class TargetState { Active, Tracked, Lost, Inactive };

const char* to_string(TargetState s);
TargetState target_state_from_string(const std::string& s);

/// The seven lifecycle transitions; anything else is a soundness violation.
bool is_allowed_transition(TargetState from, TargetState to);

/// What a target knows about itself in one camera.
struct CameraView {
  int camera_id = 0;
  /// Template followed by tracking; replaced only when the view is (re)initialized.
  Template tracking;
  /// Templates collected in tracked frames, oldest first, capped.
  std::deque<Template> templates;
  Box box;  // latest target box in this camera
  std::deque<OverlapEntry> overlaps;
  /// Template tracking currently runs in this view.
  bool active = false;
};

struct HistoryEntry {
  int frame = 0;
  GlobalPoint position = GlobalPoint::Zero();
  std::vector<CameraBox> boxes;
};

struct Target {
  int id = 0;
  TargetState state = TargetState::Active;
  std::vector<CameraView> views;  // sorted by camera id
  std::vector<HistoryEntry> history;  // tracked frames, increasing
  GlobalPoint last_position = GlobalPoint::Zero();
  Eigen::Vector2d velocity = Eigen::Vector2d::Zero();  // m per frame on the ground plane
  Eigen::Vector2d dimensions{4.5, 1.8};  // (length, width)
  int lost_age = 0;
  int birth_frame = 0;
  int last_frame = 0;  // last frame the target was tracked

  CameraView* view(int camera_id);
  const CameraView* view(int camera_id) const;
  CameraView& ensure_view(int camera_id);
  bool has_active_view() const;
  std::vector<CameraBox> active_boxes() const;
  /// Linear-velocity extrapolation of the last known position to `frame`.
  GlobalPoint predicted_position(int frame) const;
};

}  // namespace m3ot
