#include "m3ot/target.hpp"

#include <algorithm>
#include <stdexcept>

namespace m3ot {

const char* to_string(TargetState s) {
  switch (s) {
    case TargetState::Active: return "active";
    case TargetState::Tracked: return "tracked";
    case TargetState::Lost: return "lost";
    case TargetState::Inactive: return "inactive";
  }
  return "?";
}

TargetState target_state_from_string(const std::string& s) {
  for (auto st : {TargetState::Active, TargetState::Tracked, TargetState::Lost, TargetState::Inactive})
    if (s == to_string(st)) return st;
  throw std::invalid_argument("unknown target state '" + s + "'");
}

bool is_allowed_transition(TargetState from, TargetState to) {
  using S = TargetState;
  switch (from) {
    case S::Active: return to == S::Tracked || to == S::Inactive;
    case S::Tracked: return to == S::Tracked || to == S::Lost;
    case S::Lost: return to == S::Lost || to == S::Tracked || to == S::Inactive;
    case S::Inactive: return false;
  }
  return false;
}

CameraView* Target::view(int camera_id) {
  for (auto& v : views)
    if (v.camera_id == camera_id) return &v;
  return nullptr;
}

const CameraView* Target::view(int camera_id) const {
  for (const auto& v : views)
    if (v.camera_id == camera_id) return &v;
  return nullptr;
}

CameraView& Target::ensure_view(int camera_id) {
  auto it = std::lower_bound(views.begin(), views.end(), camera_id,
                             [](const CameraView& v, int id) { return v.camera_id < id; });
  if (it != views.end() && it->camera_id == camera_id) return *it;
  CameraView v;
  v.camera_id = camera_id;
  return *views.insert(it, std::move(v));
}

bool Target::has_active_view() const {
  return std::any_of(views.begin(), views.end(), [](const CameraView& v) { return v.active; });
}

std::vector<CameraBox> Target::active_boxes() const {
  std::vector<CameraBox> out;
  for (const auto& v : views)
    if (v.active) out.push_back({v.camera_id, v.box});
  return out;
}

GlobalPoint Target::predicted_position(int frame) const {
  const double dt = static_cast<double>(frame - last_frame);
  GlobalPoint p = last_position;
  p.x() += velocity.x() * dt;
  p.y() += velocity.y() * dt;
  return p;
}

}  // namespace m3ot
