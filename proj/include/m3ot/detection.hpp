#pragma once

#include <algorithm>
#include <Eigen/Core>

namespace m3ot {

/// Axis-aligned image box: (u, v) is the top-left corner, (w, h) the size, in pixels.
struct Box {
  double u = 0.0;
  double v = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const { return std::max(w, 0.0) * std::max(h, 0.0); }
  double right() const { return u + w; }
  double bottom() const { return v + h; }
  Eigen::Vector2d center() const { return {u + 0.5 * w, v + 0.5 * h}; }
  /// The ground-contact pixel used by IPM localization.
  Eigen::Vector2d bottom_center() const { return {u + 0.5 * w, v + h}; }

  friend bool operator==(const Box&, const Box&) = default;
};

inline double intersection_area(const Box& a, const Box& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.u, b.u);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.v, b.v);
  return iw > 0.0 && ih > 0.0 ? iw * ih : 0.0;
}

/// Intersection over union; symmetric, 1 for identical boxes, 0 for disjoint ones.
inline double iou(const Box& a, const Box& b) {
  if (a == b) return a.area() > 0.0 ? 1.0 : 0.0;
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

inline Box clip(const Box& b, double width, double height) {
  const double u0 = std::clamp(b.u, 0.0, width);
  const double v0 = std::clamp(b.v, 0.0, height);
  const double u1 = std::clamp(b.right(), 0.0, width);
  const double v1 = std::clamp(b.bottom(), 0.0, height);
  return {u0, v0, u1 - u0, v1 - v0};
}

/// A single-camera object proposal.
struct Detection {
  int camera_id = 0;
  Box box;
  double score = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Box of one object in one camera.
struct CameraBox {
  int camera_id = 0;
  Box box;

  friend bool operator==(const CameraBox&, const CameraBox&) = default;
};

}  // namespace m3ot
