#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

namespace m3ot {

template <typename Scalar> using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar> using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar> using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

/// Ego-centred global frame: origin at the rear-axle mid-point, x forward,
/// y to the left, z up (metres).
using GlobalPoint = Eigen::Vector3d;
/// Image coordinates (u = column, v = row) in pixels. May lie outside the image.
using PixelPoint = Eigen::Vector2d;

/// Altitude assigned to every IPM projection (the ground plane).
inline constexpr double kGroundAltitude = 0.0;
/// Camera-frame depth at or below which a point counts as behind the camera.
inline constexpr double kDepthEpsilon = 1e-6;

class DegenerateHomography : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Scalar>
struct RangeCalibrationT {
  Matrix3<Scalar> rotation = Matrix3<Scalar>::Identity();
  Vector3<Scalar> translation = Vector3<Scalar>::Zero();

  friend bool operator==(const RangeCalibrationT&, const RangeCalibrationT&) = default;
};

template <typename Scalar>
struct CameraCalibrationT {
  int camera_id = 0;
  Matrix3<Scalar> intrinsics = Matrix3<Scalar>::Identity();
  /// Global -> camera rotation; camera axes are x right, y down, z forward.
  Matrix3<Scalar> rotation = Matrix3<Scalar>::Identity();
  Vector3<Scalar> translation = Vector3<Scalar>::Zero();
  /// Pixel -> ground-plane homography.
  Matrix3<Scalar> ipm_homography = Matrix3<Scalar>::Identity();
  int width = 0;
  int height = 0;

  /// Camera centre in the global frame.
  Vector3<Scalar> center() const { return -rotation.transpose() * translation; }

  friend bool operator==(const CameraCalibrationT&, const CameraCalibrationT&) = default;
};

using RangeCalibration = RangeCalibrationT<double>;
using CameraCalibration = CameraCalibrationT<double>;

template <typename Scalar>
bool is_rotation(const Matrix3<Scalar>& r, Scalar tol = Scalar(1e-9)) {
  return (r.transpose() * r - Matrix3<Scalar>::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(r.determinant() - Scalar(1)) <= tol;
}

template <typename Scalar>
void validate(const RangeCalibrationT<Scalar>& cal) {
  if (!is_rotation(cal.rotation)) throw std::invalid_argument("range rotation is not orthonormal");
  if (!cal.translation.allFinite()) throw std::invalid_argument("range translation is not finite");
}

template <typename Scalar>
void validate(const CameraCalibrationT<Scalar>& cal) {
  const auto& k = cal.intrinsics;
  if (k(1, 0) != 0 || k(2, 0) != 0 || k(2, 1) != 0 || !(k(0, 0) > 0) || !(k(1, 1) > 0) || !(k(2, 2) > 0))
    throw std::invalid_argument("camera intrinsics must be upper-triangular with positive diagonal");
  if (!is_rotation(cal.rotation)) throw std::invalid_argument("camera rotation is not orthonormal");
  if (!(std::abs(cal.ipm_homography.determinant()) > Scalar(1e-12)))
    throw std::invalid_argument("IPM homography is singular");
  if (cal.width <= 0 || cal.height <= 0) throw std::invalid_argument("image size must be positive");
}

/// Range (LiDAR) frame -> global frame.
template <typename Derived, typename Scalar>
Vector3<Scalar> project_range_to_global(const Eigen::MatrixBase<Derived>& p, const RangeCalibrationT<Scalar>& cal) {
  return cal.rotation * p + cal.translation;
}

/// Global frame -> range frame; exact inverse of project_range_to_global.
template <typename Derived, typename Scalar>
Vector3<Scalar> back_project_global_to_range(const Eigen::MatrixBase<Derived>& p, const RangeCalibrationT<Scalar>& cal) {
  return cal.rotation.transpose() * (p - cal.translation);
}

template <typename Derived, typename Scalar>
Vector3<Scalar> global_to_camera_frame(const Eigen::MatrixBase<Derived>& p, const CameraCalibrationT<Scalar>& cal) {
  return cal.rotation * p + cal.translation;
}

/// Pinhole back-projection of a global point. Returns nullopt when the point is
/// at or behind the image plane.
template <typename Derived, typename Scalar>
std::optional<Vector2<Scalar>> back_project_global_to_camera(const Eigen::MatrixBase<Derived>& p,
                                                             const CameraCalibrationT<Scalar>& cal) {
  const Vector3<Scalar> pc = global_to_camera_frame(p, cal);
  if (!(pc.z() > Scalar(kDepthEpsilon))) return std::nullopt;
  const Vector3<Scalar> h = cal.intrinsics * pc;
  return Vector2<Scalar>(h.x() / h.z(), h.y() / h.z());
}

/// Inverse perspective mapping of a pixel onto the ground plane.
template <typename Derived, typename Scalar>
Vector3<Scalar> ipm_project(const Eigen::MatrixBase<Derived>& pixel, const CameraCalibrationT<Scalar>& cal,
                            Scalar altitude = Scalar(kGroundAltitude)) {
  const Vector3<Scalar> h = cal.ipm_homography * Vector3<Scalar>(pixel.x(), pixel.y(), Scalar(1));
  if (!(std::abs(h.z()) >= Scalar(1e-12))) throw DegenerateHomography("IPM homography maps pixel to infinity");
  return {h.x() / h.z(), h.y() / h.z(), altitude};
}

/// Homography taking pixels to ground-plane (z = 0) coordinates, derived from
/// the pinhole model: pixel ~ C [r1 r2 t] (x, y, 1)^T.
template <typename Scalar>
Matrix3<Scalar> ground_plane_homography(const Matrix3<Scalar>& intrinsics, const Matrix3<Scalar>& rotation,
                                        const Vector3<Scalar>& translation) {
  Matrix3<Scalar> ground_to_pixel;
  ground_to_pixel << rotation.col(0), rotation.col(1), translation;
  return (intrinsics * ground_to_pixel).inverse();
}

template <typename Scalar>
Matrix3<Scalar> yaw_rotation(Scalar yaw) {
  const Scalar c = std::cos(yaw), s = std::sin(yaw);
  Matrix3<Scalar> r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

/// Camera looking along `yaw` (radians, CCW from +x) tilted down by `pitch`,
/// mounted at `position`, with a horizontal field of view `fov` (radians).
template <typename Scalar>
CameraCalibrationT<Scalar> make_camera(int camera_id, Scalar yaw, Scalar pitch, const Vector3<Scalar>& position,
                                       Scalar fov, int width, int height) {
  const Vector3<Scalar> forward(std::cos(yaw) * std::cos(pitch), std::sin(yaw) * std::cos(pitch), -std::sin(pitch));
  const Vector3<Scalar> right(std::sin(yaw), -std::cos(yaw), 0);
  const Vector3<Scalar> down = forward.cross(right);

  CameraCalibrationT<Scalar> cal;
  cal.camera_id = camera_id;
  cal.width = width;
  cal.height = height;
  cal.rotation.row(0) = right.transpose();
  cal.rotation.row(1) = down.transpose();
  cal.rotation.row(2) = forward.transpose();
  cal.translation = -cal.rotation * position;
  const Scalar focal = Scalar(0.5) * width / std::tan(Scalar(0.5) * fov);
  cal.intrinsics << focal, 0, Scalar(0.5) * width, 0, focal, Scalar(0.5) * height, 0, 0, 1;
  cal.ipm_homography = ground_plane_homography(cal.intrinsics, cal.rotation, cal.translation);
  return cal;
}

// ---------------------------------------------------------------------------
// Point-cloud localization of a detected vehicle.

struct RansacParams {
  double inlier_threshold = 0.1;      // metres
  int max_iterations = 200;
  /// Adaptive early exit once an all-inlier sample has been drawn with this probability.
  double confidence = 0.999;
  double primary_inlier_ratio = 0.3;  // dominant side
  double secondary_inlier_ratio = 0.4;
  std::size_t min_points = 6;
  std::size_t min_side_points = 3;
  double default_length = 4.5;
  double default_width = 1.8;
  /// Extents shorter than this are treated as unobserved.
  double min_extent = 0.5;
  /// The second side must cross the first at least this steeply (|sin| of the
  /// angle); flattened roof returns otherwise pass for a second side.
  double min_corner_sine = 0.7071067811865476;
  std::uint64_t seed = 0;
};

struct Line2 {
  Eigen::Vector2d point = Eigen::Vector2d::Zero();
  Eigen::Vector2d direction = Eigen::Vector2d::UnitX();  // unit length

  double distance(const Eigen::Vector2d& p) const {
    const Eigen::Vector2d d = p - point;
    return std::abs(d.x() * direction.y() - d.y() * direction.x());
  }
};

enum class LocalizationStatus {
  Ok,
  /// Fewer than min_points, or no line with enough support: fall back to IPM.
  TooFewPoints,
  /// Only one vehicle side could be fitted (no second line, or parallel lines).
  ParallelLines,
};

struct VehicleEstimate {
  LocalizationStatus status = LocalizationStatus::TooFewPoints;
  GlobalPoint center = GlobalPoint::Zero();
  /// Intersection of the two fitted sides (Ok only).
  GlobalPoint corner = GlobalPoint::Zero();
  double length = 0.0;
  double width = 0.0;
  Line2 primary;
  Line2 secondary;
};

struct LineFit {
  Line2 line;
  std::vector<std::size_t> inliers;  // indices into the fitted point set
};

/// RANSAC line fit over 2-D points. A model is accepted only when its inlier
/// count reaches ceil(ratio * n) (and at least min_support). With `across`
/// set, only lines crossing that direction with |sin| >= min_corner_sine are
/// hypothesized. Deterministic for a given seed.
std::optional<LineFit> fit_line_ransac(std::span<const Eigen::Vector2d> points, double inlier_ratio,
                                       std::size_t min_support, const RansacParams& params, std::uint64_t seed,
                                       std::optional<Eigen::Vector2d> across = std::nullopt);

/// Vehicle centre from the LiDAR points (global frame) inside a detection box.
/// Points are flattened to the ground plane; the result altitude is kGroundAltitude.
VehicleEstimate localize_with_pointcloud(std::span<const GlobalPoint> points, const RansacParams& params);

}  // namespace m3ot
