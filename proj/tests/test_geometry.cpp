#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

#include "m3ot/geometry.hpp"
#include "oracles.hpp"

using namespace m3ot;

namespace {

CameraCalibration forward_camera() {
  return make_camera(0, 0.0, 0.05, Eigen::Vector3d(3.0, 0.2, 1.5), 70.0 * std::numbers::pi / 180.0, 1280, 720);
}

}  // namespace

TEST_CASE("range transform examples") {
  RangeCalibration id;
  CHECK(project_range_to_global(Eigen::Vector3d(1, 2, 3), id) == Eigen::Vector3d(1, 2, 3));
  RangeCalibration lifted;
  lifted.translation = {0, 0, 1.5};
  CHECK(project_range_to_global(Eigen::Vector3d::Zero(), lifted) == Eigen::Vector3d(0, 0, 1.5));

  RangeCalibration yaw90;
  yaw90.rotation << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  CHECK((project_range_to_global(Eigen::Vector3d(1, 0, 0), yaw90) - Eigen::Vector3d(0, 1, 0)).norm() < 1e-15);
  CHECK((back_project_global_to_range(Eigen::Vector3d(0, 1, 0), yaw90) - Eigen::Vector3d(1, 0, 0)).norm() < 1e-15);
  CHECK(back_project_global_to_range(Eigen::Vector3d(1, 1, 1), id) == Eigen::Vector3d(1, 1, 1));
}

TEST_CASE("range round trip over random calibrations") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int k = 0; k < 1000; ++k) {
    RangeCalibration cal;
    cal.rotation = oracle::random_rotation(gen);
    cal.translation = {u(gen) / 10, u(gen) / 10, u(gen) / 10};
    CHECK_NOTHROW(validate(cal));
    const Eigen::Vector3d p(u(gen), u(gen), u(gen));
    CHECK((back_project_global_to_range(project_range_to_global(p, cal), cal) - p).norm() < 1e-9);
  }
}

TEST_CASE("camera back-projection") {
  CameraCalibration cal;
  cal.intrinsics << 800, 0, 640, 0, 800, 360, 0, 0, 1;
  cal.width = 1280;
  cal.height = 720;
  const auto axis = back_project_global_to_camera(Eigen::Vector3d(0, 0, 10), cal);
  REQUIRE(axis);
  CHECK(axis->x() == 640.0);
  CHECK(axis->y() == 360.0);
  CHECK_FALSE(back_project_global_to_camera(Eigen::Vector3d(1, 1, -2), cal));
  CHECK_FALSE(back_project_global_to_camera(Eigen::Vector3d(1, 1, 0), cal));

  // Independent homogeneous multiply with a 3x4 projection matrix.
  const auto cam = forward_camera();
  Eigen::Matrix<double, 3, 4> rt;
  rt << cam.rotation, cam.translation;
  const Eigen::Matrix<double, 3, 4> proj = cam.intrinsics * rt;
  const Eigen::Vector4d p(14.0, -3.0, 0.8, 1.0);
  const Eigen::Vector3d h = proj * p;
  const auto px = back_project_global_to_camera(p.head<3>(), cam);
  REQUIRE(px);
  CHECK(std::abs(px->x() - h.x() / h.z()) < 1e-9);
  CHECK(std::abs(px->y() - h.y() / h.z()) < 1e-9);
}

TEST_CASE("pixel at known depth reproduces pixel") {
  const auto cam = forward_camera();
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> uu(0, 1280), vv(0, 720), dd(0.5, 80);
  for (int k = 0; k < 1000; ++k) {
    const Eigen::Vector3d pix(uu(gen), vv(gen), 1.0);
    const double depth = dd(gen);
    const Eigen::Vector3d in_cam = depth * (cam.intrinsics.inverse() * pix);
    const Eigen::Vector3d global = cam.rotation.transpose() * (in_cam - cam.translation);
    const auto back = back_project_global_to_camera(global, cam);
    REQUIRE(back);
    CHECK((*back - pix.head<2>()).norm() < 1e-6);
  }
}

TEST_CASE("ipm examples") {
  CameraCalibration cal;
  const auto p = ipm_project(Eigen::Vector2d(3, 4), cal);
  CHECK(p == Eigen::Vector3d(3, 4, kGroundAltitude));
  cal.ipm_homography = Eigen::Vector3d(2, 2, 1).asDiagonal();
  CHECK(ipm_project(Eigen::Vector2d(1, 1), cal) == Eigen::Vector3d(2, 2, kGroundAltitude));
  cal.ipm_homography << 1, 0, 0, 0, 1, 0, 0, 0, 0;
  CHECK_THROWS_AS(ipm_project(Eigen::Vector2d(1, 1), cal), DegenerateHomography);
}

TEST_CASE("ipm reconstructs ground points and is scale invariant") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> yaw(-3.0, 3.0), x(5.0, 40.0), y(-8.0, 8.0);
  for (int k = 0; k < 200; ++k) {
    const double a = yaw(gen);
    const auto cam = make_camera(1, a, 0.06, Eigen::Vector3d(1.0, 0.5, 1.6), 1.2, 1280, 720);
    // Ground point in front of this camera.
    const Eigen::Vector3d ground = cam.center() + yaw_rotation(a) * Eigen::Vector3d(x(gen), y(gen), 0.0);
    const Eigen::Vector3d g(ground.x(), ground.y(), 0.0);
    const auto px = back_project_global_to_camera(g, cam);
    REQUIRE(px);
    const auto back = ipm_project(*px, cam);
    CHECK((back - g).norm() < 1e-6);

    auto scaled = cam;
    scaled.ipm_homography *= -3.7;
    const auto back2 = ipm_project(*px, scaled);
    CHECK((back2 - back).norm() < 1e-9);
  }
}

TEST_CASE("calibration validation") {
  auto cam = forward_camera();
  CHECK_NOTHROW(validate(cam));
  cam.intrinsics(1, 0) = 1.0;
  CHECK_THROWS_AS(validate(cam), std::invalid_argument);
  RangeCalibration r;
  r.rotation(0, 0) = 2.0;
  CHECK_THROWS_AS(validate(r), std::invalid_argument);
}

// ---------------------------------------------------------------------------

namespace {

std::vector<GlobalPoint> l_shape(const Eigen::Vector2d& corner, double heading, double a, double b, int per_side) {
  const Eigen::Vector2d d1(std::cos(heading), std::sin(heading));
  const Eigen::Vector2d d2(-d1.y(), d1.x());
  std::vector<GlobalPoint> pts;
  for (int i = 0; i < per_side; ++i) {
    const double s = a * (i + 1) / per_side;
    const Eigen::Vector2d p = corner + s * d1;
    pts.emplace_back(p.x(), p.y(), 0.7);
  }
  for (int i = 0; i < per_side; ++i) {
    const double s = b * (i + 1) / per_side;
    const Eigen::Vector2d p = corner + s * d2;
    pts.emplace_back(p.x(), p.y(), 0.4);
  }
  pts.emplace_back(corner.x(), corner.y(), 0.5);
  return pts;
}

}  // namespace

TEST_CASE("localization of two perpendicular sides") {
  RansacParams params;
  params.seed = 5;
  // Corner (10, 3); sides of 4.2 m along +x and 1.8 m along +y.
  const auto pts = l_shape({10.0, 3.0}, 0.0, 4.2, 1.8, 20);
  const auto est = localize_with_pointcloud(pts, params);
  REQUIRE(est.status == LocalizationStatus::Ok);
  CHECK(std::abs(est.corner.x() - 10.0) < 1e-6);
  CHECK(std::abs(est.corner.y() - 3.0) < 1e-6);
  // Centre = corner + half of each extent along each side.
  CHECK(std::abs(est.center.x() - 12.1) < 1e-6);
  CHECK(std::abs(est.center.y() - 3.9) < 1e-6);
  CHECK(est.center.z() == kGroundAltitude);
  CHECK(std::abs(est.length - 4.2) < 1e-6);
  CHECK(std::abs(est.width - 1.8) < 1e-6);
}

TEST_CASE("localization is exact under rotation and deterministic") {
  std::mt19937_64 gen(19);
  std::uniform_real_distribution<double> ang(-3.1, 3.1), pos(-30, 30);
  for (int k = 0; k < 100; ++k) {
    const double heading = ang(gen);
    const Eigen::Vector2d corner(pos(gen), pos(gen));
    const auto pts = l_shape(corner, heading, 4.5, 1.9, 12);
    RansacParams params;
    params.seed = static_cast<std::uint64_t>(k);
    const auto est = localize_with_pointcloud(pts, params);
    REQUIRE(est.status == LocalizationStatus::Ok);
    const Eigen::Vector2d d1(std::cos(heading), std::sin(heading));
    const Eigen::Vector2d d2(-d1.y(), d1.x());
    const Eigen::Vector2d expected = corner + 2.25 * d1 + 0.95 * d2;
    CHECK((est.center.head<2>() - expected).norm() < 1e-6);
    const auto again = localize_with_pointcloud(pts, params);
    CHECK(again.center == est.center);
  }
}

TEST_CASE("localization degenerate inputs") {
  RansacParams params;
  std::vector<GlobalPoint> two{{1, 1, 0}, {2, 2, 0}};
  CHECK(localize_with_pointcloud(two, params).status == LocalizationStatus::TooFewPoints);

  // A single visible side (the rear of a car 20 m ahead): centre lands beyond it.
  std::vector<GlobalPoint> side;
  for (int i = 0; i <= 10; ++i) side.emplace_back(20.0, -0.9 + 0.18 * i, 0.5);
  const auto est = localize_with_pointcloud(side, params);
  CHECK(est.status == LocalizationStatus::ParallelLines);
  CHECK(std::abs(est.center.y()) < 1e-6);
  CHECK(std::abs(est.center.x() - (20.0 + 0.5 * params.default_length)) < 1e-6);

  // A long side seen from the left: pushed away by half the default width.
  std::vector<GlobalPoint> flank;
  for (int i = 0; i <= 15; ++i) flank.emplace_back(2.0 + 0.3 * i, 4.0, 0.5);
  const auto f = localize_with_pointcloud(flank, params);
  CHECK(f.status == LocalizationStatus::ParallelLines);
  CHECK(std::abs(f.center.y() - (4.0 + 0.5 * params.default_width)) < 1e-6);
  CHECK(std::abs(f.center.x() - 4.25) < 1e-6);
}

TEST_CASE("ransac line rejects insufficient support") {
  RansacParams params;
  std::vector<Eigen::Vector2d> pts;
  for (int x = -5; x < 5; ++x) pts.emplace_back(x, 0.5 * x * x);  // no three within 0.1 m of a line
  // Any two points form a line with 2 inliers; ratio 0.3 of 10 requires 3.
  CHECK_FALSE(fit_line_ransac(pts, 0.3, 3, params, 1));
}
