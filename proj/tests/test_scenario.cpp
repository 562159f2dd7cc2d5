#include <doctest.h>

#include <chrono>
#include <set>

#include <Eigen/Geometry>

#include "m3ot/scenario.hpp"

using namespace m3ot;

namespace {

ScenarioConfig noiseless(int frames, int vehicles) {
  ScenarioConfig c;
  c.duration = frames;
  c.n_vehicles = vehicles;
  c.detector.miss_rate = 0.0;
  c.detector.false_positive_rate = 0.0;
  c.detector.sigma_px = 0.0;
  c.lidar.range_noise_sigma = 0.0;
  return c;
}

}  // namespace

TEST_CASE("rig presets") {
  for (const auto& name : rig_preset_names()) {
    const auto rig = rig_preset(name);
    CHECK(rig.name == name);
    for (const auto& c : rig.cameras) CHECK_NOTHROW(validate(c));
    auto ids = rig.camera_ids();
    CHECK(std::set<int>(ids.begin(), ids.end()).size() == ids.size());
  }
  CHECK(rig_preset("8cam").cameras.size() == 8);
  CHECK(rig_preset("6cam").cameras.size() == 6);
  CHECK(rig_preset("2cam").cameras.size() == 2);
  CHECK_THROWS_AS(rig_preset("bogus"), UnknownPreset);

  // 8cam: adjacent optical axes 45 deg apart with 70 deg views -> overlap.
  const auto rig = rig_preset("8cam");
  const double half_fov = std::atan(0.5 * rig.cameras[0].width / rig.cameras[0].intrinsics(0, 0));
  CHECK(std::abs(half_fov * 2 - 70.0 * M_PI / 180.0) < 1e-9);
  for (std::size_t k = 0; k < 8; ++k) {
    const Eigen::Vector3d a = rig.cameras[k].rotation.row(2).transpose();
    const Eigen::Vector3d b = rig.cameras[(k + 1) % 8].rotation.row(2).transpose();
    const double angle = std::atan2(a.x() * b.y() - a.y() * b.x(), a.x() * b.x() + a.y() * b.y());
    CHECK(std::abs(angle - M_PI / 4) < 1e-9);
    CHECK(2 * half_fov > angle);
  }
  // 2cam: front and rear, no shared field of view.
  const auto two = rig_preset("2cam");
  const Eigen::Vector3d f = two.cameras[0].rotation.row(2).transpose();
  const Eigen::Vector3d r = two.cameras[1].rotation.row(2).transpose();
  CHECK(f.x() > 0.99);
  CHECK(r.x() < -0.99);
}

TEST_CASE("noiseless detections equal true boxes") {
  auto cfg = noiseless(60, 4);
  cfg.seed = 3;
  const auto sc = generate(cfg);
  int visible = 0;
  for (const auto& fr : sc.frames) {
    for (const auto& s : fr.truth)
      for (const auto& cb : s.boxes) {
        ++visible;
        const auto hit = std::find_if(fr.detections.begin(), fr.detections.end(), [&](const Detection& d) {
          return d.camera_id == cb.camera_id && d.box == cb.box;
        });
        CHECK(hit != fr.detections.end());
        CHECK(iou(hit->box, cb.box) == 1.0);
      }
    const auto labels = label_detections(fr);
    for (int l : labels) CHECK(l > 0);
  }
  CHECK(visible > 0);
}

TEST_CASE("miss rate one leaves only false positives") {
  auto cfg = noiseless(30, 4);
  cfg.detector.miss_rate = 1.0;
  cfg.detector.false_positive_rate = 0.5;
  const auto sc = generate(cfg);
  std::size_t dets = 0;
  for (const auto& fr : sc.frames) {
    dets += fr.detections.size();
    for (int l : label_detections(fr)) CHECK(l == -1);
  }
  CHECK(dets > 0);
}

TEST_CASE("generation is deterministic and detections are sorted") {
  ScenarioConfig cfg;
  cfg.seed = 42;
  cfg.duration = 40;
  const auto a = generate(cfg);
  const auto b = generate(cfg);
  CHECK(a == b);
  cfg.seed = 43;
  CHECK_FALSE(generate(cfg) == a);
  for (const auto& fr : a.frames)
    for (std::size_t i = 1; i < fr.detections.size(); ++i) {
      const auto& p = fr.detections[i - 1];
      const auto& q = fr.detections[i];
      CHECK((p.camera_id < q.camera_id || (p.camera_id == q.camera_id && p.score >= q.score)));
    }
}

TEST_CASE("lidar points lie on a vehicle body") {
  ScenarioConfig cfg;
  cfg.seed = 9;
  cfg.duration = 20;
  cfg.lidar.range_noise_sigma = 0.02;
  const auto sc = generate(cfg);
  std::size_t total = 0;
  for (const auto& fr : sc.frames) {
    for (const auto& p : fr.point_cloud) {
      ++total;
      const Eigen::Vector3d g = project_range_to_global(p, sc.rig.range);
      double best = std::numeric_limits<double>::infinity();
      for (const auto& s : fr.truth) {
        const Eigen::Vector3d local = yaw_rotation(-s.heading) * (g - s.position);
        const Eigen::Vector3d half(0.5 * s.length, 0.5 * s.width, 0.5 * s.height);
        const Eigen::Vector3d c(0, 0, 0.5 * s.height);
        const Eigen::Vector3d out = ((local - c).cwiseAbs() - half).cwiseMax(0.0);
        best = std::min(best, out.norm());
      }
      CHECK(best <= 3 * 0.02 + 1e-9);
    }
  }
  CHECK(total > 100);
}

TEST_CASE("explicit maneuvers") {
  Maneuver m;
  m.kind = ManeuverKind::CutIn;
  m.lane = 1;
  m.target_lane = 0;
  m.change_start = 2;
  m.change_duration = 4;
  CHECK(evaluate_maneuver(m, 0).y == doctest::Approx(kLaneWidth));
  CHECK(evaluate_maneuver(m, 4).y == doctest::Approx(0.5 * kLaneWidth));
  CHECK(evaluate_maneuver(m, 10).y == doctest::Approx(0.0));
  CHECK(evaluate_maneuver(m, 4).heading < 0.0);

  Maneuver o;
  o.kind = ManeuverKind::Orbit;
  o.radius = 10;
  o.phase = 0;
  o.angular_speed = 0.1;
  const auto p = evaluate_maneuver(o, 10 * M_PI);
  CHECK(p.x == doctest::Approx(-10.0));
  CHECK(std::abs(p.y) < 1e-9);
  CHECK(maneuver_from_string("orbit") == ManeuverKind::Orbit);
  CHECK_THROWS_AS(maneuver_from_string("loop"), InvalidConfig);
}

TEST_CASE("invalid configs are rejected") {
  ScenarioConfig c;
  c.detector.miss_rate = 1.5;
  CHECK_THROWS_AS(generate(c), InvalidConfig);
  c = {};
  c.duration = 0;
  CHECK_THROWS_AS(generate(c), InvalidConfig);
  c = {};
  c.detector.sigma_px = -1;
  CHECK_THROWS_AS(validate(c), InvalidConfig);
}

TEST_CASE("an orbiting vehicle passes through every camera of the 8cam rig") {
  ScenarioConfig cfg;
  cfg.duration = 900;
  Maneuver o;
  o.kind = ManeuverKind::Orbit;
  o.radius = 12;
  o.angular_speed = 2 * M_PI / 90.0;
  cfg.maneuvers = {o};
  const auto t0 = std::chrono::steady_clock::now();
  const auto sc = generate(cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  MESSAGE("900 frames generated in " << secs << " s");
  std::set<int> seen;
  int frames_visible = 0;
  for (const auto& fr : sc.frames)
    for (const auto& s : fr.truth) {
      if (s.visible()) ++frames_visible;
      for (const auto& b : s.boxes) seen.insert(b.camera_id);
    }
  CHECK(seen.size() == 8);
  CHECK(frames_visible == 900);
}
