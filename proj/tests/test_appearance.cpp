#include <doctest.h>

#include "m3ot/appearance.hpp"

using namespace m3ot;

namespace {

Scenario one_vehicle(double speed, int frames) {
  ScenarioConfig c;
  c.duration = frames;
  c.detector.miss_rate = 0.0;
  c.detector.false_positive_rate = 0.0;
  c.detector.sigma_px = 0.0;
  Maneuver m;
  m.lane = 1.0;
  m.start_x = 20.0;
  m.speed = speed;
  c.maneuvers = {m};
  return generate(c);
}

AppearanceParams noiseless() {
  AppearanceParams p;
  p.fb_scale = 0.0;
  p.prediction_sigma = 0.0;
  p.descriptor_noise = 0.0;
  return p;
}

}  // namespace

TEST_CASE("noiseless channel reproduces the true box") {
  const auto sc = one_vehicle(0.0, 20);
  const SyntheticAppearance app(sc, noiseless());
  const auto& s0 = sc.frames[0].truth.at(0);
  REQUIRE(s0.visible());
  const auto cb = s0.boxes.front();
  const Template t = app.capture(cb.camera_id, cb.box, 0);
  CHECK(t.source == s0.track_id);
  for (int f = 1; f < 20; ++f) {
    const auto r = app.track(t, f);
    const Box* truth = sc.frames[static_cast<std::size_t>(f)].truth.at(0).box_in(cb.camera_id);
    REQUIRE(truth);
    CHECK(r.stable);
    CHECK(r.median_fb() == 0.0);
    for (double e : r.fb_errors) CHECK(e == 0.0);
    CHECK(r.predicted.u == doctest::Approx(truth->u).epsilon(1e-12));
    CHECK(r.predicted.v == doctest::Approx(truth->v).epsilon(1e-12));
    CHECK(r.predicted.w == truth->w);
    CHECK(r.predicted.h == truth->h);
    CHECK(r.ncc_forward == doctest::Approx(1.0));
    CHECK(r.ncc_backward == doctest::Approx(1.0));
  }
}

TEST_CASE("vehicle leaving the view fails the stability test") {
  // 10 m/s drift: beyond the 60 m visible range after about 4 s.
  const auto sc = one_vehicle(10.0, 80);
  const SyntheticAppearance app(sc);
  const auto cb = sc.frames[0].truth.at(0).boxes.front();
  const Template t = app.capture(cb.camera_id, cb.box, 0);
  REQUIRE_FALSE(sc.frames[79].truth.at(0).box_in(cb.camera_id));
  const auto r = app.track(t, 79);
  CHECK_FALSE(r.stable);
  CHECK(r.median_fb() > app.params().e0);
  for (double e : r.fb_errors) CHECK(e >= 0.0);
}

TEST_CASE("predicted box centre within 3 sigma per axis in 99% of trials") {
  const auto sc = one_vehicle(0.0, 2);
  const auto cb = sc.frames[0].truth.at(0).boxes.front();
  const Box* truth = sc.frames[1].truth.at(0).box_in(cb.camera_id);
  REQUIRE(truth);
  int inside_u = 0, inside_v = 0;
  const int trials = 1000;
  for (int k = 0; k < trials; ++k) {
    AppearanceParams p;
    p.prediction_sigma = 2.0;
    p.seed = static_cast<std::uint64_t>(k);
    const SyntheticAppearance app(sc, p);
    const auto r = app.track(app.capture(cb.camera_id, cb.box, 0), 1);
    CHECK(r.predicted.w > 0.0);
    CHECK(r.predicted.h > 0.0);
    inside_u += std::abs(r.predicted.center().x() - truth->center().x()) <= 6.0;
    inside_v += std::abs(r.predicted.center().y() - truth->center().y()) <= 6.0;
  }
  CHECK(inside_u >= 990);
  CHECK(inside_v >= 990);
}

TEST_CASE("tracking is deterministic and does not touch the template") {
  const auto sc = one_vehicle(0.0, 5);
  const SyntheticAppearance app(sc);
  const auto cb = sc.frames[0].truth.at(0).boxes.front();
  const Template t = app.capture(cb.camera_id, cb.box, 0);
  const Template copy = t;
  const auto a = app.track(t, 3);
  const auto b = app.track(t, 3);
  CHECK(a.fb_errors == b.fb_errors);
  CHECK(a.predicted == b.predicted);
  CHECK(a.ncc_forward == b.ncc_forward);
  CHECK(t.box == copy.box);
  CHECK(t.descriptor == copy.descriptor);
  CHECK_THROWS_AS(app.track(Template{99, cb.box, 0, t.descriptor, 0}, 1), CameraMissing);
}

TEST_CASE("match separates the template's vehicle from background") {
  const auto sc = one_vehicle(0.0, 3);
  const SyntheticAppearance app(sc, noiseless());
  const auto cb = sc.frames[0].truth.at(0).boxes.front();
  const Template t = app.capture(cb.camera_id, cb.box, 0);
  const Box* now = sc.frames[2].truth.at(0).box_in(cb.camera_id);
  const auto good = app.match(t, *now, 2);
  CHECK(good.stable);
  const Box elsewhere{now->u + 3 * now->w, now->v, now->w, now->h};
  const auto bad = app.match(t, elsewhere, 2);
  CHECK_FALSE(bad.stable);
  CHECK(bad.median_fb() > app.params().e0);
}

TEST_CASE("mean overlap history") {
  const Box b{10, 10, 100, 50};
  std::deque<OverlapEntry> h;
  for (int k = 0; k < 5; ++k) h.push_back({b, b});
  auto m = mean_overlap_history(h, 5);
  CHECK(m.value == 1.0);
  CHECK_FALSE(m.no_history);

  std::deque<OverlapEntry> none(3, OverlapEntry{b, std::nullopt});
  m = mean_overlap_history(none, 5);
  CHECK(m.value == 0.0);
  CHECK(m.no_history);
  CHECK(mean_overlap_history({}, 5).no_history);

  // Horizontal shifts of a unit-height box with IoU (w - s) / (w + s).
  auto shifted = [&](double target_iou) {
    const double s = b.w * (1 - target_iou) / (1 + target_iou);
    return Box{b.u + s, b.v, b.w, b.h};
  };
  std::deque<OverlapEntry> mixed;
  for (double o : {0.5, 0.7, 0.9}) mixed.push_back({b, shifted(o)});
  CHECK(iou(b, shifted(0.7)) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(mean_overlap_history(mixed, 5).value == doctest::Approx(0.7).epsilon(1e-12));
  // Only the window counts.
  mixed.push_front({b, b});
  CHECK(mean_overlap_history(mixed, 3).value == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("iou properties") {
  const Box a{0, 0, 10, 10}, b{5, 5, 10, 10}, c{20, 20, 5, 5};
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, c) == 0.0);
  CHECK(iou(a, b) == iou(b, a));
  CHECK(iou(a, b) == doctest::Approx(25.0 / 175.0));
}
