#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "m3ot/fusion.hpp"
#include "oracles.hpp"

using namespace m3ot;

namespace {

Detection det(int cam, double u, double score) { return {cam, {u, 300, 50, 40}, score}; }

PointIndexSet range_set(std::size_t from, std::size_t to) {
  PointIndexSet s;
  for (auto i = from; i < to; ++i) s.push_back(i);
  return s;
}

std::size_t member_count(const std::vector<FusedProposal>& ps) {
  std::size_t n = 0;
  for (const auto& p : ps) n += p.members.size();
  return n;
}

}  // namespace

TEST_CASE("distance fusion examples") {
  std::vector<Detection> d{det(0, 10, 0.9), det(1, 20, 0.8)};
  std::vector<GlobalPoint> near{{10, 2, 0}, {10.5, 2, 0}};
  auto out = fuse_by_distance(d, near, 1.0);
  REQUIRE(out.size() == 1);
  CHECK(out[0].members.size() == 2);
  CHECK(out[0].global_position.isApprox(GlobalPoint(10.25, 2, 0)));

  std::vector<GlobalPoint> far{{10, 2, 0}, {12, 2, 0}};
  CHECK(fuse_by_distance(d, far, 1.0).size() == 2);
  CHECK(fuse_by_distance({}, {}, 1.0).empty());
  CHECK_THROWS_AS(fuse_by_distance(d, std::vector<GlobalPoint>{{0, 0, 0}}, 1.0), LengthMismatch);

  // Same camera is never fused.
  std::vector<Detection> same{det(0, 10, 0.9), det(0, 20, 0.8)};
  CHECK(fuse_by_distance(same, near, 1.0).size() == 2);
}

TEST_CASE("distance fusion is invariant to input order") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> pos(0, 6), sc(0, 1);
  std::uniform_int_distribution<int> cam(0, 3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Detection> d;
    std::vector<GlobalPoint> p;
    for (int i = 0; i < 8; ++i) {
      d.push_back(det(cam(gen), pos(gen) * 100, sc(gen)));
      p.emplace_back(pos(gen), pos(gen), 0);
    }
    const auto a = fuse_by_distance(d, p);
    CHECK(member_count(a) == d.size());
    std::vector<std::size_t> perm(d.size());
    std::iota(perm.begin(), perm.end(), 0u);
    std::shuffle(perm.begin(), perm.end(), gen);
    std::vector<Detection> d2;
    std::vector<GlobalPoint> p2;
    for (auto i : perm) {
      d2.push_back(d[i]);
      p2.push_back(p[i]);
    }
    const auto b = fuse_by_distance(d2, p2);
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      REQUIRE(a[k].members.size() == b[k].members.size());
      for (std::size_t m = 0; m < a[k].members.size(); ++m) CHECK(a[k].members[m].detection == b[k].members[m].detection);
      CHECK(a[k].global_position == b[k].global_position);
      std::set<int> cams;
      for (const auto& m : a[k].members) cams.insert(m.detection.camera_id);
      CHECK(cams.size() == a[k].members.size());
    }
  }
}

TEST_CASE("overlap ratio arithmetic") {
  const auto p1 = range_set(0, 10);
  PointIndexSet p2 = range_set(1, 10);  // 9 shared
  for (std::size_t i = 100; i < 111; ++i) p2.push_back(i);
  CHECK(p2.size() == 20);
  CHECK(overlap_ratio(p1, p2) == doctest::Approx(0.9));
  CHECK(overlap_ratio(p1, range_set(50, 60)) == 0.0);
  CHECK(overlap_ratio(range_set(0, 10), range_set(3, 13)) == doctest::Approx(0.7));
  CHECK(overlap_ratio(p1, {}) == 0.0);
}

TEST_CASE("point fusion threshold boundary") {
  // |P1| = |P2| = 100 with 79, 80, 81 shared points.
  std::vector<GlobalPoint> cloud(400, GlobalPoint::Zero());
  std::vector<Detection> d{det(0, 10, 0.9), det(1, 20, 0.8)};
  std::vector<GlobalPoint> fallback{{1, 0, 0}, {3, 0, 0}};
  for (auto [shared, merged] : {std::pair{79, false}, std::pair{80, true}, std::pair{81, true}}) {
    std::vector<PointIndexSet> sets{range_set(0, 100), range_set(100 - shared, 200 - shared)};
    CHECK(overlap_ratio(sets[0], sets[1]) == doctest::Approx(shared / 100.0));
    const auto out = fuse_by_pointcloud(d, sets, cloud, fallback);
    CHECK((out.size() == 1) == merged);
    CHECK(member_count(out) == 2);
  }
  std::vector<PointIndexSet> bad{range_set(0, 5), range_set(399, 401)};
  CHECK_THROWS_AS(fuse_by_pointcloud(d, bad, cloud, fallback), IndexOutOfRange);
  CHECK_THROWS_AS(fuse_by_pointcloud(d, std::vector<PointIndexSet>{{}}, cloud, fallback), LengthMismatch);
}

TEST_CASE("point fusion closes merges transitively and ignores empty sets") {
  std::vector<GlobalPoint> cloud(100, GlobalPoint::Zero());
  std::vector<Detection> d{det(0, 0, 0.9), det(1, 0, 0.8), det(2, 0, 0.7), det(3, 0, 0.6)};
  // a~b and b~c but not a~c; d has no points.
  std::vector<PointIndexSet> sets{range_set(0, 10), range_set(0, 30), range_set(20, 30), {}};
  std::vector<GlobalPoint> fallback(4, GlobalPoint::Zero());
  const auto out = fuse_by_pointcloud(d, sets, cloud, fallback);
  REQUIRE(out.size() == 2);
  CHECK(out[0].members.size() == 3);
  CHECK(out[1].members.size() == 1);
  CHECK_FALSE(out[1].point_indices.has_value());
  CHECK(out[0].point_indices->size() == 30);
}

TEST_CASE("segment clustering") {
  std::vector<GlobalPoint> cloud{{0, 0, 0}, {0.5, 0, 0}, {1.0, 0.2, 1}, {5, 5, 0}, {5.3, 5, 0}, {20, 0, 0}};
  const auto l = segment_cloud(cloud, 0.8);
  CHECK(l[0] == l[1]);
  CHECK(l[1] == l[2]);
  CHECK(l[3] == l[4]);
  CHECK(l[0] != l[3]);
  CHECK(l[5] != l[0]);
  CHECK(l[5] != l[3]);
}

TEST_CASE("noiseless point-cloud fusion partitions detections by vehicle") {
  for (const auto& rig : rig_preset_names()) {
    ScenarioConfig cfg;
    cfg.seed = 11;
    cfg.duration = 100;
    cfg.rig = rig;
    cfg.detector.miss_rate = 0;
    cfg.detector.false_positive_rate = 0;
    cfg.detector.sigma_px = 0;
    cfg.lidar.range_noise_sigma = 0;
    const auto sc = generate(cfg);
    ProposalOptions opt;
    const auto e = oracle::check_partition(sc, opt);
    INFO(rig, " multi-camera groups ", e.multi);
    CHECK(e.splits == 0);
    CHECK(e.merges == 0);
    if (rig == "3cam" || rig == "8cam") CHECK(e.multi > 0);
    opt.fusion = FusionScheme::Distance;
    CHECK(oracle::check_partition(sc, opt).merges == 0);
  }
}
