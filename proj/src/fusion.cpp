#include "m3ot/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

#include "m3ot/hungarian.hpp"

namespace m3ot {
namespace {

/// Rank of each detection in the deterministic processing order:
/// score descending, then camera id, u, v.
std::vector<std::size_t> score_order(std::span<const Detection> detections) {
  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = detections[a];
    const auto& y = detections[b];
    if (x.score != y.score) return x.score > y.score;
    if (x.camera_id != y.camera_id) return x.camera_id < y.camera_id;
    if (x.box.u != y.box.u) return x.box.u < y.box.u;
    return x.box.v < y.box.v;
  });
  return order;
}

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
};

FusedProposal make_group(std::vector<std::size_t> idx, std::span<const Detection> detections,
                         std::span<const GlobalPoint> projections) {
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return detections[a].camera_id < detections[b].camera_id; });
  FusedProposal p;
  GlobalPoint sum = GlobalPoint::Zero();
  for (auto i : idx) {
    p.members.push_back({i, detections[i], projections[i]});
    sum += projections[i];
  }
  p.global_position = sum / static_cast<double>(idx.size());
  return p;
}

PointIndexSet normalized(const PointIndexSet& s) {
  PointIndexSet out = s;
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<GlobalPoint> gather(std::span<const GlobalPoint> cloud, const PointIndexSet& idx) {
  std::vector<GlobalPoint> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(cloud[i]);
  return out;
}

}  // namespace

const ProposalMember* FusedProposal::member_in(int camera_id) const {
  for (const auto& m : members)
    if (m.detection.camera_id == camera_id) return &m;
  return nullptr;
}

double FusedProposal::max_score() const {
  double s = 0.0;
  for (const auto& m : members) s = std::max(s, m.detection.score);
  return s;
}

std::vector<FusedProposal> fuse_by_distance(std::span<const Detection> detections,
                                            std::span<const GlobalPoint> projections, double threshold) {
  if (detections.size() != projections.size())
    throw LengthMismatch("fuse_by_distance: detections and projections differ in length");
  if (!(threshold > 0.0)) throw std::invalid_argument("fuse_by_distance: threshold must be positive");
  const auto order = score_order(detections);
  std::vector<char> taken(detections.size(), 0);
  std::vector<FusedProposal> out;
  for (std::size_t r = 0; r < order.size(); ++r) {
    const std::size_t seed = order[r];
    if (taken[seed]) continue;
    taken[seed] = 1;
    // Nearest qualifying detection per other camera; ties go to the higher-ranked one.
    std::map<int, std::pair<double, std::size_t>> best;
    for (std::size_t q = r + 1; q < order.size(); ++q) {
      const std::size_t j = order[q];
      if (taken[j] || detections[j].camera_id == detections[seed].camera_id) continue;
      const double d = (projections[j] - projections[seed]).norm();
      if (d > threshold) continue;
      auto it = best.find(detections[j].camera_id);
      if (it == best.end() || d < it->second.first) best[detections[j].camera_id] = {d, j};
    }
    std::vector<std::size_t> group{seed};
    for (const auto& [cam, entry] : best) {
      taken[entry.second] = 1;
      group.push_back(entry.second);
    }
    out.push_back(make_group(std::move(group), detections, projections));
  }
  return out;
}

double overlap_ratio(const PointIndexSet& a, const PointIndexSet& b) {
  if (a.empty() || b.empty()) return 0.0;
  std::size_t common = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++common;
      ++i;
      ++j;
    }
  }
  const double c = static_cast<double>(common);
  return std::max(c / static_cast<double>(a.size()), c / static_cast<double>(b.size()));
}

std::vector<FusedProposal> fuse_by_pointcloud(std::span<const Detection> detections,
                                              std::span<const PointIndexSet> point_sets,
                                              std::span<const GlobalPoint> cloud,
                                              std::span<const GlobalPoint> fallback_projections,
                                              const PointFusionParams& params) {
  const std::size_t n = detections.size();
  if (point_sets.size() != n || fallback_projections.size() != n)
    throw LengthMismatch("fuse_by_pointcloud: per-detection inputs differ in length");
  std::vector<PointIndexSet> sets;
  sets.reserve(n);
  for (const auto& s : point_sets) {
    for (auto i : s)
      if (i >= cloud.size()) throw IndexOutOfRange("fuse_by_pointcloud: point index beyond the cloud");
    sets.push_back(normalized(s));
  }

  const auto order = score_order(detections);
  std::vector<std::size_t> rank(n);
  for (std::size_t r = 0; r < n; ++r) rank[order[r]] = r;

  struct Edge {
    double ratio;
    std::size_t a, b;  // ranks, a < b
  };
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (detections[i].camera_id == detections[j].camera_id) continue;
      const double r = overlap_ratio(sets[i], sets[j]);
      if (r >= params.overlap_threshold) edges.push_back({r, std::min(rank[i], rank[j]), std::max(rank[i], rank[j])});
    }
  std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
    if (x.ratio != y.ratio) return x.ratio > y.ratio;
    return std::pair(x.a, x.b) < std::pair(y.a, y.b);
  });

  DisjointSets groups(n);
  std::vector<std::set<int>> cameras(n);
  for (std::size_t i = 0; i < n; ++i) cameras[i].insert(detections[i].camera_id);
  for (const auto& e : edges) {
    std::size_t a = groups.find(order[e.a]);
    std::size_t b = groups.find(order[e.b]);
    if (a == b) continue;
    const bool clash = std::any_of(cameras[b].begin(), cameras[b].end(), [&](int c) { return cameras[a].count(c) > 0; });
    if (clash) continue;
    if (rank[b] < rank[a]) std::swap(a, b);
    groups.parent[b] = a;
    cameras[a].insert(cameras[b].begin(), cameras[b].end());
  }

  std::vector<FusedProposal> out;
  std::map<std::size_t, std::size_t> slot;  // root -> output position
  std::vector<std::vector<std::size_t>> members;
  for (auto i : order) {
    const auto root = groups.find(i);
    auto [it, fresh] = slot.emplace(root, members.size());
    if (fresh) members.emplace_back();
    members[it->second].push_back(i);
  }
  for (auto& idx : members) {
    auto p = make_group(idx, detections, fallback_projections);
    PointIndexSet uni;
    for (auto i : idx) uni.insert(uni.end(), sets[i].begin(), sets[i].end());
    uni = normalized(uni);
    if (!uni.empty()) {
      const auto pts = gather(cloud, uni);
      const auto est = localize_with_pointcloud(pts, params.ransac);
      if (est.status != LocalizationStatus::TooFewPoints) {
        p.global_position = est.center;
        p.dimensions = Eigen::Vector2d(est.length, est.width);
      }
      p.point_indices = std::move(uni);
    }
    out.push_back(std::move(p));
  }
  return out;
}

CameraLookup build_lookup(std::span<const GlobalPoint> cloud, const CameraCalibration& camera) {
  CameraLookup lut;
  lut.camera_id = camera.camera_id;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto px = back_project_global_to_camera(cloud[i], camera);
    if (!px || px->x() < 0 || px->y() < 0 || px->x() > camera.width || px->y() > camera.height) continue;
    lut.index.push_back(i);
    lut.pixel.push_back(*px);
  }
  return lut;
}

PointIndexSet points_in_box(const CameraLookup& lookup, const Box& box) {
  PointIndexSet out;
  for (std::size_t k = 0; k < lookup.index.size(); ++k) {
    const auto& p = lookup.pixel[k];
    if (p.x() >= box.u && p.x() <= box.right() && p.y() >= box.v && p.y() <= box.bottom())
      out.push_back(lookup.index[k]);
  }
  return out;  // lookup.index is ascending
}

std::vector<int> segment_cloud(std::span<const GlobalPoint> cloud, double gap) {
  const std::size_t n = cloud.size();
  DisjointSets sets(n);
  auto key = [&](long cx, long cy) { return (static_cast<std::uint64_t>(cx) << 32) ^ static_cast<std::uint32_t>(cy); };
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> grid;
  auto cell = [&](const GlobalPoint& p) {
    return std::pair(static_cast<long>(std::floor(p.x() / gap)), static_cast<long>(std::floor(p.y() / gap)));
  };
  for (std::size_t i = 0; i < n; ++i) {
    const auto [cx, cy] = cell(cloud[i]);
    grid[key(cx, cy)].push_back(i);
  }
  const double g2 = gap * gap;
  for (std::size_t i = 0; i < n; ++i) {
    const auto [cx, cy] = cell(cloud[i]);
    for (long dx = -1; dx <= 1; ++dx)
      for (long dy = -1; dy <= 1; ++dy) {
        auto it = grid.find(key(cx + dx, cy + dy));
        if (it == grid.end()) continue;
        for (auto j : it->second) {
          if (j <= i) continue;
          if ((cloud[i].head<2>() - cloud[j].head<2>()).squaredNorm() > g2) continue;
          const auto a = sets.find(i), b = sets.find(j);
          if (a != b) sets.parent[std::max(a, b)] = std::min(a, b);
        }
      }
  }
  std::vector<int> label(n, -1);
  std::map<std::size_t, int> ids;
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, fresh] = ids.emplace(sets.find(i), static_cast<int>(ids.size()));
    label[i] = it->second;
  }
  return label;
}

DetectionPointSets detection_point_sets(const Frame& frame, const SensorRig& rig, std::span<const GlobalPoint> cloud,
                                        const ProposalOptions& options) {
  const auto& dets = frame.detections;
  DetectionPointSets out;
  auto& sets = out.fusion;
  sets.resize(dets.size());
  out.visible.resize(dets.size());
  std::vector<int> labels;
  std::vector<PointIndexSet> segments;
  if (options.point_sets == PointSetMode::Segment) {
    labels = segment_cloud(cloud, options.segment_gap);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (static_cast<std::size_t>(labels[i]) >= segments.size()) segments.resize(static_cast<std::size_t>(labels[i]) + 1);
      segments[static_cast<std::size_t>(labels[i])].push_back(i);
    }
  }
  for (const auto& cam : rig.cameras) {
    std::vector<std::size_t> in_cam;
    for (std::size_t i = 0; i < dets.size(); ++i)
      if (dets[i].camera_id == cam.camera_id) in_cam.push_back(i);
    if (in_cam.empty()) continue;
    const auto lut = build_lookup(cloud, cam);
    if (options.point_sets == PointSetMode::InBox) {
      for (auto i : in_cam) out.visible[i] = sets[i] = points_in_box(lut, dets[i].box);
      continue;
    }
    // Candidate segments touched by any box, scored by silhouette IoU.
    std::vector<int> candidates;
    for (auto i : in_cam)
      for (auto p : points_in_box(lut, dets[i].box)) candidates.push_back(labels[p]);
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    if (candidates.empty()) continue;
    std::vector<std::optional<Box>> silhouette(candidates.size());
    for (std::size_t s = 0; s < candidates.size(); ++s) {
      const auto& seg = segments[static_cast<std::size_t>(candidates[s])];
      double top = 0.0;
      for (auto p : seg) top = std::max(top, cloud[p].z());
      double u0 = std::numeric_limits<double>::infinity(), v0 = u0, u1 = -u0, v1 = -u0;
      for (auto p : seg)
        for (double z : {kGroundAltitude, top}) {
          const auto px = back_project_global_to_camera(GlobalPoint(cloud[p].x(), cloud[p].y(), z), cam);
          if (!px) continue;
          u0 = std::min(u0, px->x());
          u1 = std::max(u1, px->x());
          v0 = std::min(v0, px->y());
          v1 = std::max(v1, px->y());
        }
      if (u1 > u0 && v1 > v0) silhouette[s] = clip(Box{u0, v0, u1 - u0, v1 - v0}, cam.width, cam.height);
    }
    Eigen::MatrixXd score(static_cast<Eigen::Index>(in_cam.size()), static_cast<Eigen::Index>(candidates.size()));
    for (std::size_t a = 0; a < in_cam.size(); ++a)
      for (std::size_t s = 0; s < candidates.size(); ++s) {
        const double o = silhouette[s] ? iou(dets[in_cam[a]].box, *silhouette[s]) : 0.0;
        score(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(s)) = o >= options.segment_min_iou ? o : kForbidden;
      }
    for (const auto& [a, s] : hungarian(score).pairs) {
      const auto d = in_cam[static_cast<std::size_t>(a)];
      const int label = candidates[static_cast<std::size_t>(s)];
      sets[d] = segments[static_cast<std::size_t>(label)];
      for (auto p : points_in_box(lut, dets[d].box))
        if (labels[p] == label) out.visible[d].push_back(p);
    }
  }
  return out;
}

const char* to_string(ProjectionScheme s) { return s == ProjectionScheme::PointCloud ? "pointcloud" : "ipm"; }
const char* to_string(FusionScheme s) { return s == FusionScheme::PointCloud ? "pointcloud" : "distance"; }

ProjectionScheme projection_from_string(const std::string& s) {
  if (s == "pointcloud") return ProjectionScheme::PointCloud;
  if (s == "ipm") return ProjectionScheme::Ipm;
  throw std::invalid_argument("unknown projection scheme '" + s + "'");
}

FusionScheme fusion_from_string(const std::string& s) {
  if (s == "pointcloud") return FusionScheme::PointCloud;
  if (s == "distance") return FusionScheme::Distance;
  throw std::invalid_argument("unknown fusion scheme '" + s + "'");
}

FrameProposals build_proposals(const Frame& frame, const SensorRig& rig, const ProposalOptions& options) {
  FrameProposals out;
  const auto& dets = frame.detections;
  out.cloud.reserve(frame.point_cloud.size());
  for (const auto& p : frame.point_cloud) out.cloud.push_back(project_range_to_global(p, rig.range));

  out.ipm.reserve(dets.size());
  for (const auto& d : dets) {
    const auto& cam = rig.camera(d.camera_id);
    try {
      out.ipm.push_back(ipm_project(d.box.bottom_center(), cam));
    } catch (const DegenerateHomography&) {
      const GlobalPoint c = cam.center();
      out.ipm.emplace_back(c.x(), c.y(), kGroundAltitude);
    }
  }

  const bool need_points =
      options.projection == ProjectionScheme::PointCloud || options.fusion == FusionScheme::PointCloud;
  if (need_points) {
    auto sets = detection_point_sets(frame, rig, out.cloud, options);
    out.point_sets = std::move(sets.fusion);
    out.visible_sets = std::move(sets.visible);
  } else {
    out.point_sets.assign(dets.size(), {});
    out.visible_sets.assign(dets.size(), {});
  }

  out.projections = out.ipm;
  if (options.projection == ProjectionScheme::PointCloud) {
    std::map<PointIndexSet, GlobalPoint> cache;  // identical sets recur within a frame
    for (std::size_t i = 0; i < dets.size(); ++i) {
      const auto& set = out.visible_sets[i];
      if (set.size() < options.point_fusion.ransac.min_points) continue;
      auto it = cache.find(set);
      if (it == cache.end()) {
        const auto est = localize_with_pointcloud(gather(out.cloud, set), options.point_fusion.ransac);
        it = cache.emplace(set, est.status == LocalizationStatus::TooFewPoints ? out.ipm[i] : est.center).first;
      }
      out.projections[i] = it->second;
    }
  }

  if (options.fusion == FusionScheme::Distance) {
    out.proposals = fuse_by_distance(dets, out.projections, options.distance_threshold);
  } else {
    out.proposals = fuse_by_pointcloud(dets, out.point_sets, out.cloud, out.ipm, options.point_fusion);
    for (auto& p : out.proposals) {
      GlobalPoint sum = GlobalPoint::Zero();
      for (auto& m : p.members) {
        m.projection = out.projections[m.detection_index];
        sum += out.ipm[m.detection_index];
      }
      if (options.projection == ProjectionScheme::Ipm) {
        p.global_position = sum / static_cast<double>(p.members.size());
        p.dimensions.reset();
      }
    }
  }
  return out;
}

}  // namespace m3ot
