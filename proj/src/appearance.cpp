#include "m3ot/appearance.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "m3ot/random.hpp"

namespace m3ot {
namespace {

std::uint64_t hash_box(const Box& b) {
  std::uint64_t h = 0;
  for (double x : {b.u, b.v, b.w, b.h}) h = mix64(h, std::bit_cast<std::uint64_t>(x));
  return h;
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0 || a.size() != b.size()) return 0.0;
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

Box with_center(const Box& b, double cx, double cy) { return {cx - 0.5 * b.w, cy - 0.5 * b.h, b.w, b.h}; }

}  // namespace

SyntheticAppearance::SyntheticAppearance(const Scenario& scenario, AppearanceParams params)
    : scenario_(&scenario), params_(params) {}

const Frame& SyntheticAppearance::frame_at(int frame) const {
  const auto& frames = scenario_->frames;
  if (frame >= 0 && static_cast<std::size_t>(frame) < frames.size() && frames[static_cast<std::size_t>(frame)].index == frame)
    return frames[static_cast<std::size_t>(frame)];
  for (const auto& f : frames)
    if (f.index == frame) return f;
  throw std::out_of_range("appearance: frame " + std::to_string(frame) + " not in scenario");
}

void SyntheticAppearance::require_camera(int camera_id) const {
  if (!scenario_->rig.find(camera_id)) throw CameraMissing("appearance: camera " + std::to_string(camera_id) + " missing");
}

int SyntheticAppearance::identify(int camera_id, const Box& box, int frame) const {
  int best = -1;
  double best_iou = 0.5;
  for (const auto& s : frame_at(frame).truth)
    if (const Box* b = s.box_in(camera_id)) {
      const double o = iou(*b, box);
      if (o >= best_iou) {
        best_iou = o;
        best = s.track_id;
      }
    }
  return best;
}

Eigen::VectorXd SyntheticAppearance::signature(int source, Rng& rng) const {
  const GroundTruthTrack* track = source >= 0 ? scenario_->track(source) : nullptr;
  const auto dim = scenario_->tracks.empty() ? Eigen::Index{16} : scenario_->tracks.front().embedding.size();
  Eigen::VectorXd v(dim);
  for (Eigen::Index k = 0; k < dim; ++k) v[k] = track ? track->embedding[k] + rng.normal(0.0, params_.descriptor_noise) : rng.normal();
  return v.normalized();
}

bool SyntheticAppearance::looks_alike(int a, int b) const {
  if (a < 0 || b < 0) return false;
  if (a == b) return true;
  const auto* ta = scenario_->track(a);
  const auto* tb = scenario_->track(b);
  return ta && tb && cosine(ta->embedding, tb->embedding) >= params_.lookalike_cosine;
}

Template SyntheticAppearance::capture(int camera_id, const Box& box, int frame) const {
  require_camera(camera_id);
  Template t;
  t.camera_id = camera_id;
  t.box = box;
  t.frame = frame;
  t.source = identify(camera_id, box, frame);
  Rng rng = Rng::substream(mix64(scenario_->seed, params_.seed ^ 0xCA97), static_cast<std::uint64_t>(frame),
                           mix64(static_cast<std::uint64_t>(camera_id), hash_box(box)));
  t.descriptor = signature(t.source, rng);
  return t;
}

FlowResult SyntheticAppearance::success(const Template& t, int source, const Box& truth, Rng& rng) const {
  FlowResult r;
  for (auto& e : r.fb_errors) e = rng.exponential(params_.fb_scale);
  const auto c = truth.center();
  r.predicted = with_center(truth, c.x() + rng.normal(0.0, params_.prediction_sigma),
                            c.y() + rng.normal(0.0, params_.prediction_sigma));
  r.ncc_forward = cosine(t.descriptor, signature(source, rng));
  r.ncc_backward = cosine(t.descriptor, signature(source, rng));
  r.stable = r.median_fb() < params_.e0;
  return r;
}

FlowResult SyntheticAppearance::failure(const Template& t, const Box& where, int seen, Rng& rng) const {
  FlowResult r;
  for (auto& e : r.fb_errors) e = params_.failure_floor + rng.exponential(params_.failure_scale);
  const auto c = where.center();
  r.predicted = with_center(where, c.x() + rng.normal(0.0, 0.3 * where.w), c.y() + rng.normal(0.0, 0.3 * where.h));
  r.ncc_forward = cosine(t.descriptor, signature(seen, rng));
  r.ncc_backward = cosine(t.descriptor, signature(seen, rng));
  r.stable = false;
  return r;
}

FlowResult SyntheticAppearance::track(const Template& t, int frame) const {
  require_camera(t.camera_id);
  const auto& fr = frame_at(frame);
  Rng rng = Rng::substream(mix64(scenario_->seed, params_.seed ^ 0x7AC), static_cast<std::uint64_t>(frame),
                           mix64(mix64(static_cast<std::uint64_t>(t.camera_id), static_cast<std::uint64_t>(t.frame)),
                                 hash_box(t.box)));
  if (t.source >= 0)
    if (const auto* s = fr.truth_of(t.source))
      if (const Box* b = s->box_in(t.camera_id)) return success(t, t.source, *b, rng);
  return failure(t, t.box, -1, rng);
}

FlowResult SyntheticAppearance::match(const Template& t, const Box& candidate, int frame) const {
  require_camera(t.camera_id);
  const int cand = identify(t.camera_id, candidate, frame);
  Rng rng = Rng::substream(mix64(scenario_->seed, params_.seed ^ 0x3A7C), static_cast<std::uint64_t>(frame),
                           mix64(mix64(hash_box(candidate), hash_box(t.box)), static_cast<std::uint64_t>(t.frame)));
  if (looks_alike(t.source, cand)) {
    const Box* b = frame_at(frame).truth_of(cand)->box_in(t.camera_id);
    return success(t, cand, *b, rng);
  }
  return failure(t, candidate, cand, rng);
}

OverlapMean mean_overlap_history(const std::deque<OverlapEntry>& history, std::size_t window) {
  OverlapMean out;
  const std::size_t n = std::min(window, history.size());
  if (n == 0) return out;
  double sum = 0.0;
  for (std::size_t k = history.size() - n; k < history.size(); ++k) {
    const auto& e = history[k];
    if (!e.detection) continue;
    out.no_history = false;
    sum += iou(e.target, *e.detection);
  }
  if (!out.no_history) out.value = sum / static_cast<double>(n);
  return out;
}

}  // namespace m3ot
