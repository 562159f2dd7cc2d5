#pragma once

#include <array>
#include <deque>
#include <optional>
#include <stdexcept>

#include <Eigen/Core>

#include "m3ot/detection.hpp"
#include "m3ot/random.hpp"
#include "m3ot/scenario.hpp"

namespace m3ot {

class CameraMissing : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Appearance of a target in one camera at capture time.
struct Template {
  int camera_id = 0;
  Box box;
  int frame = 0;
  Eigen::VectorXd descriptor;
  /// Vehicle whose pixels the template holds; -1 when it holds background.
  /// Only the synthetic channel reads this.
  int source = -1;
};

/// Forward-backward errors are ordered: entire, left, right, upper, lower half.
struct FlowResult {
  std::array<double, 5> fb_errors{};
  double ncc_forward = 0.0;
  double ncc_backward = 0.0;
  Box predicted;
  bool stable = false;

  double median_fb() const { return fb_errors[0]; }
};

struct AppearanceParams {
  double e0 = 10.0;               // stability threshold on the median FB error (px)
  double prediction_sigma = 2.0;  // px, predicted box centre noise
  double fb_scale = 1.0;          // mean FB error on success (px)
  double failure_floor = 15.0;    // px, FB errors on failure exceed floor
  double failure_scale = 10.0;
  double descriptor_noise = 0.05;
  /// Vehicles whose signatures have at least this cosine similarity fool the channel.
  double lookalike_cosine = 0.9;
  std::size_t template_cap = 10;
  std::uint64_t seed = 0;
};

/// Template-tracking signal source. A dense optical-flow implementation over
/// real image patches could stand behind the same interface.
class AppearanceChannel {
 public:
  virtual ~AppearanceChannel() = default;
  virtual Template capture(int camera_id, const Box& box, int frame) const = 0;
  /// Where the template's content has moved to in `frame`.
  virtual FlowResult track(const Template& t, int frame) const = 0;
  /// Template flowed onto a candidate box in the same camera.
  virtual FlowResult match(const Template& t, const Box& candidate, int frame) const = 0;
};

/// Flow statistics synthesized from scenario ground truth: low errors and a
/// noisy truth box while the template's vehicle is visible, failure otherwise.
/// NCC is the cosine similarity of noisy appearance signatures.
class SyntheticAppearance final : public AppearanceChannel {
 public:
  SyntheticAppearance(const Scenario& scenario, AppearanceParams params = {});

  Template capture(int camera_id, const Box& box, int frame) const override;
  FlowResult track(const Template& t, int frame) const override;
  FlowResult match(const Template& t, const Box& candidate, int frame) const override;

  /// Truth vehicle best matching `box` (IoU >= 0.5) in a camera, or -1.
  int identify(int camera_id, const Box& box, int frame) const;
  const AppearanceParams& params() const { return params_; }

 private:
  const Frame& frame_at(int frame) const;
  void require_camera(int camera_id) const;
  Eigen::VectorXd signature(int source, Rng& rng) const;
  FlowResult success(const Template& t, int source, const Box& truth, Rng& rng) const;
  FlowResult failure(const Template& t, const Box& where, int seen, Rng& rng) const;
  bool looks_alike(int a, int b) const;

  const Scenario* scenario_;
  AppearanceParams params_;
};

/// One tracked frame in one camera: the target box and the overlapping detection.
struct OverlapEntry {
  Box target;
  std::optional<Box> detection;
};

struct OverlapMean {
  double value = 0.0;
  bool no_history = true;
};

/// Mean IoU over the last `window` entries (frames without a detection count
/// as 0). With no detection in the window the result is 0 with no_history set.
OverlapMean mean_overlap_history(const std::deque<OverlapEntry>& history, std::size_t window);

}  // namespace m3ot
