#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "m3ot/geometry.hpp"
#include "m3ot/scenario.hpp"
#include "m3ot/tracker.hpp"

namespace m3ot {

class FrameMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct EvalConfig {
  double match_threshold = 2.0;  // m, ground-plane distance
  double mt_fraction = 0.8;
  double ml_fraction = 0.2;
};

void validate(const EvalConfig& cfg);

struct LabeledPoint {
  int id = 0;
  GlobalPoint position = GlobalPoint::Zero();
};

/// Objects of one frame, truth or hypothesis.
struct EvalFrame {
  int frame = 0;
  std::vector<LabeledPoint> truth;
  std::vector<LabeledPoint> hypotheses;
};

struct FrameCounts {
  int frame = 0;
  int truth = 0;
  int hypotheses = 0;
  int matches = 0;
  int false_positives = 0;
  int misses = 0;
  int id_switches = 0;
};

struct EvalReport {
  double mota = 1.0;
  double motp = 0.0;  // m
  double mt = 0.0;    // fraction of truth tracks
  double ml = 0.0;
  int ids = 0;
  long truth = 0;
  long matches = 0;
  long false_positives = 0;
  long misses = 0;
  int tracks = 0;
  int mostly_tracked = 0;
  int mostly_lost = 0;
  std::vector<FrameCounts> frames;
};

/// CLEAR-MOT over frame-aligned object lists. Correspondences persist while
/// within the threshold; the rest are matched by Hungarian on distance.
/// An identity switch is a truth object matched to a hypothesis other than
/// its last matched one. With no truth objects MOTA counts errors against 1.
EvalReport evaluate(std::span<const EvalFrame> frames, const EvalConfig& cfg = {});

/// Truth = vehicles visible in at least one camera. Track records must refer
/// to frames of the scenario.
EvalReport evaluate(const Scenario& truth, std::span<const TrackRecord> hypotheses, const EvalConfig& cfg = {});

}  // namespace m3ot
