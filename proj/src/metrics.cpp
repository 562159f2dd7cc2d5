#include "m3ot/metrics.hpp"

#include <map>
#include <set>

#include "m3ot/hungarian.hpp"

namespace m3ot {
namespace {

double ground_distance(const GlobalPoint& a, const GlobalPoint& b) { return (a - b).head<2>().norm(); }

}  // namespace

void validate(const EvalConfig& cfg) {
  if (!(cfg.match_threshold > 0.0)) throw std::invalid_argument("evaluation: match threshold must be positive");
  if (!(0.0 < cfg.ml_fraction && cfg.ml_fraction < cfg.mt_fraction && cfg.mt_fraction < 1.0))
    throw std::invalid_argument("evaluation: need 0 < ml_fraction < mt_fraction < 1");
}

EvalReport evaluate(std::span<const EvalFrame> frames, const EvalConfig& cfg) {
  validate(cfg);
  EvalReport rep;
  std::map<int, int> current;       // truth id -> hypothesis id matched in the previous frame
  std::map<int, int> last_matched;  // truth id -> most recent hypothesis id ever matched
  std::map<int, std::pair<int, int>> coverage;  // truth id -> (matched frames, present frames)
  double dist_sum = 0.0;
  std::optional<int> prev_frame;

  for (const auto& fr : frames) {
    if (prev_frame && fr.frame <= *prev_frame) throw FrameMismatch("evaluation: frames not strictly increasing");
    prev_frame = fr.frame;
    FrameCounts fc;
    fc.frame = fr.frame;
    fc.truth = static_cast<int>(fr.truth.size());
    fc.hypotheses = static_cast<int>(fr.hypotheses.size());

    std::vector<int> match_of(fr.truth.size(), -1);  // hypothesis index
    std::vector<bool> hyp_used(fr.hypotheses.size(), false);
    // Keep last frame's correspondences that are still valid.
    for (std::size_t i = 0; i < fr.truth.size(); ++i) {
      auto it = current.find(fr.truth[i].id);
      if (it == current.end()) continue;
      for (std::size_t j = 0; j < fr.hypotheses.size(); ++j)
        if (!hyp_used[j] && fr.hypotheses[j].id == it->second &&
            ground_distance(fr.truth[i].position, fr.hypotheses[j].position) <= cfg.match_threshold) {
          match_of[i] = static_cast<int>(j);
          hyp_used[j] = true;
          break;
        }
    }
    // Maximum-cardinality, minimum-distance matching of the rest.
    std::vector<std::size_t> rows, cols;
    for (std::size_t i = 0; i < fr.truth.size(); ++i)
      if (match_of[i] < 0) rows.push_back(i);
    for (std::size_t j = 0; j < fr.hypotheses.size(); ++j)
      if (!hyp_used[j]) cols.push_back(j);
    if (!rows.empty() && !cols.empty()) {
      const double big = 1e6 * cfg.match_threshold;
      Eigen::MatrixXd score(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
      for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < cols.size(); ++c) {
          const double d = ground_distance(fr.truth[rows[r]].position, fr.hypotheses[cols[c]].position);
          score(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = d <= cfg.match_threshold ? big - d : kForbidden;
        }
      for (const auto& [r, c] : hungarian(score).pairs) {
        match_of[rows[static_cast<std::size_t>(r)]] = static_cast<int>(cols[static_cast<std::size_t>(c)]);
        hyp_used[cols[static_cast<std::size_t>(c)]] = true;
      }
    }

    current.clear();
    for (std::size_t i = 0; i < fr.truth.size(); ++i) {
      const int tid = fr.truth[i].id;
      auto& cov = coverage[tid];
      ++cov.second;
      if (match_of[i] < 0) {
        ++fc.misses;
        continue;
      }
      const auto& h = fr.hypotheses[static_cast<std::size_t>(match_of[i])];
      ++fc.matches;
      ++cov.first;
      dist_sum += ground_distance(fr.truth[i].position, h.position);
      auto lm = last_matched.find(tid);
      if (lm != last_matched.end() && lm->second != h.id) ++fc.id_switches;
      last_matched[tid] = h.id;
      current[tid] = h.id;
    }
    fc.false_positives = fc.hypotheses - fc.matches;

    rep.truth += fc.truth;
    rep.matches += fc.matches;
    rep.misses += fc.misses;
    rep.false_positives += fc.false_positives;
    rep.ids += fc.id_switches;
    rep.frames.push_back(fc);
  }

  const double errors = static_cast<double>(rep.misses + rep.false_positives + rep.ids);
  rep.mota = 1.0 - errors / static_cast<double>(std::max<long>(rep.truth, 1));
  rep.motp = rep.matches > 0 ? dist_sum / static_cast<double>(rep.matches) : 0.0;
  for (const auto& [id, cov] : coverage) {
    const double f = static_cast<double>(cov.first) / static_cast<double>(cov.second);
    ++rep.tracks;
    if (f >= cfg.mt_fraction) ++rep.mostly_tracked;
    if (f < cfg.ml_fraction) ++rep.mostly_lost;
  }
  if (rep.tracks > 0) {
    rep.mt = static_cast<double>(rep.mostly_tracked) / rep.tracks;
    rep.ml = static_cast<double>(rep.mostly_lost) / rep.tracks;
  }
  return rep;
}

EvalReport evaluate(const Scenario& truth, std::span<const TrackRecord> hypotheses, const EvalConfig& cfg) {
  std::vector<EvalFrame> frames;
  std::map<int, std::size_t> pos;
  for (const auto& f : truth.frames) {
    EvalFrame ef;
    ef.frame = f.index;
    for (const auto& s : f.truth)
      if (s.visible()) ef.truth.push_back({s.track_id, s.position});
    pos[f.index] = frames.size();
    frames.push_back(std::move(ef));
  }
  for (const auto& r : hypotheses) {
    auto it = pos.find(r.frame);
    if (it == pos.end())
      throw FrameMismatch("evaluation: track record for frame " + std::to_string(r.frame) + " outside the truth frames");
    frames[it->second].hypotheses.push_back({r.target_id, r.position});
  }
  return evaluate(frames, cfg);
}

}  // namespace m3ot
