#include "m3ot/geometry.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "m3ot/random.hpp"

namespace m3ot {
namespace {

Line2 total_least_squares(std::span<const Eigen::Vector2d> points, std::span<const std::size_t> idx) {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (auto i : idx) mean += points[i];
  mean /= static_cast<double>(idx.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (auto i : idx) {
    const Eigen::Vector2d d = points[i] - mean;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  Line2 line;
  line.point = mean;
  line.direction = eig.eigenvectors().col(1).normalized();
  return line;
}

double cross(const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return a.x() * b.y() - a.y() * b.x(); }

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

std::vector<std::size_t> inliers_of(const Line2& line, std::span<const Eigen::Vector2d> points, double threshold) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (line.distance(points[i]) <= threshold) out.push_back(i);
  return out;
}

/// Orients `line.direction` from `origin` toward the bulk of `idx` and returns
/// the farthest projection along it.
double oriented_extent(Line2& line, const Eigen::Vector2d& origin, std::span<const Eigen::Vector2d> points,
                       std::span<const std::size_t> idx) {
  double mean = 0.0;
  for (auto i : idx) mean += (points[i] - origin).dot(line.direction);
  if (mean < 0.0) line.direction = -line.direction;
  double extent = 0.0;
  for (auto i : idx) extent = std::max(extent, (points[i] - origin).dot(line.direction));
  return extent;
}

}  // namespace

std::optional<LineFit> fit_line_ransac(std::span<const Eigen::Vector2d> points, double inlier_ratio,
                                       std::size_t min_support, const RansacParams& params, std::uint64_t seed,
                                       std::optional<Eigen::Vector2d> across) {
  const std::size_t n = points.size();
  if (n < 2) return std::nullopt;
  const auto required = std::max<std::size_t>(
      {min_support, std::size_t{2}, static_cast<std::size_t>(std::ceil(inlier_ratio * static_cast<double>(n) - 1e-12))});
  const double th2 = params.inlier_threshold * params.inlier_threshold;

  Rng rng(seed);
  std::optional<Line2> best;
  double best_cost = std::numeric_limits<double>::infinity();
  std::size_t best_count = 0;
  int budget = params.max_iterations;
  for (int it = 0; it < budget; ++it) {
    const std::size_t i = rng.index(n);
    std::size_t j = rng.index(n - 1);
    if (j >= i) ++j;
    const Eigen::Vector2d d = points[j] - points[i];
    if (d.norm() < 1e-9) continue;
    const Line2 candidate{points[i], d.normalized()};
    if (across && std::abs(cross(*across, candidate.direction)) < params.min_corner_sine) continue;
    // MSAC score: truncated squared residuals.
    double cost = 0.0;
    std::size_t count = 0;
    for (const auto& p : points) {
      const double r = candidate.distance(p);
      if (r * r <= th2) {
        cost += r * r;
        ++count;
      } else {
        cost += th2;
      }
    }
    if (cost < best_cost) {
      best_cost = cost;
      best_count = count;
      best = candidate;
      const double w = static_cast<double>(count) / static_cast<double>(n);
      if (params.confidence < 1.0 && w > 0.0) {
        const double miss = 1.0 - w * w;
        const double needed = miss <= 0.0 ? 1.0 : std::ceil(std::log(1.0 - params.confidence) / std::log(miss));
        budget = std::min(params.max_iterations, static_cast<int>(std::min(needed, 1e9)));
      }
    }
  }
  if (!best || best_count < required) return std::nullopt;

  // Refit on the consensus set after discarding residual outliers (k * MAD),
  // so that stray points of an adjacent side cannot tilt the line.
  auto inliers = inliers_of(*best, points, params.inlier_threshold);
  std::vector<double> residuals;
  residuals.reserve(inliers.size());
  for (auto i : inliers) residuals.push_back(best->distance(points[i]));
  const double scale = 1.4826 * median(residuals);
  const double keep = std::max(3.0 * scale, 1e-9);
  std::vector<std::size_t> core;
  for (std::size_t k = 0; k < inliers.size(); ++k)
    if (residuals[k] <= keep) core.push_back(inliers[k]);
  LineFit fit;
  fit.line = core.size() >= 2 ? total_least_squares(points, core) : *best;
  if (across && std::abs(cross(*across, fit.line.direction)) < params.min_corner_sine) fit.line = *best;
  fit.inliers = inliers_of(fit.line, points, params.inlier_threshold);
  if (fit.inliers.size() < required) fit.inliers = std::move(inliers);
  return fit;
}

VehicleEstimate localize_with_pointcloud(std::span<const GlobalPoint> points, const RansacParams& params) {
  VehicleEstimate est;
  if (points.size() < params.min_points) return est;

  std::vector<Eigen::Vector2d> flat;
  flat.reserve(points.size());
  for (const auto& p : points) flat.emplace_back(p.x(), p.y());

  auto first = fit_line_ransac(flat, params.primary_inlier_ratio, params.min_side_points, params, params.seed);
  if (!first) return est;

  std::vector<char> used(flat.size(), 0);
  for (auto i : first->inliers) used[i] = 1;
  std::vector<Eigen::Vector2d> rest;
  for (std::size_t i = 0; i < flat.size(); ++i)
    if (!used[i]) rest.push_back(flat[i]);

  std::optional<LineFit> second;
  if (rest.size() >= params.min_side_points)
    second = fit_line_ransac(rest, params.secondary_inlier_ratio, params.min_side_points, params, mix64(params.seed, 1),
                             first->line.direction);

  const double half_perimeter = params.default_length + params.default_width;
  auto fill_unobserved = [&](double extent, double other) {
    if (extent >= params.min_extent) return extent;
    return other > 0.5 * half_perimeter ? params.default_width : params.default_length;
  };

  const Eigen::Vector2d d1 = first->line.direction;
  const double sin_angle = second ? std::abs(cross(d1, second->line.direction)) : 0.0;

  if (!second || sin_angle < 1e-6) {
    // One visible side: centre it along the side, then push it away from the
    // ego origin by half the unseen dimension.
    Line2 line = first->line;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (auto i : first->inliers) {
      const double s = (flat[i] - line.point).dot(line.direction);
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    const double span = hi - lo;
    const Eigen::Vector2d mid = line.point + 0.5 * (lo + hi) * line.direction;
    Eigen::Vector2d normal(-line.direction.y(), line.direction.x());
    if (normal.dot(mid) < 0.0) normal = -normal;
    const bool long_side = span > 0.5 * half_perimeter;
    const double depth = long_side ? params.default_width : params.default_length;
    const Eigen::Vector2d c = mid + 0.5 * depth * normal;
    est.status = LocalizationStatus::ParallelLines;
    est.center = {c.x(), c.y(), kGroundAltitude};
    est.length = long_side ? std::max(span, params.default_width) : params.default_length;
    est.width = long_side ? params.default_width : std::max(span, params.min_extent);
    if (est.width > est.length) std::swap(est.width, est.length);
    est.primary = line;
    return est;
  }

  Line2 l1 = first->line;
  Line2 l2 = second->line;
  // Intersection: p1 + s d1 = p2 + r d2.
  Eigen::Matrix2d a;
  a << l1.direction, -l2.direction;
  const Eigen::Vector2d sr = a.colPivHouseholderQr().solve(l2.point - l1.point);
  const Eigen::Vector2d corner = l1.point + sr(0) * l1.direction;

  double e1 = oriented_extent(l1, corner, flat, first->inliers);
  std::vector<std::size_t> second_idx;
  second_idx.reserve(second->inliers.size());
  // second->inliers index into `rest`; map back through the unused list.
  std::vector<std::size_t> rest_to_flat;
  for (std::size_t i = 0; i < flat.size(); ++i)
    if (!used[i]) rest_to_flat.push_back(i);
  for (auto k : second->inliers) second_idx.push_back(rest_to_flat[k]);
  double e2 = oriented_extent(l2, corner, flat, second_idx);
  const double e1_obs = e1, e2_obs = e2;
  e1 = fill_unobserved(e1_obs, e2_obs);
  e2 = fill_unobserved(e2_obs, e1_obs);

  const Eigen::Vector2d c = corner + 0.5 * e1 * l1.direction + 0.5 * e2 * l2.direction;
  est.status = LocalizationStatus::Ok;
  est.corner = {corner.x(), corner.y(), kGroundAltitude};
  est.center = {c.x(), c.y(), kGroundAltitude};
  est.length = std::max(e1, e2);
  est.width = std::min(e1, e2);
  est.primary = l1;
  est.secondary = l2;
  return est;
}

}  // namespace m3ot
