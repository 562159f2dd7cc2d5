#include "m3ot/hungarian.hpp"

#include <cmath>
#include <stdexcept>

namespace m3ot {

std::vector<int> min_cost_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw std::invalid_argument("min_cost_assignment: matrix must be square");
  constexpr double inf = std::numeric_limits<double>::infinity();
  // Potentials u (rows), v (columns); p[j] is the row matched to column j (1-based, 0 = none).
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

Assignment hungarian(const Eigen::MatrixXd& scores) {
  const int m = static_cast<int>(scores.rows());
  const int n = static_cast<int>(scores.cols());
  Assignment result;
  if (m == 0 || n == 0) return result;

  // Infeasible and negative pairs become worth 0, the same as leaving both
  // sides unmatched, so the square problem's optimum is the partial optimum.
  const int size = std::max(m, n);
  Eigen::MatrixXd utility = Eigen::MatrixXd::Zero(size, size);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      const double s = scores(i, j);
      if (std::isfinite(s) && s > 0.0) utility(i, j) = s;
    }
  const double top = utility.maxCoeff();
  const Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(size, size, top) - utility;

  const auto row_to_col = min_cost_assignment(cost);
  for (int i = 0; i < m; ++i) {
    const int j = row_to_col[i];
    if (j < 0 || j >= n) continue;
    const double s = scores(i, j);
    if (!std::isfinite(s) || s < 0.0) continue;
    result.pairs.emplace_back(i, j);
    result.total += s;
  }
  return result;
}

}  // namespace m3ot
