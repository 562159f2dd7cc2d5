#pragma once

#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace m3ot {

inline constexpr double kForbidden = -std::numeric_limits<double>::infinity();

struct Assignment {
  std::vector<std::pair<int, int>> pairs;  // (row, column), sorted by row
  double total = 0.0;
};

/// Optimal one-to-one partial matching maximizing the summed score. Entries
/// equal to kForbidden (or any non-finite value) can never be matched, and
/// pairs with a negative score are never part of the result.
Assignment hungarian(const Eigen::MatrixXd& scores);

/// Minimum-cost perfect matching of a square matrix (shortest augmenting
/// paths). Returns the column assigned to each row.
std::vector<int> min_cost_assignment(const Eigen::MatrixXd& cost);

}  // namespace m3ot
