#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "m3ot/hungarian.hpp"
#include "oracles.hpp"

using namespace m3ot;

TEST_CASE("forced diagonal") {
  Eigen::MatrixXd s(2, 2);
  s << 3, kForbidden, kForbidden, 4;
  const auto a = hungarian(s);
  REQUIRE(a.pairs.size() == 2);
  CHECK(a.pairs[0] == std::pair{0, 0});
  CHECK(a.pairs[1] == std::pair{1, 1});
  CHECK(a.total == 7.0);
}

TEST_CASE("all negative gives empty assignment") {
  Eigen::MatrixXd s = -Eigen::MatrixXd::Ones(3, 4);
  CHECK(hungarian(s).pairs.empty());
  CHECK(hungarian(Eigen::MatrixXd(0, 3)).pairs.empty());
}

TEST_CASE("3x3 integer matrix matches best permutation") {
  Eigen::MatrixXd s(3, 3);
  s << 4, 1, 3, 2, 0, 5, 3, 2, 2;
  std::vector<int> perm{0, 1, 2};
  double best = -1;
  do {
    best = std::max(best, s(0, perm[0]) + s(1, perm[1]) + s(2, perm[2]));
  } while (std::next_permutation(perm.begin(), perm.end()));
  CHECK(hungarian(s).total == best);
}

TEST_CASE("random rectangular matrices match exhaustive search") {
  std::mt19937_64 gen(2024);
  std::uniform_int_distribution<int> dim(1, 6), val(-5, 20), forbid(0, 7);
  for (int k = 0; k < 500; ++k) {
    Eigen::MatrixXd s(dim(gen), dim(gen));
    for (int i = 0; i < s.rows(); ++i)
      for (int j = 0; j < s.cols(); ++j) s(i, j) = forbid(gen) == 0 ? kForbidden : val(gen);
    const auto a = hungarian(s);
    CHECK(a.total == oracle::brute_force_assignment(s));
    std::vector<int> cols;
    for (auto [i, j] : a.pairs) {
      CHECK(s(i, j) >= 0.0);
      cols.push_back(j);
    }
    std::sort(cols.begin(), cols.end());
    CHECK(std::adjacent_find(cols.begin(), cols.end()) == cols.end());
  }
}

TEST_CASE("min cost assignment requires a square matrix") {
  CHECK_THROWS_AS(min_cost_assignment(Eigen::MatrixXd::Zero(2, 3)), std::invalid_argument);
}
