#include "m3ot/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace m3ot {
namespace {

constexpr double kTau = 1e-12;

struct LexLess {
  bool operator()(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
  }
};

SvmResult solve(const std::vector<Eigen::VectorXd>& x, const std::vector<double>& y, Eigen::Index dim,
                const SvmParams& p) {
  const std::size_t n = x.size();
  const double C = p.C;
  std::vector<double> alpha(n, 0.0), grad(n, -1.0), diag(n);
  for (std::size_t t = 0; t < n; ++t) diag[t] = x[t].squaredNorm();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(dim);

  auto upper = [&](std::size_t t) { return alpha[t] >= C; };
  auto lower = [&](std::size_t t) { return alpha[t] <= 0.0; };

  SvmResult r;
  long it = 0;
  for (; it < p.max_iterations; ++it) {
    // i: maximal violator in I_up.
    double gmax = -std::numeric_limits<double>::infinity();
    std::size_t i = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] > 0 ? !upper(t) : !lower(t)) {
        const double v = -y[t] * grad[t];
        if (v >= gmax) {
          gmax = v;
          i = t;
        }
      }
    }
    // j: second-order choice in I_low; gmin tracks the violation bound.
    double gmin = std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    std::size_t j = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (!(y[t] > 0 ? !lower(t) : !upper(t))) continue;
      const double v = -y[t] * grad[t];
      gmin = std::min(gmin, v);
      if (i == n) continue;
      const double b = gmax - v;
      if (b <= 0.0) continue;
      double a = diag[i] + diag[t] - 2.0 * x[i].dot(x[t]);
      if (a <= 0.0) a = kTau;
      const double obj = -(b * b) / a;
      if (obj <= best) {
        best = obj;
        j = t;
      }
    }
    r.kkt_violation = std::max(0.0, gmax - gmin);
    if (i == n || j == n || gmax - gmin < p.tolerance) break;

    const double kij = x[i].dot(x[j]);
    const double qij = y[i] * y[j] * kij;
    const double ai = alpha[i], aj = alpha[j];
    if (y[i] != y[j]) {
      double quad = diag[i] + diag[j] + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = C - diff;
        }
      } else if (alpha[j] > C) {
        alpha[j] = C;
        alpha[i] = C + diff;
      }
    } else {
      double quad = diag[i] + diag[j] - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = sum - C;
        }
        if (alpha[j] > C) {
          alpha[j] = C;
          alpha[i] = sum - C;
        }
      } else {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = sum;
        }
        if (alpha[i] < 0.0) {
          alpha[i] = 0.0;
          alpha[j] = sum;
        }
      }
    }
    w += (alpha[i] - ai) * y[i] * x[i] + (alpha[j] - aj) * y[j] * x[j];
    for (std::size_t t = 0; t < n; ++t) grad[t] = y[t] * w.dot(x[t]) - 1.0;
  }
  r.iterations = it;
  r.converged = it < p.max_iterations;

  // Bias from the free support vectors, else the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (upper(t)) {
      if (y[t] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (y[t] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : 0.5 * (ub + lb);
  r.classifier = {w, -rho};
  return r;
}

}  // namespace

SvmResult svm_train(std::span<const Eigen::VectorXd> features, std::span<const int> labels, const SvmParams& params) {
  if (features.size() != labels.size()) throw std::invalid_argument("svm_train: features and labels differ in length");
  if (features.empty()) throw std::invalid_argument("svm_train: empty training set");
  if (!(params.C > 0.0)) throw std::invalid_argument("svm_train: C must be positive");
  const Eigen::Index dim = features.front().size();
  for (std::size_t k = 0; k < features.size(); ++k) {
    if (features[k].size() != dim) throw std::invalid_argument("svm_train: inconsistent feature dimension");
    if (labels[k] != 1 && labels[k] != -1) throw std::invalid_argument("svm_train: labels must be +1 or -1");
    if (!features[k].allFinite()) throw std::invalid_argument("svm_train: non-finite feature");
  }

  std::map<Eigen::VectorXd, int, LexLess> seen;  // label sum sign bits: 1 = +, 2 = -
  for (std::size_t k = 0; k < features.size(); ++k) seen[features[k]] |= labels[k] > 0 ? 1 : 2;
  const bool degenerate = std::any_of(seen.begin(), seen.end(), [](const auto& e) { return e.second == 3; });

  std::vector<Eigen::VectorXd> x;
  std::vector<double> y;
  if (degenerate) {
    for (const auto& [f, bits] : seen)
      if (bits != 3) {
        x.push_back(f);
        y.push_back(bits == 1 ? 1.0 : -1.0);
      }
  } else {
    x.assign(features.begin(), features.end());
    for (int l : labels) y.push_back(static_cast<double>(l));
  }

  SvmResult r;
  const bool has_pos = std::find(y.begin(), y.end(), 1.0) != y.end();
  const bool has_neg = std::find(y.begin(), y.end(), -1.0) != y.end();
  if (!has_pos || !has_neg) {
    r.classifier = LinearClassifier::constant(dim, has_pos ? 1.0 : -1.0);
  } else {
    r = solve(x, y, dim, params);
  }
  r.degenerate = degenerate;
  return r;
}

double svm_primal_objective(const LinearClassifier& cls, std::span<const Eigen::VectorXd> features,
                            std::span<const int> labels, double C) {
  double loss = 0.0;
  for (std::size_t k = 0; k < features.size(); ++k)
    loss += std::max(0.0, 1.0 - labels[k] * cls.decision(features[k]));
  return 0.5 * cls.weights.squaredNorm() + C * loss;
}

}  // namespace m3ot
