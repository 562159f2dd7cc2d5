#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

namespace m3ot {

struct LinearClassifier {
  Eigen::VectorXd weights;
  double bias = 0.0;

  double decision(const Eigen::VectorXd& x) const { return weights.dot(x) + bias; }

  static LinearClassifier constant(Eigen::Index dim, double bias) { return {Eigen::VectorXd::Zero(dim), bias}; }

  friend bool operator==(const LinearClassifier& a, const LinearClassifier& b) {
    return a.bias == b.bias && a.weights.size() == b.weights.size() && a.weights == b.weights;
  }
};

struct SvmParams {
  double C = 1.0;
  /// Stop once the maximal KKT violation of the dual drops below this.
  double tolerance = 1e-9;
  long max_iterations = 10'000'000;
};

struct SvmResult {
  LinearClassifier classifier;
  /// Identical features carried conflicting labels; those were dropped and the
  /// remainder deduplicated before training.
  bool degenerate = false;
  bool converged = true;
  long iterations = 0;
  double kkt_violation = 0.0;
};

/// Soft-margin linear SVM: minimizes 0.5 |w|^2 + C sum(hinge) via SMO on the
/// dual with second-order working-set selection. Labels are +1 / -1. A single
/// class yields w = 0 and b = that label.
SvmResult svm_train(std::span<const Eigen::VectorXd> features, std::span<const int> labels, const SvmParams& params = {});

double svm_primal_objective(const LinearClassifier& cls, std::span<const Eigen::VectorXd> features,
                            std::span<const int> labels, double C);

}  // namespace m3ot
