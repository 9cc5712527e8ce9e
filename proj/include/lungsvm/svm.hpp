#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lungsvm/data_model.hpp"
#include "lungsvm/features.hpp"

namespace lungsvm::svm {

enum class KernelKind { Linear = 0, Polynomial = 1, Rbf = 2 };

struct KernelSpec {
  KernelKind kind = KernelKind::Rbf;
  int degree = 3;        // polynomial only
  double coef0 = 0.0;    // polynomial only
  double gamma = 1.0;    // rbf only

  static KernelSpec linear() { return {KernelKind::Linear, 3, 0.0, 1.0}; }
  static KernelSpec polynomial(int degree, double coef0) {
    return {KernelKind::Polynomial, degree, coef0, 1.0};
  }
  static KernelSpec rbf(double gamma) { return {KernelKind::Rbf, 3, 0.0, gamma}; }

  bool operator==(const KernelSpec&) const = default;
};

/// How the per-class multipliers on C are chosen.
enum class ClassWeighting {
  Balanced,  // n / (2 n_class): inverse class frequency
  Uniform,   // both 1
  Manual,    // positive_weight / negative_weight as given
};

struct SvmConfig {
  double C = 1.0;
  KernelSpec kernel;
  /// Replace the RBF gamma by 1 / (D * var(standardized features)) at training time.
  bool auto_gamma = true;
  ClassWeighting weighting = ClassWeighting::Balanced;
  double positive_weight = 1.0;
  double negative_weight = 1.0;
  double tolerance = 1e-3;
  /// Cap on sweeps (full or free-subset) before stopping with a warning.
  int max_passes = 10000;
  std::uint64_t seed = 0;
  /// Fit a per-dimension z-score on the training features.
  bool standardize = true;
  /// Record the dual objective after every accepted pair update (O(n^2) each).
  bool trace_objective = false;
};

struct Standardization {
  std::vector<double> mean;
  std::vector<double> stddev;

  bool operator==(const Standardization&) const = default;
};

struct SvmModel {
  KernelSpec kernel;
  Standardization standardization;
  std::vector<FeatureVector> support_vectors;  // standardized
  std::vector<double> alphas;
  std::vector<int> sv_targets;                 // +1 / -1
  std::vector<std::size_t> sv_indices;         // positions in the training set
  double bias = 0.0;

  std::size_t dim() const { return standardization.mean.size(); }
  bool operator==(const SvmModel&) const = default;
};

enum class SmoStatus { Converged, ConvergenceWarning };

struct SmoDiagnostics {
  SmoStatus status = SmoStatus::Converged;
  int passes = 0;
  std::size_t updates = 0;
  double max_violation = 0.0;
  /// Largest |sum alpha_i y_i| seen after any pair update.
  double max_equality_drift = 0.0;
  /// Dual objective after each accepted update; filled when trace_objective is set.
  std::vector<double> objective_trace;
  /// Class-weighted box bound per training point.
  std::vector<double> box;
};

double kernel_eval(const KernelSpec& k, std::span<const double> x, std::span<const double> y);
inline double kernel_eval(const KernelSpec& k, const FeatureVector& x, const FeatureVector& y) {
  return kernel_eval(k, std::span<const double>(x.values), std::span<const double>(y.values));
}

/// Per-point upper bound C * class_weight(y_i) under the config's weighting.
std::vector<double> box_bounds(std::span<const int> targets, const SvmConfig& cfg);

/// Soft-margin dual by sequential minimal optimization.
/// Throws DataError with fewer than two points or a single class.
SvmModel train_smo(std::span<const FeatureVector> features, std::span<const int> targets,
                   const SvmConfig& cfg, SmoDiagnostics* diagnostics = nullptr);

/// Sum over support vectors of alpha_i y_i k(sv_i, standardized x) + b.
double decision_value(const SvmModel& model, const FeatureVector& x);

/// Positive iff the decision value is strictly positive.
BinaryTarget predict_svm(const SvmModel& model, const FeatureVector& x);

/// Largest excess over the exact KKT conditions on the training set:
/// alpha=0 needs y f >= 1, 0<alpha<C_i needs y f = 1, alpha=C_i needs y f <= 1.
double kkt_violation(const SvmModel& model, std::span<const FeatureVector> features,
                     std::span<const int> targets, const SvmConfig& cfg);

/// W(alpha) = sum alpha - 1/2 sum_ij alpha_i alpha_j y_i y_j k(x_i, x_j), on the given features.
double dual_objective(std::span<const double> alphas, std::span<const int> targets,
                      std::span<const FeatureVector> features, const KernelSpec& kernel);

/// Sigmoid map from decision values to the probability of the positive class.
struct Calibration {
  double A = -1.0;
  double B = 0.0;

  /// 1 / (1 + exp(A s + B)), kept strictly inside (0, 1).
  double risk(double score) const;
  bool operator==(const Calibration&) const = default;
};

/// Platt fit by damped Newton on the regularised targets. Throws DataError for one class.
Calibration platt_calibrate(std::span<const double> scores, std::span<const int> targets);

}  // namespace lungsvm::svm
