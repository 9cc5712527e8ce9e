#include "lungsvm/svm.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "lungsvm/errors.hpp"
#include "lungsvm/rng.hpp"

namespace lungsvm::svm {

double kernel_eval(const KernelSpec& k, std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw DimError("kernel inputs differ in length (" + std::to_string(x.size()) + " vs " +
                   std::to_string(y.size()) + ")");
  }
  switch (k.kind) {
    case KernelKind::Linear:
    case KernelKind::Polynomial: {
      double dot = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
      if (k.kind == KernelKind::Linear) return dot;
      return std::pow(dot + k.coef0, k.degree);
    }
    case KernelKind::Rbf: {
      double d2 = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        d2 += d * d;
      }
      return std::exp(-k.gamma * d2);
    }
  }
  return 0.0;
}

std::vector<double> box_bounds(std::span<const int> targets, const SvmConfig& cfg) {
  double w_pos = 1.0;
  double w_neg = 1.0;
  if (cfg.weighting == ClassWeighting::Balanced) {
    const auto n_pos = static_cast<double>(std::count(targets.begin(), targets.end(), 1));
    const auto n_neg = static_cast<double>(targets.size()) - n_pos;
    const double n = static_cast<double>(targets.size());
    if (n_pos > 0) w_pos = n / (2.0 * n_pos);
    if (n_neg > 0) w_neg = n / (2.0 * n_neg);
  } else if (cfg.weighting == ClassWeighting::Manual) {
    w_pos = cfg.positive_weight;
    w_neg = cfg.negative_weight;
  }
  std::vector<double> box(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) box[i] = cfg.C * (targets[i] > 0 ? w_pos : w_neg);
  return box;
}

namespace {

void validate_training_input(std::span<const FeatureVector> features, std::span<const int> targets,
                             const SvmConfig& cfg) {
  if (features.size() != targets.size()) throw DimError("feature and target counts differ");
  if (features.size() < 2) throw DataError("SVM training needs at least two points");
  const std::size_t dim = features[0].size();
  if (dim == 0) throw DimError("feature vectors are empty");
  bool has_pos = false;
  bool has_neg = false;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].size() != dim) throw DimError("feature vectors differ in length");
    if (targets[i] == 1) {
      has_pos = true;
    } else if (targets[i] == -1) {
      has_neg = true;
    } else {
      throw DataError("targets must be +1 or -1");
    }
  }
  if (!has_pos || !has_neg) throw DataError("SVM training needs both classes");
  if (!(cfg.C > 0.0) || !(cfg.tolerance > 0.0) || cfg.max_passes < 1) {
    throw SpecError("SVM needs C > 0, tolerance > 0 and max_passes >= 1");
  }
  if (cfg.weighting == ClassWeighting::Manual &&
      !(cfg.positive_weight > 0.0 && cfg.negative_weight > 0.0)) {
    throw SpecError("class weights must be positive");
  }
  if (cfg.kernel.kind == KernelKind::Polynomial && cfg.kernel.degree < 1) {
    throw SpecError("polynomial degree must be >= 1");
  }
  if (cfg.kernel.kind == KernelKind::Rbf && !cfg.auto_gamma && !(cfg.kernel.gamma > 0.0)) {
    throw SpecError("rbf gamma must be positive");
  }
}

Standardization fit_standardization(std::span<const FeatureVector> features, bool enabled) {
  const std::size_t dim = features[0].size();
  Standardization st{std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
  if (!enabled) return st;
  const double n = static_cast<double>(features.size());
  for (const auto& f : features) {
    for (std::size_t d = 0; d < dim; ++d) st.mean[d] += f.values[d];
  }
  for (double& m : st.mean) m /= n;
  std::vector<double> var(dim, 0.0);
  for (const auto& f : features) {
    for (std::size_t d = 0; d < dim; ++d) {
      const double c = f.values[d] - st.mean[d];
      var[d] += c * c;
    }
  }
  for (std::size_t d = 0; d < dim; ++d) {
    const double sd = std::sqrt(var[d] / n);
    st.stddev[d] = sd > 1e-12 ? sd : 1.0;
  }
  return st;
}

FeatureVector apply_standardization(const Standardization& st, const FeatureVector& x) {
  if (x.size() != st.mean.size()) {
    throw DimError("expected " + std::to_string(st.mean.size()) + " features, got " +
                   std::to_string(x.size()));
  }
  FeatureVector out{std::vector<double>(x.size())};
  for (std::size_t d = 0; d < x.size(); ++d) out.values[d] = (x.values[d] - st.mean[d]) / st.stddev[d];
  return out;
}

/// Gram matrix, dense when it fits, evaluated on demand otherwise.
class KernelMatrix {
 public:
  static constexpr std::size_t kDenseLimit = 3000;

  KernelMatrix(const std::vector<FeatureVector>& x, const KernelSpec& k) : x_(x), kernel_(k) {
    const std::size_t n = x.size();
    if (n <= kDenseLimit) {
      dense_.resize(n * n);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
          const double v = kernel_eval(kernel_, x_[i], x_[j]);
          dense_[i * n + j] = v;
          dense_[j * n + i] = v;
        }
      }
    }
  }

  double operator()(std::size_t i, std::size_t j) const {
    if (!dense_.empty()) return dense_[i * x_.size() + j];
    return kernel_eval(kernel_, x_[i], x_[j]);
  }

 private:
  const std::vector<FeatureVector>& x_;
  KernelSpec kernel_;
  std::vector<double> dense_;
};

class SmoSolver {
 public:
  SmoSolver(const std::vector<FeatureVector>& x, std::span<const int> y, std::vector<double> box,
            const KernelSpec& kernel, const SvmConfig& cfg)
      : x_(x),
        y_(y),
        box_(std::move(box)),
        k_(x, kernel),
        cfg_(cfg),
        rng_(cfg.seed),
        alpha_(x.size(), 0.0),
        error_(x.size()) {
    for (std::size_t i = 0; i < y_.size(); ++i) error_[i] = -static_cast<double>(y_[i]);
  }

  SmoDiagnostics run() {
    SmoDiagnostics diag;
    bool examine_all = true;
    bool stalled_once = false;
    diag.status = SmoStatus::ConvergenceWarning;
    while (diag.passes < cfg_.max_passes) {
      const std::size_t changed = sweep(examine_all);
      ++diag.passes;
      if (examine_all && changed == 0) {
        refit_bias();
        if (max_violation() <= cfg_.tolerance) {
          diag.status = SmoStatus::Converged;
          break;
        }
        if (stalled_once) break;
        stalled_once = true;
        continue;  // one more full sweep against the refitted bias
      }
      if (examine_all) {
        stalled_once = false;
        examine_all = false;
      } else if (changed == 0) {
        examine_all = true;
      }
    }
    if (diag.status != SmoStatus::Converged) refit_bias();
    diag.updates = updates_;
    diag.max_violation = max_violation();
    diag.max_equality_drift = max_drift_;
    diag.objective_trace = std::move(trace_);
    diag.box = box_;
    return diag;
  }

  const std::vector<double>& alphas() const { return alpha_; }
  double bias() const { return bias_; }

 private:
  bool at_lower(std::size_t i) const { return alpha_[i] <= 0.0; }
  bool at_upper(std::size_t i) const { return alpha_[i] >= box_[i]; }
  bool free(std::size_t i) const { return !at_lower(i) && !at_upper(i); }

  double violation(std::size_t i) const {
    const double r = error_[i] * y_[i];  // y f - 1
    double v = 0.0;
    if (!at_upper(i)) v = std::max(v, -r);
    if (!at_lower(i)) v = std::max(v, r);
    return v;
  }

  double max_violation() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < alpha_.size(); ++i) worst = std::max(worst, violation(i));
    return worst;
  }

  /// Visits candidates from the worst KKT violator down.
  std::size_t sweep(bool examine_all) {
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t i = 0; i < alpha_.size(); ++i) {
      if (!examine_all && !free(i)) continue;
      const double v = violation(i);
      if (v > cfg_.tolerance) order.emplace_back(v, i);
    }
    std::stable_sort(order.begin(), order.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::size_t changed = 0;
    for (const auto& [v, i] : order) changed += examine(i) ? 1 : 0;
    return changed;
  }

  bool examine(std::size_t i2) {
    if (violation(i2) <= cfg_.tolerance) return false;
    const std::size_t n = alpha_.size();
    const double e2 = error_[i2];

    std::size_t best = n;
    double best_gap = -1.0;
    std::size_t free_count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!free(i)) continue;
      ++free_count;
      if (i == i2) continue;
      const double gap = std::abs(error_[i] - e2);
      if (gap > best_gap) {
        best_gap = gap;
        best = i;
      }
    }
    if (free_count > 1 && best < n && take_step(best, i2)) return true;

    const std::size_t start_free = rng_.below(n);
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i1 = (start_free + k) % n;
      if (free(i1) && take_step(i1, i2)) return true;
    }
    const std::size_t start_all = rng_.below(n);
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i1 = (start_all + k) % n;
      if (!free(i1) && take_step(i1, i2)) return true;
    }
    return false;
  }

  bool take_step(std::size_t i1, std::size_t i2) {
    if (i1 == i2) return false;
    const double a1_old = alpha_[i1];
    const double a2_old = alpha_[i2];
    const int y1 = y_[i1];
    const int y2 = y_[i2];
    const double c1 = box_[i1];
    const double c2 = box_[i2];
    const double e1 = error_[i1];
    const double e2 = error_[i2];
    const double s = static_cast<double>(y1 * y2);

    double lo;
    double hi;
    if (y1 != y2) {
      lo = std::max(0.0, a2_old - a1_old);
      hi = std::min(c2, c1 + a2_old - a1_old);
    } else {
      lo = std::max(0.0, a2_old + a1_old - c1);
      hi = std::min(c2, a1_old + a2_old);
    }
    if (!(lo < hi)) return false;

    const double k11 = k_(i1, i1);
    const double k12 = k_(i1, i2);
    const double k22 = k_(i2, i2);
    const double eta = k11 + k22 - 2.0 * k12;

    // Gain in the dual objective when alpha2 moves by d: y2 d (E1 - E2) - eta d^2 / 2.
    auto gain = [&](double d) { return y2 * d * (e1 - e2) - 0.5 * eta * d * d; };

    double a2;
    if (eta > 0.0) {
      a2 = std::clamp(a2_old + y2 * (e1 - e2) / eta, lo, hi);
    } else {
      const double g_lo = gain(lo - a2_old);
      const double g_hi = gain(hi - a2_old);
      constexpr double kEps = 1e-12;
      if (g_lo > g_hi + kEps && g_lo > kEps) {
        a2 = lo;
      } else if (g_hi > g_lo + kEps && g_hi > kEps) {
        a2 = hi;
      } else {
        return false;
      }
    }
    if (std::abs(a2 - a2_old) < 1e-12 * (a2 + a2_old + 1e-12)) return false;
    if (!(gain(a2 - a2_old) > 0.0)) return false;

    double a1 = a1_old + s * (a2_old - a2);
    if (a1 < 0.0) {
      a2 += s * a1;
      a1 = 0.0;
    } else if (a1 > c1) {
      a2 += s * (a1 - c1);
      a1 = c1;
    }
    a2 = std::clamp(a2, 0.0, c2);

    const double d1 = a1 - a1_old;
    const double d2 = a2 - a2_old;
    const double b1 = bias_ - e1 - y1 * d1 * k11 - y2 * d2 * k12;
    const double b2 = bias_ - e2 - y1 * d1 * k12 - y2 * d2 * k22;
    double b_new;
    if (a1 > 0.0 && a1 < c1) {
      b_new = b1;
    } else if (a2 > 0.0 && a2 < c2) {
      b_new = b2;
    } else {
      b_new = 0.5 * (b1 + b2);
    }
    const double db = b_new - bias_;
    for (std::size_t i = 0; i < alpha_.size(); ++i) {
      error_[i] += y1 * d1 * k_(i1, i) + y2 * d2 * k_(i2, i) + db;
    }
    alpha_[i1] = a1;
    alpha_[i2] = a2;
    bias_ = b_new;
    ++updates_;

    double drift = 0.0;
    for (std::size_t i = 0; i < alpha_.size(); ++i) drift += alpha_[i] * y_[i];
    max_drift_ = std::max(max_drift_, std::abs(drift));
    if (cfg_.trace_objective) trace_.push_back(objective());
    return true;
  }

  double objective() const {
    double linear = 0.0;
    double quad = 0.0;
    for (std::size_t i = 0; i < alpha_.size(); ++i) {
      if (alpha_[i] == 0.0) continue;
      linear += alpha_[i];
      for (std::size_t j = 0; j < alpha_.size(); ++j) {
        if (alpha_[j] == 0.0) continue;
        quad += alpha_[i] * alpha_[j] * y_[i] * y_[j] * k_(i, j);
      }
    }
    return linear - 0.5 * quad;
  }

  /// Bias minimising the largest KKT excess: midpoint of the tightest bounds.
  void refit_bias() {
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < alpha_.size(); ++i) {
      const double g = error_[i] + y_[i] - bias_;  // f without the bias
      const double target = y_[i] - g;             // bias putting point i on its margin
      const bool wants_above = y_[i] > 0 ? !at_upper(i) : !at_lower(i);
      const bool wants_below = y_[i] > 0 ? !at_lower(i) : !at_upper(i);
      if (wants_above) lower = std::max(lower, target);
      if (wants_below) upper = std::min(upper, target);
    }
    double b = bias_;
    if (std::isfinite(lower) && std::isfinite(upper)) {
      b = 0.5 * (lower + upper);
    } else if (std::isfinite(lower)) {
      b = lower;
    } else if (std::isfinite(upper)) {
      b = upper;
    }
    const double db = b - bias_;
    for (double& e : error_) e += db;
    bias_ = b;
  }

  const std::vector<FeatureVector>& x_;
  std::span<const int> y_;
  std::vector<double> box_;
  KernelMatrix k_;
  const SvmConfig& cfg_;
  Rng rng_;
  std::vector<double> alpha_;
  std::vector<double> error_;  // f(x_i) - y_i
  double bias_ = 0.0;
  std::size_t updates_ = 0;
  double max_drift_ = 0.0;
  std::vector<double> trace_;
};

}  // namespace

SvmModel train_smo(std::span<const FeatureVector> features, std::span<const int> targets,
                   const SvmConfig& cfg, SmoDiagnostics* diagnostics) {
  validate_training_input(features, targets, cfg);
  SvmModel model;
  model.standardization = fit_standardization(features, cfg.standardize);

  std::vector<FeatureVector> x;
  x.reserve(features.size());
  for (const auto& f : features) x.push_back(apply_standardization(model.standardization, f));

  model.kernel = cfg.kernel;
  if (cfg.kernel.kind == KernelKind::Rbf && cfg.auto_gamma) {
    double sum = 0.0;
    double count = 0.0;
    for (const auto& f : x) {
      for (double v : f.values) {
        sum += v;
        count += 1.0;
      }
    }
    const double mean = sum / count;
    double var = 0.0;
    for (const auto& f : x) {
      for (double v : f.values) var += (v - mean) * (v - mean);
    }
    var /= count;
    const double dim = static_cast<double>(x[0].size());
    model.kernel.gamma = var > 0.0 ? 1.0 / (dim * var) : 1.0 / dim;
  }

  SmoSolver solver(x, targets, box_bounds(targets, cfg), model.kernel, cfg);
  SmoDiagnostics diag = solver.run();

  const auto& alphas = solver.alphas();
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    if (alphas[i] <= 0.0) continue;
    model.support_vectors.push_back(x[i]);
    model.alphas.push_back(alphas[i]);
    model.sv_targets.push_back(targets[i]);
    model.sv_indices.push_back(i);
  }
  model.bias = solver.bias();
  if (diagnostics) *diagnostics = std::move(diag);
  return model;
}

double decision_value(const SvmModel& model, const FeatureVector& x) {
  const FeatureVector z = apply_standardization(model.standardization, x);
  double f = model.bias;
  for (std::size_t i = 0; i < model.support_vectors.size(); ++i) {
    f += model.alphas[i] * model.sv_targets[i] * kernel_eval(model.kernel, model.support_vectors[i], z);
  }
  return f;
}

BinaryTarget predict_svm(const SvmModel& model, const FeatureVector& x) {
  return decision_value(model, x) > 0.0 ? BinaryTarget::Positive : BinaryTarget::Negative;
}

double kkt_violation(const SvmModel& model, std::span<const FeatureVector> features,
                     std::span<const int> targets, const SvmConfig& cfg) {
  if (features.size() != targets.size()) throw DimError("feature and target counts differ");
  std::vector<double> alpha(features.size(), 0.0);
  for (std::size_t k = 0; k < model.sv_indices.size(); ++k) {
    if (model.sv_indices[k] >= alpha.size()) {
      throw DimError("model support vector index beyond the given training set");
    }
    alpha[model.sv_indices[k]] = model.alphas[k];
  }
  const auto box = box_bounds(targets, cfg);
  double worst = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double margin = targets[i] * decision_value(model, features[i]);
    double v;
    if (alpha[i] <= 0.0) {
      v = std::max(0.0, 1.0 - margin);
    } else if (alpha[i] >= box[i]) {
      v = std::max(0.0, margin - 1.0);
    } else {
      v = std::abs(margin - 1.0);
    }
    worst = std::max(worst, v);
  }
  return worst;
}

double dual_objective(std::span<const double> alphas, std::span<const int> targets,
                      std::span<const FeatureVector> features, const KernelSpec& kernel) {
  if (alphas.size() != targets.size() || alphas.size() != features.size()) {
    throw DimError("alphas, targets and features must have equal lengths");
  }
  double linear = 0.0;
  double quad = 0.0;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    linear += alphas[i];
    for (std::size_t j = 0; j < alphas.size(); ++j) {
      quad += alphas[i] * alphas[j] * targets[i] * targets[j] *
              kernel_eval(kernel, features[i], features[j]);
    }
  }
  return linear - 0.5 * quad;
}

// ---------------------------------------------------------------------------
// Calibration

double Calibration::risk(double score) const {
  const double z = A * score + B;
  const double p = z >= 0.0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
  return std::clamp(p, DBL_MIN, 1.0 - DBL_EPSILON / 2.0);
}

Calibration platt_calibrate(std::span<const double> scores, std::span<const int> targets) {
  if (scores.size() != targets.size()) throw DimError("score and target counts differ");
  const auto n_pos = static_cast<double>(std::count(targets.begin(), targets.end(), 1));
  const double n_neg = static_cast<double>(targets.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DataError("calibration needs both classes");

  const double hi_target = (n_pos + 1.0) / (n_pos + 2.0);
  const double lo_target = 1.0 / (n_neg + 2.0);
  std::vector<double> t(scores.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = targets[i] > 0 ? hi_target : lo_target;

  auto objective = [&](double a, double b) {
    double f = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const double z = scores[i] * a + b;
      f += z >= 0.0 ? t[i] * z + std::log1p(std::exp(-z)) : (t[i] - 1.0) * z + std::log1p(std::exp(z));
    }
    return f;
  };

  constexpr int kMaxIter = 100;
  constexpr double kMinStep = 1e-10;
  constexpr double kSigma = 1e-12;
  constexpr double kGradStop = 1e-8;
  double a = 0.0;
  double b = std::log((n_neg + 1.0) / (n_pos + 1.0));
  double fval = objective(a, b);

  for (int iter = 0; iter < kMaxIter; ++iter) {
    double h11 = kSigma;
    double h22 = kSigma;
    double h21 = 0.0;
    double g1 = 0.0;
    double g2 = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      const double z = scores[i] * a + b;
      double p;
      double q;
      if (z >= 0.0) {
        p = std::exp(-z) / (1.0 + std::exp(-z));
        q = 1.0 / (1.0 + std::exp(-z));
      } else {
        p = 1.0 / (1.0 + std::exp(z));
        q = std::exp(z) / (1.0 + std::exp(z));
      }
      const double d2 = p * q;
      h11 += scores[i] * scores[i] * d2;
      h22 += d2;
      h21 += scores[i] * d2;
      const double d1 = t[i] - p;
      g1 += scores[i] * d1;
      g2 += d1;
    }
    if (std::hypot(g1, g2) < kGradStop) break;

    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double dbias = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * dbias;

    double step = 1.0;
    while (step >= kMinStep) {
      const double na = a + step * da;
      const double nb = b + step * dbias;
      const double nf = objective(na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        a = na;
        b = nb;
        fval = nf;
        break;
      }
      step /= 2.0;
    }
    if (step < kMinStep) break;
  }
  return Calibration{a, b};
}

}  // namespace lungsvm::svm
