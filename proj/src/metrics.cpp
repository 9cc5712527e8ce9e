#include "lungsvm/metrics.hpp"

#include "lungsvm/errors.hpp"

namespace lungsvm::pipeline {

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ConfusionMatrix confusion_matrix(std::span<const BinaryTarget> predictions,
                                 std::span<const BinaryTarget> truths) {
  if (predictions.size() != truths.size()) throw LengthError("prediction and truth counts differ");
  if (predictions.empty()) throw EmptyError("no predictions to tally");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool predicted = predictions[i] == BinaryTarget::Positive;
    const bool actual = truths[i] == BinaryTarget::Positive;
    if (predicted && actual) {
      ++cm.tp;
    } else if (predicted) {
      ++cm.fp;
    } else if (actual) {
      ++cm.fn;
    } else {
      ++cm.tn;
    }
  }
  return cm;
}

MetricReport metric_suite(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw EmptyError("confusion matrix is empty");
  MetricReport r;
  r.confusion = cm;
  r.precision = ratio(cm.tp, cm.tp + cm.fp);
  r.recall = ratio(cm.tp, cm.tp + cm.fn);
  // Harmonic mean of P and R written over the counts: exact up to one rounding,
  // so F1 lands between P and R and equals both when they coincide.
  r.f1 = ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn);
  r.accuracy = ratio(cm.tp + cm.tn, cm.total());
  r.specificity = ratio(cm.tn, cm.tn + cm.fp);
  return r;
}

}  // namespace lungsvm::pipeline
