#include <doctest.h>

#include "lungsvm/pipeline.hpp"

using namespace lungsvm;
using namespace lungsvm::pipeline;

namespace {

/// Equal numbers of positive (malignant) and negative (normal + benign) images.
Dataset balanced(int positives, std::uint64_t seed) {
  PhantomSpec spec;
  spec.seed = seed;
  spec.count_per_class = {positives / 2, positives / 2, positives};
  return generate_phantoms(spec);
}

}  // namespace

TEST_CASE("default pipeline on easy phantoms") {
  const PipelineConfig cfg;
  const auto [p, summary] = train_pipeline(balanced(200, 31), cfg);
  CHECK(summary.training_report.accuracy >= 0.90);
  CHECK(summary.calibrated_on_holdout);
  CHECK(summary.smo.status == svm::SmoStatus::Converged);

  const Dataset test = balanced(60, 32);
  const auto rows = softmax_baseline_eval(p, test);
  CHECK(rows[0].report.accuracy >= 0.85);
  CHECK(rows[1].report.accuracy >= 0.85);
  CHECK(rows[0].cnn_checksum == rows[1].cnn_checksum);

  for (const auto& item : test.items()) {
    const Prediction first = predict_pipeline(p, item.image);
    const Prediction second = predict_pipeline(p, item.image);
    CHECK(first.decision_score == second.decision_score);
    CHECK(first.risk == second.risk);
    CHECK(first.risk > 0.0);
    CHECK(first.risk < 1.0);
    CHECK((first.label == BinaryTarget::Positive) == (first.decision_score > 0.0));
    if (item.label == ClassLabel::Malignant) {
      CAPTURE(item.id);
      CHECK(first.label == BinaryTarget::Positive);
    }
  }
}
