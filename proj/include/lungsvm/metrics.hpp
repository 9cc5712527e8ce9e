#pragma once

#include <cstdint>
#include <span>

#include "lungsvm/data_model.hpp"

namespace lungsvm::pipeline {

struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

/// Every ratio whose denominator is zero is reported as 0.
struct MetricReport {
  double precision = 0.0;    // TP / (TP + FP)
  double recall = 0.0;       // TP / (TP + FN)
  double f1 = 0.0;           // 2 P R / (P + R)
  double accuracy = 0.0;     // (TP + TN) / total
  double specificity = 0.0;  // TN / (TN + FP)
  ConfusionMatrix confusion;

  bool operator==(const MetricReport&) const = default;
};

/// Throws LengthError on mismatched lengths and EmptyError on empty input.
ConfusionMatrix confusion_matrix(std::span<const BinaryTarget> predictions,
                                 std::span<const BinaryTarget> truths);

/// Throws EmptyError when the matrix holds no items.
MetricReport metric_suite(const ConfusionMatrix& cm);

}  // namespace lungsvm::pipeline
