#pragma once

#include <vector>

namespace lungsvm {

/// Activations of the CNN feature layer; the SVM's input.
struct FeatureVector {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  bool operator==(const FeatureVector&) const = default;
};

}  // namespace lungsvm
