#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "lungsvm/cnn.hpp"
#include "lungsvm/data_model.hpp"
#include "lungsvm/preprocess.hpp"
#include "lungsvm/svm.hpp"

namespace lungsvm::pipeline {

enum class DenoiseKind { None, Gaussian, Nlm };

/// Everything that determines a trained pipeline besides the data.
struct PipelineConfig {
  BinaryTask task = BinaryTask::MalignantVsRest;
  std::uint64_t seed = 0;

  double window_low = prep::kDefaultWindowLow;
  double window_high = prep::kDefaultWindowHigh;
  int resolution = 32;
  bool segmentation = false;
  DenoiseKind denoise = DenoiseKind::Gaussian;
  double gaussian_sigma = 0.5;
  double nlm_h = 0.1;

  std::vector<prep::TransformSpec> augment = {prep::FlipH{}, prep::Rotate{0.0}};
  prep::JitterRanges jitter;

  cnn::TrainConfig cnn;
  std::size_t feature_dim = 64;

  svm::SvmConfig svm;
  double calibration_fraction = 0.2;
};

/// Throws ConfigError on any out-of-range value.
void validate(const PipelineConfig& cfg);

/// One `key=value` line per setting in a fixed order; numbers use the
/// shortest text that reads back to the same double.
std::string to_canonical_text(const PipelineConfig& cfg);

/// Applies `key=value` lines (blank lines and `#` comments allowed) on top of
/// the defaults. Unknown keys and malformed values raise ConfigError.
PipelineConfig parse_config(std::string_view text);

std::string format_double(double v);

}  // namespace lungsvm::pipeline
