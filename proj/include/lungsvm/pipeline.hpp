#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "lungsvm/cnn.hpp"
#include "lungsvm/config.hpp"
#include "lungsvm/data_model.hpp"
#include "lungsvm/metrics.hpp"
#include "lungsvm/svm.hpp"

namespace lungsvm::pipeline {

/// The deployable unit: frozen config, feature extractor, SVM head, calibration.
struct TrainedPipeline {
  PipelineConfig config;
  cnn::CnnModel cnn;
  svm::SvmModel svm;
  svm::Calibration calibration;
  std::size_t feature_dim = 0;
};

struct Prediction {
  BinaryTarget label = BinaryTarget::Negative;
  double decision_score = 0.0;
  double risk = 0.5;
};

/// Preprocessed training material shared by both training phases.
struct PreparedTrainingSet {
  std::vector<cnn::TrainingSample> fit;          // originals followed by augmented copies
  std::vector<std::string> fit_ids;
  std::size_t fit_originals = 0;
  std::vector<cnn::TrainingSample> calibration;  // held-out slice, never augmented
  std::vector<std::string> calibration_ids;
};

struct HeadFit {
  svm::SvmModel svm;
  svm::Calibration calibration;
  svm::SmoDiagnostics diagnostics;
  bool calibrated_on_holdout = true;
};

struct TrainingSummary {
  std::vector<double> loss_history;
  svm::SmoDiagnostics smo;
  std::size_t fit_images = 0;
  std::size_t augmented_images = 0;
  std::size_t calibration_images = 0;
  bool calibrated_on_holdout = true;
  /// Finished pipeline on the original (non-augmented) training images.
  MetricReport training_report;
  std::uint64_t cnn_checksum = 0;
};

/// Window, optional lung mask, optional denoise, resize to the working resolution.
/// Normalized inputs skip the windowing and masking steps.
NormImage preprocess_image(const ImageData& image, const PipelineConfig& cfg);

cnn::Tensor to_tensor(const NormImage& img);

/// Maps labels through the task, preprocesses, holds out the calibration slice
/// and augments the rest. Throws DataError unless both targets remain.
PreparedTrainingSet prepare_training_set(const Dataset& data, const PipelineConfig& cfg);

/// Phase 1: trains the default CNN with its softmax head.
cnn::TrainResult train_feature_extractor(const PreparedTrainingSet& prepared,
                                         const PipelineConfig& cfg,
                                         const std::function<void(int, double)>& on_epoch = {});

/// Phase 2: SVM on frozen CNN features, then sigmoid calibration.
HeadFit fit_svm_head(const cnn::CnnModel& model, const PreparedTrainingSet& prepared,
                     const svm::SvmConfig& svm_cfg, std::uint64_t seed);

std::pair<TrainedPipeline, TrainingSummary> train_pipeline(
    const Dataset& data, const PipelineConfig& cfg,
    const std::function<void(int, double)>& on_epoch = {});

Prediction predict_pipeline(const TrainedPipeline& p, const ImageData& image);

/// Metrics over every item that takes part in the pipeline's task, in id order.
/// Throws EmptyError when none does.
MetricReport evaluate(const TrainedPipeline& p, const Dataset& test);

struct ComparisonRow {
  std::string name;  // "softmax" or "hybrid"
  MetricReport report;
  std::uint64_t cnn_checksum = 0;
};

/// Row 0: the CNN's own softmax head. Row 1: CNN features into the SVM.
std::array<ComparisonRow, 2> softmax_baseline_eval(const TrainedPipeline& p, const Dataset& test);

std::vector<std::uint8_t> serialize_pipeline(const TrainedPipeline& p);
TrainedPipeline deserialize_pipeline(std::span<const std::uint8_t> bytes);
void save_pipeline(const TrainedPipeline& p, const std::filesystem::path& path);
TrainedPipeline load_pipeline(const std::filesystem::path& path);

}  // namespace lungsvm::pipeline
