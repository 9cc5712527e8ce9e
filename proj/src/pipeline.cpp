#include "lungsvm/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "lungsvm/errors.hpp"
#include "lungsvm/preprocess.hpp"
#include "lungsvm/rng.hpp"

namespace lungsvm::pipeline {

namespace {

// Independent random streams derived from the pipeline seed.
constexpr std::uint64_t kStreamHoldout = 1;
constexpr std::uint64_t kStreamAugment = 2;
constexpr std::uint64_t kStreamCnnInit = 3;
constexpr std::uint64_t kStreamCnnTrain = 4;
constexpr std::uint64_t kStreamSvm = 5;

int to_sign(BinaryTarget t) { return t == BinaryTarget::Positive ? 1 : -1; }

std::vector<FeatureVector> features_of(const cnn::CnnModel& model,
                                       std::span<const cnn::TrainingSample> samples) {
  std::vector<FeatureVector> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(cnn::extract_features(model, s.input));
  return out;
}

std::vector<int> signs_of(std::span<const cnn::TrainingSample> samples) {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(to_sign(s.target));
  return out;
}

// Items of the dataset that take part in the task, sorted by id.
std::vector<std::pair<const LabeledImage*, BinaryTarget>> task_items(const Dataset& data,
                                                                     BinaryTask task) {
  std::vector<std::pair<const LabeledImage*, BinaryTarget>> out;
  for (const auto& item : data.items()) {
    if (auto t = to_binary_target(item.label, task)) out.emplace_back(&item, *t);
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.first->id < b.first->id; });
  return out;
}

}  // namespace

NormImage preprocess_image(const ImageData& image, const PipelineConfig& cfg) {
  NormImage img(1, 1);
  if (const auto* raw = std::get_if<RawSlice>(&image)) {
    const HuImage hu = prep::to_hu(*raw);
    img = prep::normalize_hu(hu, cfg.window_low, cfg.window_high);
    if (cfg.segmentation) img = prep::apply_mask(img, prep::fill_holes(prep::segment_lungs(hu)));
  } else {
    img = std::get<NormImage>(image);
  }
  switch (cfg.denoise) {
    case DenoiseKind::None:
      break;
    case DenoiseKind::Gaussian:
      img = prep::gaussian_filter(img, cfg.gaussian_sigma);
      break;
    case DenoiseKind::Nlm:
      img = prep::nlm_filter(img, cfg.nlm_h);
      break;
  }
  return prep::resize_bilinear(img, cfg.resolution, cfg.resolution);
}

cnn::Tensor to_tensor(const NormImage& img) {
  cnn::Tensor t = cnn::Tensor::chw(1, static_cast<std::size_t>(img.height()),
                                   static_cast<std::size_t>(img.width()));
  std::copy(img.values().begin(), img.values().end(), t.values.begin());
  return t;
}

PreparedTrainingSet prepare_training_set(const Dataset& data, const PipelineConfig& cfg) {
  validate(cfg);
  if (data.empty()) throw EmptyDatasetError("training set is empty");

  std::vector<LabeledImage> usable;
  std::array<std::size_t, 2> per_target{0, 0};
  for (const auto& item : data.items()) {
    auto t = to_binary_target(item.label, cfg.task);
    if (!t) continue;
    ++per_target[static_cast<int>(*t)];
    usable.push_back(LabeledImage{preprocess_image(item.image, cfg), item.label, item.id,
                                  std::nullopt, std::nullopt});
  }
  if (per_target[0] == 0 || per_target[1] == 0) {
    throw DataError("training data must contain both targets of task " +
                    std::string(to_string(cfg.task)));
  }

  // Hold-out: after a seeded shuffle (from id order) the last round(f * n) items
  // go to calibration only.
  std::sort(usable.begin(), usable.end(),
            [](const LabeledImage& a, const LabeledImage& b) { return a.id < b.id; });
  Rng rng(mix_seed(cfg.seed, kStreamHoldout));
  rng.shuffle(usable);
  const auto hold = std::min<std::size_t>(
      static_cast<std::size_t>(
          std::llround(cfg.calibration_fraction * static_cast<double>(usable.size()))),
      usable.size() - 1);
  const std::size_t keep = usable.size() - hold;
  std::vector<LabeledImage> fit_items;
  PreparedTrainingSet out;
  std::array<std::size_t, 2> fit_targets{0, 0};
  for (std::size_t i = 0; i < usable.size(); ++i) {
    LabeledImage& item = usable[i];
    const BinaryTarget target = *to_binary_target(item.label, cfg.task);
    if (i >= keep) {
      out.calibration.push_back({to_tensor(std::get<NormImage>(item.image)), target});
      out.calibration_ids.push_back(item.id);
    } else {
      ++fit_targets[static_cast<int>(target)];
      fit_items.push_back(std::move(item));
    }
  }
  if (fit_targets[0] == 0 || fit_targets[1] == 0) {
    throw DataError("the fitting split lost one target; lower calibration_fraction");
  }

  out.fit_originals = fit_items.size();
  const Dataset fit_set(std::move(fit_items), data.provenance(), data.seed());
  const Dataset augmented =
      cfg.augment.empty()
          ? fit_set
          : prep::augment_dataset(fit_set, {cfg.augment, mix_seed(cfg.seed, kStreamAugment),
                                            cfg.jitter});
  out.fit.reserve(augmented.size());
  for (const auto& item : augmented.items()) {
    out.fit.push_back({to_tensor(std::get<NormImage>(item.image)),
                       *to_binary_target(item.label, cfg.task)});
    out.fit_ids.push_back(item.id);
  }
  return out;
}

cnn::TrainResult train_feature_extractor(const PreparedTrainingSet& prepared,
                                         const PipelineConfig& cfg,
                                         const std::function<void(int, double)>& on_epoch) {
  const auto res = static_cast<std::size_t>(cfg.resolution);
  cnn::CnnModel model =
      cnn::make_default_cnn(res, res, cfg.feature_dim, mix_seed(cfg.seed, kStreamCnnInit));
  cnn::TrainConfig train_cfg = cfg.cnn;
  train_cfg.seed = mix_seed(cfg.seed, kStreamCnnTrain);
  return cnn::train_cnn(std::move(model), prepared.fit, train_cfg, on_epoch);
}

HeadFit fit_svm_head(const cnn::CnnModel& model, const PreparedTrainingSet& prepared,
                     const svm::SvmConfig& svm_cfg, std::uint64_t seed) {
  const std::vector<FeatureVector> feats = features_of(model, prepared.fit);
  const std::vector<int> signs = signs_of(prepared.fit);
  svm::SvmConfig cfg = svm_cfg;
  cfg.seed = seed;
  HeadFit head;
  head.svm = svm::train_smo(feats, signs, cfg, &head.diagnostics);

  // Calibrate on the hold-out when it has both classes; otherwise fall back to
  // the training decision values (optimistic, flagged in the summary).
  const std::vector<int> cal_signs = signs_of(prepared.calibration);
  const bool holdout_usable =
      std::count(cal_signs.begin(), cal_signs.end(), 1) > 0 &&
      std::count(cal_signs.begin(), cal_signs.end(), -1) > 0;
  std::vector<double> scores;
  if (holdout_usable) {
    for (const auto& f : features_of(model, prepared.calibration)) {
      scores.push_back(svm::decision_value(head.svm, f));
    }
    head.calibration = svm::platt_calibrate(scores, cal_signs);
  } else {
    for (const auto& f : feats) scores.push_back(svm::decision_value(head.svm, f));
    head.calibration = svm::platt_calibrate(scores, signs);
  }
  head.calibrated_on_holdout = holdout_usable;
  return head;
}

std::pair<TrainedPipeline, TrainingSummary> train_pipeline(
    const Dataset& data, const PipelineConfig& cfg,
    const std::function<void(int, double)>& on_epoch) {
  const PreparedTrainingSet prepared = prepare_training_set(data, cfg);
  cnn::TrainResult cnn_result = train_feature_extractor(prepared, cfg, on_epoch);
  HeadFit head = fit_svm_head(cnn_result.model, prepared, cfg.svm, mix_seed(cfg.seed, kStreamSvm));

  TrainedPipeline p{cfg, std::move(cnn_result.model), std::move(head.svm), head.calibration,
                    cfg.feature_dim};

  TrainingSummary summary;
  summary.loss_history = std::move(cnn_result.loss_history);
  summary.smo = std::move(head.diagnostics);
  summary.fit_images = prepared.fit_originals;
  summary.augmented_images = prepared.fit.size() - prepared.fit_originals;
  summary.calibration_images = prepared.calibration.size();
  summary.calibrated_on_holdout = head.calibrated_on_holdout;
  summary.cnn_checksum = cnn::weights_checksum(p.cnn);

  std::vector<BinaryTarget> preds;
  std::vector<BinaryTarget> truths;
  for (std::size_t i = 0; i < prepared.fit_originals; ++i) {
    const auto f = cnn::extract_features(p.cnn, prepared.fit[i].input);
    preds.push_back(svm::predict_svm(p.svm, f));
    truths.push_back(prepared.fit[i].target);
  }
  summary.training_report = metric_suite(confusion_matrix(preds, truths));
  return {std::move(p), std::move(summary)};
}

Prediction predict_pipeline(const TrainedPipeline& p, const ImageData& image) {
  const auto input = to_tensor(preprocess_image(image, p.config));
  const auto features = cnn::extract_features(p.cnn, input);
  Prediction out;
  out.decision_score = svm::decision_value(p.svm, features);
  out.label = out.decision_score > 0.0 ? BinaryTarget::Positive : BinaryTarget::Negative;
  out.risk = p.calibration.risk(out.decision_score);
  return out;
}

MetricReport evaluate(const TrainedPipeline& p, const Dataset& test) {
  const auto items = task_items(test, p.config.task);
  if (items.empty()) throw EmptyError("no test item takes part in the task");
  std::vector<BinaryTarget> preds;
  std::vector<BinaryTarget> truths;
  for (const auto& [item, target] : items) {
    preds.push_back(predict_pipeline(p, item->image).label);
    truths.push_back(target);
  }
  return metric_suite(confusion_matrix(preds, truths));
}

std::array<ComparisonRow, 2> softmax_baseline_eval(const TrainedPipeline& p, const Dataset& test) {
  const auto items = task_items(test, p.config.task);
  if (items.empty()) throw EmptyError("no test item takes part in the task");
  const std::uint64_t checksum = cnn::weights_checksum(p.cnn);
  std::vector<BinaryTarget> soft;
  std::vector<BinaryTarget> hybrid;
  std::vector<BinaryTarget> truths;
  for (const auto& [item, target] : items) {
    const auto input = to_tensor(preprocess_image(item->image, p.config));
    soft.push_back(cnn::predict_softmax(p.cnn, input));
    hybrid.push_back(svm::predict_svm(p.svm, cnn::extract_features(p.cnn, input)));
    truths.push_back(target);
  }
  return {ComparisonRow{"softmax", metric_suite(confusion_matrix(soft, truths)), checksum},
          ComparisonRow{"hybrid", metric_suite(confusion_matrix(hybrid, truths)), checksum}};
}

}  // namespace lungsvm::pipeline
