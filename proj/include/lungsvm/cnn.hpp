#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <variant>
#include <vector>

#include "lungsvm/data_model.hpp"
#include "lungsvm/features.hpp"

namespace lungsvm::cnn {

/// Dense row-major tensor, either (channels, height, width) or (length).
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  static Tensor chw(std::size_t channels, std::size_t height, std::size_t width, double fill = 0.0);
  static Tensor vector(std::size_t length, double fill = 0.0);

  std::size_t channels() const { return shape.size() == 3 ? shape[0] : 1; }
  std::size_t height() const { return shape.size() == 3 ? shape[1] : 1; }
  std::size_t width() const { return shape.size() == 3 ? shape[2] : shape[0]; }

  bool operator==(const Tensor&) const = default;
};

struct ConvLayer {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::vector<double> weights;  // (out, in, k, k)
  std::vector<double> bias;     // (out)

  double& w(std::size_t o, std::size_t c, std::size_t i, std::size_t j) {
    return weights[((o * in_channels + c) * kernel + i) * kernel + j];
  }
  double w(std::size_t o, std::size_t c, std::size_t i, std::size_t j) const {
    return weights[((o * in_channels + c) * kernel + i) * kernel + j];
  }

  bool operator==(const ConvLayer&) const = default;
};

struct DenseLayer {
  std::size_t out_dim = 0;
  std::size_t in_dim = 0;
  std::vector<double> weights;  // (out, in)
  std::vector<double> bias;     // (out)

  bool operator==(const DenseLayer&) const = default;
};

struct ReluLayer {
  bool operator==(const ReluLayer&) const = default;
};
/// 2x2 window, stride 2. Odd extents are replicate-padded on the right/bottom.
struct MaxPoolLayer {
  bool operator==(const MaxPoolLayer&) const = default;
};
struct FlattenLayer {
  bool operator==(const FlattenLayer&) const = default;
};

using Layer = std::variant<ConvLayer, ReluLayer, MaxPoolLayer, FlattenLayer, DenseLayer>;

/// Layers run in order. The last layer is the two-logit head; the feature
/// vector is read after the ReLU that follows layers[feature_layer_index].
struct CnnModel {
  std::array<std::size_t, 3> input_shape{1, 32, 32};
  std::vector<Layer> layers;
  std::size_t feature_layer_index = 0;

  std::size_t feature_dim() const;
  bool operator==(const CnnModel&) const = default;
};

/// Throws ShapeError unless shapes chain from the input to two logits and the
/// feature layer is a dense layer followed by a ReLU.
void validate(const CnnModel& model);

/// Conv(8x3x3, pad 1) > ReLU > Pool > Conv(16x5x5, pad 2) > ReLU > Pool >
/// Flatten > Dense(feature_dim) > ReLU > Dense(2). He-initialised, zero bias.
CnnModel make_default_cnn(std::size_t height, std::size_t width, std::size_t feature_dim,
                          std::uint64_t seed);

Tensor conv2d_forward(const Tensor& input, const ConvLayer& layer);

struct PoolResult {
  Tensor output;
  std::vector<std::size_t> argmax;  // flat input index per output element
};
PoolResult maxpool_forward(const Tensor& input);

Tensor dense_forward(const Tensor& input, const DenseLayer& layer);
Tensor relu(const Tensor& input);
Tensor flatten(const Tensor& input);

struct LossGrad {
  double loss = 0.0;
  std::array<double, 2> probabilities{};
  std::array<double, 2> grad_logits{};
};
/// Index 0 is Negative, index 1 Positive.
LossGrad softmax_cross_entropy(std::span<const double> logits, BinaryTarget target);

/// Output of every layer for one input; activations[i] is the output of layers[i].
std::vector<Tensor> forward_activations(const CnnModel& model, const Tensor& input);
Tensor forward_logits(const CnnModel& model, const Tensor& input);

/// Positive iff the positive logit is strictly larger.
BinaryTarget predict_softmax(const CnnModel& model, const Tensor& input);

struct LayerGradient {
  std::vector<double> weights;
  std::vector<double> bias;
};
/// One entry per layer; parameter-free layers hold empty vectors.
struct Gradients {
  std::vector<LayerGradient> layers;
};

struct BackwardResult {
  double loss = 0.0;
  Gradients grads;
};
BackwardResult backward_pass(const CnnModel& model, const Tensor& input, BinaryTarget target);

struct TrainConfig {
  double learning_rate = 0.01;
  int epochs = 15;
  int batch_size = 16;
  std::uint64_t seed = 0;
  double weight_decay = 1e-4;
};

struct TrainingSample {
  Tensor input;
  BinaryTarget target = BinaryTarget::Negative;
};

struct TrainResult {
  CnnModel model;
  std::vector<double> loss_history;  // mean sample loss per epoch
};

/// Mini-batch SGD with L2 weight decay on weights (not biases).
/// Throws DataError for single-class data and DivergenceError on a non-finite loss.
TrainResult train_cnn(CnnModel model, std::span<const TrainingSample> data,
                      const TrainConfig& cfg,
                      const std::function<void(int, double)>& on_epoch = {});

/// Applies one plain gradient step (no weight decay) to every parameter.
void sgd_step(CnnModel& model, const Gradients& grads, double learning_rate,
              double weight_decay = 0.0);

FeatureVector extract_features(const CnnModel& model, const Tensor& input);

/// Largest |analytic - numeric| / max(|analytic|, |numeric|, 1e-8) over all parameters,
/// using central differences with step epsilon.
double grad_check(const CnnModel& model, const Tensor& sample, BinaryTarget target,
                  double epsilon = 1e-5);

/// FNV-1a over the bit patterns of every parameter.
std::uint64_t weights_checksum(const CnnModel& model);

}  // namespace lungsvm::cnn
