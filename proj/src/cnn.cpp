#include "lungsvm/cnn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

#include "lungsvm/errors.hpp"
#include "lungsvm/rng.hpp"

namespace lungsvm::cnn {

Tensor Tensor::chw(std::size_t channels, std::size_t height, std::size_t width, double fill) {
  return Tensor{{channels, height, width}, std::vector<double>(channels * height * width, fill)};
}

Tensor Tensor::vector(std::size_t length, double fill) {
  return Tensor{{length}, std::vector<double>(length, fill)};
}

std::size_t CnnModel::feature_dim() const {
  if (feature_layer_index >= layers.size()) return 0;
  const auto* dense = std::get_if<DenseLayer>(&layers[feature_layer_index]);
  return dense ? dense->out_dim : 0;
}

namespace {

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

std::size_t conv_out_extent(std::size_t in, const ConvLayer& layer) {
  return (in + 2 * layer.padding - layer.kernel) / layer.stride + 1;
}

/// Output positions o in [lo, hi) whose tap o*stride + offset lands inside [0, extent).
std::pair<std::size_t, std::size_t> valid_outputs(long offset, std::size_t stride,
                                                  std::size_t extent, std::size_t out_extent) {
  const long s = static_cast<long>(stride);
  long lo = offset >= 0 ? 0 : (-offset + s - 1) / s;
  long hi_incl = (static_cast<long>(extent) - 1 - offset);
  if (hi_incl < 0) return {0, 0};
  hi_incl /= s;
  long hi = std::min(hi_incl + 1, static_cast<long>(out_extent));
  if (lo >= hi) return {0, 0};
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

void check_conv(const Tensor& input, const ConvLayer& layer) {
  if (input.shape.size() != 3 || input.shape[0] != layer.in_channels) {
    throw ShapeError("conv expects " + std::to_string(layer.in_channels) +
                     " input channels, got shape " + shape_string(input.shape));
  }
  if (layer.stride < 1) throw ShapeError("conv stride must be >= 1");
  if (layer.weights.size() != layer.out_channels * layer.in_channels * layer.kernel * layer.kernel ||
      layer.bias.size() != layer.out_channels) {
    throw ShapeError("conv parameter count does not match its declared shape");
  }
  if (input.shape[1] + 2 * layer.padding < layer.kernel ||
      input.shape[2] + 2 * layer.padding < layer.kernel) {
    throw ShapeError("padded input " + shape_string(input.shape) + " smaller than kernel");
  }
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const ConvLayer& layer) {
  check_conv(input, layer);
  const std::size_t h = input.shape[1];
  const std::size_t w = input.shape[2];
  const std::size_t oh = conv_out_extent(h, layer);
  const std::size_t ow = conv_out_extent(w, layer);
  const std::size_t k = layer.kernel;
  const std::size_t s = layer.stride;
  const long p = static_cast<long>(layer.padding);
  Tensor out = Tensor::chw(layer.out_channels, oh, ow);

  for (std::size_t o = 0; o < layer.out_channels; ++o) {
    double* plane = &out.values[o * oh * ow];
    std::fill(plane, plane + oh * ow, layer.bias[o]);
    for (std::size_t c = 0; c < layer.in_channels; ++c) {
      const double* src = &input.values[c * h * w];
      for (std::size_t i = 0; i < k; ++i) {
        const long row_offset = static_cast<long>(i) - p;
        auto [y0, y1] = valid_outputs(row_offset, s, h, oh);
        for (std::size_t j = 0; j < k; ++j) {
          const double wt = layer.w(o, c, i, j);
          const long col_offset = static_cast<long>(j) - p;
          auto [x0, x1] = valid_outputs(col_offset, s, w, ow);
          for (std::size_t y = y0; y < y1; ++y) {
            const double* row = src + static_cast<std::size_t>(static_cast<long>(y * s) + row_offset) * w;
            double* dst = plane + y * ow;
            for (std::size_t x = x0; x < x1; ++x) {
              dst[x] += wt * row[static_cast<long>(x * s) + col_offset];
            }
          }
        }
      }
    }
  }
  return out;
}

PoolResult maxpool_forward(const Tensor& input) {
  if (input.shape.size() != 3) throw ShapeError("max pooling needs a (c,h,w) tensor");
  const std::size_t c = input.shape[0];
  const std::size_t h = input.shape[1];
  const std::size_t w = input.shape[2];
  const std::size_t oh = (h + 1) / 2;
  const std::size_t ow = (w + 1) / 2;
  PoolResult result{Tensor::chw(c, oh, ow), std::vector<std::size_t>(c * oh * ow)};
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        std::size_t best = 0;
        double best_value = -std::numeric_limits<double>::infinity();
        bool first = true;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t iy = std::min(2 * y + dy, h - 1);
            const std::size_t ix = std::min(2 * x + dx, w - 1);
            const std::size_t idx = (ch * h + iy) * w + ix;
            if (first || input.values[idx] > best_value) {
              best = idx;
              best_value = input.values[idx];
              first = false;
            }
          }
        }
        const std::size_t o = (ch * oh + y) * ow + x;
        result.output.values[o] = best_value;
        result.argmax[o] = best;
      }
    }
  }
  return result;
}

Tensor dense_forward(const Tensor& input, const DenseLayer& layer) {
  if (input.shape.size() != 1 || input.shape[0] != layer.in_dim) {
    throw ShapeError("dense layer expects length " + std::to_string(layer.in_dim) + ", got " +
                     shape_string(input.shape));
  }
  if (layer.weights.size() != layer.out_dim * layer.in_dim || layer.bias.size() != layer.out_dim) {
    throw ShapeError("dense parameter count does not match its declared shape");
  }
  Tensor out = Tensor::vector(layer.out_dim);
  for (std::size_t o = 0; o < layer.out_dim; ++o) {
    const double* row = &layer.weights[o * layer.in_dim];
    double acc = layer.bias[o];
    for (std::size_t i = 0; i < layer.in_dim; ++i) acc += row[i] * input.values[i];
    out.values[o] = acc;
  }
  return out;
}

Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (double& v : out.values) v = std::max(0.0, v);
  return out;
}

Tensor flatten(const Tensor& input) {
  return Tensor{{input.values.size()}, input.values};
}

LossGrad softmax_cross_entropy(std::span<const double> logits, BinaryTarget target) {
  if (logits.size() != 2) throw ShapeError("softmax head expects two logits");
  const std::size_t top = logits[1] > logits[0] ? 1 : 0;
  const double m = logits[top];
  const double other = std::exp(logits[1 - top] - m);
  const double denom = 1.0 + other;
  LossGrad out;
  out.probabilities[top] = 1.0 / denom;
  out.probabilities[1 - top] = other / denom;
  const std::size_t t = static_cast<std::size_t>(target);
  out.loss = std::log1p(other) - (logits[t] - m);
  for (std::size_t i = 0; i < 2; ++i) {
    out.grad_logits[i] = out.probabilities[i] - (i == t ? 1.0 : 0.0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model construction and shape checks

void validate(const CnnModel& model) {
  if (model.layers.empty()) throw ShapeError("model has no layers");
  std::vector<std::size_t> shape(model.input_shape.begin(), model.input_shape.end());
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const Layer& layer = model.layers[l];
    if (const auto* conv = std::get_if<ConvLayer>(&layer)) {
      if (conv->kernel != 3 && conv->kernel != 5) throw ShapeError("conv kernels must be 3 or 5");
      if (shape.size() != 3 || shape[0] != conv->in_channels || conv->stride < 1 ||
          shape[1] + 2 * conv->padding < conv->kernel || shape[2] + 2 * conv->padding < conv->kernel ||
          conv->weights.size() != conv->out_channels * conv->in_channels * conv->kernel * conv->kernel ||
          conv->bias.size() != conv->out_channels) {
        throw ShapeError("conv layer " + std::to_string(l) + " does not fit input " +
                         shape_string(shape));
      }
      shape = {conv->out_channels, conv_out_extent(shape[1], *conv),
               conv_out_extent(shape[2], *conv)};
    } else if (std::holds_alternative<MaxPoolLayer>(layer)) {
      if (shape.size() != 3) throw ShapeError("pool layer " + std::to_string(l) + " needs (c,h,w)");
      shape = {shape[0], (shape[1] + 1) / 2, (shape[2] + 1) / 2};
    } else if (std::holds_alternative<FlattenLayer>(layer)) {
      std::size_t n = 1;
      for (auto d : shape) n *= d;
      shape = {n};
    } else if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
      if (shape.size() != 1 || shape[0] != dense->in_dim || dense->out_dim < 1 ||
          dense->weights.size() != dense->out_dim * dense->in_dim ||
          dense->bias.size() != dense->out_dim) {
        throw ShapeError("dense layer " + std::to_string(l) + " does not fit input " +
                         shape_string(shape));
      }
      shape = {dense->out_dim};
    }
  }
  if (shape != std::vector<std::size_t>{2} ||
      !std::holds_alternative<DenseLayer>(model.layers.back())) {
    throw ShapeError("model must end in a dense layer with two logits");
  }
  const std::size_t f = model.feature_layer_index;
  if (f + 2 >= model.layers.size() || !std::holds_alternative<DenseLayer>(model.layers[f]) ||
      !std::holds_alternative<ReluLayer>(model.layers[f + 1])) {
    throw ShapeError("feature layer must be a dense layer followed by a ReLU, before the head");
  }
}

CnnModel make_default_cnn(std::size_t height, std::size_t width, std::size_t feature_dim,
                          std::uint64_t seed) {
  if (height < 1 || width < 1 || feature_dim < 1) throw ShapeError("empty default architecture");
  Rng rng(seed);
  auto he = [&](std::vector<double>& weights, std::size_t fan_in) {
    const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (double& v : weights) v = scale * rng.normal();
  };
  auto conv = [&](std::size_t out, std::size_t in, std::size_t k, std::size_t pad) {
    ConvLayer layer{out, in, k, 1, pad, std::vector<double>(out * in * k * k), std::vector<double>(out, 0.0)};
    he(layer.weights, in * k * k);
    return layer;
  };
  auto dense = [&](std::size_t out, std::size_t in) {
    DenseLayer layer{out, in, std::vector<double>(out * in), std::vector<double>(out, 0.0)};
    he(layer.weights, in);
    return layer;
  };

  const std::size_t h2 = ((height + 1) / 2 + 1) / 2;
  const std::size_t w2 = ((width + 1) / 2 + 1) / 2;
  CnnModel model;
  model.input_shape = {1, height, width};
  model.layers.emplace_back(conv(8, 1, 3, 1));
  model.layers.emplace_back(ReluLayer{});
  model.layers.emplace_back(MaxPoolLayer{});
  model.layers.emplace_back(conv(16, 8, 5, 2));
  model.layers.emplace_back(ReluLayer{});
  model.layers.emplace_back(MaxPoolLayer{});
  model.layers.emplace_back(FlattenLayer{});
  model.layers.emplace_back(dense(feature_dim, 16 * h2 * w2));
  model.layers.emplace_back(ReluLayer{});
  model.layers.emplace_back(dense(2, feature_dim));
  model.feature_layer_index = 7;
  validate(model);
  return model;
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

struct Trace {
  std::vector<Tensor> outputs;
  std::vector<std::vector<std::size_t>> argmax;  // per layer, pooling only
};

/// Runs layers [start, stop) on `x`, recording outputs when `trace` is given.
Tensor run_layers(const CnnModel& model, std::size_t start, std::size_t stop, Tensor x,
                  Trace* trace) {
  for (std::size_t l = start; l < stop; ++l) {
    const Layer& layer = model.layers[l];
    if (const auto* conv = std::get_if<ConvLayer>(&layer)) {
      x = conv2d_forward(x, *conv);
    } else if (std::holds_alternative<ReluLayer>(layer)) {
      for (double& v : x.values) v = std::max(0.0, v);
    } else if (std::holds_alternative<MaxPoolLayer>(layer)) {
      PoolResult pooled = maxpool_forward(x);
      x = std::move(pooled.output);
      if (trace) trace->argmax[l] = std::move(pooled.argmax);
    } else if (std::holds_alternative<FlattenLayer>(layer)) {
      x.shape = {x.values.size()};
    } else {
      x = dense_forward(x, std::get<DenseLayer>(layer));
    }
    if (trace) trace->outputs[l] = x;
  }
  return x;
}

void check_input(const CnnModel& model, const Tensor& input) {
  const std::vector<std::size_t> expected(model.input_shape.begin(), model.input_shape.end());
  if (input.shape != expected || input.values.size() != expected[0] * expected[1] * expected[2]) {
    throw ShapeError("input shape " + shape_string(input.shape) + " does not match model input " +
                     shape_string(expected));
  }
}

Gradients zero_gradients(const CnnModel& model) {
  Gradients g;
  g.layers.resize(model.layers.size());
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    if (const auto* conv = std::get_if<ConvLayer>(&model.layers[l])) {
      g.layers[l].weights.assign(conv->weights.size(), 0.0);
      g.layers[l].bias.assign(conv->bias.size(), 0.0);
    } else if (const auto* dense = std::get_if<DenseLayer>(&model.layers[l])) {
      g.layers[l].weights.assign(dense->weights.size(), 0.0);
      g.layers[l].bias.assign(dense->bias.size(), 0.0);
    }
  }
  return g;
}

void add_into(Gradients& acc, const Gradients& g) {
  for (std::size_t l = 0; l < acc.layers.size(); ++l) {
    for (std::size_t i = 0; i < acc.layers[l].weights.size(); ++i) acc.layers[l].weights[i] += g.layers[l].weights[i];
    for (std::size_t i = 0; i < acc.layers[l].bias.size(); ++i) acc.layers[l].bias[i] += g.layers[l].bias[i];
  }
}

/// Gradient of a conv layer; fills dW/db and, when `grad_input` is given, dL/dinput.
void conv_backward(const ConvLayer& layer, const Tensor& input, const Tensor& grad_out,
                   LayerGradient& grad, Tensor* grad_input) {
  const std::size_t h = input.shape[1];
  const std::size_t w = input.shape[2];
  const std::size_t oh = grad_out.shape[1];
  const std::size_t ow = grad_out.shape[2];
  const std::size_t k = layer.kernel;
  const std::size_t s = layer.stride;
  const long p = static_cast<long>(layer.padding);
  if (grad_input) *grad_input = Tensor::chw(layer.in_channels, h, w);

  for (std::size_t o = 0; o < layer.out_channels; ++o) {
    const double* g = &grad_out.values[o * oh * ow];
    double db = 0.0;
    for (std::size_t i = 0; i < oh * ow; ++i) db += g[i];
    grad.bias[o] += db;
    for (std::size_t c = 0; c < layer.in_channels; ++c) {
      const double* src = &input.values[c * h * w];
      double* gsrc = grad_input ? &grad_input->values[c * h * w] : nullptr;
      for (std::size_t i = 0; i < k; ++i) {
        const long row_offset = static_cast<long>(i) - p;
        auto [y0, y1] = valid_outputs(row_offset, s, h, oh);
        for (std::size_t j = 0; j < k; ++j) {
          const long col_offset = static_cast<long>(j) - p;
          auto [x0, x1] = valid_outputs(col_offset, s, w, ow);
          const double wt = layer.w(o, c, i, j);
          double dw = 0.0;
          for (std::size_t y = y0; y < y1; ++y) {
            const std::size_t row = static_cast<std::size_t>(static_cast<long>(y * s) + row_offset) * w;
            const double* grow = g + y * ow;
            for (std::size_t x = x0; x < x1; ++x) {
              const std::size_t idx = row + static_cast<std::size_t>(static_cast<long>(x * s) + col_offset);
              dw += grow[x] * src[idx];
              if (gsrc) gsrc[idx] += wt * grow[x];
            }
          }
          grad.weights[((o * layer.in_channels + c) * k + i) * k + j] += dw;
        }
      }
    }
  }
}

}  // namespace

std::vector<Tensor> forward_activations(const CnnModel& model, const Tensor& input) {
  check_input(model, input);
  Trace trace{std::vector<Tensor>(model.layers.size()),
              std::vector<std::vector<std::size_t>>(model.layers.size())};
  run_layers(model, 0, model.layers.size(), input, &trace);
  return std::move(trace.outputs);
}

Tensor forward_logits(const CnnModel& model, const Tensor& input) {
  check_input(model, input);
  return run_layers(model, 0, model.layers.size(), input, nullptr);
}

BinaryTarget predict_softmax(const CnnModel& model, const Tensor& input) {
  const Tensor logits = forward_logits(model, input);
  return logits.values[1] > logits.values[0] ? BinaryTarget::Positive : BinaryTarget::Negative;
}

BackwardResult backward_pass(const CnnModel& model, const Tensor& input, BinaryTarget target) {
  check_input(model, input);
  Trace trace{std::vector<Tensor>(model.layers.size()),
              std::vector<std::vector<std::size_t>>(model.layers.size())};
  const Tensor logits = run_layers(model, 0, model.layers.size(), input, &trace);
  const LossGrad head = softmax_cross_entropy(logits.values, target);

  BackwardResult result{head.loss, zero_gradients(model)};
  Tensor grad = Tensor::vector(2);
  grad.values = {head.grad_logits[0], head.grad_logits[1]};

  for (std::size_t l = model.layers.size(); l-- > 0;) {
    const Tensor& in = l == 0 ? input : trace.outputs[l - 1];
    const bool need_input_grad = l > 0;
    const Layer& layer = model.layers[l];
    if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
      LayerGradient& g = result.grads.layers[l];
      Tensor gin = Tensor::vector(dense->in_dim);
      for (std::size_t o = 0; o < dense->out_dim; ++o) {
        const double go = grad.values[o];
        g.bias[o] += go;
        double* gw = &g.weights[o * dense->in_dim];
        const double* wrow = &dense->weights[o * dense->in_dim];
        for (std::size_t i = 0; i < dense->in_dim; ++i) {
          gw[i] += go * in.values[i];
          gin.values[i] += wrow[i] * go;
        }
      }
      grad = std::move(gin);
    } else if (std::holds_alternative<ReluLayer>(layer)) {
      for (std::size_t i = 0; i < grad.values.size(); ++i) {
        if (!(in.values[i] > 0.0)) grad.values[i] = 0.0;
      }
      grad.shape = in.shape;
    } else if (std::holds_alternative<MaxPoolLayer>(layer)) {
      Tensor gin = Tensor::chw(in.shape[0], in.shape[1], in.shape[2]);
      const auto& argmax = trace.argmax[l];
      for (std::size_t o = 0; o < argmax.size(); ++o) gin.values[argmax[o]] += grad.values[o];
      grad = std::move(gin);
    } else if (std::holds_alternative<FlattenLayer>(layer)) {
      grad.shape = in.shape;
    } else {
      const auto& conv = std::get<ConvLayer>(layer);
      Tensor gin;
      conv_backward(conv, in, grad, result.grads.layers[l], need_input_grad ? &gin : nullptr);
      grad = std::move(gin);
    }
  }
  return result;
}

void sgd_step(CnnModel& model, const Gradients& grads, double learning_rate, double weight_decay) {
  auto update = [&](std::vector<double>& weights, std::vector<double>& bias, const LayerGradient& g) {
    for (std::size_t i = 0; i < weights.size(); ++i) {
      weights[i] -= learning_rate * (g.weights[i] + weight_decay * weights[i]);
    }
    for (std::size_t i = 0; i < bias.size(); ++i) bias[i] -= learning_rate * g.bias[i];
  };
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    if (auto* conv = std::get_if<ConvLayer>(&model.layers[l])) {
      update(conv->weights, conv->bias, grads.layers[l]);
    } else if (auto* dense = std::get_if<DenseLayer>(&model.layers[l])) {
      update(dense->weights, dense->bias, grads.layers[l]);
    }
  }
}

TrainResult train_cnn(CnnModel model, std::span<const TrainingSample> data, const TrainConfig& cfg,
                      const std::function<void(int, double)>& on_epoch) {
  if (!(cfg.learning_rate > 0.0) || cfg.epochs < 0 || cfg.batch_size < 1) {
    throw SpecError("invalid CNN training configuration");
  }
  validate(model);
  bool has_pos = false;
  bool has_neg = false;
  for (const auto& s : data) {
    has_pos |= s.target == BinaryTarget::Positive;
    has_neg |= s.target == BinaryTarget::Negative;
  }
  if (!has_pos || !has_neg) throw DataError("CNN training needs both binary targets");

  TrainResult result{std::move(model), {}};
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(start + batch, order.size());
      Gradients acc = zero_gradients(result.model);
      for (std::size_t b = start; b < stop; ++b) {
        const TrainingSample& sample = data[order[b]];
        BackwardResult r = backward_pass(result.model, sample.input, sample.target);
        if (!std::isfinite(r.loss)) {
          throw DivergenceError("loss became non-finite in epoch " + std::to_string(epoch + 1));
        }
        epoch_loss += r.loss;
        add_into(acc, r.grads);
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (auto& g : acc.layers) {
        for (double& v : g.weights) v *= inv;
        for (double& v : g.bias) v *= inv;
      }
      sgd_step(result.model, acc, cfg.learning_rate, cfg.weight_decay);
    }
    const double mean = epoch_loss / static_cast<double>(data.size());
    if (!std::isfinite(mean)) throw DivergenceError("mean epoch loss is non-finite");
    result.loss_history.push_back(mean);
    if (on_epoch) on_epoch(epoch + 1, mean);
  }
  return result;
}

FeatureVector extract_features(const CnnModel& model, const Tensor& input) {
  check_input(model, input);
  if (model.feature_layer_index + 1 >= model.layers.size()) {
    throw ShapeError("feature layer index out of range");
  }
  Tensor x = run_layers(model, 0, model.feature_layer_index + 2, input, nullptr);
  return FeatureVector{std::move(x.values)};
}

double grad_check(const CnnModel& model, const Tensor& sample, BinaryTarget target, double epsilon) {
  const BackwardResult analytic = backward_pass(model, sample, target);
  const std::vector<Tensor> acts = forward_activations(model, sample);
  CnnModel probe = model;
  double worst = 0.0;

  auto loss_from = [&](std::size_t l) {
    const Tensor& in = l == 0 ? sample : acts[l - 1];
    const Tensor logits = run_layers(probe, l, probe.layers.size(), in, nullptr);
    return softmax_cross_entropy(logits.values, target).loss;
  };
  auto check_params = [&](std::size_t l, std::vector<double>& params, const std::vector<double>& grads) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double saved = params[i];
      params[i] = saved + epsilon;
      const double up = loss_from(l);
      params[i] = saved - epsilon;
      const double down = loss_from(l);
      params[i] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = grads[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  };

  for (std::size_t l = 0; l < probe.layers.size(); ++l) {
    const LayerGradient& g = analytic.grads.layers[l];
    if (auto* conv = std::get_if<ConvLayer>(&probe.layers[l])) {
      check_params(l, conv->weights, g.weights);
      check_params(l, conv->bias, g.bias);
    } else if (auto* dense = std::get_if<DenseLayer>(&probe.layers[l])) {
      check_params(l, dense->weights, g.weights);
      check_params(l, dense->bias, g.bias);
    }
  }
  return worst;
}

std::uint64_t weights_checksum(const CnnModel& model) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  auto mix = [&](const std::vector<double>& values) {
    for (double v : values) {
      std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
      for (int b = 0; b < 8; ++b) {
        hash ^= (bits >> (8 * b)) & 0xFF;
        hash *= 0x100000001b3ULL;
      }
    }
  };
  for (const auto& layer : model.layers) {
    if (const auto* conv = std::get_if<ConvLayer>(&layer)) {
      mix(conv->weights);
      mix(conv->bias);
    } else if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
      mix(dense->weights);
      mix(dense->bias);
    }
  }
  return hash;
}

}  // namespace lungsvm::cnn
