#pragma once

// Deliberately naive reference implementations used as test oracles. They share
// no code with the library beyond its plain data types.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <vector>

#include "lungsvm/cnn.hpp"
#include "lungsvm/metrics.hpp"

namespace oracle {

using lungsvm::cnn::ConvLayer;
using lungsvm::cnn::DenseLayer;
using lungsvm::cnn::Tensor;

inline double at(const Tensor& t, std::size_t c, std::size_t y, std::size_t x) {
  return t.values[(c * t.shape[1] + y) * t.shape[2] + x];
}

/// Cross-correlation with zero padding, one output element at a time.
inline Tensor conv(const Tensor& in, const ConvLayer& L) {
  const long H = static_cast<long>(in.shape[1]);
  const long W = static_cast<long>(in.shape[2]);
  const long K = static_cast<long>(L.kernel);
  const long P = static_cast<long>(L.padding);
  const long S = static_cast<long>(L.stride);
  const long OH = (H + 2 * P - K) / S + 1;
  const long OW = (W + 2 * P - K) / S + 1;
  Tensor out{{L.out_channels, static_cast<std::size_t>(OH), static_cast<std::size_t>(OW)},
             std::vector<double>(L.out_channels * OH * OW)};
  for (std::size_t o = 0; o < L.out_channels; ++o) {
    for (long oy = 0; oy < OH; ++oy) {
      for (long ox = 0; ox < OW; ++ox) {
        double sum = L.bias[o];
        for (std::size_t c = 0; c < L.in_channels; ++c) {
          for (long i = 0; i < K; ++i) {
            for (long j = 0; j < K; ++j) {
              const long y = oy * S + i - P;
              const long x = ox * S + j - P;
              if (y < 0 || y >= H || x < 0 || x >= W) continue;
              sum += L.w(o, c, static_cast<std::size_t>(i), static_cast<std::size_t>(j)) *
                     at(in, c, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
            }
          }
        }
        out.values[(o * OH + oy) * OW + ox] = sum;
      }
    }
  }
  return out;
}

/// 2x2/2 max pooling; windows hanging over an odd edge reuse the last row/column.
inline Tensor maxpool(const Tensor& in) {
  const std::size_t C = in.shape[0];
  const std::size_t H = in.shape[1];
  const std::size_t W = in.shape[2];
  const std::size_t OH = (H + 1) / 2;
  const std::size_t OW = (W + 1) / 2;
  Tensor out{{C, OH, OW}, std::vector<double>(C * OH * OW)};
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t oy = 0; oy < OH; ++oy) {
      for (std::size_t ox = 0; ox < OW; ++ox) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < 2; ++i) {
          for (std::size_t j = 0; j < 2; ++j) {
            const std::size_t y = std::min(2 * oy + i, H - 1);
            const std::size_t x = std::min(2 * ox + j, W - 1);
            best = std::max(best, at(in, c, y, x));
          }
        }
        out.values[(c * OH + oy) * OW + ox] = best;
      }
    }
  }
  return out;
}

inline Tensor dense(const Tensor& in, const DenseLayer& L) {
  Tensor out{{L.out_dim}, std::vector<double>(L.out_dim)};
  for (std::size_t o = 0; o < L.out_dim; ++o) {
    double sum = L.bias[o];
    for (std::size_t i = 0; i < L.in_dim; ++i) sum += L.weights[o * L.in_dim + i] * in.values[i];
    out.values[o] = sum;
  }
  return out;
}

/// Confusion counts by direct tallying over (prediction, truth) pairs.
struct Counts {
  long tp = 0, fp = 0, fn = 0, tn = 0;
};

inline Counts count(const std::vector<int>& pred, const std::vector<int>& truth) {
  Counts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == 1 && truth[i] == 1) ++c.tp;
    if (pred[i] == 1 && truth[i] == 0) ++c.fp;
    if (pred[i] == 0 && truth[i] == 1) ++c.fn;
    if (pred[i] == 0 && truth[i] == 0) ++c.tn;
  }
  return c;
}

inline double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

/// precision, recall, f1, accuracy, specificity straight from the definitions.
inline std::vector<double> metrics(const Counts& c) {
  const double p = ratio(c.tp, c.tp + c.fp);
  const double r = ratio(c.tp, c.tp + c.fn);
  // 2PR/(P+R) with P and R expanded: 2TP / (2TP + FP + FN).
  const double f1 = ratio(2.0 * c.tp, 2.0 * c.tp + c.fp + c.fn);
  const double acc = ratio(c.tp + c.tn, c.tp + c.fp + c.fn + c.tn);
  const double spec = ratio(c.tn, c.tn + c.fp);
  return {p, r, f1, acc, spec};
}

/// Hard-margin geometric margin of a linearly separable 2D set, by scanning unit
/// normal directions on a fine grid and refining around the best one. For a fixed
/// direction u the best achievable half-gap is (min_pos u.x - max_neg u.x) / 2.
inline double brute_force_margin(const std::vector<std::array<double, 2>>& x,
                                 const std::vector<int>& y) {
  auto half_gap = [&](double theta) {
    const double ux = std::cos(theta);
    const double uy = std::sin(theta);
    double min_pos = std::numeric_limits<double>::infinity();
    double max_neg = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double s = ux * x[i][0] + uy * x[i][1];
      if (y[i] > 0) {
        min_pos = std::min(min_pos, s);
      } else {
        max_neg = std::max(max_neg, s);
      }
    }
    return (min_pos - max_neg) / 2.0;
  };
  double best_theta = 0.0;
  double best = -std::numeric_limits<double>::infinity();
  const int steps = 20000;
  for (int k = 0; k < steps; ++k) {
    const double theta = 2.0 * std::numbers::pi * k / steps;
    const double g = half_gap(theta);
    if (g > best) {
      best = g;
      best_theta = theta;
    }
  }
  double span = 2.0 * std::numbers::pi / steps;
  for (int round = 0; round < 40; ++round) {
    for (int k = -10; k <= 10; ++k) {
      const double theta = best_theta + span * k / 10.0;
      const double g = half_gap(theta);
      if (g > best) {
        best = g;
        best_theta = theta;
      }
    }
    span /= 5.0;
  }
  return best;
}

}  // namespace oracle
