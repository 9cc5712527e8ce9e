#include "lungsvm/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <string>

#include "lungsvm/errors.hpp"

namespace lungsvm::prep {

namespace {

/// Symmetric reflection (d c b a | a b c d | d c b a), valid for any offset.
int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

}  // namespace

HuImage to_hu(const RawSlice& raw) {
  HuImage out(raw.width(), raw.height());
  auto dst = out.values();
  auto src = raw.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = raw.rescale_slope() * static_cast<double>(src[i]) + raw.rescale_intercept();
  }
  return out;
}

NormImage normalize_hu(const HuImage& img, double window_low, double window_high) {
  if (!(window_low < window_high)) {
    throw WindowError("window low " + std::to_string(window_low) + " must be below high " +
                      std::to_string(window_high));
  }
  NormImage out(img.width(), img.height());
  auto dst = out.values();
  auto src = img.values();
  const double span = window_high - window_low;
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = std::clamp((src[i] - window_low) / span, 0.0, 1.0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Segmentation

namespace {

constexpr int kDx[4] = {1, -1, 0, 0};
constexpr int kDy[4] = {0, 0, 1, -1};

Mask dilate_cross(const Mask& m) {
  Mask out(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      bool v = m.at(x, y);
      for (int k = 0; k < 4 && !v; ++k) {
        const int nx = x + kDx[k];
        const int ny = y + kDy[k];
        v = nx >= 0 && ny >= 0 && nx < m.width() && ny < m.height() && m.at(nx, ny);
      }
      out.set(x, y, v);
    }
  }
  return out;
}

// Pixels beyond the border count as background.
Mask erode_cross(const Mask& m) {
  Mask out(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      bool v = m.at(x, y);
      for (int k = 0; k < 4 && v; ++k) {
        const int nx = x + kDx[k];
        const int ny = y + kDy[k];
        v = nx >= 0 && ny >= 0 && nx < m.width() && ny < m.height() && m.at(nx, ny);
      }
      out.set(x, y, v);
    }
  }
  return out;
}

/// Flood fill over pixels equal to `value`, seeded from every border pixel with that value.
Mask border_connected(const Mask& m, bool value) {
  Mask reached(m.width(), m.height());
  std::deque<std::pair<int, int>> queue;
  auto seed = [&](int x, int y) {
    if (m.at(x, y) == value && !reached.at(x, y)) {
      reached.set(x, y, true);
      queue.emplace_back(x, y);
    }
  };
  for (int x = 0; x < m.width(); ++x) {
    seed(x, 0);
    seed(x, m.height() - 1);
  }
  for (int y = 0; y < m.height(); ++y) {
    seed(0, y);
    seed(m.width() - 1, y);
  }
  while (!queue.empty()) {
    auto [x, y] = queue.front();
    queue.pop_front();
    for (int k = 0; k < 4; ++k) {
      const int nx = x + kDx[k];
      const int ny = y + kDy[k];
      if (nx >= 0 && ny >= 0 && nx < m.width() && ny < m.height()) seed(nx, ny);
    }
  }
  return reached;
}

Mask keep_largest_components(const Mask& m, std::size_t keep) {
  std::vector<int> label(m.size(), -1);
  std::vector<std::size_t> sizes;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * m.width() + x;
      if (!m.at(x, y) || label[idx] >= 0) continue;
      const int id = static_cast<int>(sizes.size());
      std::size_t size = 0;
      std::deque<std::pair<int, int>> queue{{x, y}};
      label[idx] = id;
      while (!queue.empty()) {
        auto [cx, cy] = queue.front();
        queue.pop_front();
        ++size;
        for (int k = 0; k < 4; ++k) {
          const int nx = cx + kDx[k];
          const int ny = cy + kDy[k];
          if (nx < 0 || ny < 0 || nx >= m.width() || ny >= m.height() || !m.at(nx, ny)) continue;
          const std::size_t nidx = static_cast<std::size_t>(ny) * m.width() + nx;
          if (label[nidx] >= 0) continue;
          label[nidx] = id;
          queue.emplace_back(nx, ny);
        }
      }
      sizes.push_back(size);
    }
  }
  std::vector<int> order(sizes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return sizes[a] > sizes[b]; });
  std::vector<bool> kept(sizes.size(), false);
  for (std::size_t i = 0; i < std::min(keep, order.size()); ++i) kept[order[i]] = true;

  Mask out(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      const int l = label[static_cast<std::size_t>(y) * m.width() + x];
      out.set(x, y, l >= 0 && kept[l]);
    }
  }
  return out;
}

}  // namespace

Mask segment_lungs(const HuImage& img) {
  if (img.width() < 3 || img.height() < 3) {
    throw TooSmallError("segmentation needs at least a 3x3 image");
  }
  Mask candidates(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) candidates.set(x, y, img.at(x, y) < kLungThresholdHu);
  }
  const Mask outside = border_connected(candidates, true);
  Mask interior(img.width(), img.height());
  for (std::size_t i = 0; i < interior.size(); ++i) {
    const int x = static_cast<int>(i % img.width());
    const int y = static_cast<int>(i / img.width());
    interior.set(x, y, candidates[i] && !outside[i]);
  }
  const Mask closed = erode_cross(dilate_cross(interior));
  const Mask opened = dilate_cross(erode_cross(closed));
  // Morphology may bridge into tissue; only air candidates survive.
  Mask air_only(img.width(), img.height());
  for (std::size_t i = 0; i < air_only.size(); ++i) {
    const int x = static_cast<int>(i % img.width());
    const int y = static_cast<int>(i / img.width());
    air_only.set(x, y, opened[i] && candidates[i]);
  }
  return keep_largest_components(air_only, 2);
}

Mask fill_holes(const Mask& mask) {
  const Mask background = border_connected(mask, false);
  Mask out(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) out.set(x, y, !background.at(x, y));
  }
  return out;
}

NormImage apply_mask(const NormImage& img, const Mask& mask) {
  if (img.width() != mask.width() || img.height() != mask.height()) {
    throw ShapeError("mask and image sizes differ");
  }
  NormImage out = img;
  auto v = out.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!mask[i]) v[i] = 0.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Denoising

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw SpecError("sigma must be finite and >= 0");
  if (sigma == 0.0) return {1.0};
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += k[i + radius];
  }
  for (double& w : k) w /= sum;
  return k;
}

NormImage gaussian_filter(const NormImage& img, double sigma) {
  const auto kernel = gaussian_kernel(sigma);
  if (kernel.size() == 1) return img;
  const int radius = static_cast<int>(kernel.size() / 2);
  const int w = img.width();
  const int h = img.height();

  NormImage rows(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * img.at(reflect(x + k, w), y);
      rows.at(x, y) = acc;
    }
  }
  NormImage out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * rows.at(x, reflect(y + k, h));
      out.at(x, y) = acc;
    }
  }
  return out;
}

double estimate_noise_sigma(const NormImage& img) {
  const int w = img.width();
  const int h = img.height();
  std::vector<double> lap;
  lap.reserve(img.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      lap.push_back(4.0 * img.at(x, y) - img.at(reflect(x - 1, w), y) -
                    img.at(reflect(x + 1, w), y) - img.at(x, reflect(y - 1, h)) -
                    img.at(x, reflect(y + 1, h)));
    }
  }
  auto median = [](std::vector<double> v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
      m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
    }
    return m;
  };
  const double centre = median(lap);
  for (double& v : lap) v = std::abs(v - centre);
  // The Laplacian of white noise has variance 20 sigma^2 (taps 4, -1, -1, -1, -1).
  return 1.4826 * median(std::move(lap)) / std::sqrt(20.0);
}

NormImage nlm_filter(const NormImage& img, double h, int patch_radius, int search_radius) {
  if (!(h > 0.0)) throw SpecError("nlm strength h must be positive");
  if (patch_radius < 1 || search_radius < 1) throw SpecError("nlm radii must be at least 1");
  const int w = img.width();
  const int ht = img.height();
  const double sigma = estimate_noise_sigma(img);
  const double offset = 2.0 * sigma * sigma;
  const double h2 = h * h;
  const int patch_side = 2 * patch_radius + 1;
  const double patch_area = static_cast<double>(patch_side * patch_side);

  // Reflect-padded copy so that patch lookups need no branching.
  const int pw = w + 2 * patch_radius;
  const int ph = ht + 2 * patch_radius;
  std::vector<double> padded(static_cast<std::size_t>(pw) * ph);
  for (int y = 0; y < ph; ++y) {
    for (int x = 0; x < pw; ++x) {
      padded[static_cast<std::size_t>(y) * pw + x] =
          img.at(reflect(x - patch_radius, w), reflect(y - patch_radius, ht));
    }
  }
  auto pv = [&](int x, int y) {
    return padded[static_cast<std::size_t>(y + patch_radius) * pw + (x + patch_radius)];
  };

  NormImage out(w, ht);
  for (int y = 0; y < ht; ++y) {
    for (int x = 0; x < w; ++x) {
      double num = 0.0;
      double den = 0.0;
      const int y0 = std::max(0, y - search_radius);
      const int y1 = std::min(ht - 1, y + search_radius);
      const int x0 = std::max(0, x - search_radius);
      const int x1 = std::min(w - 1, x + search_radius);
      for (int qy = y0; qy <= y1; ++qy) {
        for (int qx = x0; qx <= x1; ++qx) {
          double d2 = 0.0;
          for (int oy = -patch_radius; oy <= patch_radius; ++oy) {
            for (int ox = -patch_radius; ox <= patch_radius; ++ox) {
              const double diff = pv(x + ox, y + oy) - pv(qx + ox, qy + oy);
              d2 += diff * diff;
            }
          }
          d2 /= patch_area;
          const double weight = std::exp(-std::max(d2 - offset, 0.0) / h2);
          num += weight * img.at(qx, qy);
          den += weight;
        }
      }
      out.at(x, y) = num / den;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Resampling

namespace {

struct AxisTap {
  int i0;
  int i1;
  double t;
};

std::vector<AxisTap> axis_taps(int in, int out) {
  std::vector<AxisTap> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (int i = 0; i < out; ++i) {
    const double src = std::clamp((i + 0.5) * scale - 0.5, 0.0, static_cast<double>(in - 1));
    const int i0 = static_cast<int>(std::floor(src));
    taps[i] = AxisTap{i0, std::min(i0 + 1, in - 1), src - i0};
  }
  return taps;
}

double lerp2(const NormImage& img, int x0, int x1, int y0, int y1, double tx, double ty) {
  const double top = (1.0 - tx) * img.at(x0, y0) + tx * img.at(x1, y0);
  const double bottom = (1.0 - tx) * img.at(x0, y1) + tx * img.at(x1, y1);
  return (1.0 - ty) * top + ty * bottom;
}

}  // namespace

NormImage resize_bilinear(const NormImage& img, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) throw ShapeError("resize target must be at least 1x1");
  if (out_w == img.width() && out_h == img.height()) return img;
  const auto xs = axis_taps(img.width(), out_w);
  const auto ys = axis_taps(img.height(), out_h);
  NormImage out(out_w, out_h);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      out.at(x, y) = lerp2(img, xs[x].i0, xs[x].i1, ys[y].i0, ys[y].i1, xs[x].t, ys[y].t);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Transforms

namespace {

constexpr double kEdgeSlack = 1e-9;

double sample_zero_fill(const NormImage& img, double sx, double sy) {
  const double max_x = img.width() - 1;
  const double max_y = img.height() - 1;
  if (sx < -kEdgeSlack || sy < -kEdgeSlack || sx > max_x + kEdgeSlack || sy > max_y + kEdgeSlack) {
    return 0.0;
  }
  sx = std::clamp(sx, 0.0, max_x);
  sy = std::clamp(sy, 0.0, max_y);
  const int x0 = static_cast<int>(std::floor(sx));
  const int y0 = static_cast<int>(std::floor(sy));
  return lerp2(img, x0, std::min(x0 + 1, img.width() - 1), y0, std::min(y0 + 1, img.height() - 1),
               sx - x0, sy - y0);
}

template <class SourceOf>
NormImage inverse_map(const NormImage& img, SourceOf source_of) {
  NormImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      auto [sx, sy] = source_of(static_cast<double>(x), static_cast<double>(y));
      out.at(x, y) = sample_zero_fill(img, sx, sy);
    }
  }
  return out;
}

template <class IndexOf>
NormImage permute(const NormImage& img, IndexOf index_of) {
  NormImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      auto [sx, sy] = index_of(x, y);
      out.at(x, y) = img.at(sx, sy);
    }
  }
  return out;
}

NormImage rotate(const NormImage& img, double degrees) {
  const int w = img.width();
  const int h = img.height();
  const double quarter = degrees / 90.0;
  if (quarter == std::round(quarter)) {
    const long k = ((static_cast<long>(std::round(quarter)) % 4) + 4) % 4;
    if (k == 0) return img;
    if (k == 2) return permute(img, [&](int x, int y) { return std::pair{w - 1 - x, h - 1 - y}; });
    if (w == h && k == 1) return permute(img, [&](int x, int y) { return std::pair{w - 1 - y, x}; });
    if (w == h && k == 3) return permute(img, [&](int x, int y) { return std::pair{y, h - 1 - x}; });
  }
  const double theta = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double cx = (w - 1) / 2.0;
  const double cy = (h - 1) / 2.0;
  return inverse_map(img, [&](double x, double y) {
    const double dx = x - cx;
    const double dy = y - cy;
    return std::pair{cx + c * dx - s * dy, cy + s * dx + c * dy};
  });
}

}  // namespace

NormImage apply_transform(const NormImage& img, const TransformSpec& t) {
  const int w = img.width();
  const int h = img.height();
  if (const auto* r = std::get_if<Rotate>(&t)) {
    if (!std::isfinite(r->degrees)) throw SpecError("rotation angle must be finite");
    return rotate(img, r->degrees);
  }
  if (std::holds_alternative<FlipH>(t)) {
    return permute(img, [&](int x, int y) { return std::pair{w - 1 - x, y}; });
  }
  if (std::holds_alternative<FlipV>(t)) {
    return permute(img, [&](int x, int y) { return std::pair{x, h - 1 - y}; });
  }
  if (const auto* tr = std::get_if<Translate>(&t)) {
    if (tr->dx == 0.0 && tr->dy == 0.0) return img;
    return inverse_map(img, [&](double x, double y) { return std::pair{x - tr->dx, y - tr->dy}; });
  }
  if (const auto* sc = std::get_if<Scale>(&t)) {
    if (!(sc->factor > 0.0) || !std::isfinite(sc->factor)) {
      throw SpecError("scale factor must be positive");
    }
    if (sc->factor == 1.0) return img;
    const double cx = (w - 1) / 2.0;
    const double cy = (h - 1) / 2.0;
    return inverse_map(img, [&](double x, double y) {
      return std::pair{cx + (x - cx) / sc->factor, cy + (y - cy) / sc->factor};
    });
  }
  const auto& in = std::get<Intensity>(t);
  NormImage out = img;
  for (double& v : out.values()) v = std::clamp(in.gain * v + in.bias, 0.0, 1.0);
  return out;
}

TransformSpec jitter_transform(const TransformSpec& t, const JitterRanges& ranges, Rng& rng) {
  auto draw = [&](double half_width) { return rng.uniform(-half_width, half_width); };
  if (const auto* r = std::get_if<Rotate>(&t)) {
    return Rotate{r->degrees + draw(ranges.rotate_degrees)};
  }
  if (const auto* tr = std::get_if<Translate>(&t)) {
    const double dx = tr->dx + draw(ranges.translate_pixels);
    const double dy = tr->dy + draw(ranges.translate_pixels);
    return Translate{dx, dy};
  }
  if (const auto* sc = std::get_if<Scale>(&t)) {
    return Scale{sc->factor * (1.0 + draw(ranges.scale_ratio))};
  }
  if (const auto* in = std::get_if<Intensity>(&t)) {
    const double gain = in->gain * (1.0 + draw(ranges.gain_ratio));
    const double bias = in->bias + draw(ranges.bias);
    return Intensity{gain, bias};
  }
  return t;
}

Dataset augment_dataset(const Dataset& data, const AugmentPolicy& policy) {
  if (data.empty()) throw EmptyDatasetError("cannot augment an empty dataset");
  std::vector<LabeledImage> items(data.items());
  items.reserve(data.size() * (1 + policy.transforms.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const LabeledImage& source = data.items()[i];
    const NormImage base = std::holds_alternative<NormImage>(source.image)
                               ? std::get<NormImage>(source.image)
                               : normalize_hu(to_hu(std::get<RawSlice>(source.image)));
    Rng rng(mix_seed(policy.seed, i));
    for (std::size_t k = 0; k < policy.transforms.size(); ++k) {
      const TransformSpec jittered = jitter_transform(policy.transforms[k], policy.jitter, rng);
      items.push_back(LabeledImage{apply_transform(base, jittered), source.label,
                                   source.id + "#aug" + std::to_string(k), std::nullopt,
                                   std::nullopt});
    }
  }
  return Dataset(std::move(items), data.provenance(), data.seed());
}

}  // namespace lungsvm::prep
