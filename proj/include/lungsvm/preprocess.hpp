#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "lungsvm/data_model.hpp"
#include "lungsvm/image.hpp"
#include "lungsvm/rng.hpp"

namespace lungsvm::prep {

inline constexpr double kDefaultWindowLow = -1000.0;
inline constexpr double kDefaultWindowHigh = 400.0;
inline constexpr double kLungThresholdHu = -400.0;

/// value = slope * raw + intercept, elementwise.
HuImage to_hu(const RawSlice& raw);

/// Clamped affine map of [low, high] onto [0, 1]. Throws WindowError if low >= high.
NormImage normalize_hu(const HuImage& img, double window_low = kDefaultWindowLow,
                       double window_high = kDefaultWindowHigh);

/// Threshold at -400 HU, drop air touching the border, close then open with a
/// 3x3 cross, and keep the two largest 4-connected components. The result never
/// contains a pixel at or above the threshold. Throws TooSmallError below 3x3.
Mask segment_lungs(const HuImage& img);

/// Adds every background region not 4-connected to the border.
Mask fill_holes(const Mask& mask);

/// Zeroes every pixel outside the mask.
NormImage apply_mask(const NormImage& img, const Mask& mask);

/// Normalized discrete Gaussian of radius ceil(3 sigma).
std::vector<double> gaussian_kernel(double sigma);

/// Separable Gaussian blur with symmetric (edge-repeating) reflection at the borders.
NormImage gaussian_filter(const NormImage& img, double sigma);

/// Robust noise level: MAD of the 4-neighbour Laplacian, scaled to pixel sigma.
double estimate_noise_sigma(const NormImage& img);

NormImage nlm_filter(const NormImage& img, double h, int patch_radius = 1,
                     int search_radius = 3);

/// Pixel-centre aligned bilinear resampling.
NormImage resize_bilinear(const NormImage& img, int out_w, int out_h);

// ---------------------------------------------------------------------------
// Augmentation

struct Rotate {
  double degrees = 0.0;
  bool operator==(const Rotate&) const = default;
};
struct FlipH {
  bool operator==(const FlipH&) const = default;
};
struct FlipV {
  bool operator==(const FlipV&) const = default;
};
struct Translate {
  double dx = 0.0;
  double dy = 0.0;
  bool operator==(const Translate&) const = default;
};
struct Scale {
  double factor = 1.0;
  bool operator==(const Scale&) const = default;
};
struct Intensity {
  double gain = 1.0;
  double bias = 0.0;
  bool operator==(const Intensity&) const = default;
};

using TransformSpec = std::variant<Rotate, FlipH, FlipV, Translate, Scale, Intensity>;

/// Rotation is counter-clockwise as displayed (y axis pointing down) about the
/// image centre. Geometric transforms sample bilinearly and fill with zero.
NormImage apply_transform(const NormImage& img, const TransformSpec& t);

/// Half-widths of the uniform jitter added to each transform's parameters.
struct JitterRanges {
  double rotate_degrees = 15.0;
  double translate_pixels = 2.0;
  double scale_ratio = 0.1;    // factor *= 1 + U(-r, r)
  double gain_ratio = 0.1;     // gain *= 1 + U(-r, r)
  double bias = 0.05;
};

struct AugmentPolicy {
  std::vector<TransformSpec> transforms;
  std::uint64_t seed = 0;
  JitterRanges jitter;
};

/// Draws the jittered parameters of one transform.
TransformSpec jitter_transform(const TransformSpec& t, const JitterRanges& ranges, Rng& rng);

/// Originals first (unchanged), then one jittered copy per transform for every
/// item. Raw slices are windowed with the default window before transforming.
Dataset augment_dataset(const Dataset& data, const AugmentPolicy& policy);

}  // namespace lungsvm::prep
