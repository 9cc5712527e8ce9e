#include "lungsvm/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lungsvm/errors.hpp"

namespace lungsvm {

namespace {

void check_dims(int width, int height) {
  if (width < 1 || height < 1) {
    throw ShapeError("image dimensions must be at least 1x1, got " + std::to_string(width) +
                     "x" + std::to_string(height));
  }
}

}  // namespace

RawSlice::RawSlice(int width, int height, int bit_depth, std::vector<std::uint16_t> pixels,
                   double rescale_slope, double rescale_intercept)
    : width_(width),
      height_(height),
      bit_depth_(bit_depth),
      pixels_(std::move(pixels)),
      slope_(rescale_slope),
      intercept_(rescale_intercept) {
  check_dims(width, height);
  if (bit_depth != 8 && bit_depth != 16) {
    throw ShapeError("bit depth must be 8 or 16, got " + std::to_string(bit_depth));
  }
  if (pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw ShapeError("pixel count " + std::to_string(pixels_.size()) + " does not match " +
                     std::to_string(width) + "x" + std::to_string(height));
  }
  if (bit_depth == 8) {
    auto too_big = std::find_if(pixels_.begin(), pixels_.end(), [](auto p) { return p > 255; });
    if (too_big != pixels_.end()) throw ShapeError("8-bit slice holds a value above 255");
  }
  if (!std::isfinite(slope_) || !std::isfinite(intercept_)) {
    throw ShapeError("rescale slope and intercept must be finite");
  }
}

template <class Tag>
ScalarImage<Tag>::ScalarImage(int width, int height, double fill)
    : width_(width), height_(height) {
  check_dims(width, height);
  values_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

template <class Tag>
ScalarImage<Tag>::ScalarImage(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
  check_dims(width, height);
  if (values_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw ShapeError("value count does not match image dimensions");
  }
}

template class ScalarImage<HuTag>;
template class ScalarImage<NormTag>;

Mask::Mask(int width, int height, bool fill) : width_(width), height_(height) {
  check_dims(width, height);
  bits_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height),
               fill ? 1 : 0);
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

double mask_iou(const Mask& a, const Mask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw ShapeError("mask dimensions differ");
  }
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += (a[i] && b[i]) ? 1 : 0;
    uni += (a[i] || b[i]) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace lungsvm
