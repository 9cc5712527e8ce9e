#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace lungsvm {

/// Raw scanner slice before HU conversion. Pixels are stored row-major.
class RawSlice {
 public:
  /// Throws ShapeError when the pixel count or bit depth is inconsistent.
  RawSlice(int width, int height, int bit_depth, std::vector<std::uint16_t> pixels,
           double rescale_slope = 1.0, double rescale_intercept = 0.0);

  int width() const { return width_; }
  int height() const { return height_; }
  int bit_depth() const { return bit_depth_; }
  double rescale_slope() const { return slope_; }
  double rescale_intercept() const { return intercept_; }
  std::span<const std::uint16_t> pixels() const { return pixels_; }
  std::uint16_t at(int x, int y) const {
    return pixels_[static_cast<std::size_t>(y) * width_ + x];
  }

  bool operator==(const RawSlice&) const = default;

 private:
  int width_;
  int height_;
  int bit_depth_;
  std::vector<std::uint16_t> pixels_;
  double slope_;
  double intercept_;
};

/// Row-major grid of doubles. The tag keeps HU and normalized images apart.
template <class Tag>
class ScalarImage {
 public:
  ScalarImage(int width, int height, double fill = 0.0);
  ScalarImage(int width, int height, std::vector<double> values);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return values_.size(); }

  double at(int x, int y) const { return values_[index(x, y)]; }
  double& at(int x, int y) { return values_[index(x, y)]; }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  bool operator==(const ScalarImage&) const = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_;
  int height_;
  std::vector<double> values_;
};

struct HuTag {};
struct NormTag {};

/// Hounsfield-unit image.
using HuImage = ScalarImage<HuTag>;
/// Intensities on the unit interval (after windowing).
using NormImage = ScalarImage<NormTag>;

extern template class ScalarImage<HuTag>;
extern template class ScalarImage<NormTag>;

class Mask {
 public:
  Mask(int width, int height, bool fill = false);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return bits_.size(); }

  bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool v) { bits_[index(x, y)] = v ? 1 : 0; }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }

  std::size_t count() const;

  bool operator==(const Mask&) const = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_;
  int height_;
  std::vector<std::uint8_t> bits_;
};

/// Intersection over union of two equally sized masks; 1 when both are empty.
double mask_iou(const Mask& a, const Mask& b);

}  // namespace lungsvm
