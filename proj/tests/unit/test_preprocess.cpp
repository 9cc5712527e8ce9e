#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lungsvm/errors.hpp"
#include "lungsvm/preprocess.hpp"
#include "lungsvm/rng.hpp"

using namespace lungsvm;
using namespace lungsvm::prep;

namespace {

NormImage random_image(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  NormImage img(w, h);
  for (double& v : img.values()) v = rng.uniform();
  return img;
}

HuImage constant_hu(int w, int h, double v) { return HuImage(w, h, v); }

// Symmetric reflection used by the reference filters below: -1 -> 0, n -> n-1.
int mirror(int i, int n) {
  while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
  return i;
}

}  // namespace

TEST_CASE("HU conversion and windowing") {
  const RawSlice raw(2, 1, 16, {24, 1424}, 1.0, -1024.0);
  const HuImage hu = to_hu(raw);
  CHECK(hu.at(0, 0) == -1000.0);
  CHECK(hu.at(1, 0) == 400.0);
  const RawSlice ident(1, 1, 16, {777});
  CHECK(to_hu(ident).at(0, 0) == 777.0);

  const HuImage probe(4, 1, std::vector<double>{-1000.0, 400.0, -300.0, -1300.0});
  const NormImage n = normalize_hu(probe);
  CHECK(n.at(0, 0) == 0.0);
  CHECK(n.at(1, 0) == 1.0);
  CHECK(n.at(2, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(n.at(3, 0) == 0.0);
  CHECK_THROWS_AS(normalize_hu(probe, 10.0, 10.0), WindowError);
}

TEST_CASE("windowing is monotone") {
  Rng rng(1);
  std::vector<double> v(200);
  for (double& x : v) x = rng.uniform(-2000.0, 2000.0);
  std::sort(v.begin(), v.end());
  const NormImage n = normalize_hu(HuImage(200, 1, v));
  for (int i = 1; i < 200; ++i) CHECK(n.at(i, 0) >= n.at(i - 1, 0));
}

TEST_CASE("lung segmentation edge cases") {
  CHECK(segment_lungs(constant_hu(8, 8, 50.0)).count() == 0);
  CHECK(segment_lungs(constant_hu(8, 8, -1000.0)).count() == 0);
  CHECK_THROWS_AS(segment_lungs(constant_hu(2, 5, 0.0)), TooSmallError);
}

TEST_CASE("segmentation keeps the two largest enclosed air regions") {
  HuImage img(20, 10, 40.0);
  auto fill = [&](int x0, int y0, int x1, int y1) {
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) img.at(x, y) = -850.0;
  };
  fill(2, 2, 6, 7);    // 30 pixels
  fill(9, 2, 12, 7);   // 24 pixels
  fill(15, 3, 17, 5);  // 9 pixels: third largest, dropped
  const Mask m = segment_lungs(img);
  CHECK(m.at(4, 4));
  CHECK(m.at(10, 4));
  CHECK_FALSE(m.at(16, 4));
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 20; ++x)
      if (m.at(x, y)) CHECK(img.at(x, y) < kLungThresholdHu);
}

TEST_CASE("phantom segmentation against ground truth") {
  PhantomSpec spec = PhantomSpec::for_size(64, 64, 21);
  spec.count_per_class = {6, 6, 6};
  const Dataset phantoms = generate_phantoms(spec);
  double sum = 0.0;
  for (const auto& item : phantoms.items()) {
    const Mask m = segment_lungs(to_hu(std::get<RawSlice>(item.image)));
    const double iou = mask_iou(m, *item.ground_truth_mask);
    sum += iou;
    // The truth covers the whole lung field; a bright nodule is above the air
    // threshold and so is carved out of the segmentation. Without one, each
    // phantom must reach 0.9 on its own.
    if (item.label == ClassLabel::Normal) CHECK(iou >= 0.90);
  }
  CHECK(sum / static_cast<double>(phantoms.size()) >= 0.90);
}

TEST_CASE("fill_holes and apply_mask") {
  Mask ring(5, 5);
  for (int i = 1; i <= 3; ++i) {
    ring.set(i, 1, true);
    ring.set(i, 3, true);
    ring.set(1, i, true);
    ring.set(3, i, true);
  }
  const Mask filled = fill_holes(ring);
  CHECK(filled.at(2, 2));
  CHECK(filled.count() == 9);
  const NormImage masked = apply_mask(NormImage(5, 5, 0.7), filled);
  CHECK(masked.at(2, 2) == 0.7);
  CHECK(masked.at(0, 0) == 0.0);
}

TEST_CASE("gaussian kernel and filter") {
  CHECK(gaussian_kernel(0.0) == std::vector<double>{1.0});
  const auto k = gaussian_kernel(1.0);
  REQUIRE(k.size() == 7);
  CHECK(std::accumulate(k.begin(), k.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-15));

  const NormImage flat(7, 5, 0.3);
  const NormImage blurred = gaussian_filter(flat, 1.7);
  for (double v : blurred.values()) CHECK(v == doctest::Approx(0.3).epsilon(1e-14));

  const NormImage rnd = random_image(6, 6, 3);
  CHECK(gaussian_filter(rnd, 0.0) == rnd);

  // Unit impulse on 9x9, sigma 1: the centre keeps w0^2 where
  // w0 = 1 / sum_{i=-3..3} exp(-i^2 / 2) (evaluated by direct summation).
  NormImage impulse(9, 9);
  impulse.at(4, 4) = 1.0;
  const double centre = gaussian_filter(impulse, 1.0).at(4, 4);
  CHECK(centre == doctest::Approx(0.15924112569070245).epsilon(1e-12));
}

TEST_CASE("gaussian filter matches a direct 2D reference") {
  const NormImage img = random_image(7, 6, 11);
  const double sigma = 0.8;
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> w1;
  for (int i = -r; i <= r; ++i) w1.push_back(std::exp(-(i * i) / (2.0 * sigma * sigma)));
  const double s = std::accumulate(w1.begin(), w1.end(), 0.0);
  const NormImage got = gaussian_filter(img, sigma);
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 7; ++x) {
      double want = 0.0;
      for (int j = -r; j <= r; ++j)
        for (int i = -r; i <= r; ++i)
          want += w1[i + r] * w1[j + r] / (s * s) * img.at(mirror(x + i, 7), mirror(y + j, 6));
      CHECK(got.at(x, y) == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("noise estimate recovers the sigma of white noise") {
  Rng rng(8);
  NormImage img(64, 64, 0.5);
  for (double& v : img.values()) v += 0.05 * rng.normal();
  CHECK(estimate_noise_sigma(img) == doctest::Approx(0.05).epsilon(0.1));
}

TEST_CASE("non-local means") {
  const NormImage flat(6, 6, 0.4);
  const NormImage out = nlm_filter(flat, 0.1);
  for (double v : out.values()) CHECK(v == doctest::Approx(0.4).epsilon(1e-14));

  NormImage spike(9, 9, 0.5);
  spike.at(4, 4) = 0.9;
  const double v = nlm_filter(spike, 0.5).at(4, 4);
  CHECK(std::abs(v - 0.5) < std::abs(0.9 - 0.5));

  // The h -> 0 limit keeps only the self weight once every other patch lies
  // beyond the noise offset; a ramp has a zero noise estimate and distinct patches.
  NormImage ramp(8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) ramp.at(x, y) = 0.05 * x + 0.03 * y;
  REQUIRE(estimate_noise_sigma(ramp) == doctest::Approx(0.0));
  const NormImage sharp = nlm_filter(ramp, 1e-6);
  for (std::size_t i = 0; i < ramp.size(); ++i) {
    CHECK(sharp.values()[i] == doctest::Approx(ramp.values()[i]).epsilon(1e-12));
  }

  const NormImage rnd = random_image(8, 8, 2);
  const auto [lo, hi] = std::minmax_element(rnd.values().begin(), rnd.values().end());
  const NormImage smoothed = nlm_filter(rnd, 0.2);
  for (double v : smoothed.values()) {
    CHECK(v >= *lo);
    CHECK(v <= *hi);
  }
}

TEST_CASE("non-local means matches a scalar reference") {
  const NormImage img = random_image(7, 6, 5);
  const double h = 0.3;
  const int pr = 1;
  const int sr = 2;
  const double sigma = estimate_noise_sigma(img);
  const NormImage got = nlm_filter(img, h, pr, sr);
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 7; ++x) {
      double num = 0.0;
      double den = 0.0;
      for (int qy = y - sr; qy <= y + sr; ++qy) {
        for (int qx = x - sr; qx <= x + sr; ++qx) {
          if (qx < 0 || qy < 0 || qx >= 7 || qy >= 6) continue;
          double d2 = 0.0;
          for (int oy = -pr; oy <= pr; ++oy)
            for (int ox = -pr; ox <= pr; ++ox) {
              const double a = img.at(mirror(x + ox, 7), mirror(y + oy, 6));
              const double b = img.at(mirror(qx + ox, 7), mirror(qy + oy, 6));
              d2 += (a - b) * (a - b);
            }
          d2 /= 9.0;
          const double wgt = std::exp(-std::max(d2 - 2.0 * sigma * sigma, 0.0) / (h * h));
          num += wgt * img.at(qx, qy);
          den += wgt;
        }
      }
      CHECK(got.at(x, y) == doctest::Approx(num / den).epsilon(1e-12));
    }
  }
}

TEST_CASE("bilinear resize") {
  const NormImage two = random_image(2, 2, 4);
  CHECK(resize_bilinear(two, 2, 2) == two);
  const NormImage one(1, 1, 0.25);
  const NormImage spread = resize_bilinear(one, 4, 4);
  for (double v : spread.values()) CHECK(v == 0.25);

  // Pixel-centre formula: src = (i + 0.5) * in/out - 0.5, clamped to the grid,
  // giving columns at 0, 0.25, 0.75, 1 for a 2 -> 4 upsampling.
  const NormImage ramp(2, 2, std::vector<double>{0.0, 1.0, 0.0, 1.0});
  const NormImage up = resize_bilinear(ramp, 4, 4);
  const double expect[4] = {0.0, 0.25, 0.75, 1.0};
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) CHECK(up.at(x, y) == doctest::Approx(expect[x]).epsilon(1e-15));
}

TEST_CASE("geometric transforms") {
  const NormImage img = random_image(7, 5, 9);
  CHECK(apply_transform(apply_transform(img, FlipH{}), FlipH{}) == img);
  CHECK(apply_transform(apply_transform(img, FlipV{}), FlipV{}) == img);
  CHECK(apply_transform(img, Rotate{0.0}) == img);
  CHECK(apply_transform(img, Translate{0.0, 0.0}) == img);
  CHECK(apply_transform(img, Scale{1.0}) == img);
  CHECK(apply_transform(img, Intensity{1.0, 0.0}) == img);
  CHECK(apply_transform(img, Rotate{360.0}) == img);
  CHECK(apply_transform(apply_transform(img, Rotate{180.0}), Rotate{180.0}) == img);

  // Counter-clockwise as displayed: the top-right pixel moves to the top-left.
  const NormImage grid(3, 3, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9});
  const NormImage turned = apply_transform(grid, Rotate{90.0});
  CHECK(turned == NormImage(3, 3, std::vector<double>{3, 6, 9, 2, 5, 8, 1, 4, 7}));
  CHECK(apply_transform(turned, Rotate{-90.0}) == grid);

  const NormImage shifted = apply_transform(grid, Translate{1.0, 0.0});
  CHECK(shifted.at(0, 0) == 0.0);
  CHECK(shifted.at(1, 0) == 1.0);
  CHECK(shifted.at(2, 1) == 5.0);

  const NormImage bright = apply_transform(NormImage(2, 2, 0.5), Intensity{1.2, 0.1});
  for (double v : bright.values()) CHECK(v == doctest::Approx(0.7));
}

TEST_CASE("augmentation expands and preserves labels") {
  std::vector<LabeledImage> items;
  for (int i = 0; i < 10; ++i) {
    items.push_back(LabeledImage{random_image(6, 6, i), kAllLabels[i % 3],
                                 "img" + std::to_string(i), std::nullopt, std::nullopt});
  }
  const Dataset data(items, Provenance::Loaded);
  AugmentPolicy policy{{FlipH{}, Rotate{10.0}, Intensity{1.0, 0.0}}, 3, {}};
  const Dataset aug = augment_dataset(data, policy);
  CHECK(aug.size() == 40);
  for (ClassLabel l : kAllLabels) CHECK(aug.count(l) == 4 * data.count(l));
  CHECK(augment_dataset(data, policy) == aug);
  policy.seed = 4;
  CHECK_FALSE(augment_dataset(data, policy) == aug);
  for (std::size_t i = 10; i < 40; ++i) {
    const auto& copy = aug.items()[i];
    const auto& src = items[(i - 10) / 3];
    CHECK(copy.label == src.label);
    CHECK(copy.id.rfind(src.id + "#aug", 0) == 0);
  }
}

TEST_CASE("jitter stays within its ranges") {
  Rng rng(12);
  JitterRanges r;
  for (int i = 0; i < 200; ++i) {
    const auto t = jitter_transform(Rotate{30.0}, r, rng);
    CHECK(std::abs(std::get<Rotate>(t).degrees - 30.0) <= r.rotate_degrees);
    const auto s = jitter_transform(Scale{1.0}, r, rng);
    CHECK(std::abs(std::get<Scale>(s).factor - 1.0) <= r.scale_ratio);
  }
  CHECK(std::holds_alternative<FlipH>(jitter_transform(FlipH{}, r, rng)));
}
