#include "lungsvm/data_model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

#include "lungsvm/errors.hpp"
#include "lungsvm/rng.hpp"

namespace lungsvm {

namespace fs = std::filesystem;

std::optional<BinaryTarget> to_binary_target(ClassLabel label, BinaryTask task) {
  switch (label) {
    case ClassLabel::Malignant:
      return BinaryTarget::Positive;
    case ClassLabel::Benign:
      return BinaryTarget::Negative;
    case ClassLabel::Normal:
      if (task == BinaryTask::BenignVsMalignant) return std::nullopt;
      return BinaryTarget::Negative;
  }
  return std::nullopt;
}

std::string_view to_string(ClassLabel label) {
  switch (label) {
    case ClassLabel::Normal:
      return "normal";
    case ClassLabel::Benign:
      return "benign";
    case ClassLabel::Malignant:
      return "malignant";
  }
  return "unknown";
}

std::optional<ClassLabel> parse_class_label(std::string_view text) {
  for (ClassLabel label : kAllLabels) {
    if (to_string(label) == text) return label;
  }
  return std::nullopt;
}

std::string_view to_string(BinaryTask task) {
  return task == BinaryTask::MalignantVsRest ? "malignant_vs_rest" : "benign_vs_malignant";
}

std::optional<BinaryTask> parse_binary_task(std::string_view text) {
  if (text == "malignant_vs_rest") return BinaryTask::MalignantVsRest;
  if (text == "benign_vs_malignant") return BinaryTask::BenignVsMalignant;
  return std::nullopt;
}

int image_width(const ImageData& image) {
  return std::visit([](const auto& img) { return img.width(); }, image);
}

int image_height(const ImageData& image) {
  return std::visit([](const auto& img) { return img.height(); }, image);
}

Dataset::Dataset(std::vector<LabeledImage> items, Provenance provenance,
                 std::optional<std::uint64_t> seed)
    : items_(std::move(items)), provenance_(provenance), seed_(seed) {
  std::set<std::string> ids;
  for (const auto& item : items_) {
    if (!ids.insert(item.id).second) throw DataError("duplicate image id '" + item.id + "'");
    if (item.ground_truth_mask &&
        (item.ground_truth_mask->width() != image_width(item.image) ||
         item.ground_truth_mask->height() != image_height(item.image))) {
      throw DataError("mask size differs from image for '" + item.id + "'");
    }
  }
}

std::size_t Dataset::count(ClassLabel label) const {
  return static_cast<std::size_t>(std::count_if(
      items_.begin(), items_.end(), [label](const auto& item) { return item.label == label; }));
}

// ---------------------------------------------------------------------------
// Graymap I/O

namespace {

std::vector<unsigned char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class HeaderReader {
 public:
  HeaderReader(const std::vector<unsigned char>& bytes, const fs::path& path)
      : bytes_(bytes), path_(path) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      unsigned char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(c)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::optional<long> try_integer() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) return std::nullopt;
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000'000L) throw FormatError("integer overflow in " + path_.string());
      ++pos_;
    }
    return value;
  }

  long integer(const char* what) {
    auto v = try_integer();
    if (!v) throw FormatError(std::string("missing ") + what + " in " + path_.string());
    return *v;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  const std::vector<unsigned char>& bytes_;
  const fs::path& path_;
  std::size_t pos_ = 0;
};

std::pair<double, double> read_sidecar(const fs::path& image_path) {
  fs::path meta = image_path;
  meta += ".meta";
  if (!fs::exists(meta)) return {1.0, 0.0};
  std::ifstream in(meta);
  if (!in) throw IoError("cannot open '" + meta.string() + "'");
  double slope = 0.0;
  double intercept = 0.0;
  if (!(in >> slope >> intercept) || !std::isfinite(slope) || !std::isfinite(intercept)) {
    throw FormatError("sidecar '" + meta.string() + "' must hold two numbers");
  }
  return {slope, intercept};
}

}  // namespace

RawSlice load_image(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("no such file '" + path.string() + "'");
  const auto bytes = read_bytes(path);
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '2' && bytes[1] != '5')) {
    throw FormatError("bad magic in '" + path.string() + "'");
  }
  const bool binary = bytes[1] == '5';
  HeaderReader reader(bytes, path);
  reader.advance(2);
  const long width = reader.integer("width");
  const long height = reader.integer("height");
  const long maxval = reader.integer("maxval");
  if (width < 1 || height < 1) throw FormatError("empty image in '" + path.string() + "'");
  if (maxval != 255 && maxval != 65535) {
    throw FormatError("unsupported maxval " + std::to_string(maxval) + " in '" +
                      path.string() + "'");
  }
  const int bit_depth = maxval == 255 ? 8 : 16;
  const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  std::vector<std::uint16_t> pixels;
  pixels.reserve(count);

  if (binary) {
    // Exactly one whitespace byte separates the header from the raster.
    if (reader.pos() >= bytes.size() || !std::isspace(bytes[reader.pos()])) {
      throw FormatError("truncated header in '" + path.string() + "'");
    }
    std::size_t pos = reader.pos() + 1;
    const std::size_t bytes_per_pixel = bit_depth == 8 ? 1 : 2;
    if (bytes.size() - pos < count * bytes_per_pixel) {
      throw FormatError("truncated payload in '" + path.string() + "'");
    }
    for (std::size_t i = 0; i < count; ++i) {
      if (bytes_per_pixel == 1) {
        pixels.push_back(bytes[pos++]);
      } else {
        pixels.push_back(static_cast<std::uint16_t>((bytes[pos] << 8) | bytes[pos + 1]));
        pos += 2;
      }
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      auto v = reader.try_integer();
      if (!v) throw FormatError("truncated payload in '" + path.string() + "'");
      if (*v > maxval) throw FormatError("pixel exceeds maxval in '" + path.string() + "'");
      pixels.push_back(static_cast<std::uint16_t>(*v));
    }
  }

  auto [slope, intercept] = read_sidecar(path);
  return RawSlice(static_cast<int>(width), static_cast<int>(height), bit_depth,
                  std::move(pixels), slope, intercept);
}

void save_image(const fs::path& path, const RawSlice& slice) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  const int maxval = slice.bit_depth() == 8 ? 255 : 65535;
  out << "P5\n" << slice.width() << ' ' << slice.height() << '\n' << maxval << '\n';
  for (std::uint16_t p : slice.pixels()) {
    if (slice.bit_depth() == 8) {
      out.put(static_cast<char>(p));
    } else {
      out.put(static_cast<char>(p >> 8));
      out.put(static_cast<char>(p & 0xFF));
    }
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");

  if (slice.rescale_slope() != 1.0 || slice.rescale_intercept() != 0.0) {
    fs::path meta = path;
    meta += ".meta";
    std::ofstream m(meta);
    if (!m) throw IoError("cannot write '" + meta.string() + "'");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g %.17g\n", slice.rescale_slope(),
                  slice.rescale_intercept());
    m << buf;
  }
}

Dataset load_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("dataset root '" + root.string() + "' is not a directory");
  std::map<std::string, ClassLabel> found;
  for (ClassLabel label : kAllLabels) {
    const fs::path dir = root / std::string(to_string(label));
    if (!fs::is_directory(dir)) continue;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file() || entry.path().extension() != ".pgm") continue;
      found.emplace(fs::relative(entry.path(), root).generic_string(), label);
    }
  }
  std::vector<LabeledImage> items;
  items.reserve(found.size());
  for (const auto& [id, label] : found) {
    items.push_back(LabeledImage{load_image(root / id), label, id, std::nullopt, std::nullopt});
  }
  if (items.empty()) throw EmptyDatasetError("no images under '" + root.string() + "'");
  return Dataset(std::move(items), Provenance::Loaded);
}

// ---------------------------------------------------------------------------
// Phantoms

PhantomSpec PhantomSpec::for_size(int width, int height, std::uint64_t seed) {
  PhantomSpec spec;
  spec.width = width;
  spec.height = height;
  const double side = std::min(width, height);
  spec.nodule_radius_min = side / 16.0;
  spec.nodule_radius_max = side * 7.0 / 64.0;
  spec.seed = seed;
  return spec;
}

namespace {

void validate(const PhantomSpec& spec) {
  for (int c : spec.count_per_class) {
    if (c < 0) throw SpecError("phantom counts must be non-negative");
  }
  if (spec.width < 8 || spec.height < 8) throw SpecError("phantoms need at least 8x8 pixels");
  const double half = std::min(spec.width, spec.height) / 2.0;
  if (!(spec.nodule_radius_min > 0.0) || !(spec.nodule_radius_max >= spec.nodule_radius_min) ||
      !(spec.nodule_radius_max < half)) {
    throw SpecError("nodule radii must be positive, ordered and below min(width,height)/2");
  }
  if (!(spec.noise_sigma >= 0.0) || !std::isfinite(spec.noise_sigma)) {
    throw SpecError("noise sigma must be finite and non-negative");
  }
}

struct Ellipse {
  double cx, cy, ax, ay;
  bool contains(double x, double y) const {
    const double u = (x - cx) / ax;
    const double v = (y - cy) / ay;
    return u * u + v * v <= 1.0;
  }
};

LabeledImage make_phantom(const PhantomSpec& spec, ClassLabel label, std::size_t global_index,
                          int class_index) {
  Rng rng(mix_seed(spec.seed, global_index));
  const double w = spec.width;
  const double h = spec.height;

  const Ellipse body{w / 2.0, h / 2.0, 0.46 * w, 0.42 * h};
  std::array<Ellipse, 2> lungs{};
  for (int side = 0; side < 2; ++side) {
    const double cx = w * (side == 0 ? 0.30 : 0.70) + rng.uniform(-0.02, 0.02) * w;
    const double cy = h * 0.5 + rng.uniform(-0.02, 0.02) * h;
    const double ax = 0.13 * w * rng.uniform(0.9, 1.1);
    const double ay = 0.28 * h * rng.uniform(0.9, 1.1);
    lungs[side] = Ellipse{cx, cy, ax, ay};
  }

  std::optional<NoduleRecord> nodule;
  if (label != ClassLabel::Normal) {
    double radius = rng.uniform(spec.nodule_radius_min, spec.nodule_radius_max);
    double intensity = spec.nodule_intensity;
    if (label == ClassLabel::Benign) {
      radius *= 0.5;
      intensity = spec.lung_hu + 0.5 * (spec.nodule_intensity - spec.lung_hu);
    }
    const Ellipse& host = lungs[rng.below(2)];
    double u = 0.0;
    double v = 0.0;
    do {
      u = rng.uniform(-1.0, 1.0);
      v = rng.uniform(-1.0, 1.0);
    } while (u * u + v * v > 1.0);
    const double cx = host.cx + u * std::max(host.ax - radius, 0.0);
    const double cy = host.cy + v * std::max(host.ay - radius, 0.0);
    nodule = NoduleRecord{cx, cy, radius, intensity};
  }

  std::vector<std::uint16_t> pixels(static_cast<std::size_t>(spec.width * spec.height));
  Mask truth(spec.width, spec.height);
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const double px = x + 0.5;
      const double py = y + 0.5;
      double hu = spec.air_hu;
      if (body.contains(px, py)) hu = spec.tissue_hu;
      if (lungs[0].contains(px, py) || lungs[1].contains(px, py)) {
        hu = spec.lung_hu;
        truth.set(x, y, true);
      }
      if (nodule && std::hypot(px - nodule->center_x, py - nodule->center_y) <= nodule->radius) {
        hu = nodule->intensity_hu;
      }
      hu += spec.noise_sigma * rng.normal();
      const double raw = std::clamp(std::round(hu + 1024.0), 0.0, 65535.0);
      pixels[static_cast<std::size_t>(y) * spec.width + x] = static_cast<std::uint16_t>(raw);
    }
  }

  char name[64];
  std::snprintf(name, sizeof name, "%s/%s_%04d.pgm", std::string(to_string(label)).c_str(),
                std::string(to_string(label)).c_str(), class_index);
  return LabeledImage{RawSlice(spec.width, spec.height, 16, std::move(pixels), 1.0, -1024.0),
                      label, name, std::move(truth), nodule};
}

}  // namespace

Dataset generate_phantoms(const PhantomSpec& spec) {
  validate(spec);
  std::vector<LabeledImage> items;
  std::size_t global = 0;
  for (ClassLabel label : kAllLabels) {
    for (int i = 0; i < spec.count(label); ++i) {
      items.push_back(make_phantom(spec, label, global++, i));
    }
  }
  if (items.empty()) throw EmptyDatasetError("phantom spec requests zero images");
  return Dataset(std::move(items), Provenance::Phantom, spec.seed);
}

// ---------------------------------------------------------------------------
// Splitting

std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double test_fraction,
                                          std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw SplitError("test fraction must lie in (0, 1)");
  }
  std::set<std::string> test_ids;
  for (ClassLabel label : kAllLabels) {
    std::vector<std::string> ids;
    for (const auto& item : data.items()) {
      if (item.label == label) ids.push_back(item.id);
    }
    if (ids.empty()) continue;
    if (ids.size() < 2) {
      throw SplitError("class '" + std::string(to_string(label)) + "' has fewer than 2 items");
    }
    std::sort(ids.begin(), ids.end());
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(label)));
    rng.shuffle(ids);
    auto take = static_cast<std::size_t>(std::llround(test_fraction * ids.size()));
    take = std::clamp<std::size_t>(take, 1, ids.size() - 1);
    test_ids.insert(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(take));
  }
  std::vector<LabeledImage> train;
  std::vector<LabeledImage> test;
  for (const auto& item : data.items()) {
    (test_ids.count(item.id) ? test : train).push_back(item);
  }
  return {Dataset(std::move(train), data.provenance(), data.seed()),
          Dataset(std::move(test), data.provenance(), data.seed())};
}

}  // namespace lungsvm
