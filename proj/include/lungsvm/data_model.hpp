#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "lungsvm/image.hpp"

namespace lungsvm {

enum class ClassLabel { Normal = 0, Benign = 1, Malignant = 2 };

inline constexpr std::array<ClassLabel, 3> kAllLabels = {ClassLabel::Normal, ClassLabel::Benign,
                                                         ClassLabel::Malignant};

enum class BinaryTarget { Negative = 0, Positive = 1 };

/// Which binary problem the three-way labels are folded into.
enum class BinaryTask {
  MalignantVsRest,     // Malignant positive, Normal and Benign negative
  BenignVsMalignant,   // Malignant positive, Benign negative, Normal excluded
};

/// Returns nullopt when the label does not take part in the task.
std::optional<BinaryTarget> to_binary_target(ClassLabel label, BinaryTask task);

std::string_view to_string(ClassLabel label);
std::optional<ClassLabel> parse_class_label(std::string_view text);
std::string_view to_string(BinaryTask task);
std::optional<BinaryTask> parse_binary_task(std::string_view text);

/// Where the phantom generator placed a nodule. Only phantoms carry one.
struct NoduleRecord {
  double center_x = 0.0;
  double center_y = 0.0;
  double radius = 0.0;
  double intensity_hu = 0.0;

  bool operator==(const NoduleRecord&) const = default;
};

using ImageData = std::variant<RawSlice, NormImage>;

int image_width(const ImageData& image);
int image_height(const ImageData& image);

struct LabeledImage {
  ImageData image;
  ClassLabel label = ClassLabel::Normal;
  std::string id;
  std::optional<Mask> ground_truth_mask;
  std::optional<NoduleRecord> nodule;

  bool operator==(const LabeledImage&) const = default;
};

enum class Provenance { Loaded, Phantom };

/// Immutable collection of labeled images with unique ids.
class Dataset {
 public:
  Dataset() = default;
  /// Throws DataError on duplicate ids or masks whose size differs from the image.
  Dataset(std::vector<LabeledImage> items, Provenance provenance,
          std::optional<std::uint64_t> seed = std::nullopt);

  const std::vector<LabeledImage>& items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  Provenance provenance() const { return provenance_; }
  std::optional<std::uint64_t> seed() const { return seed_; }

  std::size_t count(ClassLabel label) const;

  bool operator==(const Dataset&) const = default;

 private:
  std::vector<LabeledImage> items_;
  Provenance provenance_ = Provenance::Loaded;
  std::optional<std::uint64_t> seed_;
};

struct PhantomSpec {
  std::array<int, 3> count_per_class = {0, 0, 0};  // indexed by ClassLabel
  int width = 32;
  int height = 32;
  double nodule_radius_min = 2.0;
  double nodule_radius_max = 3.5;
  double nodule_intensity = 100.0;
  double noise_sigma = 20.0;
  double lung_hu = -850.0;
  double tissue_hu = 40.0;
  double air_hu = -1000.0;
  std::uint64_t seed = 0;

  /// Default spec with nodule radii scaled to the image size.
  static PhantomSpec for_size(int width, int height, std::uint64_t seed);

  int& count(ClassLabel label) { return count_per_class[static_cast<int>(label)]; }
  int count(ClassLabel label) const { return count_per_class[static_cast<int>(label)]; }
};

/// Reads a P2/P5 graymap plus its optional `<path>.meta` slope/intercept sidecar.
RawSlice load_image(const std::filesystem::path& path);

/// Writes a binary (P5) graymap, and a `.meta` sidecar when the rescale is not (1, 0).
void save_image(const std::filesystem::path& path, const RawSlice& slice);

/// Loads `<root>/{normal,benign,malignant}/*.pgm` in lexicographic id order.
Dataset load_dataset(const std::filesystem::path& root);

Dataset generate_phantoms(const PhantomSpec& spec);

/// Stratified split; returns (train, test).
std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double test_fraction,
                                          std::uint64_t seed);

}  // namespace lungsvm
