#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "lungsvm/data_model.hpp"
#include "lungsvm/errors.hpp"
#include "lungsvm/rng.hpp"
#include "support/temp_dir.hpp"

using namespace lungsvm;
using testing::TempDir;
using testing::write_file;

TEST_CASE("label and task vocabulary") {
  CHECK(to_binary_target(ClassLabel::Malignant, BinaryTask::MalignantVsRest) == BinaryTarget::Positive);
  CHECK(to_binary_target(ClassLabel::Benign, BinaryTask::MalignantVsRest) == BinaryTarget::Negative);
  CHECK(to_binary_target(ClassLabel::Normal, BinaryTask::MalignantVsRest) == BinaryTarget::Negative);
  CHECK(to_binary_target(ClassLabel::Malignant, BinaryTask::BenignVsMalignant) == BinaryTarget::Positive);
  CHECK(to_binary_target(ClassLabel::Benign, BinaryTask::BenignVsMalignant) == BinaryTarget::Negative);
  CHECK_FALSE(to_binary_target(ClassLabel::Normal, BinaryTask::BenignVsMalignant).has_value());

  for (ClassLabel l : kAllLabels) CHECK(parse_class_label(to_string(l)) == l);
  for (BinaryTask t : {BinaryTask::MalignantVsRest, BinaryTask::BenignVsMalignant}) {
    CHECK(parse_binary_task(to_string(t)) == t);
  }
  CHECK_FALSE(parse_class_label("tumour").has_value());
}

TEST_CASE("RawSlice rejects inconsistent shapes") {
  CHECK_THROWS_AS(RawSlice(2, 2, 8, {1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(RawSlice(2, 2, 12, {1, 2, 3, 4}), ShapeError);
  CHECK_THROWS_AS(RawSlice(1, 1, 8, {256}), ShapeError);
  CHECK_NOTHROW(RawSlice(1, 1, 16, {65535}));
}

TEST_CASE("load_image reads binary and plain graymaps") {
  TempDir dir;
  SUBCASE("4x4 P5, maxval 255, all pixels 7") {
    write_file(dir / "a.pgm", "P5\n4 4\n255\n" + std::string(16, '\x07'));
    const RawSlice s = load_image(dir / "a.pgm");
    CHECK(s.width() == 4);
    CHECK(s.height() == 4);
    CHECK(s.bit_depth() == 8);
    CHECK(std::all_of(s.pixels().begin(), s.pixels().end(), [](auto v) { return v == 7; }));
  }
  SUBCASE("2x2 P2 with 16-bit values and a comment") {
    write_file(dir / "b.pgm", "P2\n# comment\n2 2\n65535\n0 1024\n2048 65535\n");
    const RawSlice s = load_image(dir / "b.pgm");
    CHECK(s.bit_depth() == 16);
    const std::vector<std::uint16_t> want{0, 1024, 2048, 65535};
    CHECK(std::equal(s.pixels().begin(), s.pixels().end(), want.begin(), want.end()));
  }
  SUBCASE("16-bit P5 is big-endian") {
    write_file(dir / "c.pgm", std::string("P5 1 1 65535\n") + '\x01' + '\x02');
    CHECK(load_image(dir / "c.pgm").at(0, 0) == 0x0102);
  }
  SUBCASE("truncated payload") {
    write_file(dir / "d.pgm", "P5\n4 4\n255\n" + std::string(10, '\x07'));
    CHECK_THROWS_AS(load_image(dir / "d.pgm"), FormatError);
  }
  SUBCASE("bad magic and bad maxval") {
    write_file(dir / "e.pgm", "P6\n1 1\n255\n\x01");
    CHECK_THROWS_AS(load_image(dir / "e.pgm"), FormatError);
    write_file(dir / "f.pgm", "P5\n1 1\n1023\n\x01\x01");
    CHECK_THROWS_AS(load_image(dir / "f.pgm"), FormatError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_image(dir / "nope.pgm"), IoError); }
}

TEST_CASE("save_image round-trips pixels and rescale") {
  TempDir dir;
  const RawSlice s(3, 2, 16, {0, 1, 2, 1000, 40000, 65535}, 1.0, -1024.0);
  save_image(dir / "x.pgm", s);
  CHECK(std::filesystem::exists(dir / "x.pgm.meta"));
  CHECK(load_image(dir / "x.pgm") == s);

  const RawSlice plain(2, 1, 8, {5, 250});
  save_image(dir / "y.pgm", plain);
  CHECK_FALSE(std::filesystem::exists(dir / "y.pgm.meta"));
  CHECK(load_image(dir / "y.pgm") == plain);
}

TEST_CASE("load_dataset labels by directory in lexicographic order") {
  TempDir dir;
  const std::string px = "P5\n1 1\n255\n\x01";
  for (const char* f : {"malignant/c.pgm", "malignant/a.pgm", "malignant/b.pgm", "normal/z.pgm",
                        "normal/y.pgm"}) {
    write_file(dir / f, px);
  }
  write_file(dir / "normal/notes.txt", "ignored");
  const Dataset d = load_dataset(dir.path());
  REQUIRE(d.size() == 5);
  CHECK(d.count(ClassLabel::Malignant) == 3);
  CHECK(d.count(ClassLabel::Normal) == 2);
  CHECK(d.items()[0].id == "malignant/a.pgm");
  CHECK(d.items()[4].id == "normal/z.pgm");
  CHECK(load_dataset(dir.path()) == d);

  TempDir empty;
  std::filesystem::create_directories(empty / "normal");
  std::filesystem::create_directories(empty / "benign");
  CHECK_THROWS_AS(load_dataset(empty.path()), EmptyDatasetError);
}

TEST_CASE("Dataset rejects duplicate ids") {
  LabeledImage a{NormImage(2, 2), ClassLabel::Normal, "x", std::nullopt, std::nullopt};
  CHECK_THROWS_AS(Dataset({a, a}, Provenance::Loaded), DataError);
}

TEST_CASE("phantoms are deterministic and carry their geometry") {
  PhantomSpec spec;
  spec.count_per_class = {2, 2, 2};
  spec.seed = 42;
  const Dataset d = generate_phantoms(spec);
  CHECK(d.size() == 6);
  CHECK(generate_phantoms(spec) == d);
  spec.seed = 43;
  CHECK_FALSE(generate_phantoms(spec) == d);

  spec.count_per_class = {0, 0, 0};
  CHECK_THROWS_AS(generate_phantoms(spec), EmptyDatasetError);
  spec.count_per_class = {-1, 1, 1};
  CHECK_THROWS_AS(generate_phantoms(spec), SpecError);
}

TEST_CASE("malignant phantoms contain a bright nodule inside the lung mask") {
  // Scan the generated grid: some masked pixel must exceed lung mean + intensity / 2.
  PhantomSpec spec;
  spec.count_per_class = {0, 0, 20};
  spec.seed = 5;
  const Dataset d = generate_phantoms(spec);
  for (const auto& item : d.items()) {
    const RawSlice& raw = std::get<RawSlice>(item.image);
    const Mask& mask = *item.ground_truth_mask;
    REQUIRE(item.nodule.has_value());
    double sum = 0.0;
    int n = 0;
    double brightest = -1e9;
    for (int y = 0; y < raw.height(); ++y) {
      for (int x = 0; x < raw.width(); ++x) {
        if (!mask.at(x, y)) continue;
        const double hu = raw.at(x, y) - 1024.0;
        sum += hu;
        ++n;
        brightest = std::max(brightest, hu);
      }
    }
    const double lung_mean = sum / n;
    CHECK(brightest > lung_mean + spec.nodule_intensity / 2.0);
  }
}

TEST_CASE("stratified split") {
  std::vector<LabeledImage> items;
  for (int i = 0; i < 100; ++i) {
    items.push_back(LabeledImage{NormImage(1, 1), i < 50 ? ClassLabel::Normal : ClassLabel::Malignant,
                                 "id" + std::to_string(i), std::nullopt, std::nullopt});
  }
  const Dataset d(items, Provenance::Loaded);
  const auto [train, test] = split_dataset(d, 0.2, 7);
  CHECK(train.size() == 80);
  CHECK(test.size() == 20);
  CHECK(test.count(ClassLabel::Normal) == 10);
  CHECK(test.count(ClassLabel::Malignant) == 10);
  const auto again = split_dataset(d, 0.2, 7);
  CHECK(again.first == train);
  CHECK(again.second == test);

  std::set<std::string> ids;
  for (const auto& it : train.items()) ids.insert(it.id);
  for (const auto& it : test.items()) CHECK(ids.insert(it.id).second);

  const Dataset tiny({LabeledImage{NormImage(1, 1), ClassLabel::Normal, "a", {}, {}},
                      LabeledImage{NormImage(1, 1), ClassLabel::Normal, "b", {}, {}},
                      LabeledImage{NormImage(1, 1), ClassLabel::Benign, "c", {}, {}}},
                     Provenance::Loaded);
  CHECK_THROWS_AS(split_dataset(tiny, 0.5, 1), SplitError);
}

TEST_CASE("rng streams are reproducible") {
  Rng a(mix_seed(3, 1));
  Rng b(mix_seed(3, 1));
  Rng c(mix_seed(3, 2));
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    differs = differs || u != c.uniform();
  }
  CHECK(differs);
  std::map<std::size_t, int> hist;
  Rng r(1);
  for (int i = 0; i < 6000; ++i) ++hist[r.below(3)];
  CHECK(hist.size() == 3);
  for (auto [k, n] : hist) CHECK(n > 1800);
}
