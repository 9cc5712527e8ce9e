#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "lungsvm/cli.hpp"
#include "lungsvm/errors.hpp"
#include "support/temp_dir.hpp"

using namespace lungsvm;
using testing::TempDir;
using testing::read_file;
using testing::write_file;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::size_t count_files(const std::filesystem::path& dir) {
  std::size_t n = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) n += e.is_regular_file();
  return n;
}

/// A small phantom tree and a model trained on it, built once.
struct Workspace {
  TempDir dir;
  std::string data = (dir / "data").string();
  std::string test = (dir / "test").string();
  std::string model = (dir / "model.hcsv").string();
  std::string config = (dir / "run.cfg").string();
  Run train;

  Workspace() {
    cli_run({"phantom", "--out", data, "--counts", "10,4,10", "--seed", "2"});
    cli_run({"phantom", "--out", test, "--counts", "6,2,6", "--seed", "3"});
    write_file(dir / "run.cfg", "seed=4\nepochs=3\n");
    train = cli_run({"train", "--data", data, "--config", config, "--out", model});
  }
};

Workspace& workspace() {
  static Workspace w;
  return w;
}

}  // namespace

TEST_CASE("phantom writes a labelled tree deterministically") {
  TempDir a, b;
  const Run r = cli_run({"phantom", "--out", (a / "t").string(), "--counts", "2,3,1", "--seed", "9"});
  REQUIRE(r.code == 0);
  CHECK(r.out == "wrote,6\n");
  const auto manifest = lines(read_file(a / "t/manifest.csv"));
  REQUIRE(manifest.size() == 7);
  CHECK(manifest[0] == "id,label,has_nodule");
  CHECK(std::count_if(manifest.begin(), manifest.end(),
                      [](const std::string& l) { return l.ends_with(",malignant,1"); }) == 1);
  cli_run({"phantom", "--out", (b / "t").string(), "--counts", "2,3,1", "--seed", "9"});
  CHECK(count_files(a / "t") == count_files(b / "t"));
  for (const auto& e : std::filesystem::recursive_directory_iterator(a / "t")) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), a / "t");
    CHECK(read_file(e.path()) == read_file(b / "t" / rel));
  }

  const Run empty = cli_run({"phantom", "--out", (a / "e").string(), "--counts", "0,0,0"});
  CHECK(empty.code == 2);
  CHECK(empty.err.find("EmptyDataset") != std::string::npos);
  CHECK(cli_run({"phantom", "--out", (a / "x").string(), "--counts", "1,2"}).code == 1);
}

TEST_CASE("train prints epochs and a report row") {
  Workspace& w = workspace();
  REQUIRE(w.train.code == 0);
  const auto out = lines(w.train.out);
  REQUIRE(out.size() == 5);
  CHECK(out[0].starts_with("epoch,1,"));
  CHECK(out[2].starts_with("epoch,3,"));
  CHECK(out[3] == cli::kReportHeader);
  const cli::ReportRow row = cli::parse_row(out[4]);
  CHECK(row.run_id == "train");
  CHECK(row.task == "malignant_vs_rest");
  CHECK(read_file(w.model).starts_with("HCSV"));

  TempDir d;
  write_file(d / "zero.cfg", "epochs=0\n");
  const Run none = cli_run({"train", "--data", w.data, "--config", (d / "zero.cfg").string(),
                            "--out", (d / "m").string()});
  CHECK(none.code == 0);
  CHECK(none.out.find("epoch,") == std::string::npos);

  CHECK(cli_run({"train", "--data", (d / "nowhere").string(), "--out", (d / "m").string()}).code == 2);
  write_file(d / "bad.cfg", "colour=blue\n");
  CHECK(cli_run({"train", "--data", w.data, "--config", (d / "bad.cfg").string(), "--out",
                 (d / "m").string()}).code == 1);
}

TEST_CASE("predict emits csv or json") {
  Workspace& w = workspace();
  const std::string image = (std::filesystem::path(w.test) / "malignant").string();
  std::string first;
  for (const auto& e : std::filesystem::directory_iterator(image)) {
    if (e.path().extension() == ".pgm") {
      first = e.path().string();
      break;
    }
  }
  REQUIRE_FALSE(first.empty());
  const Run csv = cli_run({"predict", "--model", w.model, "--image", first});
  REQUIRE(csv.code == 0);
  const auto l = lines(csv.out);
  REQUIRE(l.size() == 1);
  const auto c1 = l[0].find(',');
  const auto c2 = l[0].rfind(',');
  const std::string label = l[0].substr(0, c1);
  CHECK((label == "malignant" || label == "non-malignant"));
  const double risk = std::stod(l[0].substr(c2 + 1));
  CHECK(risk > 0.0);
  CHECK(risk < 1.0);

  const Run json = cli_run({"predict", "--model", w.model, "--image", first, "--json"});
  CHECK(json.code == 0);
  CHECK(json.out.find("\"risk\"") != std::string::npos);
  CHECK(json.out.find("\"label\":\"" + label + "\"") != std::string::npos);

  TempDir d;
  std::string bytes = read_file(w.model);
  bytes[1] = 'Z';
  write_file(d / "broken.hcsv", bytes);
  const Run broken = cli_run({"predict", "--model", (d / "broken.hcsv").string(), "--image", first});
  CHECK(broken.code == 2);
  CHECK(broken.err.find("FormatError") != std::string::npos);
}

TEST_CASE("evaluate writes a consistent, repeatable report") {
  Workspace& w = workspace();
  TempDir d;
  const std::string report = (d / "r.csv").string();
  const Run r = cli_run({"evaluate", "--model", w.model, "--data", w.test, "--report", report});
  REQUIRE(r.code == 0);
  const auto rows = lines(read_file(report));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == cli::kReportHeader);
  const cli::ReportRow row = cli::parse_row(rows[1]);
  CHECK(row.run_id == "evaluate");
  CHECK(row.tp + row.fp + row.fn + row.tn == 14);
  const double acc = static_cast<double>(row.tp + row.tn) / 14.0;
  CHECK(row.accuracy == doctest::Approx(acc).epsilon(1e-4));

  const std::string again = (d / "r2.csv").string();
  cli_run({"evaluate", "--model", w.model, "--data", w.test, "--report", again});
  auto strip_time = [](std::string s) { return s.substr(0, s.rfind(',')); };
  CHECK(strip_time(lines(read_file(again))[1]) == strip_time(rows[1]));

  std::filesystem::create_directories(d / "empty");
  CHECK(cli_run({"evaluate", "--model", w.model, "--data", (d / "empty").string(), "--report",
                 (d / "x.csv").string()}).code == 2);
}

TEST_CASE("compare prints softmax and hybrid rows") {
  Workspace& w = workspace();
  const Run r = cli_run({"compare", "--model", w.model, "--data", w.test});
  REQUIRE(r.code == 0);
  const auto l = lines(r.out);
  REQUIRE(l.size() == 3);
  CHECK(l[0] == cli::kReportHeader);
  const cli::ReportRow soft = cli::parse_row(l[1]);
  const cli::ReportRow hybrid = cli::parse_row(l[2]);
  CHECK(soft.run_id == "softmax");
  CHECK(hybrid.run_id == "hybrid");
  CHECK(soft.tp + soft.fp + soft.fn + soft.tn == hybrid.tp + hybrid.fp + hybrid.fn + hybrid.tn);

  const Run refit = cli_run({"compare", "--model", w.model, "--data", w.test, "--refit-data", w.data});
  REQUIRE(refit.code == 0);
  const auto rl = lines(refit.out);
  REQUIRE(rl.size() == 5);
  CHECK(cli::parse_row(rl[3]).run_id == "hybrid_uniform");
  CHECK(cli::parse_row(rl[4]).run_id == "hybrid_balanced");
}

TEST_CASE("gradcheck and usage errors") {
  const Run g = cli_run({"gradcheck", "--seed", "1", "--size", "8", "--feature-dim", "8"});
  CHECK(g.code == 0);
  CHECK(g.out.starts_with("max_rel_error,"));
  CHECK(std::stod(g.out.substr(14)) < 1e-4);

  CHECK(cli_run({}).code == 1);
  CHECK(cli_run({"bogus"}).code == 1);
  CHECK(cli_run({"gradcheck", "--wat"}).code == 1);
  CHECK(cli_run({"predict", "--model", "m"}).code == 1);
}

TEST_CASE("report rows round-trip") {
  pipeline::MetricReport m;
  m.confusion = {8, 2, 1, 9};
  m.precision = 0.8;
  m.recall = 8.0 / 9.0;
  m.f1 = 16.0 / 19.0;
  m.accuracy = 0.85;
  m.specificity = 9.0 / 11.0;
  const cli::ReportRow row = cli::make_row("r1", "malignant_vs_rest", m, 1.23456);
  const std::string text = cli::format_row(row);
  CHECK(text == "r1,malignant_vs_rest,8,2,1,9,0.8000,0.8889,0.8421,0.8500,0.8182,1.235");
  CHECK(cli::format_row(cli::parse_row(text)) == text);
  CHECK_THROWS_AS(cli::format_row(cli::make_row("a,b", "t", m, 0.0)), FormatError);
  CHECK_THROWS_AS(cli::parse_row("1,2,3"), FormatError);
}
