#include "lungsvm/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "lungsvm/cnn.hpp"
#include "lungsvm/config.hpp"
#include "lungsvm/data_model.hpp"
#include "lungsvm/errors.hpp"
#include "lungsvm/pipeline.hpp"
#include "lungsvm/rng.hpp"

namespace lungsvm::cli {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

/// Flag values that fail validation after CLI11 parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::vector<int> parse_int_list(std::string_view text, std::size_t n, const char* flag) {
  std::vector<int> values;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t pos = std::min(text.find(',', start), text.size());
    const std::string_view part = text.substr(start, pos - start);
    int v = 0;
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (part.empty() || ec != std::errc{} || ptr != part.data() + part.size()) {
      throw UsageError(std::string(flag) + " expects " + std::to_string(n) +
                       " comma-separated integers");
    }
    values.push_back(v);
    start = pos + 1;
  }
  if (values.size() != n) {
    throw UsageError(std::string(flag) + " expects " + std::to_string(n) +
                     " comma-separated integers");
  }
  return values;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string label_text(BinaryTarget t, BinaryTask task) {
  if (t == BinaryTarget::Positive) return "malignant";
  return task == BinaryTask::BenignVsMalignant ? "benign" : "non-malignant";
}

Dataset load_nonempty(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  return load_dataset(dir);
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_phantom(const std::string& out_dir, const std::string& counts_text,
                const std::string& size_text, std::uint64_t seed, std::ostream& out) {
  const auto counts = parse_int_list(counts_text, 3, "--counts");
  const auto size = parse_int_list(size_text, 2, "--size");
  PhantomSpec spec = PhantomSpec::for_size(size[0], size[1], seed);
  for (ClassLabel label : kAllLabels) spec.count(label) = counts[static_cast<int>(label)];
  const Dataset data = generate_phantoms(spec);

  const std::filesystem::path root(out_dir);
  std::string manifest = "id,label,has_nodule\n";
  for (const auto& item : data.items()) {
    const std::filesystem::path path = root / item.id;
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string());
    save_image(path, std::get<RawSlice>(item.image));
    manifest += item.id + "," + std::string(to_string(item.label)) + "," +
                (item.nodule ? "1" : "0") + "\n";
  }
  write_text_file(root / "manifest.csv", manifest);
  out << "wrote," << data.size() << "\n";
  return kExitOk;
}

int cmd_preprocess(const std::string& image_path, const std::string& out_path,
                   const std::string& config_path, std::ostream& out) {
  const pipeline::PipelineConfig cfg =
      config_path.empty() ? pipeline::PipelineConfig{} : pipeline::parse_config(read_text_file(config_path));
  const NormImage img = pipeline::preprocess_image(load_image(image_path), cfg);
  std::vector<std::uint16_t> pixels;
  pixels.reserve(img.size());
  for (double v : img.values()) {
    pixels.push_back(static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  }
  save_image(out_path, RawSlice(img.width(), img.height(), 8, std::move(pixels)));
  out << "size," << img.width() << "," << img.height() << "\n";
  return kExitOk;
}

int cmd_train(const std::string& data_dir, const std::string& config_path,
              const std::string& model_path, std::ostream& out) {
  const auto start = Clock::now();
  pipeline::PipelineConfig cfg;
  if (!config_path.empty()) {
    const std::string text = read_text_file(config_path);
    try {
      cfg = pipeline::parse_config(text);
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
  }
  const Dataset data = load_nonempty(data_dir);
  auto [trained, summary] = pipeline::train_pipeline(data, cfg, [&](int epoch, double loss) {
    out << "epoch," << epoch << "," << pipeline::format_double(loss) << "\n";
  });
  pipeline::save_pipeline(trained, model_path);
  out << kReportHeader << "\n"
      << format_row(make_row("train", std::string(to_string(cfg.task)), summary.training_report,
                             seconds_since(start)))
      << "\n";
  return kExitOk;
}

int cmd_predict(const std::string& model_path, const std::string& image_path, bool json,
                std::ostream& out) {
  const pipeline::TrainedPipeline p = pipeline::load_pipeline(model_path);
  const pipeline::Prediction pred = pipeline::predict_pipeline(p, load_image(image_path));
  const std::string label = label_text(pred.label, p.config.task);
  if (json) {
    nlohmann::json j = {{"label", label}, {"decision_score", pred.decision_score}, {"risk", pred.risk}};
    out << j.dump() << "\n";
  } else {
    out << label << "," << pipeline::format_double(pred.decision_score) << ","
        << pipeline::format_double(pred.risk) << "\n";
  }
  return kExitOk;
}

int cmd_evaluate(const std::string& model_path, const std::string& data_dir,
                 const std::string& report_path, const std::string& run_id, std::ostream& out) {
  const auto start = Clock::now();
  const pipeline::TrainedPipeline p = pipeline::load_pipeline(model_path);
  const Dataset data = load_nonempty(data_dir);
  const pipeline::MetricReport report = pipeline::evaluate(p, data);
  const std::string text = std::string(kReportHeader) + "\n" +
                           format_row(make_row(run_id, std::string(to_string(p.config.task)),
                                               report, seconds_since(start))) +
                           "\n";
  write_text_file(report_path, text);
  out << text;
  return kExitOk;
}

int cmd_compare(const std::string& model_path, const std::string& data_dir,
                const std::string& refit_dir, std::ostream& out, std::ostream& err) {
  const auto start = Clock::now();
  const pipeline::TrainedPipeline p = pipeline::load_pipeline(model_path);
  const Dataset data = load_nonempty(data_dir);
  const std::string task(to_string(p.config.task));
  const auto rows = pipeline::softmax_baseline_eval(p, data);
  out << kReportHeader << "\n";
  for (const auto& row : rows) {
    out << format_row(make_row(row.name, task, row.report, seconds_since(start))) << "\n";
    char hex[32];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(row.cnn_checksum));
    err << "cnn_checksum," << row.name << "," << hex << "\n";
  }
  if (!refit_dir.empty()) {
    // Refit the SVM head on the frozen CNN under both weightings.
    const Dataset train = load_nonempty(refit_dir);
    const auto prepared = pipeline::prepare_training_set(train, p.config);
    for (auto [name, weighting] : {std::pair{"hybrid_uniform", svm::ClassWeighting::Uniform},
                                   std::pair{"hybrid_balanced", svm::ClassWeighting::Balanced}}) {
      svm::SvmConfig svm_cfg = p.config.svm;
      svm_cfg.weighting = weighting;
      pipeline::HeadFit head =
          pipeline::fit_svm_head(p.cnn, prepared, svm_cfg, mix_seed(p.config.seed, 5));
      pipeline::TrainedPipeline variant = p;
      variant.svm = std::move(head.svm);
      variant.calibration = head.calibration;
      out << format_row(make_row(name, task, pipeline::evaluate(variant, data), seconds_since(start)))
          << "\n";
    }
  }
  return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, int size, std::size_t feature_dim, std::ostream& out) {
  if (size < 4) throw UsageError("--size must be at least 4");
  const auto n = static_cast<std::size_t>(size);
  const cnn::CnnModel model = cnn::make_default_cnn(n, n, feature_dim, seed);
  Rng rng(mix_seed(seed, 0x67726164));
  cnn::Tensor sample = cnn::Tensor::chw(1, n, n);
  for (double& v : sample.values) v = rng.uniform();
  const BinaryTarget target = rng.below(2) == 1 ? BinaryTarget::Positive : BinaryTarget::Negative;
  const double err = cnn::grad_check(model, sample, target, 1e-5);
  out << "max_rel_error," << pipeline::format_double(err) << "\n";
  return err < 1e-4 ? kExitOk : kExitRuntime;
}

}  // namespace

ReportRow make_row(std::string run_id, std::string task, const pipeline::MetricReport& report,
                   double wall_time_seconds) {
  ReportRow row;
  row.run_id = std::move(run_id);
  row.task = std::move(task);
  row.tp = report.confusion.tp;
  row.fp = report.confusion.fp;
  row.fn = report.confusion.fn;
  row.tn = report.confusion.tn;
  row.precision = report.precision;
  row.recall = report.recall;
  row.f1 = report.f1;
  row.accuracy = report.accuracy;
  row.specificity = report.specificity;
  row.wall_time_seconds = wall_time_seconds;
  return row;
}

std::string format_row(const ReportRow& row) {
  for (const std::string* field : {&row.run_id, &row.task}) {
    if (field->find_first_of(",\r\n") != std::string::npos) {
      throw FormatError("report field contains a separator: '" + *field + "'");
    }
  }
  return row.run_id + "," + row.task + "," + std::to_string(row.tp) + "," + std::to_string(row.fp) +
         "," + std::to_string(row.fn) + "," + std::to_string(row.tn) + "," + fixed(row.precision, 4) +
         "," + fixed(row.recall, 4) + "," + fixed(row.f1, 4) + "," + fixed(row.accuracy, 4) + "," +
         fixed(row.specificity, 4) + "," + fixed(row.wall_time_seconds, 3);
}

ReportRow parse_row(std::string_view line) {
  std::vector<std::string_view> f;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    f.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  if (f.size() != 12) throw FormatError("report row needs 12 fields, got " + std::to_string(f.size()));
  auto count = [](std::string_view s) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
      throw FormatError("bad count '" + std::string(s) + "'");
    }
    return v;
  };
  auto number = [](std::string_view s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, std::chars_format::fixed);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
      throw FormatError("bad number '" + std::string(s) + "'");
    }
    return v;
  };
  ReportRow row;
  row.run_id = std::string(f[0]);
  row.task = std::string(f[1]);
  row.tp = count(f[2]);
  row.fp = count(f[3]);
  row.fn = count(f[4]);
  row.tn = count(f[5]);
  row.precision = number(f[6]);
  row.recall = number(f[7]);
  row.f1 = number(f[8]);
  row.accuracy = number(f[9]);
  row.specificity = number(f[10]);
  row.wall_time_seconds = number(f[11]);
  return row;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hybrid CNN-SVM lung nodule classifier", "lungsvm"};
  app.require_subcommand(1);

  auto* phantom = app.add_subcommand("phantom", "Generate a labeled synthetic CT dataset");
  std::string ph_out, ph_counts, ph_size = "32,32";
  std::uint64_t ph_seed = 0;
  phantom->add_option("--out", ph_out, "Output directory")->required();
  phantom->add_option("--counts", ph_counts, "Images per class: normal,benign,malignant")->required();
  phantom->add_option("--size", ph_size, "Image size: width,height");
  phantom->add_option("--seed", ph_seed, "Generator seed");

  auto* preprocess = app.add_subcommand("preprocess", "Write the preprocessed view of one image");
  std::string pp_image, pp_out, pp_config;
  preprocess->add_option("--image", pp_image, "Input PGM")->required();
  preprocess->add_option("--out", pp_out, "Output PGM (8-bit)")->required();
  preprocess->add_option("--config", pp_config, "Pipeline config file");

  auto* train = app.add_subcommand("train", "Train the CNN feature extractor and SVM head");
  std::string tr_data, tr_config, tr_out;
  train->add_option("--data", tr_data, "Dataset directory")->required();
  train->add_option("--config", tr_config, "Pipeline config file (defaults if omitted)");
  train->add_option("--out", tr_out, "Model file to write")->required();

  auto* predict = app.add_subcommand("predict", "Classify one image");
  std::string pr_model, pr_image;
  bool pr_json = false;
  predict->add_option("--model", pr_model, "Model file")->required();
  predict->add_option("--image", pr_image, "Input PGM")->required();
  predict->add_flag("--json", pr_json, "Print a JSON object instead of CSV");

  auto* evaluate = app.add_subcommand("evaluate", "Score a model on a labeled dataset");
  std::string ev_model, ev_data, ev_report, ev_run_id = "evaluate";
  evaluate->add_option("--model", ev_model, "Model file")->required();
  evaluate->add_option("--data", ev_data, "Dataset directory")->required();
  evaluate->add_option("--report", ev_report, "CSV report to write")->required();
  evaluate->add_option("--run-id", ev_run_id, "Value of the run_id column");

  auto* compare = app.add_subcommand("compare", "Softmax head versus SVM head on the same CNN");
  std::string cm_model, cm_data, cm_refit;
  compare->add_option("--model", cm_model, "Model file")->required();
  compare->add_option("--data", cm_data, "Dataset directory")->required();
  compare->add_option("--refit-data", cm_refit,
                      "Also refit the SVM head on this dataset with uniform and balanced weights");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of backpropagation");
  std::uint64_t gc_seed = 0;
  int gc_size = 16;
  std::size_t gc_features = 64;
  gradcheck->add_option("--seed", gc_seed, "Model and sample seed");
  gradcheck->add_option("--size", gc_size, "Input height and width");
  gradcheck->add_option("--feature-dim", gc_features, "Width of the feature layer");

  try {
    app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (phantom->parsed()) return cmd_phantom(ph_out, ph_counts, ph_size, ph_seed, out);
    if (preprocess->parsed()) return cmd_preprocess(pp_image, pp_out, pp_config, out);
    if (train->parsed()) return cmd_train(tr_data, tr_config, tr_out, out);
    if (predict->parsed()) return cmd_predict(pr_model, pr_image, pr_json, out);
    if (evaluate->parsed()) return cmd_evaluate(ev_model, ev_data, ev_report, ev_run_id, out);
    if (compare->parsed()) return cmd_compare(cm_model, cm_data, cm_refit, out, err);
    if (gradcheck->parsed()) return cmd_gradcheck(gc_seed, gc_size, gc_features, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace lungsvm::cli
