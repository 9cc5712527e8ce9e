#include "lungsvm/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>

#include "lungsvm/errors.hpp"

namespace lungsvm::pipeline {

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw ConfigError("cannot format number");
  return std::string(buf, end);
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

double parse_double(std::string_view key, std::string_view text) {
  text = trim(text);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw ConfigError("'" + std::string(key) + "' expects a number, got '" + std::string(text) + "'");
  }
  return v;
}

template <class Int>
Int parse_int(std::string_view key, std::string_view text) {
  text = trim(text);
  Int v{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ConfigError("'" + std::string(key) + "' expects an integer, got '" + std::string(text) + "'");
  }
  return v;
}

bool parse_switch(std::string_view key, std::string_view text) {
  text = trim(text);
  if (text == "on" || text == "true" || text == "1") return true;
  if (text == "off" || text == "false" || text == "0") return false;
  throw ConfigError("'" + std::string(key) + "' expects on/off, got '" + std::string(text) + "'");
}

std::string format_transform(const prep::TransformSpec& t) {
  if (const auto* r = std::get_if<prep::Rotate>(&t)) return "rotate:" + format_double(r->degrees);
  if (std::holds_alternative<prep::FlipH>(t)) return "fliph";
  if (std::holds_alternative<prep::FlipV>(t)) return "flipv";
  if (const auto* tr = std::get_if<prep::Translate>(&t)) {
    return "translate:" + format_double(tr->dx) + ":" + format_double(tr->dy);
  }
  if (const auto* s = std::get_if<prep::Scale>(&t)) return "scale:" + format_double(s->factor);
  const auto& in = std::get<prep::Intensity>(t);
  return "intensity:" + format_double(in.gain) + ":" + format_double(in.bias);
}

prep::TransformSpec parse_transform(std::string_view text) {
  const auto parts = split(trim(text), ':');
  const std::string_view kind = parts[0];
  auto arg = [&](std::size_t i, double fallback) {
    return i < parts.size() ? parse_double("augment", parts[i]) : fallback;
  };
  std::size_t max_args = 0;
  prep::TransformSpec t;
  if (kind == "fliph") {
    t = prep::FlipH{};
  } else if (kind == "flipv") {
    t = prep::FlipV{};
  } else if (kind == "rotate") {
    t = prep::Rotate{arg(1, 0.0)};
    max_args = 1;
  } else if (kind == "translate") {
    t = prep::Translate{arg(1, 0.0), arg(2, 0.0)};
    max_args = 2;
  } else if (kind == "scale") {
    t = prep::Scale{arg(1, 1.0)};
    max_args = 1;
  } else if (kind == "intensity") {
    t = prep::Intensity{arg(1, 1.0), arg(2, 0.0)};
    max_args = 2;
  } else {
    throw ConfigError("unknown augmentation '" + std::string(kind) + "'");
  }
  if (parts.size() > max_args + 1) {
    throw ConfigError("too many parameters for augmentation '" + std::string(kind) + "'");
  }
  return t;
}

std::string format_weighting(const svm::SvmConfig& s) {
  switch (s.weighting) {
    case svm::ClassWeighting::Balanced:
      return "balanced";
    case svm::ClassWeighting::Uniform:
      return "uniform";
    case svm::ClassWeighting::Manual:
      return "manual:" + format_double(s.positive_weight) + ":" + format_double(s.negative_weight);
  }
  return "balanced";
}

struct Field {
  const char* key;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, std::string_view)> set;
};

const std::vector<Field>& fields() {
  using C = PipelineConfig;
  static const std::vector<Field> table = {
      {"task", [](const C& c) { return std::string(to_string(c.task)); },
       [](C& c, std::string_view v) {
         auto task = parse_binary_task(trim(v));
         if (!task) throw ConfigError("unknown task '" + std::string(v) + "'");
         c.task = *task;
       }},
      {"seed", [](const C& c) { return std::to_string(c.seed); },
       [](C& c, std::string_view v) { c.seed = parse_int<std::uint64_t>("seed", v); }},
      {"window_low", [](const C& c) { return format_double(c.window_low); },
       [](C& c, std::string_view v) { c.window_low = parse_double("window_low", v); }},
      {"window_high", [](const C& c) { return format_double(c.window_high); },
       [](C& c, std::string_view v) { c.window_high = parse_double("window_high", v); }},
      {"resolution", [](const C& c) { return std::to_string(c.resolution); },
       [](C& c, std::string_view v) { c.resolution = parse_int<int>("resolution", v); }},
      {"segmentation", [](const C& c) { return std::string(c.segmentation ? "on" : "off"); },
       [](C& c, std::string_view v) { c.segmentation = parse_switch("segmentation", v); }},
      {"denoise",
       [](const C& c) {
         return std::string(c.denoise == DenoiseKind::None       ? "none"
                            : c.denoise == DenoiseKind::Gaussian ? "gaussian"
                                                                 : "nlm");
       },
       [](C& c, std::string_view v) {
         v = trim(v);
         if (v == "none") {
           c.denoise = DenoiseKind::None;
         } else if (v == "gaussian") {
           c.denoise = DenoiseKind::Gaussian;
         } else if (v == "nlm") {
           c.denoise = DenoiseKind::Nlm;
         } else {
           throw ConfigError("unknown denoiser '" + std::string(v) + "'");
         }
       }},
      {"gaussian_sigma", [](const C& c) { return format_double(c.gaussian_sigma); },
       [](C& c, std::string_view v) { c.gaussian_sigma = parse_double("gaussian_sigma", v); }},
      {"nlm_h", [](const C& c) { return format_double(c.nlm_h); },
       [](C& c, std::string_view v) { c.nlm_h = parse_double("nlm_h", v); }},
      {"augment",
       [](const C& c) {
         if (c.augment.empty()) return std::string("none");
         std::string s;
         for (std::size_t i = 0; i < c.augment.size(); ++i) {
           if (i) s += ",";
           s += format_transform(c.augment[i]);
         }
         return s;
       },
       [](C& c, std::string_view v) {
         c.augment.clear();
         v = trim(v);
         if (v == "none" || v.empty()) return;
         for (auto item : split(v, ',')) c.augment.push_back(parse_transform(item));
       }},
      {"jitter_rotate", [](const C& c) { return format_double(c.jitter.rotate_degrees); },
       [](C& c, std::string_view v) { c.jitter.rotate_degrees = parse_double("jitter_rotate", v); }},
      {"jitter_translate", [](const C& c) { return format_double(c.jitter.translate_pixels); },
       [](C& c, std::string_view v) { c.jitter.translate_pixels = parse_double("jitter_translate", v); }},
      {"jitter_scale", [](const C& c) { return format_double(c.jitter.scale_ratio); },
       [](C& c, std::string_view v) { c.jitter.scale_ratio = parse_double("jitter_scale", v); }},
      {"jitter_gain", [](const C& c) { return format_double(c.jitter.gain_ratio); },
       [](C& c, std::string_view v) { c.jitter.gain_ratio = parse_double("jitter_gain", v); }},
      {"jitter_bias", [](const C& c) { return format_double(c.jitter.bias); },
       [](C& c, std::string_view v) { c.jitter.bias = parse_double("jitter_bias", v); }},
      {"cnn_learning_rate", [](const C& c) { return format_double(c.cnn.learning_rate); },
       [](C& c, std::string_view v) { c.cnn.learning_rate = parse_double("cnn_learning_rate", v); }},
      {"epochs", [](const C& c) { return std::to_string(c.cnn.epochs); },
       [](C& c, std::string_view v) { c.cnn.epochs = parse_int<int>("epochs", v); }},
      {"cnn_batch_size", [](const C& c) { return std::to_string(c.cnn.batch_size); },
       [](C& c, std::string_view v) { c.cnn.batch_size = parse_int<int>("cnn_batch_size", v); }},
      {"cnn_weight_decay", [](const C& c) { return format_double(c.cnn.weight_decay); },
       [](C& c, std::string_view v) { c.cnn.weight_decay = parse_double("cnn_weight_decay", v); }},
      {"feature_dim", [](const C& c) { return std::to_string(c.feature_dim); },
       [](C& c, std::string_view v) { c.feature_dim = parse_int<std::size_t>("feature_dim", v); }},
      {"svm_c", [](const C& c) { return format_double(c.svm.C); },
       [](C& c, std::string_view v) { c.svm.C = parse_double("svm_c", v); }},
      {"svm_kernel",
       [](const C& c) {
         return std::string(c.svm.kernel.kind == svm::KernelKind::Linear       ? "linear"
                            : c.svm.kernel.kind == svm::KernelKind::Polynomial ? "polynomial"
                                                                                : "rbf");
       },
       [](C& c, std::string_view v) {
         v = trim(v);
         if (v == "linear") {
           c.svm.kernel.kind = svm::KernelKind::Linear;
         } else if (v == "polynomial") {
           c.svm.kernel.kind = svm::KernelKind::Polynomial;
         } else if (v == "rbf") {
           c.svm.kernel.kind = svm::KernelKind::Rbf;
         } else {
           throw ConfigError("unknown kernel '" + std::string(v) + "'");
         }
       }},
      {"svm_gamma",
       [](const C& c) { return c.svm.auto_gamma ? std::string("auto") : format_double(c.svm.kernel.gamma); },
       [](C& c, std::string_view v) {
         if (trim(v) == "auto") {
           c.svm.auto_gamma = true;
         } else {
           c.svm.auto_gamma = false;
           c.svm.kernel.gamma = parse_double("svm_gamma", v);
         }
       }},
      {"svm_degree", [](const C& c) { return std::to_string(c.svm.kernel.degree); },
       [](C& c, std::string_view v) { c.svm.kernel.degree = parse_int<int>("svm_degree", v); }},
      {"svm_coef_zero", [](const C& c) { return format_double(c.svm.kernel.coef0); },
       [](C& c, std::string_view v) { c.svm.kernel.coef0 = parse_double("svm_coef_zero", v); }},
      {"svm_class_weight", [](const C& c) { return format_weighting(c.svm); },
       [](C& c, std::string_view v) {
         const auto parts = split(trim(v), ':');
         if (parts[0] == "balanced" && parts.size() == 1) {
           c.svm.weighting = svm::ClassWeighting::Balanced;
         } else if (parts[0] == "uniform" && parts.size() == 1) {
           c.svm.weighting = svm::ClassWeighting::Uniform;
         } else if (parts[0] == "manual" && parts.size() == 3) {
           c.svm.weighting = svm::ClassWeighting::Manual;
           c.svm.positive_weight = parse_double("svm_class_weight", parts[1]);
           c.svm.negative_weight = parse_double("svm_class_weight", parts[2]);
         } else {
           throw ConfigError("svm_class_weight expects balanced, uniform or manual:<pos>:<neg>");
         }
       }},
      {"svm_tolerance", [](const C& c) { return format_double(c.svm.tolerance); },
       [](C& c, std::string_view v) { c.svm.tolerance = parse_double("svm_tolerance", v); }},
      {"svm_max_passes", [](const C& c) { return std::to_string(c.svm.max_passes); },
       [](C& c, std::string_view v) { c.svm.max_passes = parse_int<int>("svm_max_passes", v); }},
      {"calibration_fraction", [](const C& c) { return format_double(c.calibration_fraction); },
       [](C& c, std::string_view v) { c.calibration_fraction = parse_double("calibration_fraction", v); }},
  };
  return table;
}

}  // namespace

void validate(const PipelineConfig& cfg) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(cfg.window_low < cfg.window_high, "window_low must be below window_high");
  require(cfg.resolution >= 8 && cfg.resolution <= 1024, "resolution must lie in [8, 1024]");
  require(cfg.gaussian_sigma >= 0.0, "gaussian_sigma must be >= 0");
  require(cfg.nlm_h > 0.0, "nlm_h must be positive");
  require(cfg.jitter.rotate_degrees >= 0.0 && cfg.jitter.translate_pixels >= 0.0 &&
              cfg.jitter.scale_ratio >= 0.0 && cfg.jitter.scale_ratio < 1.0 &&
              cfg.jitter.gain_ratio >= 0.0 && cfg.jitter.bias >= 0.0,
          "jitter ranges must be non-negative (scale below 1)");
  for (const auto& t : cfg.augment) {
    if (const auto* s = std::get_if<prep::Scale>(&t)) require(s->factor > 0.0, "scale factor must be positive");
  }
  require(cfg.cnn.learning_rate > 0.0, "cnn_learning_rate must be positive");
  require(cfg.cnn.epochs >= 0, "epochs must be >= 0");
  require(cfg.cnn.batch_size >= 1, "cnn_batch_size must be >= 1");
  require(cfg.cnn.weight_decay >= 0.0, "cnn_weight_decay must be >= 0");
  require(cfg.feature_dim >= 1, "feature_dim must be >= 1");
  require(cfg.svm.C > 0.0, "svm_c must be positive");
  require(cfg.svm.auto_gamma || cfg.svm.kernel.gamma > 0.0, "svm_gamma must be positive");
  require(cfg.svm.kernel.degree >= 1, "svm_degree must be >= 1");
  require(cfg.svm.weighting != svm::ClassWeighting::Manual ||
              (cfg.svm.positive_weight > 0.0 && cfg.svm.negative_weight > 0.0),
          "class weights must be positive");
  require(cfg.svm.tolerance > 0.0, "svm_tolerance must be positive");
  require(cfg.svm.max_passes >= 1, "svm_max_passes must be >= 1");
  require(cfg.calibration_fraction >= 0.0 && cfg.calibration_fraction < 1.0,
          "calibration_fraction must lie in [0, 1)");
}

std::string to_canonical_text(const PipelineConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) {
    out += f.key;
    out += '=';
    out += f.get(cfg);
    out += '\n';
  }
  return out;
}

PipelineConfig parse_config(std::string_view text) {
  PipelineConfig cfg;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    const std::size_t eq = line.find('=');
    const std::string_view key = eq == std::string_view::npos ? line : line.substr(0, eq);
    bool well_formed = eq != std::string_view::npos && !key.empty();
    for (char ch : key) well_formed = well_formed && ((ch >= 'a' && ch <= 'z') || ch == '_');
    if (!well_formed) {
      throw ConfigError("line " + std::to_string(line_no) + " is not key=value: '" +
                        std::string(line) + "'");
    }
    const Field* field = nullptr;
    for (const auto& f : fields()) {
      if (key == f.key) field = &f;
    }
    if (!field) throw ConfigError("unknown key '" + std::string(key) + "'");
    if (!seen.insert(std::string(key)).second) {
      throw ConfigError("key '" + std::string(key) + "' given twice");
    }
    field->set(cfg, line.substr(eq + 1));
  }
  validate(cfg);
  return cfg;
}

}  // namespace lungsvm::pipeline
