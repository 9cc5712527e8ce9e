#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "lungsvm/errors.hpp"
#include "lungsvm/pipeline.hpp"

namespace lungsvm::pipeline {

namespace {

constexpr std::array<std::uint8_t, 4> kMagic = {'H', 'C', 'S', 'V'};
constexpr std::uint8_t kVersion = 0x01;

enum LayerTag : std::uint8_t { kConv = 1, kRelu = 2, kPool = 3, kFlatten = 4, kDense = 5 };

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void f64s(const std::vector<double>& v) {
    u64(v.size());
    for (double x : v) f64(x);
  }
  void raw(std::span<const std::uint8_t> v) { bytes_.insert(bytes_.end(), v.begin(), v.end()); }
  void section(const Writer& body) {
    u64(body.bytes_.size());
    raw(body.bytes_);
  }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t count(std::size_t element_size) {
    const std::uint64_t n = u64();
    if (n > remaining() / element_size) throw FormatError("element count exceeds payload");
    return static_cast<std::size_t>(n);
  }
  std::vector<double> f64s() {
    std::vector<double> v(count(8));
    for (double& x : v) x = f64();
    return v;
  }
  Reader section() {
    const std::size_t n = count(1);
    Reader r(bytes_.subspan(pos_, n));
    pos_ += n;
    return r;
  }
  std::span<const std::uint8_t> rest() const { return bytes_.subspan(pos_); }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  void finish(const char* what) const {
    if (remaining() != 0) throw FormatError(std::string("trailing bytes in ") + what);
  }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw FormatError("truncated model file");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void write_cnn(Writer& w, const cnn::CnnModel& m) {
  for (std::size_t d : m.input_shape) w.u64(d);
  w.u64(m.feature_layer_index);
  w.u64(m.layers.size());
  for (const auto& layer : m.layers) {
    if (const auto* c = std::get_if<cnn::ConvLayer>(&layer)) {
      w.u8(kConv);
      w.u64(c->out_channels);
      w.u64(c->in_channels);
      w.u64(c->kernel);
      w.u64(c->stride);
      w.u64(c->padding);
      w.f64s(c->weights);
      w.f64s(c->bias);
    } else if (const auto* d = std::get_if<cnn::DenseLayer>(&layer)) {
      w.u8(kDense);
      w.u64(d->out_dim);
      w.u64(d->in_dim);
      w.f64s(d->weights);
      w.f64s(d->bias);
    } else if (std::holds_alternative<cnn::ReluLayer>(layer)) {
      w.u8(kRelu);
    } else if (std::holds_alternative<cnn::MaxPoolLayer>(layer)) {
      w.u8(kPool);
    } else {
      w.u8(kFlatten);
    }
  }
}

cnn::CnnModel read_cnn(Reader& r) {
  cnn::CnnModel m;
  for (auto& d : m.input_shape) d = r.u64();
  m.feature_layer_index = r.u64();
  const std::size_t n = r.count(1);
  for (std::size_t i = 0; i < n; ++i) {
    switch (r.u8()) {
      case kConv: {
        cnn::ConvLayer c;
        c.out_channels = r.u64();
        c.in_channels = r.u64();
        c.kernel = r.u64();
        c.stride = r.u64();
        c.padding = r.u64();
        c.weights = r.f64s();
        c.bias = r.f64s();
        m.layers.emplace_back(std::move(c));
        break;
      }
      case kDense: {
        cnn::DenseLayer d;
        d.out_dim = r.u64();
        d.in_dim = r.u64();
        d.weights = r.f64s();
        d.bias = r.f64s();
        m.layers.emplace_back(std::move(d));
        break;
      }
      case kRelu:
        m.layers.emplace_back(cnn::ReluLayer{});
        break;
      case kPool:
        m.layers.emplace_back(cnn::MaxPoolLayer{});
        break;
      case kFlatten:
        m.layers.emplace_back(cnn::FlattenLayer{});
        break;
      default:
        throw FormatError("unknown layer tag");
    }
  }
  try {
    cnn::validate(m);
  } catch (const ShapeError& e) {
    throw FormatError(std::string("inconsistent CNN section: ") + e.what());
  }
  return m;
}

void write_svm(Writer& w, const svm::SvmModel& m) {
  w.u8(static_cast<std::uint8_t>(m.kernel.kind));
  w.i64(m.kernel.degree);
  w.f64(m.kernel.coef0);
  w.f64(m.kernel.gamma);
  w.f64s(m.standardization.mean);
  w.f64s(m.standardization.stddev);
  w.u64(m.support_vectors.size());
  for (std::size_t i = 0; i < m.support_vectors.size(); ++i) {
    w.f64s(m.support_vectors[i].values);
    w.f64(m.alphas[i]);
    w.i64(m.sv_targets[i]);
    w.u64(m.sv_indices[i]);
  }
  w.f64(m.bias);
}

svm::SvmModel read_svm(Reader& r) {
  svm::SvmModel m;
  const std::uint8_t kind = r.u8();
  if (kind > static_cast<std::uint8_t>(svm::KernelKind::Rbf)) throw FormatError("unknown kernel");
  m.kernel.kind = static_cast<svm::KernelKind>(kind);
  m.kernel.degree = static_cast<int>(r.i64());
  m.kernel.coef0 = r.f64();
  m.kernel.gamma = r.f64();
  m.standardization.mean = r.f64s();
  m.standardization.stddev = r.f64s();
  if (m.standardization.mean.size() != m.standardization.stddev.size()) {
    throw FormatError("standardization vectors differ in length");
  }
  const std::size_t n = r.count(8 * 4);
  for (std::size_t i = 0; i < n; ++i) {
    FeatureVector sv{r.f64s()};
    if (sv.size() != m.dim()) throw FormatError("support vector dimension mismatch");
    m.support_vectors.push_back(std::move(sv));
    m.alphas.push_back(r.f64());
    const std::int64_t y = r.i64();
    if (y != 1 && y != -1) throw FormatError("support vector target must be +1 or -1");
    m.sv_targets.push_back(static_cast<int>(y));
    m.sv_indices.push_back(r.u64());
  }
  m.bias = r.f64();
  return m;
}

}  // namespace

std::vector<std::uint8_t> serialize_pipeline(const TrainedPipeline& p) {
  Writer out;
  out.raw(kMagic);
  out.u8(kVersion);

  Writer config;
  const std::string text = to_canonical_text(p.config);
  config.raw(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  out.section(config);

  Writer cnn_blob;
  write_cnn(cnn_blob, p.cnn);
  out.section(cnn_blob);

  Writer svm_blob;
  write_svm(svm_blob, p.svm);
  out.section(svm_blob);

  Writer cal;
  cal.f64(p.calibration.A);
  cal.f64(p.calibration.B);
  out.section(cal);
  return std::move(out.bytes());
}

TrainedPipeline deserialize_pipeline(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMagic.size() || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw FormatError("not a model file (bad magic)");
  }
  Reader r(bytes.subspan(kMagic.size()));
  const std::uint8_t version = r.u8();
  if (version != kVersion) {
    throw VersionError("unsupported model version " + std::to_string(version));
  }

  TrainedPipeline p;
  Reader config = r.section();
  const auto text_bytes = config.rest();
  try {
    p.config = parse_config(
        std::string_view(reinterpret_cast<const char*>(text_bytes.data()), text_bytes.size()));
  } catch (const ConfigError& e) {
    throw FormatError(std::string("bad config section: ") + e.what());
  }

  Reader cnn_blob = r.section();
  p.cnn = read_cnn(cnn_blob);
  cnn_blob.finish("CNN section");

  Reader svm_blob = r.section();
  p.svm = read_svm(svm_blob);
  svm_blob.finish("SVM section");

  Reader cal = r.section();
  p.calibration.A = cal.f64();
  p.calibration.B = cal.f64();
  cal.finish("calibration section");
  r.finish("model file");

  p.feature_dim = p.cnn.feature_dim();
  if (p.svm.dim() != p.feature_dim) throw FormatError("SVM dimension does not match CNN features");
  return p;
}

void save_pipeline(const TrainedPipeline& p, const std::filesystem::path& path) {
  const auto bytes = serialize_pipeline(p);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

TrainedPipeline load_pipeline(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize_pipeline(bytes);
}

}  // namespace lungsvm::pipeline
