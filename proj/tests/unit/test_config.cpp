#include <doctest.h>

#include "lungsvm/config.hpp"
#include "lungsvm/errors.hpp"

using namespace lungsvm;
using namespace lungsvm::pipeline;

TEST_CASE("defaults round-trip through canonical text") {
  const PipelineConfig d;
  const std::string text = to_canonical_text(d);
  CHECK(to_canonical_text(parse_config(text)) == text);
  CHECK(to_canonical_text(parse_config("")) == text);
  CHECK(text.find("epochs=15\n") != std::string::npos);
  CHECK(text.find("svm_gamma=auto\n") != std::string::npos);
}

TEST_CASE("overrides, comments and blank lines") {
  const PipelineConfig c = parse_config(
      "# tuned run\n\nseed=5\nepochs=2\nsvm_c=0.1\ndenoise=nlm\nnlm_h=0.05\n"
      "svm_kernel=polynomial\nsvm_degree=2\nsvm_coef_zero=1.5\n"
      "svm_class_weight=manual:2:0.5\naugment=fliph,rotate:90,translate:1:-2\n"
      "task=benign_vs_malignant\nsegmentation=on\n");
  CHECK(c.seed == 5);
  CHECK(c.cnn.epochs == 2);
  CHECK(c.svm.C == 0.1);
  CHECK(c.denoise == DenoiseKind::Nlm);
  CHECK(c.nlm_h == 0.05);
  CHECK(c.svm.kernel.kind == svm::KernelKind::Polynomial);
  CHECK(c.svm.kernel.degree == 2);
  CHECK(c.svm.kernel.coef0 == 1.5);
  CHECK(c.svm.weighting == svm::ClassWeighting::Manual);
  CHECK(c.svm.positive_weight == 2.0);
  CHECK(c.svm.negative_weight == 0.5);
  CHECK(c.augment.size() == 3);
  CHECK(c.task == BinaryTask::BenignVsMalignant);
  CHECK(c.segmentation);
  CHECK(to_canonical_text(parse_config(to_canonical_text(c))) == to_canonical_text(c));

  const PipelineConfig g = parse_config("svm_gamma=0.25\naugment=none\n");
  CHECK_FALSE(g.svm.auto_gamma);
  CHECK(g.svm.kernel.gamma == 0.25);
  CHECK(g.augment.empty());
}

TEST_CASE("numbers keep full precision") {
  PipelineConfig c;
  c.cnn.learning_rate = 0.1 + 0.2;
  c.gaussian_sigma = 1.0 / 3.0;
  const PipelineConfig back = parse_config(to_canonical_text(c));
  CHECK(back.cnn.learning_rate == c.cnn.learning_rate);
  CHECK(back.gaussian_sigma == c.gaussian_sigma);
  CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("malformed configuration is rejected") {
  for (std::string text : {"colour=blue\n", "seed\n", "seed=abc\n", "epochs=-1\n", "svm_c=0\n",
                           "denoise=median\n", "window_low=500\n", "svm_kernel=sigmoid\n",
                           "seed=1\nseed=2\n", "calibration_fraction=1.5\n", "augment=rotate:left\n", "augment=rotate:1:2\n",
                           "segmentation=maybe\n", "resolution=0\n"}) {
    CAPTURE(text);
    CHECK_THROWS_AS(parse_config(text), ConfigError);
  }
}
