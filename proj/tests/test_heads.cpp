#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "heliofield/nn/heads.hpp"
#include "heliofield/nn/loss.hpp"
#include "heliofield/rng.hpp"

using namespace heliofield;
using namespace heliofield::neural;

namespace {

HeadConfig linear_head(int input_dim, int hidden, double dropout = 0.0) {
  HeadConfig cfg;
  cfg.kind = HeadKind::kLinear;
  cfg.input_dim = input_dim;
  cfg.hidden = hidden;
  cfg.dropout = dropout;
  cfg.validate();
  return cfg;
}

HeadConfig skip_head(int input_dim, int hidden, int layers, int interval,
                     double dropout = 0.0) {
  HeadConfig cfg;
  cfg.kind = HeadKind::kSkip;
  cfg.input_dim = input_dim;
  cfg.hidden = hidden;
  cfg.layers = layers;
  cfg.skip_interval = interval;
  cfg.dropout = dropout;
  cfg.validate();
  return cfg;
}

Tensor<double> random_batch(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor<double> x(rows, cols);
  for (double& v : x.data) v = rng.normal();
  return x;
}

}  // namespace

TEST_CASE("halving head widths follow 256 -> 128 -> 64 -> classes",
          "[heads]") {
  const HeadConfig cfg = linear_head(208, 256);
  REQUIRE(cfg.hidden_count() == 3);
  CHECK(cfg.hidden_width(1) == 256);
  CHECK(cfg.hidden_width(2) == 128);
  CHECK(cfg.hidden_width(3) == 64);
  const HeadParams p = HeadParams::shaped(cfg);
  REQUIRE(p.layers.size() == 4);
  CHECK(p.layers[0].weight.rows() == 208);
  CHECK(p.layers[0].weight.cols() == 256);
  CHECK(p.layers[1].weight.rows() == 256);
  CHECK(p.layers[1].weight.cols() == 128);
  CHECK(p.layers[2].weight.rows() == 128);
  CHECK(p.layers[2].weight.cols() == 64);
  CHECK(p.layers[3].weight.rows() == 64);
  CHECK(p.layers[3].weight.cols() == 4);
}

TEST_CASE("all-zero parameters yield uniform class probabilities",
          "[heads]") {
  const HeadConfig cfg = linear_head(16, 8);
  const HeadParams p = HeadParams::shaped(cfg);  // zero-initialized
  Rng rng(1);
  const Tensor<double> x = random_batch(5, 16, rng);
  const Tensor<double> logits = head_forward(cfg, p, x, nullptr, nullptr);
  for (double v : logits.data) REQUIRE(v == 0.0);
  const Tensor<double> probs = softmax(logits);
  for (double v : probs.data) REQUIRE(v == Catch::Approx(0.25).margin(1e-15));
}

TEST_CASE("fresh random head starts at the uniform prediction", "[heads]") {
  // Hidden layers are randomized but the logit layer starts at zero, so
  // the first forward pass is the uniform distribution regardless of
  // feature scale.
  Rng rng(9);
  for (const HeadConfig& cfg :
       {linear_head(32, 16), skip_head(32, 24, 4, 2)}) {
    Rng init(77);
    const HeadParams p = HeadParams::random_init(cfg, init);
    bool hidden_nonzero = false;
    for (std::size_t l = 0; l + 1 < p.layers.size(); ++l) {
      for (double v : p.layers[l].weight.data) {
        if (v != 0.0) hidden_nonzero = true;
      }
    }
    REQUIRE(hidden_nonzero);
    const Tensor<double> x = random_batch(4, 32, rng);
    const Tensor<double> logits = head_forward(cfg, p, x, nullptr, nullptr);
    for (double v : logits.data) REQUIRE(v == 0.0);
  }
}

TEST_CASE("skip head injects the input before layers 3 and 5", "[heads]") {
  const HeadConfig cfg = skip_head(10, 20, 5, 2);
  CHECK_FALSE(cfg.injects_input(1));
  CHECK_FALSE(cfg.injects_input(2));
  CHECK(cfg.injects_input(3));
  CHECK_FALSE(cfg.injects_input(4));
  CHECK(cfg.injects_input(5));
  CHECK(cfg.layer_input_dim(1) == 10);
  CHECK(cfg.layer_input_dim(2) == 20);
  CHECK(cfg.layer_input_dim(3) == 30);  // widened by the injected input
  CHECK(cfg.layer_input_dim(4) == 20);
  CHECK(cfg.layer_input_dim(5) == 30);
  const HeadParams p = HeadParams::shaped(cfg);
  REQUIRE(p.layers.size() == 6);
  CHECK(p.layers[2].weight.rows() == 30);
  CHECK(p.layers[4].weight.rows() == 30);
  CHECK(p.layers[5].weight.rows() == 20);
}

TEST_CASE("huge skip interval reduces to a plain constant-width MLP",
          "[heads]") {
  const HeadConfig cfg = skip_head(6, 12, 4, 100);
  for (int j = 1; j <= 4; ++j) {
    REQUIRE_FALSE(cfg.injects_input(j));
    REQUIRE(cfg.layer_input_dim(j) == (j == 1 ? 6 : 12));
  }
  Rng init(5);
  const HeadParams p = HeadParams::random_init(cfg, init);
  Rng rng(6);
  const Tensor<double> x = random_batch(3, 6, rng);
  const Tensor<double> logits = head_forward(cfg, p, x, nullptr, nullptr);

  // Hand-rolled MLP with the identical weights must agree exactly.
  Tensor<double> act = x;
  for (std::size_t l = 0; l + 1 < p.layers.size(); ++l) {
    act = affine(act, p.layers[l].weight, p.layers[l].bias);
    for (double& v : act.data) v = v > 0.0 ? v : 0.0;
  }
  const Tensor<double> manual =
      affine(act, p.layers.back().weight, p.layers.back().bias);
  REQUIRE(logits.data == manual.data);
}

TEST_CASE("head configuration validation", "[heads]") {
  CHECK_THROWS_AS(linear_head(16, 18), ConfigError);  // not a multiple of 4
  CHECK_THROWS_AS(linear_head(16, 0), ConfigError);
  CHECK_THROWS_AS(skip_head(16, 8, 0, 2), ConfigError);
  CHECK_THROWS_AS(skip_head(16, 8, 4, 0), ConfigError);
  CHECK_THROWS_AS(linear_head(0, 16), ConfigError);
  HeadConfig bad = linear_head(16, 16);
  bad.dropout = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(head_kind_from_name("conv"), ConfigError);
}

TEST_CASE("forward rejects mismatched input widths", "[heads]") {
  const HeadConfig cfg = linear_head(16, 8);
  const HeadParams p = HeadParams::shaped(cfg);
  Rng rng(2);
  const Tensor<double> x = random_batch(2, 15, rng);
  CHECK_THROWS_AS(head_forward(cfg, p, x, nullptr, nullptr), DataError);
}

TEST_CASE("dropout is inverted during training and absent at eval",
          "[heads]") {
  Rng rng(21);
  const double rate = 0.4;
  Tensor<double> mask = dropout_mask(200, 50, rate, rng);
  double sum = 0.0;
  std::size_t kept = 0;
  for (double v : mask.data) {
    REQUIRE((v == 0.0 || v == Catch::Approx(1.0 / (1.0 - rate))));
    sum += v;
    if (v != 0.0) ++kept;
  }
  // Kept fraction approximates 1 - rate; inverted scaling keeps E[mask] = 1.
  const double frac = static_cast<double>(kept) / mask.size();
  CHECK(frac == Catch::Approx(1.0 - rate).margin(0.02));
  CHECK(sum / mask.size() == Catch::Approx(1.0).margin(0.03));

  // Without an RNG the pass is deterministic eval: no mask is applied.
  const HeadConfig cfg = linear_head(8, 8, 0.5);
  Rng init(3);
  const HeadParams p = HeadParams::random_init(cfg, init);
  const Tensor<double> x = random_batch(4, 8, rng);
  const Tensor<double> a = head_forward(cfg, p, x, nullptr, nullptr);
  const Tensor<double> b = head_forward(cfg, p, x, nullptr, nullptr);
  REQUIRE(a.data == b.data);
}

TEST_CASE("training dropout is reproducible per rng seed", "[heads]") {
  const HeadConfig cfg = linear_head(8, 8, 0.3);
  Rng init(3);
  HeadParams p = HeadParams::random_init(cfg, init);
  // Randomize the logit layer so dropout differences reach the outputs.
  for (double& v : p.layers.back().weight.data) v = init.normal();
  Rng data_rng(11);
  const Tensor<double> x = random_batch(6, 8, data_rng);
  Rng d1(100), d2(100), d3(101);
  HeadCache c1, c2;
  const Tensor<double> a = head_forward(cfg, p, x, &d1, &c1);
  const Tensor<double> b = head_forward(cfg, p, x, &d2, &c2);
  REQUIRE(a.data == b.data);
  REQUIRE(c1.training);
  const Tensor<double> c = head_forward(cfg, p, x, &d3, nullptr);
  REQUIRE(a.data != c.data);
}

namespace {

/// Central-difference check of every parameter gradient against the
/// analytic backward pass, using the focal loss as the scalar objective.
void check_head_gradients(const HeadConfig& cfg, Rng& rng, double gamma) {
  HeadParams p = HeadParams::random_init(cfg, rng);
  // Randomize the logit layer too so its gradient path is exercised from
  // a non-degenerate starting point.
  for (double& v : p.layers.back().weight.data) v = rng.normal(0.0, 0.1);
  const std::size_t batch = 4;
  Tensor<double> x = random_batch(batch, static_cast<std::size_t>(cfg.input_dim), rng);
  std::vector<int> targets(batch);
  for (auto& t : targets) t = static_cast<int>(rng.below(4));
  const std::vector<double> alpha = {0.45, 0.3, 0.15, 0.1};

  auto objective = [&]() {
    const Tensor<double> logits = head_forward(cfg, p, x, nullptr, nullptr);
    return focal_loss(logits, targets, alpha, gamma).loss;
  };

  HeadCache cache;
  const Tensor<double> logits = head_forward(cfg, p, x, nullptr, &cache);
  const LossResult lr = focal_loss(logits, targets, alpha, gamma);
  const HeadGrads grads = head_backward(cfg, p, cache, lr.d_logits);

  const double h = 1e-5;
  auto check = [&](Tensor<double>& param, const Tensor<double>& grad,
                   std::size_t stride) {
    for (std::size_t i = 0; i < param.size(); i += stride) {
      const double keep = param[i];
      param[i] = keep + h;
      const double plus = objective();
      param[i] = keep - h;
      const double minus = objective();
      param[i] = keep;
      const double fd = (plus - minus) / (2.0 * h);
      const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-8});
      if (std::abs(fd) < 1e-12 && std::abs(grad[i]) < 1e-12) continue;
      REQUIRE(std::abs(fd - grad[i]) / denom < 1e-4);
    }
  };
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    check(p.layers[l].weight, grads.layers[l].weight, 5);
    check(p.layers[l].bias, grads.layers[l].bias, 1);
  }

  // Input gradient via the same objective with x perturbed.
  for (std::size_t i = 0; i < x.size(); i += 7) {
    const double keep = x[i];
    x[i] = keep + h;
    const double plus = objective();
    x[i] = keep - h;
    const double minus = objective();
    x[i] = keep;
    const double fd = (plus - minus) / (2.0 * h);
    const double denom = std::max({std::abs(fd), std::abs(grads.input[i]), 1e-8});
    if (std::abs(fd) < 1e-12 && std::abs(grads.input[i]) < 1e-12) continue;
    REQUIRE(std::abs(fd - grads.input[i]) / denom < 1e-4);
  }
}

}  // namespace

TEST_CASE("halving head gradients match finite differences", "[heads]") {
  Rng rng(400);
  check_head_gradients(linear_head(12, 16), rng, 2.0);
  check_head_gradients(linear_head(12, 8), rng, 0.0);
}

TEST_CASE("skip head gradients match finite differences", "[heads]") {
  Rng rng(500);
  check_head_gradients(skip_head(10, 14, 4, 2), rng, 2.0);
  check_head_gradients(skip_head(10, 9, 5, 3), rng, 3.0);
  check_head_gradients(skip_head(10, 9, 1, 1), rng, 0.0);
}
