#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "heliofield/backbone.hpp"
#include "heliofield/rng.hpp"

using namespace heliofield;

namespace {

BackboneConfig tiny_config() {
  BackboneConfig cfg;
  cfg.geom = ImageGeometry{4, 4, 2};
  cfg.patch = 2;
  cfg.dim = 3;
  cfg.validate();
  return cfg;
}

}  // namespace

TEST_CASE("patch means average positionally across patches", "[backbone]") {
  const BackboneConfig cfg = tiny_config();
  REQUIRE(cfg.patch_dim() == 8);   // 2 x 2 x 2 channels
  REQUIRE(cfg.patch_count() == 4);

  // Pixel value encodes its own (row, col, channel) so the expected mean
  // per in-patch position is computable by hand.
  std::vector<float> pixels(cfg.geom.pixel_count());
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      for (int c = 0; c < 2; ++c) {
        pixels[static_cast<std::size_t>((y * 4 + x) * 2 + c)] =
            static_cast<float>(100 * y + 10 * x + c);
      }
    }
  }
  const auto mean = patch_mean(pixels, cfg);
  REQUIRE(mean.size() == 8);
  // In-patch position (dy, dx, c) averages over patch origins
  // (0,0), (0,2), (2,0), (2,2): mean row offset 1, mean col offset 1.
  for (int dy = 0; dy < 2; ++dy) {
    for (int dx = 0; dx < 2; ++dx) {
      for (int c = 0; c < 2; ++c) {
        const double expect = 100.0 * (dy + 1.0) + 10.0 * (dx + 1.0) + c;
        REQUIRE(mean[static_cast<std::size_t>((dy * 2 + dx) * 2 + c)] ==
                Catch::Approx(expect).margin(1e-12));
      }
    }
  }
}

TEST_CASE("constant image collapses to a constant patch vector",
          "[backbone]") {
  const BackboneConfig cfg = tiny_config();
  const std::vector<float> pixels(cfg.geom.pixel_count(), 2.5f);
  for (double v : patch_mean(pixels, cfg)) {
    REQUIRE(v == Catch::Approx(2.5).margin(1e-12));
  }
}

TEST_CASE("patch mean validates pixel counts and geometry", "[backbone]") {
  const BackboneConfig cfg = tiny_config();
  CHECK_THROWS_AS(patch_mean(std::vector<float>(7, 0.0f), cfg), DataError);
  BackboneConfig bad = cfg;
  bad.patch = 3;  // 4 is not divisible by 3
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("zero weights embed everything to the bias", "[backbone]") {
  MockBackbone bb(tiny_config());
  bb.weight.fill(0.0);
  bb.bias.fill(0.25);
  const std::vector<float> pixels(bb.cfg.geom.pixel_count(), 1.0f);
  const auto e = bb.embed(pixels);
  REQUIRE(e.size() == 3);
  for (double v : e) REQUIRE(v == 0.25);
}

TEST_CASE("random init is deterministic per seed", "[backbone]") {
  MockBackbone a(tiny_config()), b(tiny_config());
  Rng ra(42), rb(42), rc(43);
  a.init_random(ra);
  b.init_random(rb);
  REQUIRE(a.weight.data == b.weight.data);
  MockBackbone c(tiny_config());
  c.init_random(rc);
  REQUIRE(a.weight.data != c.weight.data);
}

TEST_CASE("backward pass matches finite differences", "[backbone]") {
  MockBackbone bb(tiny_config());
  Rng rng(7);
  bb.init_random(rng);
  const std::size_t batch = 3;
  neural::Tensor<double> means(batch, static_cast<std::size_t>(bb.cfg.patch_dim()));
  for (double& v : means.data) v = rng.normal();
  neural::Tensor<double> d_emb(batch, static_cast<std::size_t>(bb.cfg.dim));
  for (double& v : d_emb.data) v = rng.normal();

  const auto grads = bb.backward(means, d_emb);
  // Scalar objective sum(forward .* d_emb) so dO/dtheta is linear.
  auto objective = [&]() {
    const auto out = bb.forward(means);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * d_emb[i];
    return s;
  };
  const double h = 1e-6;
  for (std::size_t i = 0; i < bb.weight.size(); i += 7) {
    const double keep = bb.weight[i];
    bb.weight[i] = keep + h;
    const double plus = objective();
    bb.weight[i] = keep - h;
    const double minus = objective();
    bb.weight[i] = keep;
    const double fd = (plus - minus) / (2.0 * h);
    REQUIRE(std::abs(fd - grads.weight[i]) /
                std::max(1.0, std::abs(fd)) < 1e-6);
  }
  for (std::size_t i = 0; i < bb.bias.size(); ++i) {
    const double keep = bb.bias[i];
    bb.bias[i] = keep + h;
    const double plus = objective();
    bb.bias[i] = keep - h;
    const double minus = objective();
    bb.bias[i] = keep;
    const double fd = (plus - minus) / (2.0 * h);
    REQUIRE(std::abs(fd - grads.bias[i]) / std::max(1.0, std::abs(fd)) < 1e-6);
  }
}

TEST_CASE("least squares recovers an exact linear map", "[backbone]") {
  const BackboneConfig cfg = tiny_config();
  Rng rng(99);
  MockBackbone truth(cfg);
  truth.init_random(rng);
  for (double& v : truth.bias.data) v = rng.normal();

  const std::size_t n = 64;
  neural::Tensor<double> means(n, static_cast<std::size_t>(cfg.patch_dim()));
  for (double& v : means.data) v = rng.normal();
  const neural::Tensor<double> targets = truth.forward(means);

  MockBackbone fitted(cfg);
  fitted.fit_least_squares(means, targets, 1e-10);
  for (std::size_t i = 0; i < truth.weight.size(); ++i) {
    REQUIRE(fitted.weight[i] == Catch::Approx(truth.weight[i]).margin(1e-6));
  }
  for (std::size_t i = 0; i < truth.bias.size(); ++i) {
    REQUIRE(fitted.bias[i] == Catch::Approx(truth.bias[i]).margin(1e-6));
  }
}

TEST_CASE("least squares validates shapes", "[backbone]") {
  MockBackbone bb(tiny_config());
  neural::Tensor<double> means(4, 8);
  neural::Tensor<double> bad_rows(3, 3);
  CHECK_THROWS_AS(bb.fit_least_squares(means, bad_rows), DataError);
  neural::Tensor<double> bad_cols(4, 2);
  CHECK_THROWS_AS(bb.fit_least_squares(means, bad_cols), DataError);
}

TEST_CASE("on-demand provider embeds stored images", "[backbone]") {
  const BackboneConfig cfg = tiny_config();
  MockBackbone bb(cfg);
  Rng rng(3);
  bb.init_random(rng);
  ImageSet images(cfg.geom);
  std::vector<float> pixels(cfg.geom.pixel_count());
  for (auto& v : pixels) v = static_cast<float>(rng.normal());
  images.put(1000, pixels);

  BackboneEmbeddingProvider provider(bb, images);
  REQUIRE(provider.dim() == 3);
  REQUIRE(provider.embedding(1000) == bb.embed(pixels));

  ImageSet wrong(ImageGeometry{8, 8, 2});
  CHECK_THROWS_AS(BackboneEmbeddingProvider(bb, wrong), DataError);
}
