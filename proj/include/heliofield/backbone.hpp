#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "heliofield/config.hpp"
#include "heliofield/encoding.hpp"
#include "heliofield/errors.hpp"
#include "heliofield/images.hpp"
#include "heliofield/nn/tensor.hpp"
#include "heliofield/rng.hpp"

namespace heliofield {

/// Stand-in image encoder: patchify, project each patch linearly, mean-pool
/// over patches. Because projection and pooling are both linear, the
/// embedding equals the projection applied to the mean patch vector, so
/// training only ever touches per-image patch means.

struct BackboneConfig {
  ImageGeometry geom;
  int patch = 8;
  int dim = 128;

  [[nodiscard]] int patch_dim() const { return patch * patch * geom.channels; }

  [[nodiscard]] int patch_count() const {
    return (geom.height / patch) * (geom.width / patch);
  }

  void validate() const {
    if (patch < 1 || dim < 1) throw ConfigError("backbone patch and dim must be positive");
    if (geom.height % patch != 0 || geom.width % patch != 0) {
      throw ConfigError("image size " + std::to_string(geom.height) + "x" +
                        std::to_string(geom.width) +
                        " is not divisible by patch size " + std::to_string(patch));
    }
  }

  static BackboneConfig from_config(const Config& cfg) {
    BackboneConfig b;
    b.geom = ImageGeometry::from_config(cfg);
    b.patch = static_cast<int>(cfg.i64("backbone.patch"));
    b.dim = static_cast<int>(cfg.i64("backbone.dim"));
    b.validate();
    return b;
  }
};

/// Mean over all patches of the flattened (dy, dx, channel) patch vectors.
/// Linearity makes this the sufficient statistic for the backbone.
inline std::vector<double> patch_mean(const std::vector<float>& pixels,
                                      const BackboneConfig& cfg) {
  if (pixels.size() != cfg.geom.pixel_count()) {
    throw DataError("image has " + std::to_string(pixels.size()) +
                    " values, backbone expects " +
                    std::to_string(cfg.geom.pixel_count()));
  }
  const int p = cfg.patch;
  const int w = cfg.geom.width;
  const int c = cfg.geom.channels;
  std::vector<double> mean(static_cast<std::size_t>(cfg.patch_dim()), 0.0);
  for (int py = 0; py < cfg.geom.height / p; ++py) {
    for (int px = 0; px < w / p; ++px) {
      std::size_t out = 0;
      for (int dy = 0; dy < p; ++dy) {
        const std::size_t row = static_cast<std::size_t>(py * p + dy) * w;
        for (int dx = 0; dx < p; ++dx) {
          const std::size_t pix = (row + px * p + dx) * c;
          for (int ch = 0; ch < c; ++ch) mean[out++] += pixels[pix + ch];
        }
      }
    }
  }
  const double inv = 1.0 / cfg.patch_count();
  for (double& v : mean) v *= inv;
  return mean;
}

struct MockBackbone {
  BackboneConfig cfg;
  neural::Tensor<double> weight;  // patch_dim x dim
  neural::Tensor<double> bias;    // dim

  MockBackbone() = default;

  explicit MockBackbone(BackboneConfig c)
      : cfg(c),
        weight(static_cast<std::size_t>(c.patch_dim()), static_cast<std::size_t>(c.dim)),
        bias(std::vector<std::size_t>{static_cast<std::size_t>(c.dim)}) {
    cfg.validate();
  }

  void init_random(Rng& rng) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.patch_dim()));
    for (double& v : weight.data) v = rng.normal(0.0, scale);
    bias.fill(0.0);
  }

  /// Rows of `means` are patch-mean vectors; returns B x dim embeddings.
  [[nodiscard]] neural::Tensor<double> forward(const neural::Tensor<double>& means) const {
    if (means.cols() != static_cast<std::size_t>(cfg.patch_dim())) {
      throw DataError("patch-mean width " + std::to_string(means.cols()) +
                      " does not match backbone input " +
                      std::to_string(cfg.patch_dim()));
    }
    return neural::affine(means, weight, bias);
  }

  [[nodiscard]] std::vector<double> embed(const std::vector<float>& pixels) const {
    std::vector<double> mean = patch_mean(pixels, cfg);
    neural::Tensor<double> m(1, mean.size());
    m.data = std::move(mean);
    neural::Tensor<double> e = forward(m);
    return e.data;
  }

  struct Grads {
    neural::Tensor<double> weight;
    neural::Tensor<double> bias;
    neural::Tensor<double> means;  // propagated input deltas, rarely used
  };

  [[nodiscard]] Grads backward(const neural::Tensor<double>& means,
                               const neural::Tensor<double>& d_embedding) const {
    Grads g;
    g.weight = neural::matmul_at_b(means, d_embedding);
    g.bias = neural::col_sums(d_embedding);
    g.means = neural::matmul_a_bt(d_embedding, weight);
    return g;
  }

  /// Ridge least-squares fit of [means | 1] -> targets; the synthetic
  /// stand-in for pretraining. Targets are one row per image.
  void fit_least_squares(const neural::Tensor<double>& means,
                         const neural::Tensor<double>& targets,
                         double ridge = 1e-6) {
    if (means.rows() != targets.rows()) {
      throw DataError("least-squares fit: row count mismatch");
    }
    if (targets.cols() != static_cast<std::size_t>(cfg.dim)) {
      throw DataError("least-squares fit: target width must equal backbone dim");
    }
    const Eigen::Index n = static_cast<Eigen::Index>(means.rows());
    const Eigen::Index p = static_cast<Eigen::Index>(means.cols());
    Eigen::MatrixXd a(n, p + 1);
    a.leftCols(p) = neural::emap(means);
    a.col(p).setOnes();
    Eigen::MatrixXd gram = a.transpose() * a;
    gram.diagonal().array() += ridge;
    Eigen::MatrixXd theta =
        gram.ldlt().solve(a.transpose() * neural::emap(targets));
    for (Eigen::Index i = 0; i < p; ++i) {
      for (Eigen::Index j = 0; j < theta.cols(); ++j) {
        weight(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = theta(i, j);
      }
    }
    for (Eigen::Index j = 0; j < theta.cols(); ++j) {
      bias[static_cast<std::size_t>(j)] = theta(p, j);
    }
  }
};

/// Embedding lookups computed on demand from stored images.
class BackboneEmbeddingProvider final : public EmbeddingProvider {
 public:
  BackboneEmbeddingProvider(const MockBackbone& backbone, const ImageSet& images)
      : backbone_(backbone), images_(images) {
    if (!(backbone.cfg.geom == images.geometry())) {
      throw DataError("backbone geometry does not match image file geometry");
    }
  }

  [[nodiscard]] int dim() const override { return backbone_.cfg.dim; }

  [[nodiscard]] std::vector<double> embedding(std::int64_t image_key) const override {
    return backbone_.embed(images_.get(image_key));
  }

 private:
  const MockBackbone& backbone_;
  const ImageSet& images_;
};

}  // namespace heliofield
