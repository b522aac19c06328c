#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "heliofield/config.hpp"
#include "heliofield/errors.hpp"
#include "heliofield/nn/tensor.hpp"
#include "heliofield/rng.hpp"

namespace heliofield::neural {

/// The two classification heads. The pyramid head halves its width twice:
/// [h, h/2, h/4] then 4 logits. The skip head keeps every hidden layer at
/// width h and concatenates the original input to the activation before
/// the linear map of layers k+1, 2k+1, ... (1-based, never the first).

enum class HeadKind { kLinear, kSkip };

inline HeadKind head_kind_from_name(const std::string& name) {
  if (name == "linear") return HeadKind::kLinear;
  if (name == "skip") return HeadKind::kSkip;
  throw ConfigError("unknown head kind '" + name + "' (expected linear or skip)");
}

inline const char* head_kind_name(HeadKind k) {
  return k == HeadKind::kLinear ? "linear" : "skip";
}

struct HeadConfig {
  HeadKind kind = HeadKind::kLinear;
  int input_dim = 0;
  int hidden = 256;
  int layers = 4;         // hidden layer count, skip head only
  int skip_interval = 2;  // k, skip head only
  double dropout = 0.1;
  int classes = 4;

  void validate() const {
    if (input_dim < 1) throw ConfigError("head input dimension must be >= 1");
    if (classes < 2) throw ConfigError("head must emit at least two classes");
    if (!(dropout >= 0.0 && dropout < 1.0)) {
      throw ConfigError("dropout must lie in [0, 1)");
    }
    if (kind == HeadKind::kLinear) {
      if (hidden < 4 || hidden % 4 != 0) {
        throw ConfigError("linear head hidden size must be a positive multiple "
                          "of 4, got " + std::to_string(hidden));
      }
    } else {
      if (hidden < 1) throw ConfigError("skip head hidden size must be >= 1");
      if (layers < 1) throw ConfigError("skip head needs at least one hidden layer");
      if (skip_interval < 1) throw ConfigError("skip interval must be >= 1");
    }
  }

  static HeadConfig from_config(const Config& cfg, int input_dim) {
    HeadConfig h;
    h.kind = head_kind_from_name(cfg.str("head.kind"));
    h.input_dim = input_dim;
    h.hidden = static_cast<int>(cfg.i64("head.hidden"));
    h.layers = static_cast<int>(cfg.i64("head.layers"));
    h.skip_interval = static_cast<int>(cfg.i64("head.skip_interval"));
    h.dropout = cfg.f64("head.dropout");
    h.validate();
    return h;
  }

  [[nodiscard]] int hidden_count() const {
    return kind == HeadKind::kLinear ? 3 : layers;
  }

  /// Width of hidden layer j (1-based).
  [[nodiscard]] int hidden_width(int j) const {
    if (kind == HeadKind::kLinear) return hidden >> (j - 1);
    return hidden;
  }

  /// Whether the original input is concatenated before layer j's linear map.
  [[nodiscard]] bool injects_input(int j) const {
    return kind == HeadKind::kSkip && j > 1 && (j - 1) % skip_interval == 0;
  }

  [[nodiscard]] int layer_input_dim(int j) const {
    if (j == 1) return input_dim;
    int base = hidden_width(j - 1);
    return injects_input(j) ? base + input_dim : base;
  }
};

struct DenseLayer {
  Tensor<double> weight;  // fan_in x fan_out
  Tensor<double> bias;    // fan_out

  DenseLayer() = default;
  DenseLayer(std::size_t fan_in, std::size_t fan_out)
      : weight(fan_in, fan_out), bias(std::vector<std::size_t>{fan_out}) {}
};

struct HeadParams {
  std::vector<DenseLayer> layers;  // hidden layers then the logit layer

  static HeadParams shaped(const HeadConfig& cfg) {
    cfg.validate();
    HeadParams p;
    for (int j = 1; j <= cfg.hidden_count(); ++j) {
      p.layers.emplace_back(static_cast<std::size_t>(cfg.layer_input_dim(j)),
                            static_cast<std::size_t>(cfg.hidden_width(j)));
    }
    p.layers.emplace_back(
        static_cast<std::size_t>(cfg.hidden_width(cfg.hidden_count())),
        static_cast<std::size_t>(cfg.classes));
    return p;
  }

  /// He initialization on hidden layers; the logit layer starts at zero so
  /// a fresh head predicts the uniform distribution regardless of feature
  /// scale, which keeps early training comparable across backbones.
  static HeadParams random_init(const HeadConfig& cfg, Rng& rng) {
    HeadParams p = shaped(cfg);
    for (std::size_t l = 0; l + 1 < p.layers.size(); ++l) {
      const double fan_in = static_cast<double>(p.layers[l].weight.rows());
      const double scale = std::sqrt(2.0 / fan_in);
      for (double& v : p.layers[l].weight.data) v = rng.normal(0.0, scale);
    }
    return p;
  }
};

/// Everything the backward pass needs, captured during a training forward.
struct HeadCache {
  std::vector<Tensor<double>> inputs;   // post-concat input of every layer
  std::vector<Tensor<double>> preacts;  // hidden pre-activations
  std::vector<Tensor<double>> masks;    // inverted-dropout masks, empty in eval
  bool training = false;
};

inline Tensor<double> dropout_mask(std::size_t rows, std::size_t cols,
                                   double rate, Rng& rng) {
  Tensor<double> mask(rows, cols);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& v : mask.data) v = rng.uniform() < rate ? 0.0 : keep_scale;
  return mask;
}

/// Forward pass. Training mode (dropout sampled from `dropout_rng`) is
/// enabled by passing an RNG; evaluation applies no dropout and needs no
/// rescale because masks carry inverted scaling.
inline Tensor<double> head_forward(const HeadConfig& cfg, const HeadParams& params,
                                   const Tensor<double>& x, Rng* dropout_rng,
                                   HeadCache* cache) {
  if (x.cols() != static_cast<std::size_t>(cfg.input_dim)) {
    throw DataError("head input width " + std::to_string(x.cols()) +
                    " does not match configured " + std::to_string(cfg.input_dim));
  }
  const bool training = dropout_rng != nullptr && cfg.dropout > 0.0;
  if (cache != nullptr) {
    cache->inputs.clear();
    cache->preacts.clear();
    cache->masks.clear();
    cache->training = training;
  }
  Tensor<double> act = x;
  for (int j = 1; j <= cfg.hidden_count(); ++j) {
    Tensor<double> in = (j == 1) ? act : (cfg.injects_input(j) ? hconcat(act, x) : act);
    const DenseLayer& layer = params.layers[static_cast<std::size_t>(j - 1)];
    Tensor<double> z = affine(in, layer.weight, layer.bias);
    if (cache != nullptr) {
      cache->inputs.push_back(std::move(in));
      cache->preacts.push_back(z);
    }
    for (double& v : z.data) v = v > 0.0 ? v : 0.0;
    if (training) {
      Tensor<double> mask = dropout_mask(z.rows(), z.cols(), cfg.dropout, *dropout_rng);
      for (std::size_t i = 0; i < z.size(); ++i) z[i] *= mask[i];
      if (cache != nullptr) cache->masks.push_back(std::move(mask));
    }
    act = std::move(z);
  }
  const DenseLayer& out = params.layers.back();
  Tensor<double> logits = affine(act, out.weight, out.bias);
  if (cache != nullptr) cache->inputs.push_back(std::move(act));
  return logits;
}

struct HeadGrads {
  std::vector<DenseLayer> layers;
  Tensor<double> input;  // d loss / d x, summed over direct and skip paths
};

inline HeadGrads head_backward(const HeadConfig& cfg, const HeadParams& params,
                               const HeadCache& cache,
                               const Tensor<double>& d_logits) {
  const int n = cfg.hidden_count();
  HeadGrads g;
  g.layers.resize(params.layers.size());
  g.input = Tensor<double>(d_logits.rows(), static_cast<std::size_t>(cfg.input_dim));

  const DenseLayer& out = params.layers.back();
  g.layers.back().weight = matmul_at_b(cache.inputs.back(), d_logits);
  g.layers.back().bias = col_sums(d_logits);
  Tensor<double> d_act = matmul_a_bt(d_logits, out.weight);

  for (int j = n; j >= 1; --j) {
    const std::size_t idx = static_cast<std::size_t>(j - 1);
    const Tensor<double>& z = cache.preacts[idx];
    Tensor<double> dz = std::move(d_act);
    if (cache.training) {
      const Tensor<double>& mask = cache.masks[idx];
      for (std::size_t i = 0; i < dz.size(); ++i) dz[i] *= mask[i];
    }
    for (std::size_t i = 0; i < dz.size(); ++i) {
      if (z[i] <= 0.0) dz[i] = 0.0;
    }
    g.layers[idx].weight = matmul_at_b(cache.inputs[idx], dz);
    g.layers[idx].bias = col_sums(dz);
    Tensor<double> d_in = matmul_a_bt(dz, params.layers[idx].weight);
    if (j == 1) {
      for (std::size_t i = 0; i < d_in.size(); ++i) g.input[i] += d_in[i];
    } else if (cfg.injects_input(j)) {
      const std::size_t base = static_cast<std::size_t>(cfg.hidden_width(j - 1));
      d_act = slice_cols(d_in, 0, base);
      Tensor<double> dx = slice_cols(d_in, base, d_in.cols());
      for (std::size_t i = 0; i < dx.size(); ++i) g.input[i] += dx[i];
    } else {
      d_act = std::move(d_in);
    }
  }
  return g;
}

}  // namespace heliofield::neural
