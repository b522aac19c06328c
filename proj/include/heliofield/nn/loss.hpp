#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "heliofield/errors.hpp"
#include "heliofield/nn/tensor.hpp"

namespace heliofield::neural {

/// Losses over a logits batch. Probabilities always go through the
/// log-sum-exp path; p_t itself is never formed before the log.

inline Tensor<double> softmax(const Tensor<double>& logits) {
  Tensor<double> p(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    double zmax = logits(i, 0);
    for (std::size_t j = 1; j < logits.cols(); ++j) zmax = std::max(zmax, logits(i, j));
    double denom = 0.0;
    for (std::size_t j = 0; j < logits.cols(); ++j) {
      p(i, j) = std::exp(logits(i, j) - zmax);
      denom += p(i, j);
    }
    for (std::size_t j = 0; j < logits.cols(); ++j) p(i, j) /= denom;
  }
  return p;
}

inline std::size_t argmax_row(const Tensor<double>& m, std::size_t i) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < m.cols(); ++j) {
    if (m(i, j) > m(i, best)) best = j;
  }
  return best;
}

struct LossResult {
  double loss = 0.0;
  Tensor<double> d_logits;
};

/// Mean over the batch of -alpha_t (1 - p_t)^gamma log p_t, with the
/// analytic gradient
///   dL/dz_j = alpha_t [gamma p_t u^{gamma-1} log p_t - u^gamma]
///             (delta_{tj} - p_j) / B,   u = 1 - p_t.
/// gamma = 0 with unit alpha reduces exactly to cross-entropy.
inline LossResult focal_loss(const Tensor<double>& logits,
                             const std::vector<int>& targets,
                             const std::vector<double>& alpha, double gamma) {
  const std::size_t batch = logits.rows();
  const std::size_t classes = logits.cols();
  if (targets.size() != batch) {
    throw DataError("focal loss: target count " + std::to_string(targets.size()) +
                    " does not match batch size " + std::to_string(batch));
  }
  if (alpha.size() != classes) {
    throw DataError("focal loss: alpha has " + std::to_string(alpha.size()) +
                    " entries for " + std::to_string(classes) + " classes");
  }
  for (double a : alpha) {
    if (!(a > 0.0)) throw ConfigError("focal loss alpha entries must be > 0");
  }
  if (!(gamma >= 0.0)) throw ConfigError("focal loss gamma must be >= 0");

  LossResult result;
  result.d_logits = Tensor<double>(batch, classes);
  const double inv_batch = 1.0 / static_cast<double>(batch);
  std::vector<double> p(classes);

  for (std::size_t i = 0; i < batch; ++i) {
    const int t = targets[i];
    if (t < 0 || static_cast<std::size_t>(t) >= classes) {
      throw DataError("focal loss: target index " + std::to_string(t) +
                      " out of range at row " + std::to_string(i));
    }
    double zmax = logits(i, 0);
    for (std::size_t j = 1; j < classes; ++j) zmax = std::max(zmax, logits(i, j));
    double denom = 0.0;
    for (std::size_t j = 0; j < classes; ++j) {
      p[j] = std::exp(logits(i, j) - zmax);
      denom += p[j];
    }
    const double lse = zmax + std::log(denom);
    for (std::size_t j = 0; j < classes; ++j) p[j] /= denom;

    const double log_pt = logits(i, static_cast<std::size_t>(t)) - lse;
    const double pt = std::exp(log_pt);
    const double u = -std::expm1(log_pt);  // 1 - p_t without cancellation
    const double a = alpha[static_cast<std::size_t>(t)];

    result.loss += -a * std::pow(u, gamma) * log_pt * inv_batch;

    // u -> 0 makes u^{gamma-1} blow up for gamma < 1 while log p_t -> 0
    // faster; the product's limit is 0 for any gamma > 0.
    const double focus = (gamma > 0.0 && u <= 0.0)
                             ? 0.0
                             : gamma * pt * std::pow(u, gamma - 1.0) * log_pt;
    const double scale = a * (focus - std::pow(u, gamma));
    for (std::size_t j = 0; j < classes; ++j) {
      const double indicator = (static_cast<std::size_t>(t) == j) ? 1.0 : 0.0;
      result.d_logits(i, j) = scale * (indicator - p[j]) * inv_batch;
    }
  }
  return result;
}

inline LossResult cross_entropy(const Tensor<double>& logits,
                                const std::vector<int>& targets) {
  return focal_loss(logits, targets,
                    std::vector<double>(logits.cols(), 1.0), 0.0);
}

enum class LossKind { kFocal, kCrossEntropy };

inline LossKind loss_kind_from_name(const std::string& name) {
  if (name == "focal") return LossKind::kFocal;
  if (name == "cross_entropy") return LossKind::kCrossEntropy;
  throw ConfigError("unknown loss kind '" + name +
                    "' (expected focal or cross_entropy)");
}

struct LossSpec {
  LossKind kind = LossKind::kFocal;
  double gamma = 2.0;
  std::vector<double> alpha;  // indexed by class id

  [[nodiscard]] LossResult evaluate(const Tensor<double>& logits,
                                    const std::vector<int>& targets) const {
    if (kind == LossKind::kCrossEntropy) return cross_entropy(logits, targets);
    return focal_loss(logits, targets, alpha, gamma);
  }
};

}  // namespace heliofield::neural
