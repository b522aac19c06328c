#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "heliofield/config.hpp"
#include "heliofield/constants.hpp"
#include "heliofield/errors.hpp"
#include "heliofield/nn/tensor.hpp"

namespace heliofield::neural {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;

  static AdamConfig from_config(const Config& cfg) {
    AdamConfig a;
    a.lr = cfg.f64("optimizer.lr");
    a.beta1 = cfg.f64("optimizer.beta1");
    a.beta2 = cfg.f64("optimizer.beta2");
    a.eps = cfg.f64("optimizer.eps");
    a.weight_decay = cfg.f64("optimizer.weight_decay");
    if (!(a.lr > 0.0)) throw ConfigError("optimizer.lr must be > 0");
    if (!(a.beta1 >= 0.0 && a.beta1 < 1.0) || !(a.beta2 >= 0.0 && a.beta2 < 1.0)) {
      throw ConfigError("Adam betas must lie in [0, 1)");
    }
    if (!(a.eps > 0.0)) throw ConfigError("optimizer.eps must be > 0");
    if (a.weight_decay < 0.0) throw ConfigError("optimizer.weight_decay must be >= 0");
    return a;
  }
};

/// First/second moment accumulators, one pair per parameter tensor.
struct AdamState {
  std::vector<Tensor<double>> m;
  std::vector<Tensor<double>> v;
  long long t = 0;

  static AdamState for_params(const std::vector<const Tensor<double>*>& params) {
    AdamState s;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const Tensor<double>* p : params) {
      s.m.emplace_back(p->shape);
      s.v.emplace_back(p->shape);
    }
    return s;
  }
};

/// One bias-corrected update with decoupled weight decay. The learning
/// rate is taken from `lr` (scheduler output), not cfg.lr.
inline void adam_step(const std::vector<Tensor<double>*>& params,
                      const std::vector<const Tensor<double>*>& grads,
                      AdamState& state, const AdamConfig& cfg, double lr) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw DataError("adam_step: parameter, gradient, and state counts differ");
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor<double>& p = *params[k];
    const Tensor<double>& g = *grads[k];
    if (!p.same_shape(g)) {
      throw DataError("adam_step: gradient shape mismatch for tensor " +
                      std::to_string(k));
    }
    Tensor<double>& m = state.m[k];
    Tensor<double>& v = state.v[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      if (!std::isfinite(gi)) {
        throw NumericError("non-finite gradient (value " + std::to_string(gi) +
                           ") in tensor " + std::to_string(k) + " at element " +
                           std::to_string(i) + ", step " + std::to_string(state.t));
      }
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps) + lr * cfg.weight_decay * p[i];
    }
  }
}

enum class SchedulerKind { kPlateau, kCosine };

inline SchedulerKind scheduler_kind_from_name(const std::string& name) {
  if (name == "plateau") return SchedulerKind::kPlateau;
  if (name == "cosine") return SchedulerKind::kCosine;
  throw ConfigError("unknown scheduler kind '" + name +
                    "' (expected plateau or cosine)");
}

/// Multiplies the learning rate by `factor` once `patience` consecutive
/// epochs fail to improve the best validation loss by more than min_delta.
struct PlateauScheduler {
  double factor = 0.5;
  int patience = 3;
  double min_delta = 1e-4;

  double best = std::numeric_limits<double>::infinity();
  int bad_epochs = 0;

  double step(double lr, double val_loss) {
    if (val_loss < best - min_delta) {
      best = val_loss;
      bad_epochs = 0;
      return lr;
    }
    if (++bad_epochs >= patience) {
      bad_epochs = 0;
      return lr * factor;
    }
    return lr;
  }
};

/// lr(t) = lr_min + (lr_max - lr_min)/2 (1 + cos(pi t / T)), clamped to
/// lr_min beyond the period.
struct CosineSchedule {
  double lr_max = 1e-3;
  double lr_min = 0.0;
  int period = 50;

  [[nodiscard]] double at(long long epoch) const {
    if (epoch >= period) return lr_min;
    const double phase = constants::kPi * static_cast<double>(epoch) / static_cast<double>(period);
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(phase));
  }
};

/// Stage-local learning-rate control: ask for the epoch's rate up front,
/// report the validation loss afterwards.
struct Scheduler {
  SchedulerKind kind = SchedulerKind::kPlateau;
  PlateauScheduler plateau;
  CosineSchedule cosine;
  double current = 1e-3;

  static Scheduler from_config(const Config& cfg) {
    Scheduler s;
    s.kind = scheduler_kind_from_name(cfg.str("scheduler.kind"));
    s.plateau.factor = cfg.f64("scheduler.plateau_factor");
    s.plateau.patience = static_cast<int>(cfg.i64("scheduler.plateau_patience"));
    s.plateau.min_delta = cfg.f64("scheduler.plateau_min_delta");
    s.cosine.lr_max = cfg.f64("optimizer.lr");
    s.cosine.lr_min = cfg.f64("scheduler.cosine_lr_min");
    s.cosine.period = static_cast<int>(cfg.i64("scheduler.cosine_period"));
    s.current = cfg.f64("optimizer.lr");
    if (!(s.plateau.factor > 0.0 && s.plateau.factor < 1.0)) {
      throw ConfigError("scheduler.plateau_factor must lie in (0, 1)");
    }
    if (s.plateau.patience < 1) throw ConfigError("scheduler.plateau_patience must be >= 1");
    if (s.cosine.period < 1) throw ConfigError("scheduler.cosine_period must be >= 1");
    return s;
  }

  /// Learning rate to use for 0-based stage-local `epoch`.
  [[nodiscard]] double rate_for_epoch(long long epoch) const {
    return kind == SchedulerKind::kCosine ? cosine.at(epoch) : current;
  }

  void observe_validation(double val_loss) {
    if (kind == SchedulerKind::kPlateau) {
      current = plateau.step(current, val_loss);
    }
  }
};

}  // namespace heliofield::neural
