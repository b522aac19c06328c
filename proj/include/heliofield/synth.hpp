#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "heliofield/config.hpp"
#include "heliofield/connectivity.hpp"
#include "heliofield/constants.hpp"
#include "heliofield/errors.hpp"
#include "heliofield/images.hpp"
#include "heliofield/plasma.hpp"
#include "heliofield/rng.hpp"
#include "heliofield/timeutil.hpp"

namespace heliofield::synth {

/// Gaussian class-conditional over the derived log features
/// (log10 S_p, log10 v_A, log10 T_ratio), plus the density center that
/// closes the system so raw channels can be reconstructed.
struct ClassModel {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Matrix3d cov = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d chol = Eigen::Matrix3d::Identity();  // cov = chol chol^T
  Eigen::Matrix3d precision = Eigen::Matrix3d::Identity();
  double log_det_cov = 0.0;
  double logn_mean = 0.0;  // log10 n_p center, cm^-3
};

/// One constant-class stretch of the source-region timeline.
struct RegimeSegment {
  double start = 0.0;  // UTC seconds, inclusive
  double end = 0.0;    // UTC seconds, exclusive
  plasma::WindClass wind_class = plasma::WindClass::StreamerBelt;
};

/// Generative configuration. Everything downstream is a pure function of
/// (this, seed), so reruns are byte-identical.
struct SynthConfig {
  std::array<ClassModel, plasma::kNumClasses> classes{};
  std::array<double, plasma::kNumClasses> weights{};
  std::uint64_t seed = 42;
  double dwell_mean_min = 120.0;
  double logn_sigma = 0.05;
  double plasma_cadence_s = 25.0;
  double field_cadence_s = 5.0;
  double image_cadence_s = 720.0;
  double image_noise = 0.35;
  double pattern_amp = 1.0;
  std::uint64_t pattern_seed = 20290;
  double orbit_r_au = 0.08;
  double orbit_lat_amp_deg = 4.0;
  double orbit_lon0_deg = 10.0;
  double orbit_lon_rate_deg_day = 3.0;
  plasma::LabelConfig label;
  connectivity::BackmapParams backmap;
  ImageGeometry geom;

  void validate() const {
    double sum = 0.0;
    bool any_positive = false;
    for (double w : weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) {
        throw ConfigError("synth: mixture weights must be finite and >= 0");
      }
      if (w > 0.0) any_positive = true;
      sum += w;
    }
    if (!any_positive || std::abs(sum - 1.0) > 1e-6) {
      throw ConfigError("synth: mixture weights must sum to 1, got " +
                        csv::fmt(sum));
    }
    if (!(dwell_mean_min > 0.0)) {
      throw ConfigError("synth: dwell_mean_min must be > 0");
    }
    if (!(logn_sigma >= 0.0)) {
      throw ConfigError("synth: logn_sigma must be >= 0");
    }
    if (!(plasma_cadence_s > 0.0) || !(field_cadence_s > 0.0) ||
        !(image_cadence_s > 0.0)) {
      throw ConfigError("synth: cadences must be > 0");
    }
    if (!(image_noise >= 0.0)) {
      throw ConfigError("synth: image_noise must be >= 0");
    }
    if (!(orbit_r_au > backmap.source_surface_au())) {
      throw ConfigError("synth: orbit radius must sit outside the source "
                        "surface");
    }
  }

  static SynthConfig from_config(const Config& cfg) {
    SynthConfig sc;
    sc.seed = static_cast<std::uint64_t>(cfg.i64("run.seed"));
    sc.dwell_mean_min = cfg.f64("synth.dwell_mean_min");
    sc.logn_sigma = cfg.f64("synth.logn_sigma");
    sc.plasma_cadence_s = cfg.f64("synth.plasma_cadence_s");
    sc.field_cadence_s = cfg.f64("synth.field_cadence_s");
    sc.image_cadence_s = cfg.f64("connectivity.image_cadence_s");
    sc.image_noise = cfg.f64("synth.image_noise");
    sc.pattern_amp = cfg.f64("synth.pattern_amp");
    sc.pattern_seed = static_cast<std::uint64_t>(cfg.i64("synth.pattern_seed"));
    sc.orbit_r_au = cfg.f64("synth.orbit_r_au");
    sc.orbit_lat_amp_deg = cfg.f64("synth.orbit_lat_amp_deg");
    sc.orbit_lon0_deg = cfg.f64("synth.orbit_lon0_deg");
    sc.orbit_lon_rate_deg_day = cfg.f64("synth.orbit_lon_rate_deg_day");
    sc.label = plasma::LabelConfig::from_config(cfg);
    sc.backmap = connectivity::BackmapParams::from_config(cfg);
    sc.geom = ImageGeometry::from_config(cfg);

    const auto w = cfg.list_f64("synth.weights");
    if (w.size() != plasma::kNumClasses) {
      throw ConfigError("synth.weights needs one entry per class");
    }
    std::copy(w.begin(), w.end(), sc.weights.begin());

    for (int c = 0; c < plasma::kNumClasses; ++c) {
      const std::string base =
          std::string("synth.") +
          plasma::wind_class_name(static_cast<plasma::WindClass>(c));
      auto& m = sc.classes[c];
      const auto mean = cfg.list_f64(base + "_mean");
      if (mean.size() != 3) {
        throw ConfigError(base + "_mean needs 3 entries");
      }
      m.mean = Eigen::Vector3d(mean[0], mean[1], mean[2]);
      m.logn_mean = cfg.f64(base + "_logn");

      const std::string cov_text = cfg.str(base + "_cov");
      if (cov_text.empty()) {
        const auto sigma = cfg.list_f64(base + "_sigma");
        if (sigma.size() != 3) {
          throw ConfigError(base + "_sigma needs 3 entries");
        }
        m.cov = Eigen::Matrix3d::Zero();
        for (int i = 0; i < 3; ++i) m.cov(i, i) = sigma[i] * sigma[i];
      } else {
        const auto entries = cfg.list_f64(base + "_cov");
        if (entries.size() != 9) {
          throw ConfigError(base + "_cov needs 9 row-major entries");
        }
        for (int i = 0; i < 3; ++i) {
          for (int j = 0; j < 3; ++j) m.cov(i, j) = entries[3 * i + j];
        }
        if ((m.cov - m.cov.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
          throw ConfigError(base + "_cov must be symmetric");
        }
      }
      Eigen::LLT<Eigen::Matrix3d> llt(m.cov);
      if (llt.info() != Eigen::Success) {
        throw ConfigError(base + "_cov is not positive definite");
      }
      m.chol = llt.matrixL();
      m.precision = llt.solve(Eigen::Matrix3d::Identity());
      m.log_det_cov = 2.0 * m.chol.diagonal().array().log().sum();
    }
    sc.validate();
    return sc;
  }

  /// Bulk speed implied by the exact class mean (no noise).
  [[nodiscard]] double class_mean_speed_kms(int c) const {
    const auto& m = classes.at(static_cast<std::size_t>(c));
    const double t_p =
        std::pow(10.0, m.mean[0]) * std::pow(std::pow(10.0, m.logn_mean),
                                             2.0 / 3.0);
    const double t_exp = t_p / std::pow(10.0, m.mean[2]);
    return label.t_exp_base_kms *
           std::pow(t_exp / label.t_exp_unit_to_ev, 1.0 / label.t_exp_exponent);
  }

  /// Mixture-weighted mean bulk speed; anchors the reference travel time.
  [[nodiscard]] double reference_speed_kms() const {
    double v = 0.0;
    for (int c = 0; c < plasma::kNumClasses; ++c) {
      v += weights[static_cast<std::size_t>(c)] * class_mean_speed_kms(c);
    }
    return v;
  }

  /// Source-surface-to-spacecraft travel time at the reference speed.
  [[nodiscard]] double travel_ref_s() const {
    const double dist_km = (orbit_r_au - backmap.source_surface_au()) *
                           constants::kAstronomicalUnitM / 1e3;
    return dist_km / reference_speed_kms();
  }
};

/// Inverts the derived-feature map: given log features x = (log10 S_p,
/// log10 v_A, log10 T_ratio) and a density draw, reconstruct the raw
/// channels so that derive_quantities recovers x up to rounding.
inline plasma::PlasmaSample channels_from_features(double timestamp,
                                                   const Eigen::Vector3d& x,
                                                   double log_n,
                                                   const plasma::LabelConfig&
                                                       label) {
  plasma::PlasmaSample s;
  s.timestamp = timestamp;
  s.n_p = std::pow(10.0, log_n);
  s.T_p = std::pow(10.0, x[0]) * std::pow(s.n_p, 2.0 / 3.0);
  const double t_exp = s.T_p / std::pow(10.0, x[2]);
  s.v_sw = label.t_exp_base_kms *
           std::pow(t_exp / label.t_exp_unit_to_ev, 1.0 / label.t_exp_exponent);
  const double v_a_ms = std::pow(10.0, x[1]) * 1e3;
  s.B = v_a_ms * std::sqrt(label.mu0 * label.m_p_kg * s.n_p * 1e6) * 1e9;
  return s;
}

/// Draws the piecewise-constant source-region class sequence covering
/// [start_utc, end_utc). Draw order per segment is dwell first, then
/// class, so tests can replay the stream from the same seed.
inline std::vector<RegimeSegment> regime_sequence(double start_utc,
                                                  double end_utc,
                                                  const SynthConfig& cfg,
                                                  const std::string& tag) {
  if (!(end_utc > start_utc)) {
    throw DataError("regime_sequence: window must have positive duration");
  }
  Rng rng = Rng::derived(cfg.seed, tag + ".regime");
  std::vector<RegimeSegment> segments;
  double t = start_utc;
  while (t < end_utc) {
    const double dwell_min =
        std::max(1.0, std::ceil(rng.exponential(cfg.dwell_mean_min)));
    const double u = rng.uniform();
    double acc = 0.0;
    int cls = plasma::kNumClasses - 1;
    for (int c = 0; c < plasma::kNumClasses; ++c) {
      acc += cfg.weights[static_cast<std::size_t>(c)];
      if (u < acc) {
        cls = c;
        break;
      }
    }
    RegimeSegment seg;
    seg.start = t;
    seg.end = std::min(end_utc, t + dwell_min * constants::kSecondsPerMinute);
    seg.wind_class = static_cast<plasma::WindClass>(cls);
    segments.push_back(seg);
    t = seg.end;
  }
  return segments;
}

/// Class in force at time t; clamps outside the covered window.
inline plasma::WindClass regime_at(const std::vector<RegimeSegment>& segments,
                                   double t) {
  if (segments.empty()) throw DataError("regime_at: empty segment list");
  if (t < segments.front().start) return segments.front().wind_class;
  auto it = std::upper_bound(segments.begin(), segments.end(), t,
                             [](double v, const RegimeSegment& s) {
                               return v < s.start;
                             });
  return (it - 1)->wind_class;
}

/// A generated observation window: interleaved raw readings plus the
/// ground-truth class per observed minute, recorded straight from the
/// source regime (never through the labeler).
struct Stream {
  double start_utc = 0.0;
  std::int64_t minutes = 0;
  std::vector<plasma::RawReading> readings;
  std::vector<std::pair<double, plasma::WindClass>> ground_truth;
  std::vector<RegimeSegment> source_segments;
};

/// Extra source-side minutes generated before the observation window so
/// every observed minute (and every image pairing) has a defined source
/// class: the reference travel time plus an hour of slack for speed
/// jitter around it.
inline double source_margin_minutes(const SynthConfig& cfg) {
  return std::ceil(cfg.travel_ref_s() / constants::kSecondsPerMinute) + 60.0;
}

/// Generates the observed telemetry for [start_utc, start_utc + minutes).
/// The source regime runs ahead of the observer by the reference travel
/// time; each observed minute draws its log features once from the class
/// in force at emission and holds them constant across that minute's
/// field and plasma readings, so minute-mean resampling recovers the
/// features exactly and the labeler reproduces the ground truth.
inline Stream generate_stream(double start_utc, std::int64_t minutes,
                              const SynthConfig& cfg, const std::string& tag) {
  if (minutes <= 0) throw DataError("generate_stream: duration must be > 0");
  Stream stream;
  stream.start_utc = start_utc;
  stream.minutes = minutes;

  const double travel_ref = cfg.travel_ref_s();
  const double src_start =
      start_utc - source_margin_minutes(cfg) * constants::kSecondsPerMinute;
  const double src_end =
      start_utc + static_cast<double>(minutes) * constants::kSecondsPerMinute;
  stream.source_segments = regime_sequence(src_start, src_end, cfg, tag);

  const int fields_per_min = static_cast<int>(
      std::ceil(constants::kSecondsPerMinute / cfg.field_cadence_s));
  const int plasmas_per_min = static_cast<int>(
      std::ceil(constants::kSecondsPerMinute / cfg.plasma_cadence_s));
  stream.readings.reserve(static_cast<std::size_t>(minutes) *
                          static_cast<std::size_t>(fields_per_min +
                                                   plasmas_per_min));
  stream.ground_truth.reserve(static_cast<std::size_t>(minutes));

  for (std::int64_t m = 0; m < minutes; ++m) {
    const double t =
        start_utc + static_cast<double>(m) * constants::kSecondsPerMinute;
    const plasma::WindClass cls =
        regime_at(stream.source_segments, t - travel_ref);
    stream.ground_truth.emplace_back(t, cls);

    Rng rng = Rng::derived(
        cfg.seed,
        tag + ".minute." + std::to_string(static_cast<std::int64_t>(t)));
    const auto& model = cfg.classes[static_cast<std::size_t>(cls)];
    const Eigen::Vector3d z(rng.normal(), rng.normal(), rng.normal());
    const Eigen::Vector3d x = model.mean + model.chol * z;
    const double log_n = model.logn_mean + cfg.logn_sigma * rng.normal();
    const plasma::PlasmaSample ch =
        channels_from_features(t, x, log_n, cfg.label);

    for (double off = 0.0; off < constants::kSecondsPerMinute;
         off += cfg.field_cadence_s) {
      plasma::RawReading r;
      r.timestamp = t + off;
      r.source = plasma::Instrument::Field;
      r.values[plasma::kB] = ch.B;
      stream.readings.push_back(r);
    }
    for (double off = 0.0; off < constants::kSecondsPerMinute;
         off += cfg.plasma_cadence_s) {
      plasma::RawReading r;
      r.timestamp = t + off;
      r.source = plasma::Instrument::Plasma;
      r.values[plasma::kNp] = ch.n_p;
      r.values[plasma::kTp] = ch.T_p;
      r.values[plasma::kVsw] = ch.v_sw;
      stream.readings.push_back(r);
    }
  }
  std::stable_sort(stream.readings.begin(), stream.readings.end(),
                   [](const plasma::RawReading& a,
                      const plasma::RawReading& b) {
                     return a.timestamp < b.timestamp;
                   });
  return stream;
}

/// Image keys on the absolute cadence grid covering [start_utc, end_utc).
inline std::vector<std::int64_t> image_keys(double start_utc, double end_utc,
                                            double cadence_s) {
  if (cadence_s <= 0.0) throw DataError("image cadence must be > 0");
  if (!(end_utc > start_utc)) {
    throw DataError("image_keys: window must have positive duration");
  }
  std::vector<std::int64_t> keys;
  double k = std::floor(start_utc / cadence_s) * cadence_s;
  for (; k < end_utc; k += cadence_s) {
    keys.push_back(static_cast<std::int64_t>(k));
  }
  return keys;
}

/// Fixed per-class spatial pattern; pattern_seed keeps it independent of
/// the run seed so the backbone target geometry survives reseeding.
inline std::array<std::vector<float>, plasma::kNumClasses> class_patterns(
    const ImageGeometry& geom, std::uint64_t pattern_seed, double amp) {
  std::array<std::vector<float>, plasma::kNumClasses> patterns;
  for (int c = 0; c < plasma::kNumClasses; ++c) {
    Rng rng = Rng::derived(
        pattern_seed,
        std::string("synth.pattern.") +
            plasma::wind_class_name(static_cast<plasma::WindClass>(c)));
    auto& p = patterns[static_cast<std::size_t>(c)];
    p.resize(geom.pixel_count());
    for (auto& px : p) px = static_cast<float>(amp * rng.normal());
  }
  return patterns;
}

/// Renders one image per (key, class) pair: the class pattern plus seeded
/// per-image noise. Zero noise makes same-class images identical.
inline ImageSet generate_images(
    const std::vector<std::pair<std::int64_t, plasma::WindClass>>& keyed,
    const SynthConfig& cfg) {
  if (keyed.empty()) {
    throw DataError("generate_images: class sequence is empty");
  }
  const auto patterns =
      class_patterns(cfg.geom, cfg.pattern_seed, cfg.pattern_amp);
  ImageSet images(cfg.geom);
  for (const auto& [key, cls] : keyed) {
    std::vector<float> px = patterns[static_cast<std::size_t>(cls)];
    if (cfg.image_noise > 0.0) {
      Rng rng = Rng::derived(cfg.seed, "synth.image." + std::to_string(key));
      for (auto& v : px) {
        v += static_cast<float>(cfg.image_noise * rng.normal());
      }
    }
    images.put(key, std::move(px));
  }
  return images;
}

/// Hourly spacecraft ephemeris over [start_utc, end_utc]: constant radius,
/// slow sinusoidal latitude, linear longitude drift.
inline std::vector<connectivity::EphemerisEntry> generate_ephemeris(
    double start_utc, double end_utc, const SynthConfig& cfg) {
  if (!(end_utc > start_utc)) {
    throw DataError("generate_ephemeris: window must have positive duration");
  }
  const double t_ref = utc_from_civil(2020, 1, 1);
  const double period_s =
      cfg.backmap.rotation_period_days * constants::kSecondsPerDay;
  std::vector<connectivity::EphemerisEntry> out;
  const double step = 3600.0;
  for (double t = std::floor(start_utc / step) * step;; t += step) {
    connectivity::EphemerisEntry e;
    e.timestamp = t;
    e.pos.r_au = cfg.orbit_r_au;
    e.pos.lat_deg = cfg.orbit_lat_amp_deg *
                    std::sin(2.0 * constants::kPi * (t - t_ref) / period_s);
    e.pos.lon_deg = connectivity::normalize_lon(
        cfg.orbit_lon0_deg +
        cfg.orbit_lon_rate_deg_day * (t - t_ref) / constants::kSecondsPerDay);
    out.push_back(e);
    if (t >= end_utc) break;
  }
  return out;
}

/// Exact Bayes posterior over classes for a derived log-feature vector,
/// using the Gaussian class-conditionals and mixture weights. This is the
/// performance ceiling any model trained on this substrate is judged
/// against.
struct BayesOracle {
  const SynthConfig* cfg = nullptr;

  explicit BayesOracle(const SynthConfig& c) : cfg(&c) {}

  [[nodiscard]] std::array<double, plasma::kNumClasses> posterior(
      const Eigen::Vector3d& x) const {
    std::array<double, plasma::kNumClasses> scores{};
    std::array<bool, plasma::kNumClasses> active{};
    double best = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < plasma::kNumClasses; ++c) {
      const double w = cfg->weights[static_cast<std::size_t>(c)];
      if (w <= 0.0) continue;
      const auto& m = cfg->classes[static_cast<std::size_t>(c)];
      const Eigen::Vector3d d = x - m.mean;
      const double quad = d.dot(m.precision * d);
      scores[static_cast<std::size_t>(c)] =
          std::log(w) - 0.5 * (m.log_det_cov + quad);
      active[static_cast<std::size_t>(c)] = true;
      best = std::max(best, scores[static_cast<std::size_t>(c)]);
    }
    std::array<double, plasma::kNumClasses> post{};
    double total = 0.0;
    for (int c = 0; c < plasma::kNumClasses; ++c) {
      if (!active[static_cast<std::size_t>(c)]) continue;
      post[static_cast<std::size_t>(c)] =
          std::exp(scores[static_cast<std::size_t>(c)] - best);
      total += post[static_cast<std::size_t>(c)];
    }
    for (auto& p : post) p /= total;
    return post;
  }

  [[nodiscard]] std::array<double, plasma::kNumClasses> posterior(
      const plasma::DerivedPlasma& d) const {
    return posterior(Eigen::Vector3d(d.log_S_p, d.log_v_A, d.log_T_ratio));
  }

  /// Argmax of the posterior; ties break toward the lowest class index.
  [[nodiscard]] plasma::WindClass classify(const Eigen::Vector3d& x) const {
    const auto post = posterior(x);
    int best = 0;
    for (int c = 1; c < plasma::kNumClasses; ++c) {
      if (post[static_cast<std::size_t>(c)] >
          post[static_cast<std::size_t>(best)]) {
        best = c;
      }
    }
    return static_cast<plasma::WindClass>(best);
  }

  [[nodiscard]] plasma::WindClass classify(
      const plasma::DerivedPlasma& d) const {
    return classify(Eigen::Vector3d(d.log_S_p, d.log_v_A, d.log_T_ratio));
  }
};

/// Per-class target codes for backbone pretraining; tied to pattern_seed
/// like the image patterns so the regression target is reseed-stable.
inline std::vector<std::vector<double>> class_codes(int dim,
                                                    std::uint64_t
                                                        pattern_seed) {
  if (dim <= 0) throw DataError("class_codes: dim must be > 0");
  std::vector<std::vector<double>> codes(plasma::kNumClasses);
  for (int c = 0; c < plasma::kNumClasses; ++c) {
    Rng rng = Rng::derived(
        pattern_seed,
        std::string("synth.code.") +
            plasma::wind_class_name(static_cast<plasma::WindClass>(c)));
    auto& row = codes[static_cast<std::size_t>(c)];
    row.resize(static_cast<std::size_t>(dim));
    for (auto& v : row) v = rng.normal();
  }
  return codes;
}

}  // namespace heliofield::synth
