#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "heliofield/config.hpp"
#include "heliofield/constants.hpp"
#include "heliofield/csv.hpp"
#include "heliofield/errors.hpp"

namespace heliofield::plasma {

/// Four-way solar wind class.
enum class WindClass : int {
  CoronalHole = 0,
  StreamerBelt = 1,
  SectorReversal = 2,
  Ejecta = 3,
};

inline constexpr int kNumClasses = 4;

inline const char* wind_class_name(WindClass c) {
  switch (c) {
    case WindClass::CoronalHole: return "coronal_hole";
    case WindClass::StreamerBelt: return "streamer_belt";
    case WindClass::SectorReversal: return "sector_reversal";
    case WindClass::Ejecta: return "ejecta";
  }
  throw DataError("invalid wind class value");
}

inline WindClass wind_class_from_name(const std::string& name) {
  for (int i = 0; i < kNumClasses; ++i) {
    if (name == wind_class_name(static_cast<WindClass>(i))) {
      return static_cast<WindClass>(i);
    }
  }
  throw DataError("unknown wind class '" + name + "'");
}

enum class Instrument { Field, Plasma };

/// In-situ telemetry channels. B is owned by the field instrument, the
/// other three by the plasma instrument; interpolation flags follow that
/// ownership.
enum Channel : int { kNp = 0, kTp = 1, kVsw = 2, kB = 3 };
inline constexpr int kNumChannels = 4;

inline Instrument channel_owner(int channel) {
  return channel == kB ? Instrument::Field : Instrument::Plasma;
}

/// One native-cadence reading; channels the instrument did not report are
/// absent.
struct RawReading {
  double timestamp = 0.0;  // UTC seconds
  Instrument source = Instrument::Plasma;
  std::array<std::optional<double>, kNumChannels> values{};
};

/// One bin of the resampled series. A channel with zero readings in the
/// bin is missing here and will be filled downstream.
struct Bin {
  double timestamp = 0.0;  // bin start
  std::array<std::optional<double>, kNumChannels> mean{};
  std::array<int, kNumChannels> count{};
};

struct BinnedSeries {
  double cadence = 0.0;
  std::vector<Bin> bins;
};

/// One-minute grid sample after gap filling.
struct PlasmaSample {
  double timestamp = 0.0;  // minute boundary, UTC seconds
  double n_p = 0.0;        // cm^-3
  double T_p = 0.0;        // eV
  double v_sw = 0.0;       // km/s
  double B = 0.0;          // nT
  bool interp_fields = false;
  bool interp_plasma = false;

  [[nodiscard]] double channel(int c) const {
    switch (c) {
      case kNp: return n_p;
      case kTp: return T_p;
      case kVsw: return v_sw;
      case kB: return B;
    }
    throw DataError("invalid channel index");
  }
};

/// Labeling features derived from one sample.
struct DerivedPlasma {
  double S_p = 0.0;      // proton specific entropy, eV cm^2
  double v_A = 0.0;      // Alfven speed, km/s
  double T_ratio = 0.0;  // T_p / T_exp(v_sw)
  double log_S_p = 0.0;
  double log_v_A = 0.0;
  double log_T_ratio = 0.0;
};

/// One decision in the labeling sequence: the plane a*x + b*y + c*z + d
/// over (log10 S_p, log10 v_A, log10 T_ratio), compared against zero.
struct BoundaryPlane {
  WindClass wind_class = WindClass::Ejecta;
  bool fire_on_ge = true;  // true: fires when value >= 0; false: when < 0
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0;

  [[nodiscard]] double value(double x, double y, double z) const {
    return a * x + b * y + c * z + d;
  }

  [[nodiscard]] bool fires(double x, double y, double z) const {
    const double v = value(x, y, z);
    return fire_on_ge ? v >= 0.0 : v < 0.0;
  }
};

/// Labeling scheme configuration: the expected-temperature power law and
/// the ordered plane decisions closing to a fallback class.
struct LabelConfig {
  int version = 1;
  double t_exp_base_kms = 258.0;
  double t_exp_exponent = 3.113;
  double t_exp_unit_to_ev = 1.0;
  double mu0 = constants::kMu0;
  double m_p_kg = constants::kProtonMassKg;
  double ev_per_kelvin = constants::kEvPerKelvin;
  std::vector<BoundaryPlane> planes;
  WindClass fallback = WindClass::StreamerBelt;

  static LabelConfig from_config(const Config& cfg) {
    LabelConfig lc;
    lc.version = static_cast<int>(cfg.i64("label.version"));
    lc.t_exp_base_kms = cfg.f64("label.t_exp_base_kms");
    lc.t_exp_exponent = cfg.f64("label.t_exp_exponent");
    lc.t_exp_unit_to_ev = cfg.f64("label.t_exp_unit_to_ev");
    lc.mu0 = cfg.f64("label.mu0");
    lc.m_p_kg = cfg.f64("label.m_p_kg");
    lc.ev_per_kelvin = cfg.f64("label.ev_per_kelvin");
    lc.fallback = wind_class_from_name(cfg.str("label.fallback"));
    for (int i = 1; i <= 8; ++i) {
      const std::string spec = cfg.str("label.plane" + std::to_string(i));
      if (spec.empty()) continue;
      lc.planes.push_back(parse_plane(spec));
    }
    lc.validate();
    return lc;
  }

  static BoundaryPlane parse_plane(const std::string& spec) {
    std::istringstream ss(spec);
    std::string cls, op;
    BoundaryPlane p;
    if (!(ss >> cls >> op >> p.a >> p.b >> p.c >> p.d)) {
      throw ConfigError("malformed label plane '" + spec +
                        "', expected '<class> <ge|lt> a b c d'");
    }
    std::string extra;
    if (ss >> extra) {
      throw ConfigError("trailing tokens in label plane '" + spec + "'");
    }
    p.wind_class = wind_class_from_name(cls);
    if (op == "ge") {
      p.fire_on_ge = true;
    } else if (op == "lt") {
      p.fire_on_ge = false;
    } else {
      throw ConfigError("label plane comparison must be 'ge' or 'lt', got '" +
                        op + "'");
    }
    return p;
  }

  void validate() const {
    if (t_exp_base_kms <= 0.0 || t_exp_unit_to_ev <= 0.0) {
      throw ConfigError("label: t_exp base speed and unit factor must be > 0");
    }
    std::array<bool, kNumClasses> covered{};
    covered[static_cast<int>(fallback)] = true;
    for (const auto& p : planes) {
      if (p.a == 0.0 && p.b == 0.0 && p.c == 0.0) {
        throw ConfigError("label plane has a zero coefficient vector");
      }
      covered[static_cast<int>(p.wind_class)] = true;
    }
    for (int i = 0; i < kNumClasses; ++i) {
      if (!covered[i]) {
        throw ConfigError(std::string("label decision sequence never assigns "
                                      "class ") +
                          wind_class_name(static_cast<WindClass>(i)));
      }
    }
  }

  /// Expected proton temperature at a given bulk speed, in eV.
  [[nodiscard]] double t_exp_ev(double v_sw_kms) const {
    return t_exp_unit_to_ev *
           std::pow(v_sw_kms / t_exp_base_kms, t_exp_exponent);
  }
};

/// Bins a sorted reading stream onto a uniform cadence grid; each bin
/// covers [start, start + cadence) and records the per-channel arithmetic
/// mean of the readings that fall in it.
inline BinnedSeries resample_series(const std::vector<RawReading>& raw,
                                    double cadence) {
  if (cadence <= 0.0) throw DataError("resample cadence must be > 0");
  if (raw.empty()) throw DataError("resample: empty reading stream");
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!std::isfinite(raw[i].timestamp)) {
      throw DataError("resample: non-finite timestamp at reading " +
                      std::to_string(i));
    }
    for (int c = 0; c < kNumChannels; ++c) {
      if (raw[i].values[c] && !std::isfinite(*raw[i].values[c])) {
        throw DataError("resample: non-finite value at reading " +
                        std::to_string(i) + ", channel " + std::to_string(c));
      }
    }
    if (i > 0 && raw[i].timestamp < raw[i - 1].timestamp) {
      throw DataError("resample: stream not sorted at reading " +
                      std::to_string(i));
    }
  }

  const double first_bin = std::floor(raw.front().timestamp / cadence);
  const double last_bin = std::floor(raw.back().timestamp / cadence);
  const auto nbins = static_cast<std::size_t>(last_bin - first_bin) + 1;

  BinnedSeries series;
  series.cadence = cadence;
  series.bins.resize(nbins);
  std::vector<std::array<double, kNumChannels>> sums(
      nbins, std::array<double, kNumChannels>{});
  for (std::size_t i = 0; i < nbins; ++i) {
    series.bins[i].timestamp = (first_bin + static_cast<double>(i)) * cadence;
  }
  for (const auto& r : raw) {
    const auto bin = static_cast<std::size_t>(
        std::floor(r.timestamp / cadence) - first_bin);
    for (int c = 0; c < kNumChannels; ++c) {
      if (!r.values[c]) continue;
      sums[bin][c] += *r.values[c];
      series.bins[bin].count[c] += 1;
    }
  }
  for (std::size_t i = 0; i < nbins; ++i) {
    for (int c = 0; c < kNumChannels; ++c) {
      if (series.bins[i].count[c] > 0) {
        series.bins[i].mean[c] = sums[i][c] / series.bins[i].count[c];
      }
    }
  }
  return series;
}

/// Fills missing bins per channel: interior gaps by linear interpolation
/// between the nearest valid neighbours, edges by the nearest valid value.
/// Every filled minute is flagged for the instrument that owns the channel.
inline std::vector<PlasmaSample> fill_gaps(const BinnedSeries& series) {
  const std::size_t n = series.bins.size();
  if (n == 0) throw DataError("fill_gaps: empty series");

  std::array<std::vector<double>, kNumChannels> filled;
  std::array<std::vector<bool>, kNumChannels> flagged;
  for (int c = 0; c < kNumChannels; ++c) {
    std::vector<std::size_t> valid;
    for (std::size_t i = 0; i < n; ++i) {
      if (series.bins[i].mean[c]) valid.push_back(i);
    }
    if (valid.empty()) {
      throw DataError(std::string("fill_gaps: channel ") + std::to_string(c) +
                      " has no data anywhere in the series");
    }
    filled[c].resize(n);
    flagged[c].assign(n, false);
    for (std::size_t i = 0; i < n; ++i) {
      if (series.bins[i].mean[c]) {
        filled[c][i] = *series.bins[i].mean[c];
        continue;
      }
      flagged[c][i] = true;
      if (i < valid.front()) {
        filled[c][i] = *series.bins[valid.front()].mean[c];
      } else if (i > valid.back()) {
        filled[c][i] = *series.bins[valid.back()].mean[c];
      } else {
        const auto hi = std::lower_bound(valid.begin(), valid.end(), i);
        const std::size_t right = *hi;
        const std::size_t left = *(hi - 1);
        const double y0 = *series.bins[left].mean[c];
        const double y1 = *series.bins[right].mean[c];
        const double t = static_cast<double>(i - left) /
                         static_cast<double>(right - left);
        filled[c][i] = y0 + t * (y1 - y0);
      }
    }
  }

  std::vector<PlasmaSample> grid(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& s = grid[i];
    s.timestamp = series.bins[i].timestamp;
    s.n_p = filled[kNp][i];
    s.T_p = filled[kTp][i];
    s.v_sw = filled[kVsw][i];
    s.B = filled[kB][i];
    s.interp_plasma = flagged[kNp][i] || flagged[kTp][i] || flagged[kVsw][i];
    s.interp_fields = flagged[kB][i];
  }
  return grid;
}

/// Computes specific entropy, Alfven speed and the temperature ratio.
///
///   S_p     = T_p / n_p^(2/3)                 [eV cm^2]
///   v_A     = |B| / sqrt(mu0 m_p n_p)          [km/s]
///   T_ratio = T_p / T_exp(v_sw)
inline DerivedPlasma derive_quantities(const PlasmaSample& s,
                                       const LabelConfig& cfg) {
  if (!(s.n_p > 0.0) || !(s.T_p > 0.0) || !(s.v_sw > 0.0)) {
    throw DataError("derive_quantities: degenerate sample at t=" +
                    csv::fmt(s.timestamp) +
                    " (requires n_p > 0, T_p > 0, v_sw > 0)");
  }
  if (s.B < 0.0) {
    throw DataError("derive_quantities: negative |B| at t=" +
                    csv::fmt(s.timestamp));
  }
  DerivedPlasma d;
  d.S_p = s.T_p / std::pow(s.n_p, 2.0 / 3.0);
  const double n_m3 = s.n_p * 1e6;
  const double b_tesla = s.B * 1e-9;
  d.v_A = b_tesla / std::sqrt(cfg.mu0 * cfg.m_p_kg * n_m3) / 1e3;
  d.T_ratio = s.T_p / cfg.t_exp_ev(s.v_sw);
  d.log_S_p = std::log10(d.S_p);
  d.log_v_A = std::log10(d.v_A);
  d.log_T_ratio = std::log10(d.T_ratio);
  return d;
}

/// Applies the configured decision sequence; total on valid inputs.
inline WindClass classify_wind(const DerivedPlasma& d,
                               const LabelConfig& cfg) {
  if (!std::isfinite(d.log_S_p) || !std::isfinite(d.log_v_A) ||
      !std::isfinite(d.log_T_ratio)) {
    throw DataError("classify_wind: non-finite log features");
  }
  for (const auto& plane : cfg.planes) {
    if (plane.fires(d.log_S_p, d.log_v_A, d.log_T_ratio)) {
      return plane.wind_class;
    }
  }
  return cfg.fallback;
}

// ---------------------------------------------------------------------------
// CSV ingestion and emission.

/// Reads the raw telemetry CSV. Header must be
///   timestamp_utc,instrument,n_p_cm3,T_p_eV,v_sw_kms,B_nT
/// (T_p_K is accepted for Kelvin sources and converted to eV). Missing
/// values are empty cells. Readings are sorted by timestamp on ingest.
inline std::vector<RawReading> read_raw_csv(const std::string& path) {
  const csv::Table t = csv::read_file(path);
  const int col_ts = t.column("timestamp_utc");
  const int col_instr = t.column("instrument");
  const int col_np = t.column("n_p_cm3");
  int col_tp = t.column("T_p_eV");
  bool kelvin = false;
  if (col_tp < 0) {
    col_tp = t.column("T_p_K");
    kelvin = col_tp >= 0;
  }
  const int col_v = t.column("v_sw_kms");
  const int col_b = t.column("B_nT");
  if (col_ts < 0 || col_instr < 0 || col_np < 0 || col_tp < 0 || col_v < 0 ||
      col_b < 0) {
    throw DataError("raw CSV header must be "
                    "timestamp_utc,instrument,n_p_cm3,T_p_eV,v_sw_kms,B_nT "
                    "(or T_p_K): " + path);
  }

  std::vector<RawReading> readings;
  readings.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::string where = path + " row " + std::to_string(i + 2);
    RawReading r;
    r.timestamp = csv::parse_double(row.at(col_ts), where);
    const std::string& instr = row.at(col_instr);
    if (instr == "field-instrument") {
      r.source = Instrument::Field;
    } else if (instr == "plasma-instrument") {
      r.source = Instrument::Plasma;
    } else {
      throw DataError("unknown instrument tag '" + instr + "' in " + where);
    }
    const std::array<int, kNumChannels> cols = {col_np, col_tp, col_v, col_b};
    for (int c = 0; c < kNumChannels; ++c) {
      const std::string& cell = row.at(cols[c]);
      if (cell.empty()) continue;
      double v = csv::parse_double(cell, where);
      if (c == kTp && kelvin) v *= constants::kEvPerKelvin;
      if (c != kB && v < 0.0) {
        throw DataError("negative physical channel in " + where);
      }
      r.values[c] = v;
    }
    readings.push_back(r);
  }
  std::stable_sort(readings.begin(), readings.end(),
                   [](const RawReading& a, const RawReading& b) {
                     return a.timestamp < b.timestamp;
                   });
  return readings;
}

inline void write_raw_csv(const std::string& path,
                          const std::vector<RawReading>& readings) {
  csv::Writer w(path);
  w.row({"timestamp_utc", "instrument", "n_p_cm3", "T_p_eV", "v_sw_kms",
         "B_nT"});
  for (const auto& r : readings) {
    std::vector<std::string> cells(6);
    cells[0] = csv::fmt(r.timestamp);
    cells[1] = r.source == Instrument::Field ? "field-instrument"
                                             : "plasma-instrument";
    for (int c = 0; c < kNumChannels; ++c) {
      if (r.values[c]) cells[2 + c] = csv::fmt(*r.values[c]);
    }
    w.row(cells);
  }
  w.close();
}

struct LabeledSample {
  PlasmaSample sample;
  DerivedPlasma derived;
  WindClass label = WindClass::StreamerBelt;
};

/// Full minute-grid labeling pass: derive quantities and classify each
/// sample. Degenerate samples (zero density/temperature) are excluded and
/// counted rather than aborting the run.
inline std::vector<LabeledSample> label_samples(
    const std::vector<PlasmaSample>& grid, const LabelConfig& cfg,
    std::size_t* excluded_count = nullptr) {
  std::vector<LabeledSample> out;
  out.reserve(grid.size());
  std::size_t excluded = 0;
  for (const auto& s : grid) {
    if (!(s.n_p > 0.0) || !(s.T_p > 0.0) || !(s.v_sw > 0.0)) {
      ++excluded;
      continue;
    }
    LabeledSample ls;
    ls.sample = s;
    ls.derived = derive_quantities(s, cfg);
    ls.label = classify_wind(ls.derived, cfg);
    out.push_back(ls);
  }
  if (excluded_count) *excluded_count = excluded;
  return out;
}

inline void write_samples_csv(const std::string& path,
                              const std::vector<PlasmaSample>& grid) {
  csv::Writer w(path);
  w.row({"timestamp_utc", "n_p_cm3", "T_p_eV", "v_sw_kms", "B_nT",
         "interp_flag_fields", "interp_flag_plasma"});
  for (const auto& s : grid) {
    w.row({csv::fmt(s.timestamp), csv::fmt(s.n_p), csv::fmt(s.T_p),
           csv::fmt(s.v_sw), csv::fmt(s.B), s.interp_fields ? "1" : "0",
           s.interp_plasma ? "1" : "0"});
  }
  w.close();
}

inline void write_labeled_csv(const std::string& path,
                              const std::vector<LabeledSample>& labeled) {
  csv::Writer w(path);
  w.row({"timestamp_utc", "n_p_cm3", "T_p_eV", "v_sw_kms", "B_nT", "S_p",
         "v_A_kms", "T_ratio", "label", "interp_flag_fields",
         "interp_flag_plasma"});
  for (const auto& ls : labeled) {
    const auto& s = ls.sample;
    w.row({csv::fmt(s.timestamp), csv::fmt(s.n_p), csv::fmt(s.T_p),
           csv::fmt(s.v_sw), csv::fmt(s.B), csv::fmt(ls.derived.S_p),
           csv::fmt(ls.derived.v_A), csv::fmt(ls.derived.T_ratio),
           wind_class_name(ls.label), s.interp_fields ? "1" : "0",
           s.interp_plasma ? "1" : "0"});
  }
  w.close();
}

inline std::vector<LabeledSample> read_labeled_csv(const std::string& path) {
  const csv::Table t = csv::read_file(path);
  const std::array<const char*, 11> names = {
      "timestamp_utc", "n_p_cm3", "T_p_eV", "v_sw_kms", "B_nT",
      "S_p", "v_A_kms", "T_ratio", "label", "interp_flag_fields",
      "interp_flag_plasma"};
  std::array<int, 11> cols{};
  for (std::size_t i = 0; i < names.size(); ++i) {
    cols[i] = t.column(names[i]);
    if (cols[i] < 0) {
      throw DataError(std::string("labeled CSV missing column ") + names[i] +
                      ": " + path);
    }
  }
  std::vector<LabeledSample> out;
  out.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::string where = path + " row " + std::to_string(i + 2);
    LabeledSample ls;
    ls.sample.timestamp = csv::parse_double(row.at(cols[0]), where);
    ls.sample.n_p = csv::parse_double(row.at(cols[1]), where);
    ls.sample.T_p = csv::parse_double(row.at(cols[2]), where);
    ls.sample.v_sw = csv::parse_double(row.at(cols[3]), where);
    ls.sample.B = csv::parse_double(row.at(cols[4]), where);
    ls.derived.S_p = csv::parse_double(row.at(cols[5]), where);
    ls.derived.v_A = csv::parse_double(row.at(cols[6]), where);
    ls.derived.T_ratio = csv::parse_double(row.at(cols[7]), where);
    ls.derived.log_S_p = std::log10(ls.derived.S_p);
    ls.derived.log_v_A = std::log10(ls.derived.v_A);
    ls.derived.log_T_ratio = std::log10(ls.derived.T_ratio);
    ls.label = wind_class_from_name(row.at(cols[8]));
    ls.sample.interp_fields = row.at(cols[9]) == "1";
    ls.sample.interp_plasma = row.at(cols[10]) == "1";
    out.push_back(ls);
  }
  return out;
}

}  // namespace heliofield::plasma
