#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "heliofield/config.hpp"
#include "heliofield/constants.hpp"
#include "heliofield/csv.hpp"
#include "heliofield/errors.hpp"
#include "heliofield/timeutil.hpp"

namespace heliofield::connectivity {

/// Heliocentric spacecraft position.
struct HelioPosition {
  double r_au = 0.0;     // heliocentric distance, AU
  double lat_deg = 0.0;  // heliographic latitude, [-90, 90]
  double lon_deg = 0.0;  // Carrington longitude, [0, 360)
};

/// Source-surface footpoint of the field line connected to the spacecraft.
struct Footpoint {
  double lat_deg = 0.0;
  double lon_deg = 0.0;
  double travel_time_s = 0.0;
};

struct BackmapParams {
  double rotation_period_days = 25.38;   // sidereal
  double source_surface_rsun = 2.5;

  [[nodiscard]] double source_surface_au() const {
    return source_surface_rsun * constants::kSolarRadiusM /
           constants::kAstronomicalUnitM;
  }

  [[nodiscard]] double omega_deg_per_s() const {
    return 360.0 / (rotation_period_days * constants::kSecondsPerDay);
  }

  static BackmapParams from_config(const Config& cfg) {
    BackmapParams p;
    p.rotation_period_days = cfg.f64("connectivity.rotation_period_days");
    p.source_surface_rsun = cfg.f64("connectivity.source_surface_rsun");
    if (p.rotation_period_days <= 0.0 || p.source_surface_rsun <= 0.0) {
      throw ConfigError("connectivity: rotation period and source surface "
                        "radius must be > 0");
    }
    return p;
  }
};

inline double normalize_lon(double lon_deg) {
  double l = std::fmod(lon_deg, 360.0);
  if (l < 0.0) l += 360.0;
  return l;
}

/// Ballistic (constant radial speed) backmapping: the parcel seen at the
/// spacecraft left the source surface travel_time seconds earlier, and the
/// footpoint has corotated by omega * travel_time since.
inline Footpoint backmap_footpoint(const HelioPosition& pos, double v_sw_kms,
                                   const BackmapParams& params) {
  if (!(v_sw_kms > 0.0)) {
    throw DataError("backmap: solar wind speed must be > 0, got " +
                    csv::fmt(v_sw_kms));
  }
  const double r_ss = params.source_surface_au();
  if (pos.r_au <= r_ss) {
    throw DataError("backmap: spacecraft inside the source surface (r=" +
                    csv::fmt(pos.r_au) + " AU, r_ss=" + csv::fmt(r_ss) +
                    " AU)");
  }
  Footpoint fp;
  const double dist_km =
      (pos.r_au - r_ss) * constants::kAstronomicalUnitM / 1e3;
  fp.travel_time_s = dist_km / v_sw_kms;
  fp.lat_deg = pos.lat_deg;
  fp.lon_deg =
      normalize_lon(pos.lon_deg + params.omega_deg_per_s() * fp.travel_time_s);
  return fp;
}

/// Inverse rotation of backmap_footpoint; used for round-trip checks.
inline double unmap_lon(const Footpoint& fp, const BackmapParams& params) {
  return normalize_lon(fp.lon_deg -
                       params.omega_deg_per_s() * fp.travel_time_s);
}

/// One image available for pairing.
struct ImageIndexEntry {
  std::int64_t image_key_utc = 0;  // image timestamp, UTC seconds
  std::uint64_t embedding_offset = 0;
};

/// Nearest image to the emission time (sample time minus travel time);
/// ties break toward the earlier image. Empty when no image lies within
/// the tolerance.
inline std::optional<ImageIndexEntry> find_nearest_image(
    double sample_utc, double travel_time_s,
    const std::vector<ImageIndexEntry>& index, double tolerance_s) {
  if (tolerance_s < 0.0) throw DataError("pairing tolerance must be >= 0");
  if (index.empty()) return std::nullopt;
  const double emission = sample_utc - travel_time_s;
  auto it = std::lower_bound(index.begin(), index.end(), emission,
                             [](const ImageIndexEntry& e, double t) {
                               return static_cast<double>(e.image_key_utc) < t;
                             });
  const ImageIndexEntry* best = nullptr;
  double best_dist = 0.0;
  auto consider = [&](const ImageIndexEntry& e) {
    const double dist = std::abs(static_cast<double>(e.image_key_utc) -
                                 emission);
    if (!best || dist < best_dist ||
        (dist == best_dist && e.image_key_utc < best->image_key_utc)) {
      best = &e;
      best_dist = dist;
    }
  };
  if (it != index.end()) consider(*it);
  if (it != index.begin()) consider(*(it - 1));
  if (!best || best_dist > tolerance_s) return std::nullopt;
  return *best;
}

/// Throwing form of find_nearest_image.
inline ImageIndexEntry pair_with_image(double sample_utc,
                                       double travel_time_s,
                                       const std::vector<ImageIndexEntry>& index,
                                       double tolerance_s) {
  const auto entry =
      find_nearest_image(sample_utc, travel_time_s, index, tolerance_s);
  if (!entry) {
    throw DataError("no image within " + csv::fmt(tolerance_s) +
                    " s of emission time " +
                    csv::fmt(sample_utc - travel_time_s));
  }
  return *entry;
}

enum class SplitAssignment : int {
  Train = 0,
  Validation = 1,
  Test = 2,
  Excluded = 3,
};

inline const char* split_name(SplitAssignment s) {
  switch (s) {
    case SplitAssignment::Train: return "train";
    case SplitAssignment::Validation: return "validation";
    case SplitAssignment::Test: return "test";
    case SplitAssignment::Excluded: return "excluded";
  }
  throw DataError("invalid split value");
}

inline SplitAssignment split_from_name(const std::string& name) {
  for (int i = 0; i < 4; ++i) {
    if (name == split_name(static_cast<SplitAssignment>(i))) {
      return static_cast<SplitAssignment>(i);
    }
  }
  throw DataError("unknown split '" + name + "'");
}

/// Month/year windows per split. The defaults put April-December 2019-2023
/// in train, January-March 2019-2022 in validation and January-March 2023
/// in test; everything else is excluded.
struct SplitRules {
  std::pair<int, int> train_months{4, 12}, train_years{2019, 2023};
  std::pair<int, int> val_months{1, 3}, val_years{2019, 2022};
  std::pair<int, int> test_months{1, 3}, test_years{2023, 2023};

  static SplitRules from_config(const Config& cfg) {
    SplitRules r;
    r.train_months = cfg.range("splits.train_months");
    r.train_years = cfg.range("splits.train_years");
    r.val_months = cfg.range("splits.val_months");
    r.val_years = cfg.range("splits.val_years");
    r.test_months = cfg.range("splits.test_months");
    r.test_years = cfg.range("splits.test_years");
    r.validate();
    return r;
  }

  static bool in(const std::pair<int, int>& range, int v) {
    return v >= range.first && v <= range.second;
  }

  [[nodiscard]] SplitAssignment assign(double utc_seconds) const {
    const CivilDate d = civil_from_utc(utc_seconds);
    const int m = static_cast<int>(d.month);
    if (in(train_months, m) && in(train_years, d.year)) {
      return SplitAssignment::Train;
    }
    if (in(val_months, m) && in(val_years, d.year)) {
      return SplitAssignment::Validation;
    }
    if (in(test_months, m) && in(test_years, d.year)) {
      return SplitAssignment::Test;
    }
    return SplitAssignment::Excluded;
  }

  /// Rejects rule sets where some month-year cell belongs to two splits.
  void validate() const {
    for (int year = std::min({train_years.first, val_years.first,
                              test_years.first});
         year <= std::max({train_years.second, val_years.second,
                           test_years.second});
         ++year) {
      for (int m = 1; m <= 12; ++m) {
        const int hits = (in(train_months, m) && in(train_years, year)) +
                         (in(val_months, m) && in(val_years, year)) +
                         (in(test_months, m) && in(test_years, year));
        if (hits > 1) {
          throw ConfigError("split rules overlap at year " +
                            std::to_string(year) + ", month " +
                            std::to_string(m));
        }
      }
    }
  }
};

// ---------------------------------------------------------------------------
// File formats.

inline std::vector<ImageIndexEntry> read_image_index_csv(
    const std::string& path) {
  const csv::Table t = csv::read_file(path);
  const int col_key = t.column("image_key_utc");
  const int col_off = t.column("embedding_offset");
  if (col_key < 0 || col_off < 0) {
    throw DataError("image index CSV header must be "
                    "image_key_utc,embedding_offset: " + path);
  }
  std::vector<ImageIndexEntry> index;
  index.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const std::string where = path + " row " + std::to_string(i + 2);
    ImageIndexEntry e;
    e.image_key_utc = static_cast<std::int64_t>(
        csv::parse_double(t.rows[i].at(col_key), where));
    e.embedding_offset = static_cast<std::uint64_t>(
        csv::parse_double(t.rows[i].at(col_off), where));
    index.push_back(e);
  }
  std::sort(index.begin(), index.end(),
            [](const ImageIndexEntry& a, const ImageIndexEntry& b) {
              return a.image_key_utc < b.image_key_utc;
            });
  for (std::size_t i = 1; i < index.size(); ++i) {
    if (index[i].image_key_utc == index[i - 1].image_key_utc) {
      throw DataError("duplicate image key " +
                      std::to_string(index[i].image_key_utc) + " in " + path);
    }
  }
  return index;
}

inline void write_image_index_csv(const std::string& path,
                                  const std::vector<ImageIndexEntry>& index) {
  csv::Writer w(path);
  w.row({"image_key_utc", "embedding_offset"});
  for (const auto& e : index) {
    w.row({std::to_string(e.image_key_utc), std::to_string(e.embedding_offset)});
  }
  w.close();
}

/// Ephemeris row: spacecraft position at a timestamp.
struct EphemerisEntry {
  double timestamp = 0.0;
  HelioPosition pos;
};

inline std::vector<EphemerisEntry> read_ephemeris_csv(
    const std::string& path) {
  const csv::Table t = csv::read_file(path);
  const int col_ts = t.column("timestamp_utc");
  const int col_r = t.column("r_au");
  const int col_lat = t.column("lat_deg");
  const int col_lon = t.column("lon_deg");
  if (col_ts < 0 || col_r < 0 || col_lat < 0 || col_lon < 0) {
    throw DataError("ephemeris CSV header must be "
                    "timestamp_utc,r_au,lat_deg,lon_deg: " + path);
  }
  std::vector<EphemerisEntry> out;
  out.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const std::string where = path + " row " + std::to_string(i + 2);
    EphemerisEntry e;
    e.timestamp = csv::parse_double(t.rows[i].at(col_ts), where);
    e.pos.r_au = csv::parse_double(t.rows[i].at(col_r), where);
    e.pos.lat_deg = csv::parse_double(t.rows[i].at(col_lat), where);
    e.pos.lon_deg = normalize_lon(csv::parse_double(t.rows[i].at(col_lon), where));
    out.push_back(e);
  }
  std::sort(out.begin(), out.end(),
            [](const EphemerisEntry& a, const EphemerisEntry& b) {
              return a.timestamp < b.timestamp;
            });
  if (out.empty()) throw DataError("ephemeris CSV has no rows: " + path);
  return out;
}

inline void write_ephemeris_csv(const std::string& path,
                                const std::vector<EphemerisEntry>& eph) {
  csv::Writer w(path);
  w.row({"timestamp_utc", "r_au", "lat_deg", "lon_deg"});
  for (const auto& e : eph) {
    w.row({csv::fmt(e.timestamp), csv::fmt(e.pos.r_au),
           csv::fmt(e.pos.lat_deg), csv::fmt(e.pos.lon_deg)});
  }
  w.close();
}

/// Position at an arbitrary time: linear interpolation between ephemeris
/// rows (circular-aware for longitude), clamped at the ends.
inline HelioPosition interpolate_position(
    const std::vector<EphemerisEntry>& eph, double t) {
  if (eph.empty()) throw DataError("empty ephemeris");
  if (t <= eph.front().timestamp) return eph.front().pos;
  if (t >= eph.back().timestamp) return eph.back().pos;
  const auto hi = std::lower_bound(
      eph.begin(), eph.end(), t,
      [](const EphemerisEntry& e, double x) { return e.timestamp < x; });
  const auto lo = hi - 1;
  const double span = hi->timestamp - lo->timestamp;
  const double f = span > 0.0 ? (t - lo->timestamp) / span : 0.0;
  HelioPosition p;
  p.r_au = lo->pos.r_au + f * (hi->pos.r_au - lo->pos.r_au);
  p.lat_deg = lo->pos.lat_deg + f * (hi->pos.lat_deg - lo->pos.lat_deg);
  double dlon = hi->pos.lon_deg - lo->pos.lon_deg;
  if (dlon > 180.0) dlon -= 360.0;
  if (dlon < -180.0) dlon += 360.0;
  p.lon_deg = normalize_lon(lo->pos.lon_deg + f * dlon);
  return p;
}

}  // namespace heliofield::connectivity
