#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "heliofield/connectivity.hpp"
#include "heliofield/csv.hpp"
#include "heliofield/errors.hpp"
#include "heliofield/plasma.hpp"
#include "heliofield/rng.hpp"

namespace heliofield::harness {

using connectivity::SplitAssignment;
using connectivity::split_from_name;
using connectivity::split_name;
using plasma::kNumClasses;
using plasma::WindClass;
using plasma::wind_class_from_name;
using plasma::wind_class_name;

/// One assembled training example: a plasma sample joined with its
/// spacecraft position, backmapped footpoint, paired image, label, and
/// split membership.
struct LabeledExample {
  std::int64_t timestamp = 0;
  std::int64_t image_key = 0;
  double sc_lat = 0.0;
  double sc_lon = 0.0;
  double fp_lat = 0.0;
  double fp_lon = 0.0;
  double travel_time_s = 0.0;
  WindClass label = WindClass::StreamerBelt;
  SplitAssignment split = SplitAssignment::Excluded;
  bool interpolated = false;
};

inline const std::vector<std::string>& dataset_csv_header() {
  static const std::vector<std::string> header = {
      "timestamp_utc", "image_key_utc",  "sc_lat_deg", "sc_lon_deg",
      "fp_lat_deg",    "fp_lon_deg",     "travel_time_s",
      "label",         "split",          "interpolated"};
  return header;
}

inline void write_dataset_csv(const std::string& path,
                              const std::vector<LabeledExample>& examples) {
  csv::Writer out(path);
  out.row(dataset_csv_header());
  for (const LabeledExample& e : examples) {
    out.row({std::to_string(e.timestamp), std::to_string(e.image_key),
             csv::fmt(e.sc_lat), csv::fmt(e.sc_lon), csv::fmt(e.fp_lat),
             csv::fmt(e.fp_lon), csv::fmt(e.travel_time_s),
             wind_class_name(e.label), split_name(e.split),
             e.interpolated ? "1" : "0"});
  }
  out.close();
}

inline std::vector<LabeledExample> read_dataset_csv(const std::string& path) {
  csv::Table table = csv::read_file(path);
  if (table.header != dataset_csv_header()) {
    throw DataError(path + ": unexpected dataset header");
  }
  std::vector<LabeledExample> examples;
  examples.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const std::vector<std::string>& row = table.rows[i];
    LabeledExample e;
    e.timestamp = static_cast<std::int64_t>(
        csv::parse_double(row[0], path + " timestamp_utc"));
    e.image_key = static_cast<std::int64_t>(
        csv::parse_double(row[1], path + " image_key_utc"));
    e.sc_lat = csv::parse_double(row[2], path + " sc_lat_deg");
    e.sc_lon = csv::parse_double(row[3], path + " sc_lon_deg");
    e.fp_lat = csv::parse_double(row[4], path + " fp_lat_deg");
    e.fp_lon = csv::parse_double(row[5], path + " fp_lon_deg");
    e.travel_time_s = csv::parse_double(row[6], path + " travel_time_s");
    e.label = wind_class_from_name(row[7]);
    e.split = split_from_name(row[8]);
    e.interpolated = row[9] == "1";
    examples.push_back(e);
  }
  return examples;
}

/// Indices of the examples belonging to one split, optionally dropping
/// gap-filled samples.
inline std::vector<std::size_t> split_indices(
    const std::vector<LabeledExample>& examples, SplitAssignment split,
    bool drop_interpolated = false) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (examples[i].split != split) continue;
    if (drop_interpolated && examples[i].interpolated) continue;
    out.push_back(i);
  }
  return out;
}

inline std::array<std::size_t, kNumClasses> class_counts(
    const std::vector<LabeledExample>& examples,
    const std::vector<std::size_t>& indices) {
  std::array<std::size_t, kNumClasses> counts{};
  for (std::size_t i : indices) {
    counts[static_cast<std::size_t>(examples[i].label)] += 1;
  }
  return counts;
}

template <class T>
void fisher_yates_shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

/// Downsamples every class, without replacement, to the minority-class
/// count. Returns ascending indices; deterministic per seed.
inline std::vector<std::size_t> undersample(
    const std::vector<LabeledExample>& examples,
    const std::vector<std::size_t>& indices, std::uint64_t seed) {
  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i : indices) {
    by_class[static_cast<std::size_t>(examples[i].label)].push_back(i);
  }
  std::size_t min_count = std::numeric_limits<std::size_t>::max();
  for (int c = 0; c < kNumClasses; ++c) {
    const std::size_t n = by_class[static_cast<std::size_t>(c)].size();
    if (n == 0) {
      throw DataError("undersample: class " +
                      std::string(wind_class_name(static_cast<WindClass>(c))) +
                      " has no examples");
    }
    min_count = std::min(min_count, n);
  }
  std::vector<std::size_t> out;
  out.reserve(min_count * kNumClasses);
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<std::size_t>& pool = by_class[static_cast<std::size_t>(c)];
    Rng rng = Rng::derived(seed, "undersample." +
                                     std::string(wind_class_name(static_cast<WindClass>(c))));
    fisher_yates_shuffle(pool, rng);
    out.insert(out.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(min_count));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace heliofield::harness
