#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "heliofield/backbone.hpp"
#include "heliofield/checkpoint.hpp"
#include "heliofield/config.hpp"
#include "heliofield/connectivity.hpp"
#include "heliofield/constants.hpp"
#include "heliofield/dataset.hpp"
#include "heliofield/encoding.hpp"
#include "heliofield/errors.hpp"
#include "heliofield/images.hpp"
#include "heliofield/plasma.hpp"
#include "heliofield/synth.hpp"
#include "heliofield/timeutil.hpp"

namespace heliofield::pipeline {

/// paths.* keys override the conventional file names under paths.out.
inline std::string resolved_path(const Config& cfg, const std::string& key,
                                 const std::string& conventional) {
  const std::string p = cfg.str(key);
  if (!p.empty()) return p;
  return cfg.str("paths.out") + "/" + conventional;
}

inline void ensure_parent_dir(const std::string& path) {
  const std::filesystem::path parent =
      std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

// ---------------------------------------------------------------------------
// Labeling flow.

/// Splits a sorted raw stream wherever consecutive readings are farther
/// apart than max_gap_s, so month-scale holes are never interpolated
/// across. Zero disables splitting.
inline std::vector<std::vector<plasma::RawReading>> split_raw_on_gaps(
    const std::vector<plasma::RawReading>& raw, double max_gap_s) {
  std::vector<std::vector<plasma::RawReading>> chunks;
  for (const auto& r : raw) {
    if (chunks.empty() ||
        (max_gap_s > 0.0 &&
         r.timestamp - chunks.back().back().timestamp > max_gap_s)) {
      chunks.emplace_back();
    }
    chunks.back().push_back(r);
  }
  return chunks;
}

struct LabeledGrid {
  std::vector<plasma::LabeledSample> samples;
  std::size_t excluded = 0;
};

/// resample -> fill -> derive -> classify over each contiguous chunk.
inline LabeledGrid label_raw(const std::vector<plasma::RawReading>& raw,
                             const Config& cfg) {
  if (raw.empty()) throw DataError("label: empty raw stream");
  const plasma::LabelConfig label_cfg = plasma::LabelConfig::from_config(cfg);
  const double cadence = cfg.f64("plasma.cadence_s");
  const double max_gap =
      cfg.f64("plasma.max_gap_minutes") * constants::kSecondsPerMinute;
  LabeledGrid out;
  for (const auto& chunk : split_raw_on_gaps(raw, max_gap)) {
    const plasma::BinnedSeries series =
        plasma::resample_series(chunk, cadence);
    const std::vector<plasma::PlasmaSample> grid = plasma::fill_gaps(series);
    std::size_t excluded = 0;
    std::vector<plasma::LabeledSample> labeled =
        plasma::label_samples(grid, label_cfg, &excluded);
    out.excluded += excluded;
    out.samples.insert(out.samples.end(),
                       std::make_move_iterator(labeled.begin()),
                       std::make_move_iterator(labeled.end()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Footpoint series.

/// Footpoints are a low-cadence product: one backmap per footpoint-cadence
/// bucket, anchored at the first labeled sample inside the bucket, then
/// forward-filled to every sample in the bucket.
struct FootpointSeries {
  std::vector<double> anchors;  // anchor sample timestamps, ascending
  std::vector<connectivity::Footpoint> footpoints;

  [[nodiscard]] const connectivity::Footpoint& at(double t) const {
    if (anchors.empty()) throw DataError("footpoint series is empty");
    auto it = std::upper_bound(anchors.begin(), anchors.end(), t);
    const std::size_t i =
        it == anchors.begin()
            ? 0
            : static_cast<std::size_t>((it - anchors.begin()) - 1);
    return footpoints[i];
  }
};

inline FootpointSeries footpoint_series(
    const std::vector<plasma::LabeledSample>& labeled,
    const std::vector<connectivity::EphemerisEntry>& ephemeris,
    const Config& cfg) {
  if (labeled.empty()) throw DataError("footpoints: no labeled samples");
  const connectivity::BackmapParams params =
      connectivity::BackmapParams::from_config(cfg);
  const double cadence = cfg.f64("connectivity.footpoint_cadence_s");
  if (!(cadence > 0.0)) {
    throw ConfigError("connectivity.footpoint_cadence_s must be > 0");
  }
  FootpointSeries fs;
  double current_bucket = std::numeric_limits<double>::quiet_NaN();
  for (const auto& ls : labeled) {
    const double bucket = std::floor(ls.sample.timestamp / cadence);
    if (!fs.anchors.empty() && bucket == current_bucket) continue;
    current_bucket = bucket;
    const connectivity::HelioPosition pos =
        connectivity::interpolate_position(ephemeris, ls.sample.timestamp);
    fs.anchors.push_back(ls.sample.timestamp);
    fs.footpoints.push_back(
        connectivity::backmap_footpoint(pos, ls.sample.v_sw, params));
  }
  return fs;
}

inline void write_footpoints_csv(const std::string& path,
                                 const FootpointSeries& fs) {
  csv::Writer w(path);
  w.row({"timestamp_utc", "fp_lat_deg", "fp_lon_deg", "travel_time_s"});
  for (std::size_t i = 0; i < fs.anchors.size(); ++i) {
    w.row({csv::fmt(fs.anchors[i]), csv::fmt(fs.footpoints[i].lat_deg),
           csv::fmt(fs.footpoints[i].lon_deg),
           csv::fmt(fs.footpoints[i].travel_time_s)});
  }
  w.close();
}

inline FootpointSeries read_footpoints_csv(const std::string& path) {
  const csv::Table t = csv::read_file(path);
  const std::vector<std::string> expect = {"timestamp_utc", "fp_lat_deg",
                                           "fp_lon_deg", "travel_time_s"};
  if (t.header != expect) {
    throw DataError(path + ": unexpected footpoints header");
  }
  FootpointSeries fs;
  for (const auto& row : t.rows) {
    fs.anchors.push_back(csv::parse_double(row.at(0), path));
    connectivity::Footpoint fp;
    fp.lat_deg = csv::parse_double(row.at(1), path);
    fp.lon_deg = csv::parse_double(row.at(2), path);
    fp.travel_time_s = csv::parse_double(row.at(3), path);
    fs.footpoints.push_back(fp);
  }
  return fs;
}

// ---------------------------------------------------------------------------
// Dataset assembly.

struct AssemblyResult {
  std::vector<harness::LabeledExample> examples;
  std::size_t unpaired = 0;  // dropped: no image within tolerance
};

/// Joins labeled minutes with spacecraft position, forward-filled
/// footpoints, the image pairing, and the temporal split rules. Samples
/// without an image inside the pairing tolerance are dropped and counted.
inline AssemblyResult assemble_dataset(
    const std::vector<plasma::LabeledSample>& labeled,
    const FootpointSeries& footpoints,
    const std::vector<connectivity::EphemerisEntry>& ephemeris,
    const std::vector<connectivity::ImageIndexEntry>& index,
    const Config& cfg) {
  const connectivity::SplitRules rules =
      connectivity::SplitRules::from_config(cfg);
  const double tolerance = cfg.f64("connectivity.pairing_tolerance_s");
  AssemblyResult out;
  out.examples.reserve(labeled.size());
  for (const auto& ls : labeled) {
    const double t = ls.sample.timestamp;
    const connectivity::Footpoint& fp = footpoints.at(t);
    const auto entry =
        connectivity::find_nearest_image(t, fp.travel_time_s, index,
                                         tolerance);
    if (!entry) {
      ++out.unpaired;
      continue;
    }
    const connectivity::HelioPosition pos =
        connectivity::interpolate_position(ephemeris, t);
    harness::LabeledExample e;
    e.timestamp = static_cast<std::int64_t>(t);
    e.image_key = entry->image_key_utc;
    e.sc_lat = pos.lat_deg;
    e.sc_lon = pos.lon_deg;
    e.fp_lat = fp.lat_deg;
    e.fp_lon = fp.lon_deg;
    e.travel_time_s = fp.travel_time_s;
    e.label = ls.label;
    e.split = rules.assign(t);
    e.interpolated = ls.sample.interp_fields || ls.sample.interp_plasma;
    out.examples.push_back(e);
  }
  return out;
}

inline void write_assembly_stats(const std::string& path,
                                 const AssemblyResult& assembly,
                                 std::size_t excluded) {
  nlohmann::ordered_json j;
  j["examples"] = assembly.examples.size();
  j["unpaired_dropped"] = assembly.unpaired;
  j["excluded_degenerate_minutes"] = excluded;
  j["notes"] = nlohmann::ordered_json::array(
      {"footpoints are a low-cadence series forward-filled to the sample "
       "cadence",
       "focal alpha entries follow loss.alpha_order (default: descending "
       "class frequency)"});
  binio::write_binary_file(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Synthetic end-to-end flow.

struct SynthWindow {
  std::string name;  // train, val, test
  double start_utc = 0.0;
  std::int64_t minutes = 0;
};

inline std::vector<SynthWindow> synth_windows(const Config& cfg) {
  std::vector<SynthWindow> w = {
      {"train", parse_utc_date(cfg.str("synth.train_start")),
       cfg.i64("synth.train_minutes")},
      {"val", parse_utc_date(cfg.str("synth.val_start")),
       cfg.i64("synth.val_minutes")},
      {"test", parse_utc_date(cfg.str("synth.test_start")),
       cfg.i64("synth.test_minutes")},
  };
  std::sort(w.begin(), w.end(), [](const SynthWindow& a, const SynthWindow& b) {
    return a.start_utc < b.start_utc;
  });
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    const double end =
        w[i].start_utc +
        static_cast<double>(w[i].minutes) * constants::kSecondsPerMinute;
    if (end > w[i + 1].start_utc) {
      throw ConfigError("synthetic windows '" + w[i].name + "' and '" +
                        w[i + 1].name + "' overlap");
    }
  }
  return w;
}

struct SynthArtifacts {
  std::vector<plasma::RawReading> raw;
  std::vector<std::pair<double, plasma::WindClass>> ground_truth;
  std::vector<plasma::LabeledSample> labeled;
  std::size_t excluded = 0;
  ImageSet images;
  std::vector<std::pair<std::int64_t, plasma::WindClass>> image_classes;
  std::vector<connectivity::EphemerisEntry> ephemeris;
  MockBackbone backbone;
  EmbeddingStore embeddings;
  std::vector<connectivity::ImageIndexEntry> index;
  FootpointSeries footpoints;
  AssemblyResult assembly;
};

/// Generates the full synthetic workload in memory: telemetry and ground
/// truth per window, imagery over each window extended back by the source
/// margin, an hourly ephemeris, a least-squares-pretrained backbone with
/// its embedding store, and the assembled dataset.
inline SynthArtifacts run_synth(const Config& cfg) {
  const synth::SynthConfig sc = synth::SynthConfig::from_config(cfg);
  const std::vector<SynthWindow> windows = synth_windows(cfg);
  const double margin_s =
      synth::source_margin_minutes(sc) * constants::kSecondsPerMinute;

  SynthArtifacts art;
  art.images = ImageSet(sc.geom);
  std::map<std::int64_t, plasma::WindClass> keyed;
  std::vector<std::int64_t> train_keys;

  for (const auto& w : windows) {
    const synth::Stream stream =
        synth::generate_stream(w.start_utc, w.minutes, sc, "synth." + w.name);
    art.raw.insert(art.raw.end(), stream.readings.begin(),
                   stream.readings.end());
    art.ground_truth.insert(art.ground_truth.end(),
                            stream.ground_truth.begin(),
                            stream.ground_truth.end());

    const double end =
        w.start_utc +
        static_cast<double>(w.minutes) * constants::kSecondsPerMinute;
    for (std::int64_t key :
         synth::image_keys(w.start_utc - margin_s, end, sc.image_cadence_s)) {
      const plasma::WindClass cls =
          synth::regime_at(stream.source_segments, static_cast<double>(key));
      const auto [it, inserted] = keyed.emplace(key, cls);
      if (!inserted && it->second != cls) {
        throw ConfigError("synthetic windows disagree on image key " +
                          std::to_string(key));
      }
      if (w.name == "train") train_keys.push_back(key);
    }

    // Each window is contiguous by construction; label it in isolation
    // so inter-window holes are never interpolated.
    LabeledGrid grid = label_raw(stream.readings, cfg);
    art.excluded += grid.excluded;
    art.labeled.insert(art.labeled.end(),
                       std::make_move_iterator(grid.samples.begin()),
                       std::make_move_iterator(grid.samples.end()));
  }

  art.image_classes.assign(keyed.begin(), keyed.end());
  art.images = synth::generate_images(art.image_classes, sc);

  const double eph_start = windows.front().start_utc - margin_s;
  const double eph_end =
      windows.back().start_utc +
      static_cast<double>(windows.back().minutes) *
          constants::kSecondsPerMinute;
  art.ephemeris = synth::generate_ephemeris(eph_start, eph_end, sc);

  // Backbone pretraining: regress train-window patch means onto the
  // per-class codes, mimicking a backbone that has already learned the
  // image-class geometry without ever seeing the labeler's output.
  const BackboneConfig backbone_cfg = BackboneConfig::from_config(cfg);
  art.backbone = MockBackbone(backbone_cfg);
  if (train_keys.empty()) {
    throw DataError("synth: train window produced no images");
  }
  const auto codes =
      synth::class_codes(backbone_cfg.dim, sc.pattern_seed);
  neural::Tensor<double> means(
      train_keys.size(), static_cast<std::size_t>(backbone_cfg.patch_dim()));
  neural::Tensor<double> targets(
      train_keys.size(), static_cast<std::size_t>(backbone_cfg.dim));
  for (std::size_t i = 0; i < train_keys.size(); ++i) {
    const std::vector<double> m =
        patch_mean(art.images.get(train_keys[i]), backbone_cfg);
    std::copy(m.begin(), m.end(),
              means.data.begin() + static_cast<std::ptrdiff_t>(i * m.size()));
    const auto& code =
        codes[static_cast<std::size_t>(keyed.at(train_keys[i]))];
    std::copy(code.begin(), code.end(),
              targets.data.begin() +
                  static_cast<std::ptrdiff_t>(i * code.size()));
  }
  art.backbone.fit_least_squares(means, targets);

  art.embeddings = EmbeddingStore(backbone_cfg.dim);
  for (const auto& [key, cls] : art.image_classes) {
    const std::vector<double> e = art.backbone.embed(art.images.get(key));
    art.embeddings.put(key, std::vector<float>(e.begin(), e.end()));
  }
  for (const auto& [key, offset] : art.embeddings.index_entries()) {
    art.index.push_back({key, offset});
  }

  art.footpoints = footpoint_series(art.labeled, art.ephemeris, cfg);
  art.assembly =
      assemble_dataset(art.labeled, art.footpoints, art.ephemeris, art.index,
                       cfg);
  return art;
}

inline void write_ground_truth_csv(
    const std::string& path,
    const std::vector<std::pair<double, plasma::WindClass>>& gt) {
  csv::Writer w(path);
  w.row({"timestamp_utc", "label"});
  for (const auto& [t, cls] : gt) {
    w.row({csv::fmt(t), plasma::wind_class_name(cls)});
  }
  w.close();
}

inline std::vector<std::pair<double, plasma::WindClass>> read_ground_truth_csv(
    const std::string& path) {
  const csv::Table t = csv::read_file(path);
  const std::vector<std::string> expect = {"timestamp_utc", "label"};
  if (t.header != expect) {
    throw DataError(path + ": unexpected ground truth header");
  }
  std::vector<std::pair<double, plasma::WindClass>> out;
  for (const auto& row : t.rows) {
    out.emplace_back(csv::parse_double(row.at(0), path),
                     plasma::wind_class_from_name(row.at(1)));
  }
  return out;
}

/// Writes every synthetic artifact under the configured paths; this is
/// exactly the file set the real pipeline would consume.
inline void write_synth_artifacts(const SynthArtifacts& art,
                                  const Config& cfg) {
  const auto path = [&](const char* key, const char* name) {
    const std::string p = resolved_path(cfg, key, name);
    ensure_parent_dir(p);
    return p;
  };
  plasma::write_raw_csv(path("paths.raw_csv", "raw.csv"), art.raw);
  write_ground_truth_csv(path("paths.ground_truth", "ground_truth.csv"),
                         art.ground_truth);
  plasma::write_labeled_csv(path("paths.labeled_csv", "labeled.csv"),
                            art.labeled);
  connectivity::write_ephemeris_csv(
      path("paths.ephemeris_csv", "ephemeris.csv"), art.ephemeris);
  art.images.save(path("paths.images", "images.swim"));
  art.embeddings.save(path("paths.embeddings", "embeddings.sweb"));
  connectivity::write_image_index_csv(
      path("paths.image_index_csv", "image_index.csv"), art.index);
  write_footpoints_csv(path("paths.footpoints_csv", "footpoints.csv"),
                       art.footpoints);
  harness::write_dataset_csv(path("paths.dataset", "dataset.csv"),
                             art.assembly.examples);
  Checkpoint backbone_ckpt;
  backbone_ckpt.arch_digest = cfg.arch_digest();
  append_backbone_tensors(art.backbone, backbone_ckpt.tensors);
  backbone_ckpt.save(path("paths.backbone", "backbone.swhp"));
  write_assembly_stats(cfg.str("paths.out") + "/assembly.json", art.assembly,
                       art.excluded);
}

// ---------------------------------------------------------------------------
// Report.

/// Class distribution per split plus assembly counters when present.
inline nlohmann::ordered_json build_report(
    const std::vector<harness::LabeledExample>& examples,
    const std::string& assembly_json_path) {
  nlohmann::ordered_json report;
  report["examples"] = examples.size();
  nlohmann::ordered_json splits = nlohmann::ordered_json::object();
  for (connectivity::SplitAssignment s :
       {connectivity::SplitAssignment::Train,
        connectivity::SplitAssignment::Validation,
        connectivity::SplitAssignment::Test,
        connectivity::SplitAssignment::Excluded}) {
    std::array<std::size_t, plasma::kNumClasses> counts{};
    std::size_t total = 0;
    for (const auto& e : examples) {
      if (e.split != s) continue;
      counts[static_cast<std::size_t>(e.label)] += 1;
      total += 1;
    }
    nlohmann::ordered_json node;
    node["total"] = total;
    nlohmann::ordered_json dist = nlohmann::ordered_json::object();
    for (int c = 0; c < plasma::kNumClasses; ++c) {
      dist[plasma::wind_class_name(static_cast<plasma::WindClass>(c))] =
          counts[static_cast<std::size_t>(c)];
    }
    node["class_counts"] = dist;
    splits[connectivity::split_name(s)] = node;
  }
  report["splits"] = splits;
  if (std::filesystem::exists(assembly_json_path)) {
    report["assembly"] =
        nlohmann::json::parse(binio::read_binary_file(assembly_json_path));
  }
  return report;
}

}  // namespace heliofield::pipeline
