#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "heliofield/pipeline.hpp"
#include "heliofield/sweep.hpp"
#include "heliofield/train.hpp"

namespace {

using namespace heliofield;

// Flags shared by every subcommand. --set overrides apply last so they win
// over both the config file and the dedicated flags.
struct CommonFlags {
  std::string config_path;
  std::string out;
  std::string strategy;
  std::string seed;
  std::vector<std::string> overrides;
};

void add_common_flags(CLI::App* sub, CommonFlags& flags) {
  sub->add_option("--config", flags.config_path, "configuration file (INI)");
  sub->add_option("--seed", flags.seed, "run seed (overrides run.seed)");
  sub->add_option("--out", flags.out, "output directory (overrides paths.out)");
  sub->add_option("--set", flags.overrides,
                  "section.key=value override, repeatable");
}

void add_strategy_flag(CLI::App* sub, CommonFlags& flags) {
  sub->add_option("--strategy", flags.strategy,
                  "head-only | finetune | random-init")
      ->check(CLI::IsMember({"head-only", "finetune", "random-init",
                             "head_only", "random_init",
                             "pretrained-finetune"}));
}

Config make_config(const CommonFlags& flags) {
  Config cfg;
  if (!flags.config_path.empty()) cfg.load_file(flags.config_path);
  if (!flags.seed.empty()) cfg.set("run.seed", flags.seed);
  if (!flags.out.empty()) cfg.set("paths.out", flags.out);
  if (!flags.strategy.empty()) cfg.set("train.strategy", flags.strategy);
  for (const auto& spec : flags.overrides) cfg.apply_override(spec);
  return cfg;
}

std::string out_path(const Config& cfg, const std::string& name) {
  const std::string p = cfg.str("paths.out") + "/" + name;
  pipeline::ensure_parent_dir(p);
  return p;
}

std::string input_path(const Config& cfg, const std::string& key,
                       const std::string& conventional) {
  const std::string p = pipeline::resolved_path(cfg, key, conventional);
  if (!std::filesystem::exists(p)) {
    throw MissingInputError("required input does not exist: " + p +
                            " (set " + key + " or run the producing step)");
  }
  return p;
}

std::string output_path(const Config& cfg, const std::string& key,
                        const std::string& conventional) {
  const std::string p = pipeline::resolved_path(cfg, key, conventional);
  pipeline::ensure_parent_dir(p);
  return p;
}

// ---------------------------------------------------------------------------
// Preprocessing subcommands.

void cmd_resample(const Config& cfg) {
  const std::string raw_path = input_path(cfg, "paths.raw_csv", "raw.csv");
  const auto raw = plasma::read_raw_csv(raw_path);
  const double cadence = cfg.f64("plasma.cadence_s");
  const double max_gap =
      cfg.f64("plasma.max_gap_minutes") * constants::kSecondsPerMinute;

  std::vector<plasma::PlasmaSample> grid;
  for (const auto& chunk : pipeline::split_raw_on_gaps(raw, max_gap)) {
    const plasma::BinnedSeries series = plasma::resample_series(chunk, cadence);
    std::vector<plasma::PlasmaSample> filled = plasma::fill_gaps(series);
    grid.insert(grid.end(), std::make_move_iterator(filled.begin()),
                std::make_move_iterator(filled.end()));
  }
  const std::string out = out_path(cfg, "resampled.csv");
  plasma::write_samples_csv(out, grid);
  std::cerr << "resample: " << raw.size() << " readings -> " << grid.size()
            << " samples at " << cadence << " s cadence -> " << out << "\n";
}

void cmd_label(Config cfg) {
  const std::string& overlay = cfg.str("paths.label_config");
  if (!overlay.empty()) cfg.load_file(overlay);
  const std::string raw_path = input_path(cfg, "paths.raw_csv", "raw.csv");
  const auto raw = plasma::read_raw_csv(raw_path);
  const pipeline::LabeledGrid grid = pipeline::label_raw(raw, cfg);
  const std::string out = output_path(cfg, "paths.labeled_csv", "labeled.csv");
  plasma::write_labeled_csv(out, grid.samples);
  std::cerr << "label: " << grid.samples.size() << " labeled samples ("
            << grid.excluded << " degenerate minutes excluded) -> " << out
            << "\n";
}

void cmd_map_footpoints(const Config& cfg) {
  const auto labeled = plasma::read_labeled_csv(
      input_path(cfg, "paths.labeled_csv", "labeled.csv"));
  const auto ephemeris = connectivity::read_ephemeris_csv(
      input_path(cfg, "paths.ephemeris_csv", "ephemeris.csv"));
  const pipeline::FootpointSeries fs =
      pipeline::footpoint_series(labeled, ephemeris, cfg);
  const std::string out =
      output_path(cfg, "paths.footpoints_csv", "footpoints.csv");
  pipeline::write_footpoints_csv(out, fs);
  std::cerr << "map-footpoints: " << fs.anchors.size() << " anchors at "
            << cfg.f64("connectivity.footpoint_cadence_s") << " s cadence -> "
            << out << "\n";
}

void cmd_pair(const Config& cfg) {
  const auto labeled = plasma::read_labeled_csv(
      input_path(cfg, "paths.labeled_csv", "labeled.csv"));
  const pipeline::FootpointSeries fs = pipeline::read_footpoints_csv(
      input_path(cfg, "paths.footpoints_csv", "footpoints.csv"));
  const auto ephemeris = connectivity::read_ephemeris_csv(
      input_path(cfg, "paths.ephemeris_csv", "ephemeris.csv"));
  const auto index = connectivity::read_image_index_csv(
      input_path(cfg, "paths.image_index_csv", "image_index.csv"));
  const pipeline::AssemblyResult assembly =
      pipeline::assemble_dataset(labeled, fs, ephemeris, index, cfg);
  const std::string out = output_path(cfg, "paths.dataset", "dataset.csv");
  harness::write_dataset_csv(out, assembly.examples);
  pipeline::write_assembly_stats(out_path(cfg, "assembly.json"), assembly, 0);
  std::cerr << "pair: " << assembly.examples.size() << " examples ("
            << assembly.unpaired << " unpaired dropped) -> " << out << "\n";
}

void cmd_synth(const Config& cfg) {
  const pipeline::SynthArtifacts art = pipeline::run_synth(cfg);
  pipeline::write_synth_artifacts(art, cfg);
  std::cerr << "synth: " << art.assembly.examples.size() << " examples, "
            << art.images.size() << " images, " << art.labeled.size()
            << " labeled minutes under " << cfg.str("paths.out") << "\n";
}

// ---------------------------------------------------------------------------
// Training-side subcommands.

struct LoadedData {
  harness::TrainData data;
  std::map<std::string, std::string> digests;
};

LoadedData load_training_inputs(const Config& cfg) {
  const std::string dataset_path =
      input_path(cfg, "paths.dataset", "dataset.csv");
  const std::string images_path = input_path(cfg, "paths.images", "images.swim");
  LoadedData loaded;
  loaded.digests["dataset"] = harness::file_digest(dataset_path);
  loaded.digests["images"] = harness::file_digest(images_path);
  loaded.data = harness::TrainData::build(
      harness::read_dataset_csv(dataset_path), ImageSet::load(images_path),
      BackboneConfig::from_config(cfg), EncodingConfig::from_config(cfg));
  return loaded;
}

MockBackbone load_backbone(const Config& cfg,
                           std::map<std::string, std::string>& digests) {
  const std::string path = input_path(cfg, "paths.backbone", "backbone.swhp");
  const Checkpoint ckpt = Checkpoint::load(path);
  if (ckpt.arch_digest != cfg.arch_digest()) {
    throw DataError("backbone checkpoint " + path +
                    " was written for a different architecture");
  }
  digests["backbone"] = harness::file_digest(path);
  return backbone_from_checkpoint(ckpt, BackboneConfig::from_config(cfg));
}

void cmd_train(const Config& cfg) {
  LoadedData loaded = load_training_inputs(cfg);
  harness::TrainOptions opts = harness::TrainOptions::from_config(cfg);
  harness::Model model = harness::make_model(cfg, opts.seed);
  if (opts.strategy != harness::TrainStrategy::RandomInit) {
    model.backbone = load_backbone(cfg, loaded.digests);
  }
  harness::TrainResult result =
      harness::train(std::move(model), loaded.data, opts, cfg.arch_digest());
  const harness::EvalResult val =
      harness::evaluate(result.model, loaded.data, loaded.data.val_idx);

  const std::string run_dir =
      cfg.str("paths.out") + "/" + harness::run_dir_name(cfg);
  harness::write_run_dir(run_dir, cfg, result.history, result.best,
                         val.metrics, loaded.digests);
  const std::string ckpt_path =
      output_path(cfg, "paths.checkpoint", "checkpoint.swhp");
  result.best.save(ckpt_path);

  std::cerr << "train: strategy=" << harness::strategy_name(opts.strategy)
            << " epochs=" << result.history.epochs.size()
            << " best_epoch=" << result.history.best_epoch
            << " best_val_loss=" << csv::fmt(result.history.best_val_loss)
            << "\ntrain: run dir " << run_dir << ", best checkpoint "
            << ckpt_path << "\n";
  if (result.diverged) {
    throw NumericError("training diverged (" + result.history.note +
                       "); history preserved in " + run_dir);
  }
}

void cmd_eval(const Config& cfg) {
  LoadedData loaded = load_training_inputs(cfg);
  const std::string ckpt_path =
      input_path(cfg, "paths.checkpoint", "checkpoint.swhp");
  const Checkpoint ckpt = Checkpoint::load(ckpt_path);
  if (ckpt.arch_digest != cfg.arch_digest()) {
    throw DataError("checkpoint " + ckpt_path +
                    " was written for a different architecture");
  }
  harness::Model model = harness::make_model(
      cfg, static_cast<std::uint64_t>(cfg.i64("run.seed")));
  model.backbone =
      backbone_from_checkpoint(ckpt, BackboneConfig::from_config(cfg));
  model.head = head_from_checkpoint(ckpt, model.head_cfg);

  const std::string split = cfg.str("eval.split");
  const std::vector<std::size_t>* idx = nullptr;
  if (split == "train") {
    idx = &loaded.data.train_idx;
  } else if (split == "validation") {
    idx = &loaded.data.val_idx;
  } else if (split == "test") {
    idx = &loaded.data.test_idx;
  } else {
    throw ConfigError("eval.split must be train, validation, or test, got '" +
                      split + "'");
  }

  const harness::EvalResult res = harness::evaluate(model, loaded.data, *idx);
  nlohmann::ordered_json meta = res.metrics.to_json();
  meta["split"] = split;
  meta["examples"] = idx->size();
  const std::string out = out_path(cfg, "metrics.json");
  binio::write_binary_file(out, meta.dump(2) + "\n");
  std::cout << meta.dump(2) << "\n";
  std::cerr << "eval: split=" << split << " accuracy="
            << csv::fmt(res.metrics.accuracy)
            << " macro_f1=" << csv::fmt(res.metrics.macro_f1) << " -> " << out
            << "\n";
}

void cmd_sweep(const Config& cfg) {
  LoadedData loaded = load_training_inputs(cfg);
  std::optional<MockBackbone> backbone;
  const harness::TrainOptions opts = harness::TrainOptions::from_config(cfg);
  if (opts.strategy != harness::TrainStrategy::RandomInit) {
    backbone = load_backbone(cfg, loaded.digests);
  }
  const harness::SweepResult result = harness::run_sweep(
      cfg, loaded.data, backbone ? &*backbone : nullptr, loaded.digests);
  std::cerr << "sweep: " << result.rows.size() << " cells ("
            << result.completed << " trained, " << result.skipped
            << " resumed, " << result.failed << " failed) -> " << result.dir
            << "/results.csv\n";
  if (!result.rows.empty() &&
      result.rows.front().status != harness::CellStatus::Failed) {
    const harness::SweepRow& best = result.rows.front();
    std::cout << "best cell: " << best.run_dir
              << " best_val_loss=" << csv::fmt(best.best_val_loss) << "\n";
  }
}

void cmd_report(const Config& cfg) {
  const auto examples = harness::read_dataset_csv(
      input_path(cfg, "paths.dataset", "dataset.csv"));
  nlohmann::ordered_json report = pipeline::build_report(
      examples, cfg.str("paths.out") + "/assembly.json");

  const std::string sweep_csv = harness::sweep_dir(cfg) + "/results.csv";
  if (std::filesystem::exists(sweep_csv)) {
    const csv::Table t = csv::read_file(sweep_csv);
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& row : t.rows) {
      nlohmann::ordered_json r = nlohmann::ordered_json::object();
      for (std::size_t i = 0; i < t.header.size() && i < row.size(); ++i) {
        r[t.header[i]] = row[i];
      }
      rows.push_back(std::move(r));
    }
    report["sweep"] = std::move(rows);
  }

  const std::string out = out_path(cfg, "report.json");
  binio::write_binary_file(out, report.dump(2) + "\n");
  std::cout << report.dump(2) << "\n";
  std::cerr << "report: " << examples.size() << " examples -> " << out << "\n";
}

void cmd_export_embeddings(const Config& cfg) {
  const auto examples = harness::read_dataset_csv(
      input_path(cfg, "paths.dataset", "dataset.csv"));
  const EmbeddingStore store = EmbeddingStore::load(
      input_path(cfg, "paths.embeddings", "embeddings.sweb"));
  const auto per_class = static_cast<std::size_t>(cfg.i64("export.per_class"));
  if (per_class < 1) throw ConfigError("export.per_class must be >= 1");
  const bool balanced = cfg.boolean("export.balanced");
  Rng rng = Rng::derived(static_cast<std::uint64_t>(cfg.i64("run.seed")),
                         "export");

  std::vector<std::size_t> selected;
  if (balanced) {
    for (int c = 0; c < plasma::kNumClasses; ++c) {
      std::vector<std::size_t> pool;
      for (std::size_t i = 0; i < examples.size(); ++i) {
        if (static_cast<int>(examples[i].label) == c) pool.push_back(i);
      }
      harness::fisher_yates_shuffle(pool, rng);
      pool.resize(std::min(pool.size(), per_class));
      selected.insert(selected.end(), pool.begin(), pool.end());
    }
  } else {
    selected.resize(examples.size());
    for (std::size_t i = 0; i < selected.size(); ++i) selected[i] = i;
    harness::fisher_yates_shuffle(selected, rng);
    selected.resize(std::min(selected.size(),
                             per_class * plasma::kNumClasses));
  }
  std::sort(selected.begin(), selected.end());

  const std::string out = out_path(cfg, "embeddings_export.csv");
  csv::Writer w(out);
  std::vector<std::string> header = {"timestamp_utc", "image_key_utc",
                                     "label", "split"};
  for (int d = 0; d < store.dim(); ++d) {
    header.push_back("e" + std::to_string(d));
  }
  w.row(header);
  for (std::size_t i : selected) {
    const harness::LabeledExample& e = examples[i];
    std::vector<std::string> row = {
        std::to_string(e.timestamp), std::to_string(e.image_key),
        plasma::wind_class_name(e.label),
        connectivity::split_name(e.split)};
    for (double v : store.get_f64(e.image_key)) row.push_back(csv::fmt(v));
    w.row(row);
  }
  w.close();
  std::cerr << "export-embeddings: " << selected.size() << " rows ("
            << (balanced ? "balanced" : "uniform") << ") -> " << out << "\n";
}

void cmd_compare(const Config& cfg) {
  LoadedData loaded = load_training_inputs(cfg);
  const MockBackbone backbone = load_backbone(cfg, loaded.digests);
  const harness::StrategyComparison cmp =
      harness::compare_strategies(cfg, loaded.data, backbone);
  const std::string out = out_path(cfg, "comparison.csv");
  harness::write_comparison_csv(out, cmp);
  std::cout << cmp.summary;
  std::cerr << "compare: per-epoch losses for all three strategies -> " << out
            << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"solar wind class pipeline: labeling, connectivity, synthetic "
               "data, and neural-field training"};
  app.require_subcommand(1);

  CommonFlags flags;
  struct Entry {
    const char* name;
    const char* help;
    void (*run)(const Config&);
    bool strategy_flag;
  };
  const std::vector<Entry> entries = {
      {"resample", "bin raw instrument readings onto the minute grid", cmd_resample, false},
      {"map-footpoints", "ballistically backmap labeled samples", cmd_map_footpoints, false},
      {"pair", "join labels, footpoints, images, and splits into a dataset", cmd_pair, false},
      {"synth", "generate the full synthetic substrate", cmd_synth, false},
      {"train", "run the configured training strategy", cmd_train, true},
      {"eval", "evaluate a checkpoint on a dataset split", cmd_eval, false},
      {"sweep", "train every cell of the hyperparameter grid", cmd_sweep, true},
      {"report", "class distribution and sweep ranking report", cmd_report, false},
      {"export-embeddings", "dump a class-sampled embedding CSV", cmd_export_embeddings, false},
      {"compare", "train all three strategies on identical data", cmd_compare, false},
  };

  std::map<const CLI::App*, const Entry*> dispatch;
  for (const Entry& e : entries) {
    CLI::App* sub = app.add_subcommand(e.name, e.help);
    add_common_flags(sub, flags);
    if (e.strategy_flag) add_strategy_flag(sub, flags);
    dispatch[sub] = &e;
  }
  // label takes a Config by value (it may overlay paths.label_config), so
  // it does not fit the shared Entry signature.
  CLI::App* label_sub =
      app.add_subcommand("label", "derive plasma quantities and classify");
  add_common_flags(label_sub, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const Config cfg = make_config(flags);
    for (const auto* sub : app.get_subcommands()) {
      if (sub == label_sub) {
        cmd_label(cfg);
      } else {
        dispatch.at(sub)->run(cfg);
      }
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const MissingInputError& e) {
    std::cerr << "missing input: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
