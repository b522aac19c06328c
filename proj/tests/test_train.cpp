#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "heliofield/backbone.hpp"
#include "heliofield/binio.hpp"
#include "heliofield/config.hpp"
#include "heliofield/csv.hpp"
#include "heliofield/dataset.hpp"
#include "heliofield/errors.hpp"
#include "heliofield/synth.hpp"
#include "heliofield/train.hpp"

#include "helpers.hpp"

using namespace heliofield;
using harness::LabeledExample;
using harness::SplitAssignment;

namespace {

// Tiny but learnable classification problem: 48 distinct images, one
// noisy class pattern each, coordinates spread over the valid ranges.
struct Fixture {
  Config cfg;
  ImageSet images{ImageGeometry{}};
  harness::TrainData data;
  MockBackbone pretrained;
};

Config fixture_config(
    const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
  Config cfg;
  cfg.set("backbone.image_h", "8");
  cfg.set("backbone.image_w", "8");
  cfg.set("backbone.image_c", "1");
  cfg.set("backbone.patch", "4");
  cfg.set("backbone.dim", "8");
  cfg.set("encoding.embedding_dim", "8");
  cfg.set("encoding.bands", "2");
  cfg.set("head.kind", "linear");
  cfg.set("head.hidden", "16");
  cfg.set("train.batch", "8");
  cfg.set("train.epochs", "4");
  cfg.set("train.early_stop_patience", "4");
  cfg.set("optimizer.lr", "0.005");
  for (const auto& [k, v] : overrides) cfg.set(k, v);
  return cfg;
}

Fixture make_fixture(
    const std::vector<std::pair<std::string, std::string>>& overrides = {},
    std::size_t n_examples = 48) {
  Fixture f;
  f.cfg = fixture_config(overrides);

  const std::size_t n_images = 48;
  auto sc = synth::SynthConfig::from_config(f.cfg);
  std::vector<std::pair<std::int64_t, plasma::WindClass>> keyed;
  for (std::size_t i = 0; i < n_images; ++i) {
    keyed.emplace_back(static_cast<std::int64_t>(720 * i),
                       static_cast<plasma::WindClass>(i % 4));
  }
  f.images = synth::generate_images(keyed, sc);

  std::vector<LabeledExample> examples(n_examples);
  Rng rng(515);
  for (std::size_t i = 0; i < n_examples; ++i) {
    auto& e = examples[i];
    const std::size_t img = i % n_images;
    e.timestamp = static_cast<std::int64_t>(100000 + 60 * i);
    e.image_key = keyed[img].first;
    e.sc_lat = -30.0 + 60.0 * rng.uniform();
    e.sc_lon = 360.0 * rng.uniform();
    e.fp_lat = -30.0 + 60.0 * rng.uniform();
    e.fp_lon = 360.0 * rng.uniform();
    e.travel_time_s = 1.0e5;
    e.label = keyed[img].second;
    const double frac = static_cast<double>(i) / static_cast<double>(n_examples);
    e.split = frac < 2.0 / 3.0 ? SplitAssignment::Train
              : frac < 5.0 / 6.0 ? SplitAssignment::Validation
                                 : SplitAssignment::Test;
    e.interpolated = i % 8 == 0;
  }

  const auto backbone_cfg = BackboneConfig::from_config(f.cfg);
  const auto enc = EncodingConfig::from_config(f.cfg);
  f.data = harness::TrainData::build(std::move(examples), f.images,
                                     backbone_cfg, enc);

  // Synthetic pretraining: ridge regression from patch means onto the
  // per-class target codes.
  f.pretrained = MockBackbone(backbone_cfg);
  const auto codes = synth::class_codes(backbone_cfg.dim, sc.pattern_seed);
  neural::Tensor<double> targets(n_images,
                                 static_cast<std::size_t>(backbone_cfg.dim));
  for (std::size_t i = 0; i < n_images; ++i) {
    const auto& row = codes[static_cast<std::size_t>(keyed[i].second)];
    std::copy(row.begin(), row.end(),
              targets.data.begin() + static_cast<std::ptrdiff_t>(i * row.size()));
  }
  f.pretrained.fit_least_squares(f.data.patch_means, targets);
  return f;
}

double f32(double v) { return static_cast<double>(static_cast<float>(v)); }

bool backbone_matches_f32(const MockBackbone& restored,
                          const MockBackbone& original) {
  for (std::size_t i = 0; i < restored.weight.data.size(); ++i) {
    if (restored.weight.data[i] != f32(original.weight.data[i])) return false;
  }
  for (std::size_t i = 0; i < restored.bias.data.size(); ++i) {
    if (restored.bias.data[i] != f32(original.bias.data[i])) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("train data view shares rows between examples of one image",
          "[train]") {
  Fixture f = make_fixture({}, 96);  // two examples per image

  REQUIRE(f.data.examples.size() == 96);
  REQUIRE(f.data.patch_means.rows() == 48);
  REQUIRE(f.data.image_row.size() == 96);
  // 8 channels... geometry 8x8x1 patch 4 -> patch_dim 16.
  REQUIRE(f.data.patch_means.cols() == 16);
  REQUIRE(f.data.fourier.rows() == 96);
  REQUIRE(f.data.fourier.cols() == 2 * 2 * 4);

  for (std::size_t i = 0; i < 48; ++i) {
    REQUIRE(f.data.image_row[i] == f.data.image_row[i + 48]);
    REQUIRE(f.data.labels[i] == f.data.labels[i + 48]);
  }
  // patch_means rows follow ascending image key, i.e. creation order here.
  const auto direct = patch_mean(f.images.get(720),
                                 BackboneConfig::from_config(f.cfg));
  for (std::size_t c = 0; c < direct.size(); ++c) {
    REQUIRE(f.data.patch_means(f.data.image_row[1], c) == direct[c]);
  }

  const auto n_splits = f.data.train_idx.size() + f.data.val_idx.size() +
                        f.data.test_idx.size();
  REQUIRE(n_splits == 96);

  CHECK_THROWS_AS(
      harness::TrainData::build({}, f.images,
                                BackboneConfig::from_config(f.cfg),
                                EncodingConfig::from_config(f.cfg)),
      DataError);
}

TEST_CASE("head-only training leaves the backbone frozen", "[train]") {
  Fixture f = make_fixture({{"train.strategy", "head_only"}});
  auto opts = harness::TrainOptions::from_config(f.cfg);

  harness::Model model = harness::make_model(f.cfg, opts.seed);
  model.backbone = f.pretrained;
  const auto result =
      harness::train(std::move(model), f.data, opts, f.cfg.arch_digest());

  REQUIRE_FALSE(result.diverged);
  REQUIRE(result.history.best_epoch > 0);
  for (const auto& e : result.history.epochs) REQUIRE(e.stage == 1);
  // The restored model's backbone is the pretrained one, modulo the f32
  // squeeze every checkpoint applies.
  REQUIRE(backbone_matches_f32(result.model.backbone, f.pretrained));
}

TEST_CASE("finetune unfreezes the backbone in stage two", "[train]") {
  Fixture f = make_fixture({{"train.strategy", "finetune"},
                            {"train.epochs", "3"}});
  auto opts = harness::TrainOptions::from_config(f.cfg);

  harness::Model model = harness::make_model(f.cfg, opts.seed);
  model.backbone = f.pretrained;
  const auto result =
      harness::train(std::move(model), f.data, opts, f.cfg.arch_digest());

  REQUIRE_FALSE(result.diverged);
  int max_stage = 0;
  int last_stage1_epoch = 0;
  for (const auto& e : result.history.epochs) {
    max_stage = std::max(max_stage, e.stage);
    if (e.stage == 1) last_stage1_epoch = e.epoch;
  }
  REQUIRE(max_stage == 2);

  // Stage-2 epochs continue the global numbering.
  for (const auto& e : result.history.epochs) {
    if (e.stage == 2) REQUIRE(e.epoch > last_stage1_epoch);
  }

  // Whenever a stage-2 epoch wins, the saved backbone has moved away from
  // the pretrained weights; a stage-1 winner keeps them frozen.
  if (result.history.best_epoch > last_stage1_epoch) {
    REQUIRE_FALSE(backbone_matches_f32(result.model.backbone, f.pretrained));
  } else {
    REQUIRE(backbone_matches_f32(result.model.backbone, f.pretrained));
  }
}

TEST_CASE("best epoch tracks the validation minimum", "[train]") {
  Fixture f = make_fixture({{"train.strategy", "head_only"},
                            {"train.epochs", "6"}});
  auto opts = harness::TrainOptions::from_config(f.cfg);
  harness::Model model = harness::make_model(f.cfg, opts.seed);
  model.backbone = f.pretrained;
  const auto result =
      harness::train(std::move(model), f.data, opts, f.cfg.arch_digest());

  REQUIRE_FALSE(result.history.epochs.empty());
  double min_val = std::numeric_limits<double>::infinity();
  int argmin = 0;
  for (const auto& e : result.history.epochs) {
    if (e.val_loss < min_val) {
      min_val = e.val_loss;
      argmin = e.epoch;
    }
  }
  REQUIRE(result.history.best_val_loss == min_val);
  REQUIRE(result.history.best_epoch == argmin);
  REQUIRE(result.history.stopping_epoch ==
          result.history.epochs.back().epoch);

  // Epoch numbering is 1-based and contiguous.
  for (std::size_t i = 0; i < result.history.epochs.size(); ++i) {
    REQUIRE(result.history.epochs[i].epoch == static_cast<int>(i) + 1);
  }
}

TEST_CASE("identical config and seed reproduce the run bit for bit",
          "[train]") {
  const auto dir = testutil::temp_dir("train_repro");
  auto run_once = [&](const std::string& name) {
    Fixture f = make_fixture({{"train.strategy", "finetune"},
                              {"train.epochs", "3"}});
    auto opts = harness::TrainOptions::from_config(f.cfg);
    harness::Model model = harness::make_model(f.cfg, opts.seed);
    model.backbone = f.pretrained;
    auto result =
        harness::train(std::move(model), f.data, opts, f.cfg.arch_digest());
    harness::write_history_csv(dir + "/" + name + ".csv", result.history);
    result.best.save(dir + "/" + name + ".swhp");
    return result;
  };

  const auto a = run_once("a");
  const auto b = run_once("b");
  REQUIRE(binio::read_binary_file(dir + "/a.csv") ==
          binio::read_binary_file(dir + "/b.csv"));
  REQUIRE(binio::read_binary_file(dir + "/a.swhp") ==
          binio::read_binary_file(dir + "/b.swhp"));
  REQUIRE(a.history.best_epoch == b.history.best_epoch);

  // A different seed produces a different trajectory.
  Fixture f = make_fixture({{"train.strategy", "finetune"},
                            {"train.epochs", "3"},
                            {"run.seed", "99"}});
  auto opts = harness::TrainOptions::from_config(f.cfg);
  harness::Model model = harness::make_model(f.cfg, opts.seed);
  model.backbone = f.pretrained;
  const auto c =
      harness::train(std::move(model), f.data, opts, f.cfg.arch_digest());
  REQUIRE(c.history.epochs.front().train_loss !=
          a.history.epochs.front().train_loss);
}

TEST_CASE("absurd learning rates abort with the history preserved",
          "[train]") {
  Fixture f = make_fixture({{"train.strategy", "head_only"},
                            {"optimizer.lr", "1e18"},
                            {"train.epochs", "8"}});
  auto opts = harness::TrainOptions::from_config(f.cfg);
  harness::Model model = harness::make_model(f.cfg, opts.seed);
  model.backbone = f.pretrained;

  const auto result =
      harness::train(std::move(model), f.data, opts, f.cfg.arch_digest());
  REQUIRE(result.diverged);
  REQUIRE(result.history.diverged);
  REQUIRE_FALSE(result.history.epochs.empty());
  REQUIRE_FALSE(result.history.note.empty());
  REQUIRE(result.history.epochs.size() < 8);  // aborted before the budget
}

TEST_CASE("history CSV round trip", "[train]") {
  const auto dir = testutil::temp_dir("train_history");
  harness::RunHistory h;
  for (int e = 1; e <= 3; ++e) {
    harness::EpochRecord r;
    r.epoch = e;
    r.stage = e < 3 ? 1 : 2;
    r.train_loss = 0.75 / e;
    r.val_loss = 0.9 / e;
    r.lr = 1e-3 * e;
    h.epochs.push_back(r);
  }
  harness::write_history_csv(dir + "/h.csv", h);
  const auto back = harness::read_history_csv(dir + "/h.csv");
  REQUIRE(back.epochs.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    REQUIRE(back.epochs[i].epoch == h.epochs[i].epoch);
    REQUIRE(back.epochs[i].stage == h.epochs[i].stage);
    REQUIRE(back.epochs[i].train_loss == h.epochs[i].train_loss);
    REQUIRE(back.epochs[i].val_loss == h.epochs[i].val_loss);
    REQUIRE(back.epochs[i].lr == h.epochs[i].lr);
  }
  REQUIRE(back.stopping_epoch == 3);

  binio::write_binary_file(dir + "/bad.csv", "epoch,foo\n1,2\n");
  CHECK_THROWS_AS(harness::read_history_csv(dir + "/bad.csv"), DataError);
}

TEST_CASE("prediction is chunk-size independent", "[train]") {
  // More examples than the 512-row prediction chunk.
  Fixture f = make_fixture({}, 600);
  harness::Model model = harness::make_model(f.cfg, 7);
  // Randomize the final layer so logits are non-trivial.
  Rng init(88);
  for (double& v : model.head.layers.back().weight.data) v = init.normal();

  std::vector<std::size_t> all(f.data.examples.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto logits = harness::predict_logits(model, f.data, all);
  REQUIRE(logits.rows() == 600);

  // Spot-check rows against a direct single-example forward pass.
  const auto embeddings = model.backbone.forward(f.data.patch_means);
  Rng pick(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto i = static_cast<std::size_t>(pick.below(600));
    const auto direct = harness::predict_logits(model, f.data, {i});
    for (std::size_t c = 0; c < logits.cols(); ++c) {
      REQUIRE(logits(i, c) == direct(0, c));
    }
  }
}

TEST_CASE("evaluation computes metrics over the chosen split", "[train]") {
  Fixture f = make_fixture();
  harness::Model model = harness::make_model(f.cfg, 7);
  Rng init(88);
  for (double& v : model.head.layers.back().weight.data) v = init.normal();

  const auto r = harness::evaluate(model, f.data, f.data.val_idx);
  REQUIRE(r.predictions.size() == f.data.val_idx.size());

  std::size_t hits = 0;
  for (std::size_t i = 0; i < f.data.val_idx.size(); ++i) {
    if (r.predictions[i] == f.data.labels[f.data.val_idx[i]]) ++hits;
  }
  REQUIRE(r.metrics.accuracy ==
          Catch::Approx(static_cast<double>(hits) /
                        static_cast<double>(f.data.val_idx.size()))
              .margin(1e-15));

  CHECK_THROWS_AS(harness::evaluate(model, f.data, {}), DataError);
  CHECK_THROWS_AS(
      harness::dataset_loss(model, f.data, {},
                            harness::loss_spec_from_config(f.cfg)),
      DataError);
}

TEST_CASE("training option validation", "[train]") {
  CHECK_THROWS_AS(
      harness::TrainOptions::from_config(
          fixture_config({{"train.strategy", "warp"}})),
      ConfigError);
  CHECK_THROWS_AS(
      harness::TrainOptions::from_config(
          fixture_config({{"sampling.strategy", "oversample"}})),
      ConfigError);
  CHECK_THROWS_AS(harness::TrainOptions::from_config(
                      fixture_config({{"train.batch", "0"}})),
                  ConfigError);
  CHECK_THROWS_AS(harness::TrainOptions::from_config(
                      fixture_config({{"train.epochs", "0"}})),
                  ConfigError);
  CHECK_THROWS_AS(harness::TrainOptions::from_config(
                      fixture_config({{"train.early_stop_patience", "0"}})),
                  ConfigError);
  CHECK_THROWS_AS(
      harness::TrainOptions::from_config(
          fixture_config({{"train.early_stop_min_delta", "-1"}})),
      ConfigError);

  const auto opts = harness::TrainOptions::from_config(
      fixture_config({{"sampling.strategy", "undersample"},
                      {"train.interp_filter", "true"}}));
  REQUIRE(opts.sampling == harness::SamplingKind::Undersample);
  REQUIRE(opts.interp_filter);

  REQUIRE(harness::strategy_from_name("head-only") ==
          harness::TrainStrategy::HeadOnly);
  REQUIRE(std::string(harness::strategy_name(
              harness::TrainStrategy::RandomInit)) == "random_init");
}

TEST_CASE("interp filter can empty the training split", "[train]") {
  Fixture f = make_fixture({{"train.strategy", "head_only"},
                            {"train.interp_filter", "true"}});
  for (auto& e : f.data.examples) e.interpolated = true;
  auto opts = harness::TrainOptions::from_config(f.cfg);
  harness::Model model = harness::make_model(f.cfg, opts.seed);
  CHECK_THROWS_AS(
      harness::train(std::move(model), f.data, opts, f.cfg.arch_digest()),
      DataError);
}

TEST_CASE("undersampled training runs on balanced pools", "[train]") {
  Fixture f = make_fixture({{"train.strategy", "head_only"},
                            {"sampling.strategy", "undersample"},
                            {"train.epochs", "2"}});
  auto opts = harness::TrainOptions::from_config(f.cfg);
  harness::Model model = harness::make_model(f.cfg, opts.seed);
  model.backbone = f.pretrained;
  const auto result =
      harness::train(std::move(model), f.data, opts, f.cfg.arch_digest());
  REQUIRE_FALSE(result.diverged);
  REQUIRE(result.history.epochs.size() == 2);
}

TEST_CASE("checkpoint snapshot and restore are exact at f32", "[train]") {
  Fixture f = make_fixture();
  harness::Model model = harness::make_model(f.cfg, 11);
  Rng init(88);
  for (double& v : model.head.layers.back().weight.data) v = init.normal();

  const auto snap = harness::snapshot_checkpoint(model, 0xabcdULL);
  REQUIRE(snap.arch_digest == 0xabcdULL);

  harness::Model other = harness::make_model(f.cfg, 999);
  harness::restore_model(other, snap);
  for (std::size_t l = 0; l < model.head.layers.size(); ++l) {
    const auto& a = other.head.layers[l].weight.data;
    const auto& b = model.head.layers[l].weight.data;
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a[i] == f32(b[i]));
  }
  REQUIRE(backbone_matches_f32(other.backbone, model.backbone));

  // A second squeeze is a no-op: snapshots of a restored model are stable.
  const auto snap2 = harness::snapshot_checkpoint(other, 0xabcdULL);
  for (std::size_t t = 0; t < snap.tensors.size(); ++t) {
    REQUIRE(snap.tensors[t].values.data == snap2.tensors[t].values.data);
  }
}

TEST_CASE("strategy comparison trains all three variants", "[train]") {
  Fixture f = make_fixture({{"train.epochs", "2"}});
  const auto cmp =
      harness::compare_strategies(f.cfg, f.data, f.pretrained);

  for (const auto& r : cmp.results) {
    REQUIRE_FALSE(r.history.epochs.empty());
    REQUIRE_FALSE(r.diverged);
  }
  REQUIRE(cmp.summary.find("epoch1_train_loss:") != std::string::npos);
  REQUIRE(cmp.summary.find("final_train_loss:") != std::string::npos);
  REQUIRE(cmp.summary.find("ordering:") != std::string::npos);

  // head_only and finetune share the frozen stage-1 start, so their first
  // epoch sees identical losses; random_init starts elsewhere.
  const auto& head_only = cmp.at(harness::TrainStrategy::HeadOnly);
  const auto& finetune = cmp.at(harness::TrainStrategy::Finetune);
  REQUIRE(head_only.history.epochs.front().train_loss ==
          finetune.history.epochs.front().train_loss);

  const auto dir = testutil::temp_dir("train_compare");
  harness::write_comparison_csv(dir + "/cmp.csv", cmp);
  const auto table = csv::read_file(dir + "/cmp.csv");
  REQUIRE(table.header.size() == 7);
  REQUIRE(table.header[0] == "epoch");
  REQUIRE(table.header[1] == "head_only_train_loss");
  REQUIRE(table.header[6] == "random_init_val_loss");
  std::size_t max_epochs = 0;
  for (const auto& r : cmp.results) {
    max_epochs = std::max(max_epochs, r.history.epochs.size());
  }
  REQUIRE(table.rows.size() == max_epochs);
}

TEST_CASE("run directory layout", "[train]") {
  Fixture f = make_fixture({{"train.strategy", "head_only"},
                            {"train.epochs", "2"}});
  auto opts = harness::TrainOptions::from_config(f.cfg);
  harness::Model model = harness::make_model(f.cfg, opts.seed);
  model.backbone = f.pretrained;
  const auto result =
      harness::train(std::move(model), f.data, opts, f.cfg.arch_digest());
  const auto eval = harness::evaluate(result.model, f.data, f.data.val_idx);

  const auto dir = testutil::temp_dir("train_rundir");
  const auto run = dir + "/" + harness::run_dir_name(f.cfg);
  harness::write_run_dir(run, f.cfg, result.history, result.best,
                         eval.metrics, {{"dataset.csv", "0123456789abcdef"}});

  namespace fs = std::filesystem;
  REQUIRE(fs::exists(run + "/history.csv"));
  REQUIRE(fs::exists(run + "/checkpoint.swhp"));
  REQUIRE(fs::exists(run + "/metrics.json"));
  REQUIRE(fs::exists(run + "/config.resolved"));
  REQUIRE(fs::exists(run + "/inputs.json"));

  REQUIRE(binio::read_binary_file(run + "/config.resolved") ==
          f.cfg.canonical());

  const auto meta = binio::read_binary_file(run + "/metrics.json");
  REQUIRE(meta.find("\"best_epoch\"") != std::string::npos);
  REQUIRE(meta.find("\"macro_f1\"") != std::string::npos);
  const auto inputs = binio::read_binary_file(run + "/inputs.json");
  REQUIRE(inputs.find("dataset.csv") != std::string::npos);
  REQUIRE(inputs.find("0123456789abcdef") != std::string::npos);

  const auto loaded = Checkpoint::load(run + "/checkpoint.swhp");
  REQUIRE(loaded.arch_digest == f.cfg.arch_digest());
}
