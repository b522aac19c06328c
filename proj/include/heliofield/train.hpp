#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "heliofield/backbone.hpp"
#include "heliofield/checkpoint.hpp"
#include "heliofield/config.hpp"
#include "heliofield/csv.hpp"
#include "heliofield/dataset.hpp"
#include "heliofield/encoding.hpp"
#include "heliofield/errors.hpp"
#include "heliofield/images.hpp"
#include "heliofield/metrics.hpp"
#include "heliofield/nn/heads.hpp"
#include "heliofield/nn/loss.hpp"
#include "heliofield/nn/optim.hpp"
#include "heliofield/nn/tensor.hpp"
#include "heliofield/rng.hpp"

namespace heliofield::harness {

enum class TrainStrategy { HeadOnly, Finetune, RandomInit };

inline const char* strategy_name(TrainStrategy s) {
  switch (s) {
    case TrainStrategy::HeadOnly: return "head_only";
    case TrainStrategy::Finetune: return "finetune";
    case TrainStrategy::RandomInit: return "random_init";
  }
  throw DataError("invalid strategy value");
}

inline TrainStrategy strategy_from_name(const std::string& name) {
  if (name == "head_only" || name == "head-only") {
    return TrainStrategy::HeadOnly;
  }
  if (name == "finetune" || name == "pretrained-finetune") {
    return TrainStrategy::Finetune;
  }
  if (name == "random_init" || name == "random-init") {
    return TrainStrategy::RandomInit;
  }
  throw ConfigError("unknown training strategy '" + name +
                    "' (expected head_only, finetune, or random_init)");
}

enum class SamplingKind { None, Undersample };

inline SamplingKind sampling_from_name(const std::string& name) {
  if (name == "none") return SamplingKind::None;
  if (name == "undersample") return SamplingKind::Undersample;
  throw ConfigError("unknown sampling strategy '" + name +
                    "' (expected none or undersample)");
}

/// Loss spec with the alpha vector re-indexed from the configured order
/// (loss.alpha_order names the class that each alpha entry applies to)
/// into class-id order.
inline neural::LossSpec loss_spec_from_config(const Config& cfg) {
  neural::LossSpec spec;
  spec.kind = neural::loss_kind_from_name(cfg.str("loss.kind"));
  spec.gamma = cfg.f64("loss.gamma");
  const auto alpha = cfg.list_f64("loss.alpha");
  const auto order = cfg.list_str("loss.alpha_order");
  if (alpha.size() != kNumClasses || order.size() != kNumClasses) {
    throw ConfigError(
        "loss.alpha and loss.alpha_order need one entry per class");
  }
  spec.alpha.assign(kNumClasses, 0.0);
  std::array<bool, kNumClasses> seen{};
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto c =
        static_cast<std::size_t>(plasma::wind_class_from_name(order[i]));
    if (seen[c]) {
      throw ConfigError("loss.alpha_order repeats class '" + order[i] + "'");
    }
    seen[c] = true;
    spec.alpha[c] = alpha[i];
  }
  return spec;
}

/// The full classifier: mock backbone over patch means, Fourier-encoded
/// geometry, and the classification head on the concatenated feature.
struct Model {
  BackboneConfig backbone_cfg;
  EncodingConfig encoding;
  neural::HeadConfig head_cfg;
  MockBackbone backbone;
  neural::HeadParams head;
};

/// Builds a model with seeded random head and backbone weights; callers
/// that want a pretrained backbone overwrite it afterwards.
inline Model make_model(const Config& cfg, std::uint64_t seed) {
  Model m;
  m.backbone_cfg = BackboneConfig::from_config(cfg);
  m.encoding = EncodingConfig::from_config(cfg);
  if (m.encoding.embedding_dim != m.backbone_cfg.dim) {
    throw ConfigError("encoding.embedding_dim must match backbone.dim");
  }
  m.head_cfg = neural::HeadConfig::from_config(cfg, m.encoding.feature_dim());
  m.backbone = MockBackbone(m.backbone_cfg);
  Rng backbone_rng = Rng::derived(seed, "backbone.init");
  m.backbone.init_random(backbone_rng);
  Rng head_rng = Rng::derived(seed, "head.init");
  m.head = neural::HeadParams::random_init(m.head_cfg, head_rng);
  return m;
}

inline double normalized_coord(const LabeledExample& e,
                               const std::string& name) {
  if (name == "sc_lat") return unit_lat(e.sc_lat);
  if (name == "sc_lon") return unit_lon(e.sc_lon);
  if (name == "fp_lat") return unit_lat(e.fp_lat);
  if (name == "fp_lon") return unit_lon(e.fp_lon);
  throw ConfigError("unknown coordinate '" + name + "' in encoding.coords");
}

/// Training-ready view of a dataset: one patch-mean row per distinct
/// image (examples sharing an image share the row), the fixed Fourier
/// geometry block per example, and the split index lists.
struct TrainData {
  std::vector<LabeledExample> examples;
  neural::Tensor<double> patch_means;  // n_images x patch_dim
  std::vector<std::size_t> image_row;  // per example
  neural::Tensor<double> fourier;      // n_examples x (2 * bands * coords)
  std::vector<int> labels;             // per example
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> val_idx;
  std::vector<std::size_t> test_idx;

  static TrainData build(std::vector<LabeledExample> ex, const ImageSet& images,
                         const BackboneConfig& backbone_cfg,
                         const EncodingConfig& enc) {
    if (ex.empty()) throw DataError("dataset is empty");
    TrainData d;
    d.examples = std::move(ex);

    std::map<std::int64_t, std::size_t> row_of;
    for (const auto& e : d.examples) row_of.emplace(e.image_key, 0);
    d.patch_means = neural::Tensor<double>(
        row_of.size(), static_cast<std::size_t>(backbone_cfg.patch_dim()));
    std::size_t row = 0;
    for (auto& [key, slot] : row_of) {
      slot = row;
      const std::vector<double> mean =
          patch_mean(images.get(key), backbone_cfg);
      std::copy(mean.begin(), mean.end(),
                d.patch_means.data.begin() +
                    static_cast<std::ptrdiff_t>(row * mean.size()));
      ++row;
    }

    const auto enc_dim =
        static_cast<std::size_t>(2 * enc.bands * enc.coord_count());
    d.fourier = neural::Tensor<double>(d.examples.size(), enc_dim);
    d.image_row.reserve(d.examples.size());
    d.labels.reserve(d.examples.size());
    std::vector<double> enc_row;
    for (std::size_t i = 0; i < d.examples.size(); ++i) {
      const auto& e = d.examples[i];
      d.image_row.push_back(row_of.at(e.image_key));
      d.labels.push_back(static_cast<int>(e.label));
      enc_row.clear();
      for (const auto& name : enc.coords) {
        fourier_encode(normalized_coord(e, name), enc.bands, enc_row);
      }
      std::copy(enc_row.begin(), enc_row.end(),
                d.fourier.data.begin() +
                    static_cast<std::ptrdiff_t>(i * enc_dim));
    }

    d.train_idx = split_indices(d.examples, SplitAssignment::Train);
    d.val_idx = split_indices(d.examples, SplitAssignment::Validation);
    d.test_idx = split_indices(d.examples, SplitAssignment::Test);
    return d;
  }
};

inline neural::Tensor<double> gather_rows(
    const neural::Tensor<double>& src, const std::vector<std::size_t>& rows) {
  neural::Tensor<double> out(rows.size(), src.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto* from =
        src.data.data() + rows[i] * src.cols();
    std::copy(from, from + src.cols(),
              out.data.begin() + static_cast<std::ptrdiff_t>(i * src.cols()));
  }
  return out;
}

struct TrainOptions {
  TrainStrategy strategy = TrainStrategy::Finetune;
  SamplingKind sampling = SamplingKind::None;
  bool interp_filter = false;
  int batch = 32;
  int epochs = 50;
  int patience = 5;
  double min_delta = 1e-4;
  std::uint64_t seed = 42;
  neural::LossSpec loss;
  neural::AdamConfig adam;
  neural::Scheduler scheduler;

  static TrainOptions from_config(const Config& cfg) {
    TrainOptions o;
    o.strategy = strategy_from_name(cfg.str("train.strategy"));
    o.sampling = sampling_from_name(cfg.str("sampling.strategy"));
    o.interp_filter = cfg.boolean("train.interp_filter");
    o.batch = static_cast<int>(cfg.i64("train.batch"));
    o.epochs = static_cast<int>(cfg.i64("train.epochs"));
    o.patience = static_cast<int>(cfg.i64("train.early_stop_patience"));
    o.min_delta = cfg.f64("train.early_stop_min_delta");
    o.seed = static_cast<std::uint64_t>(cfg.i64("run.seed"));
    o.loss = loss_spec_from_config(cfg);
    o.adam = neural::AdamConfig::from_config(cfg);
    o.scheduler = neural::Scheduler::from_config(cfg);
    if (o.batch < 1) throw ConfigError("train.batch must be >= 1");
    if (o.epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (o.patience < 1) {
      throw ConfigError("train.early_stop_patience must be >= 1");
    }
    if (!(o.min_delta >= 0.0)) {
      throw ConfigError("train.early_stop_min_delta must be >= 0");
    }
    return o;
  }
};

struct EpochRecord {
  int epoch = 0;  // global, 1-based; stage-2 epochs continue the count
  int stage = 1;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  double wall_seconds = 0.0;  // in-memory only, never serialized
};

struct RunHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  int stopping_epoch = 0;
  bool diverged = false;
  std::string note;
};

inline void write_history_csv(const std::string& path,
                              const RunHistory& history) {
  csv::Writer w(path);
  w.row({"epoch", "stage", "train_loss", "val_loss", "lr"});
  for (const auto& e : history.epochs) {
    w.row({std::to_string(e.epoch), std::to_string(e.stage),
           csv::fmt(e.train_loss), csv::fmt(e.val_loss), csv::fmt(e.lr)});
  }
  w.close();
}

inline RunHistory read_history_csv(const std::string& path) {
  const csv::Table t = csv::read_file(path);
  const std::vector<std::string> expect = {"epoch", "stage", "train_loss",
                                           "val_loss", "lr"};
  if (t.header != expect) {
    throw DataError(path + ": unexpected history header");
  }
  RunHistory h;
  for (const auto& row : t.rows) {
    EpochRecord e;
    e.epoch = static_cast<int>(csv::parse_double(row.at(0), path));
    e.stage = static_cast<int>(csv::parse_double(row.at(1), path));
    e.train_loss = csv::parse_double(row.at(2), path);
    e.val_loss = csv::parse_double(row.at(3), path);
    e.lr = csv::parse_double(row.at(4), path);
    h.epochs.push_back(e);
  }
  if (!h.epochs.empty()) h.stopping_epoch = h.epochs.back().epoch;
  return h;
}

/// Captures the model as it would round-trip through a checkpoint file:
/// values are squeezed through f32 so an in-memory restore and a reload
/// from disk are bit-identical.
inline Checkpoint snapshot_checkpoint(const Model& m,
                                      std::uint64_t arch_digest) {
  Checkpoint ck;
  ck.arch_digest = arch_digest;
  append_backbone_tensors(m.backbone, ck.tensors);
  append_head_tensors(m.head, ck.tensors);
  for (auto& t : ck.tensors) {
    for (double& v : t.values.data) {
      v = static_cast<double>(static_cast<float>(v));
    }
  }
  return ck;
}

inline void restore_model(Model& m, const Checkpoint& ck) {
  m.backbone = backbone_from_checkpoint(ck, m.backbone_cfg);
  m.head = head_from_checkpoint(ck, m.head_cfg);
}

/// Forward pass over an index list in fixed-size chunks; returns logits
/// in index order. Embeddings are computed once per distinct image.
inline neural::Tensor<double> predict_logits(
    const Model& model, const TrainData& data,
    const std::vector<std::size_t>& idx,
    const neural::Tensor<double>* image_embeddings = nullptr) {
  neural::Tensor<double> local;
  if (image_embeddings == nullptr) {
    local = model.backbone.forward(data.patch_means);
    image_embeddings = &local;
  }
  neural::Tensor<double> logits(
      idx.size(), static_cast<std::size_t>(model.head_cfg.classes));
  const std::size_t chunk = 512;
  std::vector<std::size_t> emb_rows;
  std::vector<std::size_t> ex_rows;
  for (std::size_t at = 0; at < idx.size(); at += chunk) {
    const std::size_t n = std::min(chunk, idx.size() - at);
    emb_rows.clear();
    ex_rows.clear();
    for (std::size_t i = 0; i < n; ++i) {
      emb_rows.push_back(data.image_row[idx[at + i]]);
      ex_rows.push_back(idx[at + i]);
    }
    const neural::Tensor<double> features =
        neural::hconcat(gather_rows(*image_embeddings, emb_rows),
                        gather_rows(data.fourier, ex_rows));
    const neural::Tensor<double> out =
        neural::head_forward(model.head_cfg, model.head, features, nullptr,
                             nullptr);
    std::copy(out.data.begin(), out.data.end(),
              logits.data.begin() +
                  static_cast<std::ptrdiff_t>(at * out.cols()));
  }
  return logits;
}

/// Mean per-example loss over an index list, with dropout disabled.
inline double dataset_loss(const Model& model, const TrainData& data,
                           const std::vector<std::size_t>& idx,
                           const neural::LossSpec& loss,
                           const neural::Tensor<double>* image_embeddings =
                               nullptr) {
  if (idx.empty()) throw DataError("loss over an empty index list");
  const neural::Tensor<double> logits =
      predict_logits(model, data, idx, image_embeddings);
  std::vector<int> targets;
  targets.reserve(idx.size());
  for (std::size_t i : idx) targets.push_back(data.labels[i]);
  return loss.evaluate(logits, targets).loss;
}

struct EvalResult {
  Metrics metrics;
  std::vector<int> predictions;  // aligned with the index list
};

/// Argmax evaluation against the stored labels.
inline EvalResult evaluate(const Model& model, const TrainData& data,
                           const std::vector<std::size_t>& idx) {
  if (idx.empty()) throw DataError("evaluate: empty dataset split");
  const neural::Tensor<double> logits = predict_logits(model, data, idx);
  EvalResult r;
  r.predictions.reserve(idx.size());
  std::vector<int> truth;
  truth.reserve(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    r.predictions.push_back(static_cast<int>(neural::argmax_row(logits, i)));
    truth.push_back(data.labels[idx[i]]);
  }
  r.metrics = Metrics::compute(truth, r.predictions);
  return r;
}

struct TrainResult {
  RunHistory history;
  Checkpoint best;
  Model model;  // restored to the best checkpoint
  bool diverged = false;
};

namespace detail {

struct StagePlan {
  int number = 1;
  bool train_backbone = false;
};

inline std::vector<StagePlan> stage_plan(TrainStrategy s) {
  switch (s) {
    case TrainStrategy::HeadOnly: return {{1, false}};
    case TrainStrategy::Finetune: return {{1, false}, {2, true}};
    case TrainStrategy::RandomInit: return {{1, true}};
  }
  throw DataError("invalid strategy value");
}

inline std::vector<neural::Tensor<double>*> collect_params(
    Model& m, bool train_backbone) {
  std::vector<neural::Tensor<double>*> params;
  for (auto& layer : m.head.layers) {
    params.push_back(&layer.weight);
    params.push_back(&layer.bias);
  }
  if (train_backbone) {
    params.push_back(&m.backbone.weight);
    params.push_back(&m.backbone.bias);
  }
  return params;
}

/// One optimization pass over the shuffled order; returns the running
/// mean per-example loss seen during the pass.
inline double run_train_epoch(Model& model, const TrainData& data,
                              const std::vector<std::size_t>& order,
                              const TrainOptions& opts, bool train_backbone,
                              const neural::Tensor<double>* frozen_embeddings,
                              double lr,
                              std::vector<neural::Tensor<double>*>& params,
                              neural::AdamState& state, Rng& dropout_rng) {
  double loss_sum = 0.0;
  std::size_t seen = 0;
  std::vector<std::size_t> emb_rows;
  std::vector<std::size_t> ex_rows;
  std::vector<int> targets;
  const auto batch = static_cast<std::size_t>(opts.batch);
  for (std::size_t at = 0; at < order.size(); at += batch) {
    const std::size_t n = std::min(batch, order.size() - at);
    emb_rows.clear();
    ex_rows.clear();
    targets.clear();
    for (std::size_t i = 0; i < n; ++i) {
      emb_rows.push_back(data.image_row[order[at + i]]);
      ex_rows.push_back(order[at + i]);
      targets.push_back(data.labels[order[at + i]]);
    }

    neural::Tensor<double> means;
    neural::Tensor<double> embeddings;
    if (train_backbone) {
      means = gather_rows(data.patch_means, emb_rows);
      embeddings = model.backbone.forward(means);
    } else {
      embeddings = gather_rows(*frozen_embeddings, emb_rows);
    }
    const neural::Tensor<double> features =
        neural::hconcat(embeddings, gather_rows(data.fourier, ex_rows));

    neural::HeadCache cache;
    const neural::Tensor<double> logits = neural::head_forward(
        model.head_cfg, model.head, features, &dropout_rng, &cache);
    const neural::LossResult lr_batch = opts.loss.evaluate(logits, targets);
    loss_sum += lr_batch.loss * static_cast<double>(n);
    seen += n;

    const neural::HeadGrads grads = neural::head_backward(
        model.head_cfg, model.head, cache, lr_batch.d_logits);

    std::vector<const neural::Tensor<double>*> grad_ptrs;
    grad_ptrs.reserve(params.size());
    for (const auto& layer : grads.layers) {
      grad_ptrs.push_back(&layer.weight);
      grad_ptrs.push_back(&layer.bias);
    }
    MockBackbone::Grads backbone_grads;
    if (train_backbone) {
      const neural::Tensor<double> d_embedding = neural::slice_cols(
          grads.input, 0,
          static_cast<std::size_t>(model.backbone_cfg.dim));
      backbone_grads = model.backbone.backward(means, d_embedding);
      grad_ptrs.push_back(&backbone_grads.weight);
      grad_ptrs.push_back(&backbone_grads.bias);
    }
    neural::adam_step(params, grad_ptrs, state, opts.adam, lr);
  }
  return loss_sum / static_cast<double>(seen);
}

}  // namespace detail

/// Runs the configured strategy: head_only freezes the backbone
/// throughout; finetune trains the head first, then restarts from the
/// best stage-1 checkpoint with everything trainable and a fresh
/// optimizer; random_init trains everything from random weights. Early
/// stopping is per stage; the returned checkpoint is the best validation
/// loss seen anywhere in the run. Non-finite losses abort the run with
/// the history preserved instead of throwing.
inline TrainResult train(Model model, const TrainData& data,
                         const TrainOptions& opts,
                         std::uint64_t arch_digest) {
  std::vector<std::size_t> train_idx = data.train_idx;
  if (opts.interp_filter) {
    std::vector<std::size_t> kept;
    for (std::size_t i : train_idx) {
      if (!data.examples[i].interpolated) kept.push_back(i);
    }
    train_idx = std::move(kept);
  }
  if (opts.sampling == SamplingKind::Undersample) {
    train_idx = undersample(data.examples, train_idx, opts.seed);
  }
  if (train_idx.empty()) throw DataError("train: no training examples");
  if (data.val_idx.empty()) throw DataError("train: no validation examples");

  TrainResult result;
  RunHistory& history = result.history;
  Checkpoint best;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int global_epoch = 0;
  bool aborted = false;

  for (const auto& stage : detail::stage_plan(opts.strategy)) {
    if (aborted) break;
    if (stage.number == 2) {
      if (best_epoch == 0) break;  // stage 1 never produced a checkpoint
      restore_model(model, best);
    }
    auto params = detail::collect_params(model, stage.train_backbone);
    neural::AdamState state = neural::AdamState::for_params(
        {params.begin(), params.end()});
    neural::Scheduler scheduler = opts.scheduler;
    double stage_best = std::numeric_limits<double>::infinity();
    int bad_epochs = 0;

    neural::Tensor<double> frozen_embeddings;
    if (!stage.train_backbone) {
      frozen_embeddings = model.backbone.forward(data.patch_means);
    }

    for (int e = 0; e < opts.epochs; ++e) {
      ++global_epoch;
      const auto t0 = std::chrono::steady_clock::now();
      const double lr = scheduler.rate_for_epoch(e);

      Rng shuffle_rng = Rng::derived(
          opts.seed, "train.shuffle." + std::to_string(global_epoch));
      Rng dropout_rng = Rng::derived(
          opts.seed, "train.dropout." + std::to_string(global_epoch));
      std::vector<std::size_t> order = train_idx;
      fisher_yates_shuffle(order, shuffle_rng);

      double train_loss = std::numeric_limits<double>::quiet_NaN();
      double val_loss = std::numeric_limits<double>::quiet_NaN();
      std::string failure;
      try {
        train_loss = detail::run_train_epoch(
            model, data, order, opts, stage.train_backbone,
            stage.train_backbone ? nullptr : &frozen_embeddings, lr, params,
            state, dropout_rng);
        val_loss = dataset_loss(
            model, data, data.val_idx, opts.loss,
            stage.train_backbone ? nullptr : &frozen_embeddings);
      } catch (const NumericError& err) {
        failure = err.what();
      }

      EpochRecord rec;
      rec.epoch = global_epoch;
      rec.stage = stage.number;
      rec.train_loss = train_loss;
      rec.val_loss = val_loss;
      rec.lr = lr;
      rec.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      history.epochs.push_back(rec);

      if (!failure.empty() || !std::isfinite(train_loss) ||
          !std::isfinite(val_loss)) {
        history.diverged = true;
        history.note = failure.empty()
                           ? "non-finite loss at epoch " +
                                 std::to_string(global_epoch)
                           : failure;
        aborted = true;
        break;
      }

      scheduler.observe_validation(val_loss);
      if (val_loss < best_val) {
        best_val = val_loss;
        best_epoch = global_epoch;
        best = snapshot_checkpoint(model, arch_digest);
      }
      if (val_loss < stage_best - opts.min_delta) {
        stage_best = val_loss;
        bad_epochs = 0;
      } else {
        bad_epochs += 1;
        if (bad_epochs >= opts.patience) break;
      }
    }
  }

  history.best_epoch = best_epoch;
  history.best_val_loss = best_val;
  history.stopping_epoch = global_epoch;
  result.diverged = history.diverged;
  if (best_epoch > 0) {
    restore_model(model, best);
    result.best = std::move(best);
  } else {
    result.best = snapshot_checkpoint(model, arch_digest);
  }
  result.model = std::move(model);
  return result;
}

// ---------------------------------------------------------------------------
// Run directory emission.

inline std::string hex_digest(std::uint64_t digest) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(digest));
  return buf;
}

inline std::string run_dir_name(const Config& cfg) {
  return "run-" + hex_digest(cfg.digest());
}

/// Writes the standard result layout: history.csv, metrics.json,
/// checkpoint.swhp, config.resolved, and inputs.json (digests of the
/// files the run consumed).
inline void write_run_dir(const std::string& dir, const Config& cfg,
                          const RunHistory& history, const Checkpoint& best,
                          const Metrics& metrics,
                          const std::map<std::string, std::string>&
                              input_digests) {
  std::filesystem::create_directories(dir);
  write_history_csv(dir + "/history.csv", history);
  best.save(dir + "/checkpoint.swhp");

  nlohmann::ordered_json meta = metrics.to_json();
  meta["best_epoch"] = history.best_epoch;
  meta["best_val_loss"] = history.best_val_loss;
  meta["stopping_epoch"] = history.stopping_epoch;
  meta["diverged"] = history.diverged;
  binio::write_binary_file(dir + "/metrics.json", meta.dump(2) + "\n");

  binio::write_binary_file(dir + "/config.resolved", cfg.canonical());

  nlohmann::ordered_json inputs;
  inputs["seed"] = cfg.i64("run.seed");
  nlohmann::ordered_json files = nlohmann::ordered_json::object();
  for (const auto& [name, digest] : input_digests) files[name] = digest;
  inputs["inputs"] = files;
  binio::write_binary_file(dir + "/inputs.json", inputs.dump(2) + "\n");
}

/// FNV-1a digest of a file's bytes, as stored in inputs.json.
inline std::string file_digest(const std::string& path) {
  return hex_digest(fnv1a64(binio::read_binary_file(path)));
}

// ---------------------------------------------------------------------------
// Strategy comparison.

struct StrategyComparison {
  std::array<TrainResult, 3> results;  // head_only, finetune, random_init
  std::string summary;

  [[nodiscard]] const TrainResult& at(TrainStrategy s) const {
    switch (s) {
      case TrainStrategy::HeadOnly: return results[0];
      case TrainStrategy::Finetune: return results[1];
      case TrainStrategy::RandomInit: return results[2];
    }
    throw DataError("invalid strategy value");
  }
};

inline void write_comparison_csv(const std::string& path,
                                 const StrategyComparison& cmp) {
  csv::Writer w(path);
  std::vector<std::string> header = {"epoch"};
  for (TrainStrategy s : {TrainStrategy::HeadOnly, TrainStrategy::Finetune,
                          TrainStrategy::RandomInit}) {
    header.push_back(std::string(strategy_name(s)) + "_train_loss");
    header.push_back(std::string(strategy_name(s)) + "_val_loss");
  }
  w.row(header);
  std::size_t max_epochs = 0;
  for (const auto& r : cmp.results) {
    max_epochs = std::max(max_epochs, r.history.epochs.size());
  }
  for (std::size_t e = 0; e < max_epochs; ++e) {
    std::vector<std::string> row = {std::to_string(e + 1)};
    for (const auto& r : cmp.results) {
      if (e < r.history.epochs.size()) {
        row.push_back(csv::fmt(r.history.epochs[e].train_loss));
        row.push_back(csv::fmt(r.history.epochs[e].val_loss));
      } else {
        row.emplace_back();
        row.emplace_back();
      }
    }
    w.row(row);
  }
  w.close();
}

/// Trains all three strategies on identical data and seed. head_only and
/// finetune start from `pretrained`; random_init draws its backbone from
/// the run seed. The summary reports the epoch-1 and final-loss ordering.
inline StrategyComparison compare_strategies(const Config& cfg,
                                             const TrainData& data,
                                             const MockBackbone& pretrained) {
  TrainOptions opts = TrainOptions::from_config(cfg);
  StrategyComparison cmp;
  int slot = 0;
  for (TrainStrategy s : {TrainStrategy::HeadOnly, TrainStrategy::Finetune,
                          TrainStrategy::RandomInit}) {
    Model model = make_model(cfg, opts.seed);
    if (s != TrainStrategy::RandomInit) {
      model.backbone = pretrained;
    }
    opts.strategy = s;
    cmp.results[static_cast<std::size_t>(slot++)] =
        train(std::move(model), data, opts, cfg.arch_digest());
  }

  const auto first_train = [&](const TrainResult& r) {
    return r.history.epochs.empty()
               ? std::numeric_limits<double>::quiet_NaN()
               : r.history.epochs.front().train_loss;
  };
  const auto final_train = [&](const TrainResult& r) {
    return r.history.epochs.empty()
               ? std::numeric_limits<double>::quiet_NaN()
               : r.history.epochs.back().train_loss;
  };
  const TrainResult& head_only = cmp.at(TrainStrategy::HeadOnly);
  const TrainResult& finetune = cmp.at(TrainStrategy::Finetune);
  const TrainResult& random_init = cmp.at(TrainStrategy::RandomInit);

  std::string s;
  s += "epoch1_train_loss: head_only=" + csv::fmt(first_train(head_only)) +
       " finetune=" + csv::fmt(first_train(finetune)) +
       " random_init=" + csv::fmt(first_train(random_init)) + "\n";
  s += "final_train_loss: head_only=" + csv::fmt(final_train(head_only)) +
       " finetune=" + csv::fmt(final_train(finetune)) +
       " random_init=" + csv::fmt(final_train(random_init)) + "\n";
  const bool pretrained_dominates =
      first_train(random_init) >= first_train(head_only) &&
      first_train(random_init) >= first_train(finetune);
  s += pretrained_dominates
           ? "ordering: pretrained strategies dominate random_init at epoch 1\n"
           : "ordering: random_init is not dominated at epoch 1\n";
  s += finetune.history.best_val_loss <= head_only.history.best_val_loss
           ? "ordering: finetune best validation loss <= head_only\n"
           : "ordering: head_only best validation loss < finetune\n";
  cmp.summary = std::move(s);
  return cmp;
}

}  // namespace heliofield::harness
