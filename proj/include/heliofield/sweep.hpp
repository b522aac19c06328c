#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "heliofield/config.hpp"
#include "heliofield/errors.hpp"
#include "heliofield/train.hpp"

namespace heliofield::harness {

/// Hyperparameter sweep over the head/optimizer/loss/sampling lattice.
/// Every cell is an ordinary training run whose results land in a
/// directory content-addressed by the cell's full config digest, so an
/// interrupted sweep resumes by skipping directories that already hold a
/// metrics.json.

struct SweepCell {
  Config cfg;
  std::string head_kind;
  int hidden = 0;
  double lr = 0.0;
  double weight_decay = 0.0;
  std::string scheduler;
  std::string loss;
  double gamma = 0.0;
  std::string alpha;
  std::string sampling;
};

inline const std::vector<int>& sweep_hidden_grid() {
  static const std::vector<int> grid = {64, 128, 256, 512, 1024};
  return grid;
}

/// Expands the sweep.* axes into concrete per-cell configs. The gamma and
/// alpha axes only apply to the focal loss; cross-entropy cells keep the
/// base values so the two losses do not multiply into duplicate cells.
inline std::vector<SweepCell> expand_grid(const Config& base) {
  const auto head_kinds = base.list_str("sweep.head_kinds");
  const auto hiddens = base.list_f64("sweep.hiddens");
  const auto lrs = base.list_f64("sweep.lrs");
  const auto decays = base.list_f64("sweep.weight_decays");
  const auto schedulers = base.list_str("sweep.schedulers");
  const auto losses = base.list_str("sweep.losses");
  const auto gammas = base.list_f64("sweep.gammas");
  const auto samplings = base.list_str("sweep.samplings");

  std::vector<std::string> alphas;
  {
    std::stringstream ss(base.str("sweep.alphas"));
    std::string item;
    while (std::getline(ss, item, ';')) {
      item = Config::trim(item);
      if (!item.empty()) alphas.push_back(item);
    }
  }

  for (const auto axis :
       {&head_kinds, &schedulers, &losses, &samplings}) {
    if (axis->empty()) throw ConfigError("sweep axis must not be empty");
  }
  if (hiddens.empty() || lrs.empty() || decays.empty() || gammas.empty() ||
      alphas.empty()) {
    throw ConfigError("sweep axis must not be empty");
  }
  for (double h : hiddens) {
    const int hi = static_cast<int>(h);
    const auto& grid = sweep_hidden_grid();
    if (static_cast<double>(hi) != h ||
        std::find(grid.begin(), grid.end(), hi) == grid.end()) {
      throw ConfigError("sweep.hiddens entries must come from the "
                        "{64,128,256,512,1024} grid, got " +
                        csv::fmt(h));
    }
  }

  std::vector<SweepCell> cells;
  for (const auto& kind : head_kinds) {
    for (double hidden : hiddens) {
      for (double lr : lrs) {
        for (double wd : decays) {
          for (const auto& sched : schedulers) {
            for (const auto& loss : losses) {
              const bool focal = loss == "focal";
              const std::vector<double> cell_gammas =
                  focal ? gammas
                        : std::vector<double>{base.f64("loss.gamma")};
              const std::vector<std::string> cell_alphas =
                  focal ? alphas
                        : std::vector<std::string>{base.str("loss.alpha")};
              for (double gamma : cell_gammas) {
                for (const auto& alpha : cell_alphas) {
                  for (const auto& sampling : samplings) {
                    SweepCell cell;
                    cell.cfg = base;
                    cell.cfg.set("head.kind", kind);
                    cell.cfg.set("head.hidden",
                                 std::to_string(static_cast<int>(hidden)));
                    cell.cfg.set("optimizer.lr", csv::fmt(lr));
                    cell.cfg.set("optimizer.weight_decay", csv::fmt(wd));
                    cell.cfg.set("scheduler.kind", sched);
                    cell.cfg.set("loss.kind", loss);
                    cell.cfg.set("loss.gamma", csv::fmt(gamma));
                    cell.cfg.set("loss.alpha", alpha);
                    cell.cfg.set("sampling.strategy", sampling);
                    cell.head_kind = kind;
                    cell.hidden = static_cast<int>(hidden);
                    cell.lr = lr;
                    cell.weight_decay = wd;
                    cell.scheduler = sched;
                    cell.loss = loss;
                    cell.gamma = gamma;
                    cell.alpha = alpha;
                    cell.sampling = sampling;
                    cells.push_back(std::move(cell));
                  }
                }
              }
            }
          }
        }
      }
    }
  }
  return cells;
}

enum class CellStatus { Completed, Skipped, Failed };

struct SweepRow {
  SweepCell cell;
  std::string run_dir;
  CellStatus status = CellStatus::Failed;
  std::string error;
  double best_val_loss = std::numeric_limits<double>::quiet_NaN();
  int best_epoch = 0;
  bool diverged = false;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // ranked: best validation loss first
  std::string dir;
  std::size_t completed = 0;
  std::size_t skipped = 0;
  std::size_t failed = 0;
};

inline std::string sweep_dir(const Config& cfg) {
  const std::string& explicit_dir = cfg.str("paths.sweep_dir");
  return explicit_dir.empty() ? cfg.str("paths.out") + "/sweep"
                              : explicit_dir;
}

/// Reloads the ranking fields of a finished cell from its metrics.json.
/// Non-finite losses serialize as JSON null, so those read back as NaN.
inline bool read_cell_metrics(const std::string& dir, SweepRow& row) {
  const std::string path = dir + "/metrics.json";
  if (!std::filesystem::exists(path)) return false;
  const nlohmann::json meta =
      nlohmann::json::parse(binio::read_binary_file(path));
  const auto& loss = meta.at("best_val_loss");
  row.best_val_loss = loss.is_number()
                          ? loss.get<double>()
                          : std::numeric_limits<double>::quiet_NaN();
  row.best_epoch = meta.at("best_epoch").get<int>();
  row.diverged = meta.at("diverged").get<bool>();
  return true;
}

inline void rank_rows(std::vector<SweepRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(),
                   [](const SweepRow& a, const SweepRow& b) {
                     const bool a_ok = a.status != CellStatus::Failed &&
                                       std::isfinite(a.best_val_loss);
                     const bool b_ok = b.status != CellStatus::Failed &&
                                       std::isfinite(b.best_val_loss);
                     if (a_ok != b_ok) return a_ok;
                     if (!a_ok) return false;
                     return a.best_val_loss < b.best_val_loss;
                   });
}

/// The file itself is comma-separated, so list-valued and free-text cells
/// swap their commas for semicolons.
inline std::string csv_safe(std::string s) {
  for (char& c : s) {
    if (c == ',') c = ';';
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

inline void write_sweep_results_csv(const std::string& path,
                                    const std::vector<SweepRow>& rows) {
  csv::Writer w(path);
  w.row({"rank", "run_dir", "status", "head_kind", "hidden", "lr",
         "weight_decay", "scheduler", "loss", "gamma", "alpha", "sampling",
         "best_val_loss", "best_epoch", "diverged", "error"});
  int rank = 0;
  for (const auto& r : rows) {
    const char* status = r.status == CellStatus::Completed ? "completed"
                         : r.status == CellStatus::Skipped ? "resumed"
                                                           : "failed";
    w.row({std::to_string(++rank), r.run_dir, status, r.cell.head_kind,
           std::to_string(r.cell.hidden), csv::fmt(r.cell.lr),
           csv::fmt(r.cell.weight_decay), r.cell.scheduler, r.cell.loss,
           csv::fmt(r.cell.gamma), csv_safe(r.cell.alpha), r.cell.sampling,
           csv::fmt(r.best_val_loss), std::to_string(r.best_epoch),
           r.diverged ? "true" : "false", csv_safe(r.error)});
  }
  w.close();
}

/// Trains every cell of the grid on a shared dataset. `pretrained` seeds
/// the backbone for the head_only and finetune strategies; cells run
/// independently, a failing cell is recorded and the sweep moves on.
inline SweepResult run_sweep(const Config& base, const TrainData& data,
                             const MockBackbone* pretrained,
                             const std::map<std::string, std::string>&
                                 input_digests = {}) {
  SweepResult result;
  result.dir = sweep_dir(base);
  std::filesystem::create_directories(result.dir);

  for (SweepCell& cell : expand_grid(base)) {
    SweepRow row;
    row.run_dir = result.dir + "/" + run_dir_name(cell.cfg);
    row.cell = std::move(cell);

    if (read_cell_metrics(row.run_dir, row)) {
      row.status = CellStatus::Skipped;
      result.skipped += 1;
      result.rows.push_back(std::move(row));
      continue;
    }

    try {
      const Config& cfg = row.cell.cfg;
      TrainOptions opts = TrainOptions::from_config(cfg);
      Model model = make_model(cfg, opts.seed);
      if (pretrained != nullptr &&
          opts.strategy != TrainStrategy::RandomInit) {
        model.backbone = *pretrained;
      }
      TrainResult trained =
          train(std::move(model), data, opts, cfg.arch_digest());
      const EvalResult val = evaluate(trained.model, data, data.val_idx);
      write_run_dir(row.run_dir, cfg, trained.history, trained.best,
                    val.metrics, input_digests);
      row.status = CellStatus::Completed;
      row.best_val_loss = trained.history.best_val_loss;
      row.best_epoch = trained.history.best_epoch;
      row.diverged = trained.diverged;
      result.completed += 1;
    } catch (const Error& err) {
      row.status = CellStatus::Failed;
      row.error = err.what();
      result.failed += 1;
    }
    result.rows.push_back(std::move(row));
  }

  rank_rows(result.rows);
  write_sweep_results_csv(result.dir + "/results.csv", result.rows);
  return result;
}

}  // namespace heliofield::harness
