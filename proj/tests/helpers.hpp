#pragma once

#include <filesystem>
#include <string>

#include "heliofield/config.hpp"
#include "heliofield/timeutil.hpp"

namespace testutil {

/// Fresh empty directory under the build tree, wiped on each call so
/// reruns never see stale artifacts.
inline std::string temp_dir(const std::string& name) {
  const std::filesystem::path p = std::filesystem::path("test_tmp") / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

inline double utc(int y, unsigned mo, unsigned d, double h = 0, double mi = 0,
                  double s = 0) {
  return heliofield::utc_from_civil(y, mo, d) + h * 3600.0 + mi * 60.0 + s;
}

/// Config with synthetic windows shrunk enough for fast in-test training.
inline heliofield::Config small_synth_config(const std::string& out) {
  heliofield::Config cfg;
  cfg.set("paths.out", out);
  cfg.set("synth.train_minutes", "600");
  cfg.set("synth.val_minutes", "240");
  cfg.set("synth.test_minutes", "240");
  cfg.set("train.epochs", "2");
  cfg.set("backbone.image_h", "16");
  cfg.set("backbone.image_w", "16");
  cfg.set("backbone.image_c", "2");
  cfg.set("backbone.patch", "8");
  cfg.set("backbone.dim", "16");
  cfg.set("encoding.embedding_dim", "16");
  cfg.set("encoding.bands", "3");
  cfg.set("head.hidden", "32");
  return cfg;
}

}  // namespace testutil
