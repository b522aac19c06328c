#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "heliofield/errors.hpp"
#include "heliofield/rng.hpp"

namespace heliofield {

/// Layered run configuration.
///
/// Values are plain strings keyed "section.key" and resolve in order
/// defaults -> config file(s) -> --set overrides. Every key must be in the
/// built-in registry; unknown keys are rejected so typos never silently
/// fall back to defaults. canonical() is the exact text echoed into run
/// outputs, and digest() content-addresses a run.
class Config {
 public:
  Config() : values_(registry()) {}

  static const std::map<std::string, std::string>& registry();

  /// Overlays an INI-style file: [section] headers, key = value lines,
  /// '#' comments.
  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingInputError("cannot open config file: " + path);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') {
          throw ConfigError(path + ":" + std::to_string(lineno) +
                            ": malformed section header");
        }
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(path + ":" + std::to_string(lineno) +
                          ": expected key = value");
      }
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (section.empty()) {
        throw ConfigError(path + ":" + std::to_string(lineno) +
                          ": key outside any [section]");
      }
      set(section + "." + key, value);
    }
  }

  /// Applies a --set override of the form section.key=value.
  void apply_override(const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("override must look like section.key=value: " + spec);
    }
    set(trim(spec.substr(0, eq)), trim(spec.substr(eq + 1)));
  }

  void set(const std::string& dotted, const std::string& value) {
    const auto it = values_.find(dotted);
    if (it == values_.end()) {
      throw ConfigError("unknown config key '" + dotted + "'");
    }
    it->second = value;
  }

  [[nodiscard]] const std::string& str(const std::string& dotted) const {
    const auto it = values_.find(dotted);
    if (it == values_.end()) {
      throw ConfigError("unknown config key '" + dotted + "'");
    }
    return it->second;
  }

  [[nodiscard]] double f64(const std::string& dotted) const {
    return parse_f64(str(dotted), dotted);
  }

  [[nodiscard]] long long i64(const std::string& dotted) const {
    const std::string& v = str(dotted);
    try {
      std::size_t pos = 0;
      const long long r = std::stoll(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return r;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + dotted + "' is not an integer: '" +
                        v + "'");
    }
  }

  [[nodiscard]] bool boolean(const std::string& dotted) const {
    const std::string& v = str(dotted);
    if (v == "true" || v == "on" || v == "1") return true;
    if (v == "false" || v == "off" || v == "0") return false;
    throw ConfigError("config key '" + dotted + "' is not a boolean: '" + v +
                      "'");
  }

  [[nodiscard]] std::vector<std::string> list_str(
      const std::string& dotted) const {
    return split(str(dotted), ',');
  }

  [[nodiscard]] std::vector<double> list_f64(const std::string& dotted) const {
    std::vector<double> out;
    for (const auto& item : list_str(dotted)) {
      out.push_back(parse_f64(item, dotted));
    }
    return out;
  }

  /// Parses an inclusive integer range "lo-hi" (or a single value "v").
  [[nodiscard]] std::pair<int, int> range(const std::string& dotted) const {
    const std::string& v = str(dotted);
    int lo = 0, hi = 0;
    if (std::sscanf(v.c_str(), "%d-%d", &lo, &hi) == 2) return {lo, hi};
    if (std::sscanf(v.c_str(), "%d", &lo) == 1) return {lo, lo};
    throw ConfigError("config key '" + dotted + "' is not a range: '" + v +
                      "'");
  }

  /// Canonical text form: sorted sections and keys; echoed verbatim into
  /// run outputs so any run can be reproduced from its directory.
  [[nodiscard]] std::string canonical() const {
    std::ostringstream out;
    std::string current;
    for (const auto& [dotted, value] : values_) {
      const auto dot = dotted.find('.');
      const std::string section = dotted.substr(0, dot);
      if (section != current) {
        if (!current.empty()) out << "\n";
        out << "[" << section << "]\n";
        current = section;
      }
      out << dotted.substr(dot + 1) << " = " << value << "\n";
    }
    return out.str();
  }

  [[nodiscard]] std::uint64_t digest() const { return fnv1a64(canonical()); }

  /// Digest over only the sections that define the model architecture;
  /// checkpoints embed it so a checkpoint is never silently loaded into a
  /// mismatched network.
  [[nodiscard]] std::uint64_t arch_digest() const {
    std::ostringstream out;
    for (const auto& [dotted, value] : values_) {
      for (const char* sec : {"backbone.", "encoding.", "head."}) {
        if (dotted.rfind(sec, 0) == 0) out << dotted << "=" << value << "\n";
      }
    }
    return fnv1a64(out.str());
  }

  static std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
  }

  static std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::stringstream ss(s);
    while (std::getline(ss, item, sep)) {
      item = trim(item);
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }

 private:
  static double parse_f64(const std::string& v, const std::string& dotted) {
    try {
      std::size_t pos = 0;
      const double r = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return r;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + dotted + "' is not a number: '" + v +
                        "'");
    }
  }

  std::map<std::string, std::string> values_;
};

inline const std::map<std::string, std::string>& Config::registry() {
  static const std::map<std::string, std::string> reg = {
      {"run.seed", "42"},

      {"paths.out", "out"},
      {"paths.raw_csv", ""},
      {"paths.labeled_csv", ""},
      {"paths.ephemeris_csv", ""},
      {"paths.footpoints_csv", ""},
      {"paths.image_index_csv", ""},
      {"paths.images", ""},
      {"paths.dataset", ""},
      {"paths.ground_truth", ""},
      {"paths.backbone", ""},
      {"paths.checkpoint", ""},
      {"paths.embeddings", ""},
      {"paths.sweep_dir", ""},
      {"paths.label_config", ""},

      {"plasma.cadence_s", "60"},
      // Raw streams are split on holes longer than this before binning,
      // so labeling never interpolates across instrument outages. Zero
      // disables the split.
      {"plasma.max_gap_minutes", "120"},

      // Decision sequence of boundary planes in (log10 S_p, log10 v_A,
      // log10 T_ratio) space: "<class> <ge|lt> <a> <b> <c> <d>" fires when
      // a*x + b*y + c*z + d compares against zero. Later planes are only
      // consulted when earlier ones do not fire; the fallback class closes
      // the partition. Shipped values are reference placeholders and must
      // be calibrated against a published scheme before scientific use.
      {"label.version", "1"},
      {"label.plane1", "ejecta ge 0 1 -0.5 -1.9"},
      {"label.plane2", "coronal_hole ge 1 0 0 -1.5"},
      {"label.plane3", "sector_reversal ge 0 0 -1 -0.3"},
      {"label.plane4", ""},
      {"label.plane5", ""},
      {"label.plane6", ""},
      {"label.plane7", ""},
      {"label.plane8", ""},
      {"label.fallback", "streamer_belt"},
      {"label.t_exp_base_kms", "258.0"},
      {"label.t_exp_exponent", "3.113"},
      {"label.t_exp_unit_to_ev", "1.0"},
      {"label.mu0", "1.25663706212e-6"},
      {"label.m_p_kg", "1.67262192369e-27"},
      {"label.ev_per_kelvin", "8.617333262e-5"},

      {"connectivity.rotation_period_days", "25.38"},
      {"connectivity.source_surface_rsun", "2.5"},
      {"connectivity.pairing_tolerance_s", "720"},
      {"connectivity.footpoint_cadence_s", "28800"},
      {"connectivity.image_cadence_s", "720"},

      {"splits.train_months", "4-12"},
      {"splits.train_years", "2019-2023"},
      {"splits.val_months", "1-3"},
      {"splits.val_years", "2019-2022"},
      {"splits.test_months", "1-3"},
      {"splits.test_years", "2023-2023"},

      {"encoding.bands", "10"},
      {"encoding.embedding_dim", "128"},
      {"encoding.coords", "sc_lat,sc_lon,fp_lat,fp_lon"},

      {"backbone.image_h", "32"},
      {"backbone.image_w", "32"},
      {"backbone.image_c", "10"},
      {"backbone.patch", "8"},
      {"backbone.dim", "128"},

      {"head.kind", "linear"},
      {"head.hidden", "256"},
      {"head.layers", "4"},
      {"head.skip_interval", "2"},
      {"head.dropout", "0.1"},

      // alpha is given in the order named by alpha_order, which defaults
      // to descending class frequency.
      {"loss.kind", "focal"},
      {"loss.gamma", "2.0"},
      {"loss.alpha", "0.45,0.30,0.15,0.10"},
      {"loss.alpha_order",
       "streamer_belt,sector_reversal,coronal_hole,ejecta"},

      {"optimizer.lr", "0.001"},
      {"optimizer.beta1", "0.9"},
      {"optimizer.beta2", "0.999"},
      {"optimizer.eps", "1e-8"},
      {"optimizer.weight_decay", "0.0001"},

      {"scheduler.kind", "plateau"},
      {"scheduler.plateau_factor", "0.5"},
      {"scheduler.plateau_patience", "3"},
      {"scheduler.plateau_min_delta", "0.0001"},
      {"scheduler.cosine_lr_min", "0.0"},
      {"scheduler.cosine_period", "50"},

      {"sampling.strategy", "none"},

      {"train.batch", "32"},
      {"train.epochs", "50"},
      {"train.early_stop_patience", "5"},
      {"train.early_stop_min_delta", "0.0001"},
      {"train.interp_filter", "false"},
      {"train.strategy", "finetune"},

      // Synthetic workload. Class parameter order everywhere is the label
      // enum order: coronal_hole, streamer_belt, sector_reversal, ejecta.
      // Class means are (log10 S_p, log10 v_A, log10 T_ratio). The log10
      // n_p means are chosen so every class has the same mean bulk speed;
      // travel-time jitter then stays below the image cadence and the
      // ballistic pairing keeps images informative about the label.
      {"synth.train_start", "2022-04-01"},
      {"synth.train_minutes", "40000"},
      {"synth.val_start", "2022-01-01"},
      {"synth.val_minutes", "8000"},
      {"synth.test_start", "2023-01-01"},
      {"synth.test_minutes", "4000"},
      {"synth.dwell_mean_min", "120"},
      {"synth.weights", "0.12,0.42,0.38,0.08"},
      {"synth.coronal_hole_mean", "1.8,1.8,0.1"},
      {"synth.coronal_hole_sigma", "0.02,0.02,0.02"},
      {"synth.coronal_hole_cov", ""},
      {"synth.coronal_hole_logn", "0.3"},
      {"synth.streamer_belt_mean", "1.0,1.6,-0.1"},
      {"synth.streamer_belt_sigma", "0.02,0.02,0.02"},
      {"synth.streamer_belt_cov", ""},
      {"synth.streamer_belt_logn", "1.2"},
      {"synth.sector_reversal_mean", "0.5,1.2,-0.45"},
      {"synth.sector_reversal_sigma", "0.02,0.02,0.02"},
      {"synth.sector_reversal_cov", ""},
      {"synth.sector_reversal_logn", "1.425"},
      {"synth.ejecta_mean", "1.2,2.3,-0.5"},
      {"synth.ejecta_sigma", "0.02,0.02,0.02"},
      {"synth.ejecta_cov", ""},
      {"synth.ejecta_logn", "0.3"},
      {"synth.logn_sigma", "0.05"},
      {"synth.plasma_cadence_s", "25"},
      {"synth.field_cadence_s", "5"},
      {"synth.image_noise", "0.35"},
      {"synth.pattern_seed", "20290"},
      {"synth.pattern_amp", "1.0"},
      {"synth.orbit_r_au", "0.08"},
      {"synth.orbit_lat_amp_deg", "4.0"},
      {"synth.orbit_lon0_deg", "10.0"},
      {"synth.orbit_lon_rate_deg_day", "3.0"},

      // Grid axes; semicolon separates alpha vectors.
      {"sweep.head_kinds", "linear,skip"},
      {"sweep.hiddens", "64,128,256,512,1024"},
      {"sweep.lrs", "1e-5,1e-6,1e-7,1e-8"},
      {"sweep.weight_decays", "3e-4,1e-4,1e-3"},
      {"sweep.schedulers", "cosine,plateau"},
      {"sweep.losses", "cross_entropy,focal"},
      {"sweep.gammas", "2,3"},
      {"sweep.alphas", "0.45,0.30,0.15,0.10;0.45,0.35,0.10,0.10"},
      {"sweep.samplings", "none,undersample"},

      {"eval.split", "test"},

      {"export.per_class", "1000"},
      {"export.balanced", "true"},
  };
  return reg;
}

}  // namespace heliofield
