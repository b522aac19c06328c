#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "heliofield/errors.hpp"
#include "heliofield/plasma.hpp"

namespace heliofield::harness {

using plasma::kNumClasses;
using plasma::WindClass;
using plasma::wind_class_name;

/// Confusion matrix (rows = truth, columns = prediction) and the derived
/// rates. Zero-denominator rates are defined as 0.
struct Metrics {
  std::array<std::array<long long, kNumClasses>, kNumClasses> confusion{};
  long long total = 0;
  double accuracy = 0.0;
  std::array<double, kNumClasses> precision{};
  std::array<double, kNumClasses> recall{};
  std::array<double, kNumClasses> f1{};
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;

  static Metrics compute(const std::vector<int>& truth,
                         const std::vector<int>& predicted) {
    if (truth.size() != predicted.size()) {
      throw DataError("metrics: truth and prediction counts differ");
    }
    if (truth.empty()) throw DataError("metrics: empty evaluation set");
    Metrics m;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const int t = truth[i];
      const int p = predicted[i];
      if (t < 0 || t >= kNumClasses || p < 0 || p >= kNumClasses) {
        throw DataError("metrics: class index out of range at row " +
                        std::to_string(i));
      }
      m.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)] += 1;
    }
    m.total = static_cast<long long>(truth.size());

    long long trace = 0;
    for (int c = 0; c < kNumClasses; ++c) {
      const auto cs = static_cast<std::size_t>(c);
      trace += m.confusion[cs][cs];
      long long tp = m.confusion[cs][cs];
      long long truth_count = 0;
      long long predicted_count = 0;
      for (int o = 0; o < kNumClasses; ++o) {
        truth_count += m.confusion[cs][static_cast<std::size_t>(o)];
        predicted_count += m.confusion[static_cast<std::size_t>(o)][cs];
      }
      m.precision[cs] = predicted_count > 0
                            ? static_cast<double>(tp) / static_cast<double>(predicted_count)
                            : 0.0;
      m.recall[cs] = truth_count > 0
                         ? static_cast<double>(tp) / static_cast<double>(truth_count)
                         : 0.0;
      const double pr = m.precision[cs] + m.recall[cs];
      m.f1[cs] = pr > 0.0 ? 2.0 * m.precision[cs] * m.recall[cs] / pr : 0.0;
      m.macro_precision += m.precision[cs] / kNumClasses;
      m.macro_recall += m.recall[cs] / kNumClasses;
      m.macro_f1 += m.f1[cs] / kNumClasses;
    }
    m.accuracy = static_cast<double>(trace) / static_cast<double>(m.total);
    return m;
  }

  [[nodiscard]] nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["total"] = total;
    j["accuracy"] = accuracy;
    nlohmann::ordered_json matrix = nlohmann::ordered_json::array();
    for (int t = 0; t < kNumClasses; ++t) {
      nlohmann::ordered_json row = nlohmann::ordered_json::array();
      for (int p = 0; p < kNumClasses; ++p) {
        row.push_back(confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)]);
      }
      matrix.push_back(row);
    }
    j["confusion"] = matrix;
    nlohmann::ordered_json per_class;
    for (int c = 0; c < kNumClasses; ++c) {
      const auto cs = static_cast<std::size_t>(c);
      nlohmann::ordered_json entry;
      entry["precision"] = precision[cs];
      entry["recall"] = recall[cs];
      entry["f1"] = f1[cs];
      per_class[wind_class_name(static_cast<WindClass>(c))] = entry;
    }
    j["per_class"] = per_class;
    j["macro_precision"] = macro_precision;
    j["macro_recall"] = macro_recall;
    j["macro_f1"] = macro_f1;
    return j;
  }
};

}  // namespace heliofield::harness
