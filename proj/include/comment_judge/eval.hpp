#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "comment_judge/corpus.hpp"
#include "comment_judge/error.hpp"

namespace comment_judge {

/// Positive class is Useful.
struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  [[nodiscard]] std::size_t total() const noexcept { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

inline ConfusionMatrix confusion(std::span<const Label> predictions, std::span<const Label> truths) {
  if (predictions.size() != truths.size()) {
    throw DataError("prediction/truth length mismatch: " + std::to_string(predictions.size()) + " vs " +
                    std::to_string(truths.size()));
  }
  if (predictions.empty()) throw DataError("cannot score an empty prediction list");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool pred = predictions[i] == Label::Useful;
    const bool truth = truths[i] == Label::Useful;
    if (pred && truth) ++cm.tp;
    else if (pred) ++cm.fp;
    else if (truth) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

struct MetricsReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t n = 0;
  ConfusionMatrix counts;
  std::string model;
  std::string dataset;
  // Set when the corresponding ratio was 0/0 and reported as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Accuracy, precision, recall and F1 for the Useful class. A 0/0 ratio is
/// reported as 0 with its flag set.
inline MetricsReport metrics(const ConfusionMatrix& cm, std::string model = {}, std::string dataset = {}) {
  MetricsReport r;
  r.counts = cm;
  r.n = cm.total();
  r.model = std::move(model);
  r.dataset = std::move(dataset);
  if (r.n == 0) throw DataError("cannot compute metrics over zero examples");
  const auto ratio = [](std::size_t num, std::size_t den, bool& undefined) {
    undefined = den == 0;
    return undefined ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  r.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(r.n);
  r.precision = ratio(cm.tp, cm.tp + cm.fp, r.precision_undefined);
  r.recall = ratio(cm.tp, cm.tp + cm.fn, r.recall_undefined);
  r.f1_undefined = r.precision + r.recall == 0.0;
  r.f1 = r.f1_undefined ? 0.0 : 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

struct MetricDeltas {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct ComparisonRow {
  std::string model;
  MetricsReport seed;
  MetricsReport integrated;
  MetricDeltas delta;  // integrated - seed, absolute
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;
};

/// Pairs reports by position; model descriptors must match row for row.
inline ComparisonReport compare(std::span<const MetricsReport> seed, std::span<const MetricsReport> integrated) {
  if (seed.size() != integrated.size()) {
    throw DataError("comparison needs the same models on both corpora (" + std::to_string(seed.size()) + " vs " +
                    std::to_string(integrated.size()) + " reports)");
  }
  ComparisonReport out;
  for (std::size_t i = 0; i < seed.size(); ++i) {
    if (seed[i].model != integrated[i].model) {
      throw DataError("model descriptor mismatch: \"" + seed[i].model + "\" vs \"" + integrated[i].model + "\"");
    }
    ComparisonRow row{seed[i].model, seed[i], integrated[i], {}};
    row.delta.accuracy = integrated[i].accuracy - seed[i].accuracy;
    row.delta.precision = integrated[i].precision - seed[i].precision;
    row.delta.recall = integrated[i].recall - seed[i].recall;
    row.delta.f1 = integrated[i].f1 - seed[i].f1;
    out.rows.push_back(std::move(row));
  }
  return out;
}

/// Fixed four-decimal rendering; `signed_value` forces a leading sign.
inline std::string format_metric(double v, bool signed_value = false) {
  double rounded = std::round(v * 1e4) / 1e4;
  if (rounded == 0.0) rounded = 0.0;  // no "-0.0000"
  char buf[32];
  std::snprintf(buf, sizeof buf, signed_value ? "%+.4f" : "%.4f", rounded);
  return buf;
}

inline nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["model"] = r.model;
  j["dataset"] = r.dataset;
  j["n"] = r.n;
  j["accuracy"] = r.accuracy;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["confusion"] = {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"tn", r.counts.tn}, {"fn", r.counts.fn}};
  j["undefined"] = {{"precision", r.precision_undefined}, {"recall", r.recall_undefined}, {"f1", r.f1_undefined}};
  return j;
}

inline nlohmann::json to_json(const ComparisonReport& c) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : c.rows) {
    rows.push_back({{"model", row.model},
                    {"seed", to_json(row.seed)},
                    {"integrated", to_json(row.integrated)},
                    {"absolute_delta",
                     {{"accuracy", row.delta.accuracy},
                      {"precision", row.delta.precision},
                      {"recall", row.delta.recall},
                      {"f1", row.delta.f1}}}});
  }
  return {{"report", "model-performance-comparison"}, {"rows", rows}};
}

inline std::string render_metrics(const MetricsReport& r) {
  std::string s;
  s += "model:     " + r.model + "\n";
  s += "dataset:   " + r.dataset + "\n";
  s += "examples:  " + std::to_string(r.n) + "\n";
  s += "accuracy:  " + format_metric(r.accuracy) + "\n";
  s += "precision: " + format_metric(r.precision) + (r.precision_undefined ? "  (undefined: no Useful predictions)" : "") + "\n";
  s += "recall:    " + format_metric(r.recall) + (r.recall_undefined ? "  (undefined: no Useful examples)" : "") + "\n";
  s += "f1:        " + format_metric(r.f1) + (r.f1_undefined ? "  (undefined)" : "") + "\n";
  s += "confusion: tp=" + std::to_string(r.counts.tp) + " fp=" + std::to_string(r.counts.fp) +
       " tn=" + std::to_string(r.counts.tn) + " fn=" + std::to_string(r.counts.fn) + "\n";
  return s;
}

/// Aligned text table: test accuracy and F1 on each corpus, then absolute deltas.
inline std::string render_comparison(const ComparisonReport& c) {
  std::size_t name_w = 5;
  for (const auto& row : c.rows) name_w = std::max(name_w, row.model.size());
  const auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };
  const auto cell = [&](const std::string& s) { return pad(s, 9); };
  const std::string sep = " | ";

  std::string out;
  out += pad("", name_w) + sep + pad("Performance with Seed Data", 19) + sep +
         pad("Performance with Integrated Data", 19) + sep + "Absolute delta (integrated - seed)\n";
  out += pad("Model", name_w) + sep + cell("Test Acc") + " " + cell("F1") + sep + cell("Test Acc") + " " + cell("F1") +
         sep + cell("Acc") + " " + cell("F1") + " " + cell("Precision") + " " + "Recall\n";
  out += std::string(name_w, '-') + "-+-" + std::string(19, '-') + "-+-" + std::string(19, '-') + "-+-" +
         std::string(36, '-') + "\n";
  for (const auto& row : c.rows) {
    out += pad(row.model, name_w) + sep + cell(format_metric(row.seed.accuracy)) + " " +
           cell(format_metric(row.seed.f1)) + sep + cell(format_metric(row.integrated.accuracy)) + " " +
           cell(format_metric(row.integrated.f1)) + sep + cell(format_metric(row.delta.accuracy, true)) + " " +
           cell(format_metric(row.delta.f1, true)) + " " + cell(format_metric(row.delta.precision, true)) + " " +
           format_metric(row.delta.recall, true) + "\n";
  }
  out += "\n";
  for (const auto& row : c.rows) {
    out += row.model + ": precision " + format_metric(row.seed.precision) + " -> " +
           format_metric(row.integrated.precision) + " (" + format_metric(row.delta.precision, true) +
           " absolute), recall " + format_metric(row.seed.recall) + " -> " + format_metric(row.integrated.recall) +
           " (" + format_metric(row.delta.recall, true) + " absolute)\n";
  }
  return out;
}

}  // namespace comment_judge
