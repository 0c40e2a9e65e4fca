#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "comment_judge/corpus.hpp"
#include "comment_judge/csv.hpp"
#include "comment_judge/dataset_io.hpp"
#include "comment_judge/error.hpp"

namespace comment_judge {

/// Labels indexed by (item, rater); missing cells are allowed.
class AnnotationTable {
 public:
  AnnotationTable() = default;

  void set(const std::string& item, const std::string& rater, Label label) {
    const std::size_t i = intern(item, item_index_, items_);
    const std::size_t before = raters_.size();
    const std::size_t r = intern(rater, rater_index_, raters_);
    if (raters_.size() != before) {
      for (auto& row : cells_) row.resize(raters_.size());
    }
    if (cells_.size() < items_.size()) cells_.emplace_back(raters_.size());
    cells_[i][r] = label;
  }

  [[nodiscard]] const std::vector<std::string>& item_ids() const noexcept { return items_; }
  [[nodiscard]] const std::vector<std::string>& raters() const noexcept { return raters_; }

  [[nodiscard]] std::optional<Label> at(std::size_t item, std::size_t rater) const {
    return cells_[item][rater];
  }

  [[nodiscard]] std::optional<std::size_t> rater_index(std::string_view rater) const {
    auto it = rater_index_.find(std::string(rater));
    if (it == rater_index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  static std::size_t intern(const std::string& key, std::map<std::string, std::size_t>& index,
                            std::vector<std::string>& order) {
    auto [it, inserted] = index.emplace(key, order.size());
    if (inserted) order.push_back(key);
    return it->second;
  }

  std::vector<std::string> items_;
  std::vector<std::string> raters_;
  std::map<std::string, std::size_t> item_index_;
  std::map<std::string, std::size_t> rater_index_;
  std::vector<std::vector<std::optional<Label>>> cells_;
};

/// Parses the `item_id,rater_id,label` annotation CSV.
inline AnnotationTable parse_annotations(std::string_view content) {
  const auto records = csv::parse(content);
  if (records.empty() ||
      records.front().fields != std::vector<std::string>{"item_id", "rater_id", "label"}) {
    throw DataError("bad annotation header (expected item_id,rater_id,label)");
  }
  AnnotationTable table;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& f = records[r].fields;
    const std::string where = "row " + std::to_string(r) + " (line " + std::to_string(records[r].line) + ")";
    if (f.size() == 1 && f[0].empty()) continue;
    if (f.size() != 3) throw DataError(where + ": expected 3 fields, found " + std::to_string(f.size()));
    if (f[0].empty() || f[1].empty()) throw DataError(where + ": empty item or rater id");
    auto label = parse_label(f[2]);
    if (!label) throw DataError(where + ": unknown label \"" + f[2] + "\"");
    table.set(f[0], f[1], *label);
  }
  return table;
}

inline AnnotationTable load_annotations(const std::filesystem::path& path) {
  return parse_annotations(read_file(path));
}

/// Cohen's kappa between two raters over the items both annotated.
inline double cohens_kappa(const AnnotationTable& table, std::size_t rater_a, std::size_t rater_b) {
  std::size_t n = 0;
  std::size_t agree = 0;
  std::size_t a_useful = 0;
  std::size_t b_useful = 0;
  for (std::size_t i = 0; i < table.item_ids().size(); ++i) {
    const auto a = table.at(i, rater_a);
    const auto b = table.at(i, rater_b);
    if (!a || !b) continue;
    ++n;
    agree += (*a == *b) ? 1 : 0;
    a_useful += (*a == Label::Useful) ? 1 : 0;
    b_useful += (*b == Label::Useful) ? 1 : 0;
  }
  const auto& names = table.raters();
  if (n == 0) {
    throw DataError("raters \"" + names[rater_a] + "\" and \"" + names[rater_b] + "\" share no items");
  }
  if (agree == n) return 1.0;
  const double total = static_cast<double>(n);
  const double p_o = static_cast<double>(agree) / total;
  const double pa = static_cast<double>(a_useful) / total;
  const double pb = static_cast<double>(b_useful) / total;
  const double p_e = pa * pb + (1.0 - pa) * (1.0 - pb);
  if (p_e >= 1.0) {
    throw DataError("kappa undefined for raters \"" + names[rater_a] + "\" and \"" + names[rater_b] +
                    "\": chance agreement is 1");
  }
  return std::clamp((p_o - p_e) / (1.0 - p_e), -1.0, 1.0);
}

inline double cohens_kappa(const AnnotationTable& table, std::string_view rater_a, std::string_view rater_b) {
  const auto a = table.rater_index(rater_a);
  const auto b = table.rater_index(rater_b);
  if (!a || !b) throw DataError("unknown rater \"" + std::string(a ? rater_b : rater_a) + "\"");
  return cohens_kappa(table, *a, *b);
}

struct PairwiseKappa {
  std::string rater_a;
  std::string rater_b;
  std::optional<double> kappa;  // empty when the pair has no co-annotated items
};

struct KappaSummary {
  std::vector<PairwiseKappa> pairs;
  double mean = 0.0;
  std::size_t pairs_used = 0;
};

/// Unweighted mean of Cohen's kappa over every rater pair with at least one
/// co-annotated item.
inline KappaSummary mean_pairwise_kappa(const AnnotationTable& table) {
  const auto& raters = table.raters();
  if (raters.size() < 2) {
    throw DataError("kappa needs at least 2 raters, found " + std::to_string(raters.size()));
  }
  KappaSummary s;
  double sum = 0.0;
  for (std::size_t a = 0; a < raters.size(); ++a) {
    for (std::size_t b = a + 1; b < raters.size(); ++b) {
      PairwiseKappa pk{raters[a], raters[b], std::nullopt};
      try {
        pk.kappa = cohens_kappa(table, a, b);
        sum += *pk.kappa;
        ++s.pairs_used;
      } catch (const DataError&) {
      }
      s.pairs.push_back(std::move(pk));
    }
  }
  if (s.pairs_used == 0) throw DataError("no rater pair has a defined kappa");
  s.mean = sum / static_cast<double>(s.pairs_used);
  return s;
}

}  // namespace comment_judge
