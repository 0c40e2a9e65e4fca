#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "comment_judge/error.hpp"
#include "comment_judge/hash.hpp"
#include "comment_judge/random.hpp"
#include "comment_judge/text.hpp"

namespace comment_judge {

enum class Label { Useful, NotUseful };
enum class Source { Seed, Generated, Extracted };
enum class Split { Train, Validation, Test };

inline constexpr std::string_view to_string(Label l) noexcept {
  return l == Label::Useful ? "Useful" : "Not Useful";
}

inline constexpr std::string_view to_string(Source s) noexcept {
  switch (s) {
    case Source::Seed: return "seed";
    case Source::Generated: return "generated";
    case Source::Extracted: return "extracted";
  }
  return "seed";
}

inline constexpr std::string_view to_string(Split s) noexcept {
  switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "train";
}

/// Exact match on "Useful" / "Not Useful"; anything else is rejected.
inline std::optional<Label> parse_label(std::string_view s) noexcept {
  if (s == "Useful") return Label::Useful;
  if (s == "Not Useful") return Label::NotUseful;
  return std::nullopt;
}

inline std::optional<Source> parse_source(std::string_view s) noexcept {
  if (s == "seed") return Source::Seed;
  if (s == "generated") return Source::Generated;
  if (s == "extracted") return Source::Extracted;
  return std::nullopt;
}

inline std::optional<Split> parse_split(std::string_view s) noexcept {
  if (s == "train") return Split::Train;
  if (s == "validation") return Split::Validation;
  if (s == "test") return Split::Test;
  return std::nullopt;
}

/// Useful maps to +1, NotUseful to -1.
inline constexpr double sign_of(Label l) noexcept { return l == Label::Useful ? 1.0 : -1.0; }

struct CodeCommentPair {
  std::string id;
  std::string comment_text;
  std::string code_context;
  std::optional<Label> label;
  Source source = Source::Seed;
  std::optional<Split> split;

  friend bool operator==(const CodeCommentPair&, const CodeCommentPair&) = default;
};

/// Per-(label, source, split) tallies, always derived from the pairs themselves.
class DatasetCounts {
 public:
  void add(const CodeCommentPair& p) {
    ++cells_[{key(p.label), static_cast<int>(p.source), key(p.split)}];
    ++total_;
  }

  [[nodiscard]] std::size_t total() const noexcept { return total_; }

  /// Count of pairs matching every filter that is set. Filters on label/split
  /// match only pairs that carry that value.
  [[nodiscard]] std::size_t count(std::optional<Label> label = std::nullopt,
                                  std::optional<Source> source = std::nullopt,
                                  std::optional<Split> split = std::nullopt) const {
    std::size_t n = 0;
    for (const auto& [k, v] : cells_) {
      if (label && std::get<0>(k) != static_cast<int>(*label)) continue;
      if (source && std::get<1>(k) != static_cast<int>(*source)) continue;
      if (split && std::get<2>(k) != static_cast<int>(*split)) continue;
      n += v;
    }
    return n;
  }

  [[nodiscard]] std::size_t unlabeled() const {
    std::size_t n = 0;
    for (const auto& [k, v] : cells_) {
      if (std::get<0>(k) < 0) n += v;
    }
    return n;
  }

  [[nodiscard]] std::size_t unsplit() const {
    std::size_t n = 0;
    for (const auto& [k, v] : cells_) {
      if (std::get<2>(k) < 0) n += v;
    }
    return n;
  }

 private:
  template <typename E>
  static int key(const std::optional<E>& v) noexcept {
    return v ? static_cast<int>(*v) : -1;
  }

  std::map<std::tuple<int, int, int>, std::size_t> cells_;
  std::size_t total_ = 0;
};

struct Dataset {
  std::vector<CodeCommentPair> pairs;

  [[nodiscard]] DatasetCounts counts() const {
    DatasetCounts c;
    for (const auto& p : pairs) c.add(p);
    return c;
  }

  [[nodiscard]] bool has_splits() const {
    return std::any_of(pairs.begin(), pairs.end(), [](const auto& p) { return p.split.has_value(); });
  }

  [[nodiscard]] std::vector<const CodeCommentPair*> in_split(Split s) const {
    std::vector<const CodeCommentPair*> out;
    for (const auto& p : pairs) {
      if (p.split == s) out.push_back(&p);
    }
    return out;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Checks a single pair's own invariants; `where` prefixes the message.
inline void validate_pair(const CodeCommentPair& p, const std::string& where) {
  if (p.id.empty()) throw DataError(where + ": empty id");
  if (text::trim(p.comment_text).empty()) {
    throw DataError(where + ": comment is empty for id \"" + p.id + "\"");
  }
}

/// Throws DataError on the first violated dataset invariant.
inline void validate(const Dataset& d) {
  std::unordered_set<std::string_view> ids;
  bool any_split = false;
  for (std::size_t i = 0; i < d.pairs.size(); ++i) {
    const auto& p = d.pairs[i];
    validate_pair(p, "pair " + std::to_string(i + 1));
    if (!ids.insert(p.id).second) throw DataError("duplicate id \"" + p.id + "\"");
    any_split = any_split || p.split.has_value();
  }
  if (any_split) {
    for (const auto& p : d.pairs) {
      if (p.label && !p.split) {
        throw DataError("labeled pair \"" + p.id + "\" has no split while others do");
      }
    }
  }
}

/// Identity of a pair for deduplication: lowercased, whitespace-collapsed
/// comment and code, hashed.
inline std::uint64_t duplicate_key(std::string_view comment, std::string_view code) {
  Fnv1a h;
  h.update(text::normalize(comment));
  h.separator();
  h.update(text::normalize(code));
  return h.value();
}

inline std::uint64_t duplicate_key(const CodeCommentPair& p) {
  return duplicate_key(p.comment_text, p.code_context);
}

struct SplitFractions {
  double test = 0.19;
  double validation = 0.10;
};

namespace detail {

// Largest-remainder apportionment of `total` across groups proportional to
// `sizes`, never exceeding a group's size.
inline std::vector<std::size_t> apportion(std::span<const std::size_t> sizes, double fraction,
                                          std::size_t total) {
  std::vector<std::size_t> out(sizes.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t g = 0; g < sizes.size(); ++g) {
    const double exact = static_cast<double>(sizes[g]) * fraction;
    out[g] = static_cast<std::size_t>(std::floor(exact));
    assigned += out[g];
    remainders.emplace_back(exact - std::floor(exact), g);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (const auto& [rem, g] : remainders) {
    if (assigned >= total) break;
    if (out[g] < sizes[g]) {
      ++out[g];
      ++assigned;
    }
  }
  return out;
}

}  // namespace detail

/// Assigns every pair a split, stratified by label. Deterministic in
/// `rng_seed`; per-label split sizes are within one item of the global
/// proportion and the total split sizes equal round(N * fraction).
inline Dataset stratified_split(const Dataset& dataset, SplitFractions fractions, std::uint64_t rng_seed) {
  const auto in_open_unit = [](double f) { return f > 0.0 && f < 1.0; };
  if (!in_open_unit(fractions.test) || !in_open_unit(fractions.validation) ||
      fractions.test + fractions.validation >= 1.0) {
    throw UsageError("split fractions must lie in (0,1) and sum to less than 1");
  }
  std::array<std::vector<std::size_t>, 2> by_label;
  for (std::size_t i = 0; i < dataset.pairs.size(); ++i) {
    const auto& p = dataset.pairs[i];
    if (!p.label) throw DataError("cannot split: pair \"" + p.id + "\" is unlabeled");
    by_label[static_cast<std::size_t>(*p.label)].push_back(i);
  }

  const std::array<std::size_t, 2> sizes{by_label[0].size(), by_label[1].size()};
  const auto n = static_cast<double>(dataset.pairs.size());
  const auto n_test = static_cast<std::size_t>(std::llround(n * fractions.test));
  const auto n_val = static_cast<std::size_t>(std::llround(n * fractions.validation));
  const auto test_counts = detail::apportion(sizes, fractions.test, n_test);
  const auto val_counts = detail::apportion(sizes, fractions.validation, n_val);

  Dataset out = dataset;
  Rng rng(rng_seed);
  for (std::size_t g = 0; g < 2; ++g) {
    auto& idx = by_label[g];
    shuffle(std::span<std::size_t>(idx), rng);
    const std::size_t val_end = std::min(idx.size(), test_counts[g] + val_counts[g]);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      auto& split = out.pairs[idx[k]].split;
      if (k < test_counts[g]) {
        split = Split::Test;
      } else if (k < val_end) {
        split = Split::Validation;
      } else {
        split = Split::Train;
      }
    }
  }
  return out;
}

struct MergeResult {
  Dataset dataset;
  std::size_t added = 0;
  std::size_t duplicates_dropped = 0;
  std::size_t rekeyed = 0;
};

/// Appends every generated pair whose duplicate key is not already present.
/// Colliding ids get a deterministic "-g<k>" suffix. When the seed carries
/// split assignments, every generated pair joins the training split so the
/// seed's validation and test sets stay fixed.
inline MergeResult merge_datasets(const Dataset& seed, const Dataset& generated) {
  MergeResult r;
  r.dataset = seed;
  std::unordered_set<std::uint64_t> keys;
  std::unordered_set<std::string> ids;
  for (const auto& p : seed.pairs) {
    keys.insert(duplicate_key(p));
    ids.insert(p.id);
  }
  const bool seed_split = seed.has_splits();
  for (const auto& g : generated.pairs) {
    if (!keys.insert(duplicate_key(g)).second) {
      ++r.duplicates_dropped;
      continue;
    }
    CodeCommentPair p = g;
    if (ids.contains(p.id)) {
      for (std::size_t k = 1;; ++k) {
        std::string candidate = g.id + "-g" + std::to_string(k);
        if (!ids.contains(candidate)) {
          p.id = std::move(candidate);
          break;
        }
      }
      ++r.rekeyed;
    }
    if (seed_split) p.split = Split::Train;
    ids.insert(p.id);
    r.dataset.pairs.push_back(std::move(p));
    ++r.added;
  }
  return r;
}

}  // namespace comment_judge
