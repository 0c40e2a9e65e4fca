#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "comment_judge/corpus.hpp"
#include "comment_judge/dataset_io.hpp"
#include "comment_judge/error.hpp"
#include "comment_judge/feature_vector.hpp"
#include "comment_judge/features.hpp"
#include "comment_judge/hash.hpp"

namespace comment_judge {

struct PipelineConfig {
  std::size_t min_df = 2;
  std::size_t max_vocabulary = 50'000;
  bool normalize = true;
};

/// Dense token indices 0..V-1 with document frequencies from the fitting corpus.
class Vocabulary {
 public:
  Vocabulary() = default;

  /// `tokens` must be unique; indices follow the given order.
  Vocabulary(std::vector<std::string> tokens, std::vector<std::size_t> df, std::size_t n_documents)
      : tokens_(std::move(tokens)), df_(std::move(df)), n_documents_(n_documents) {
    if (tokens_.size() != df_.size()) throw DataError("vocabulary token/df length mismatch");
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (df_[i] < 1 || df_[i] > n_documents_) throw DataError("document frequency out of range");
      if (!index_.emplace(tokens_[i], static_cast<std::uint32_t>(i)).second) {
        throw DataError("duplicate vocabulary token \"" + tokens_[i] + "\"");
      }
    }
  }

  [[nodiscard]] std::size_t size() const noexcept { return tokens_.size(); }
  [[nodiscard]] std::size_t n_documents() const noexcept { return n_documents_; }
  [[nodiscard]] const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  [[nodiscard]] std::size_t document_frequency(std::size_t index) const { return df_.at(index); }

  [[nodiscard]] std::optional<std::uint32_t> index_of(std::string_view token) const {
    auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_ && a.df_ == b.df_ && a.n_documents_ == b.n_documents_;
  }

 private:
  std::vector<std::string> tokens_;
  std::vector<std::size_t> df_;
  std::size_t n_documents_ = 0;
  std::unordered_map<std::string, std::uint32_t> index_;
};

/// Smoothed inverse document frequency: ln((1 + N) / (1 + df)) + 1.
inline double smoothed_idf(std::size_t df, std::size_t n_documents) {
  return std::log((1.0 + static_cast<double>(n_documents)) / (1.0 + static_cast<double>(df))) + 1.0;
}

/// Externally computed dense vectors keyed by pair id.
class EmbeddingTable {
 public:
  EmbeddingTable(std::size_t width, std::map<std::string, std::vector<double>> rows)
      : width_(width), rows_(std::move(rows)) {
    for (const auto& [id, v] : rows_) {
      if (v.size() != width_) throw DataError("embedding for \"" + id + "\" has inconsistent width");
    }
    Fnv1a h;
    for (const auto& [id, v] : rows_) {
      h.update(id);
      for (double x : v) h.update(std::string_view(reinterpret_cast<const char*>(&x), sizeof x));
    }
    digest_ = h.hex();
  }

  [[nodiscard]] std::size_t width() const noexcept { return width_; }
  [[nodiscard]] std::size_t size() const noexcept { return rows_.size(); }
  [[nodiscard]] const std::string& digest() const noexcept { return digest_; }

  [[nodiscard]] const std::vector<double>* find(const std::string& id) const {
    auto it = rows_.find(id);
    return it == rows_.end() ? nullptr : &it->second;
  }

 private:
  std::size_t width_;
  std::map<std::string, std::vector<double>> rows_;
  std::string digest_;
};

/// Parses the `width <K>` header followed by `<id> <v1> ... <vK>` rows.
inline EmbeddingTable parse_embeddings(std::string_view content) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  std::optional<std::size_t> width;
  std::map<std::string, std::vector<double>> rows;
  while (pos < content.size()) {
    std::size_t nl = content.find('\n', pos);
    if (nl == std::string_view::npos) nl = content.size();
    const std::string_view line = text::trim(content.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;

    std::vector<std::string_view> fields;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && text::is_space(line[i])) ++i;
      std::size_t j = i;
      while (j < line.size() && !text::is_space(line[j])) ++j;
      if (j > i) fields.push_back(line.substr(i, j - i));
      i = j;
    }
    const std::string where = "embedding line " + std::to_string(line_no);
    if (!width) {
      std::size_t k = 0;
      if (fields.size() != 2 || fields[0] != "width" ||
          std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), k).ec != std::errc{} || k == 0) {
        throw DataError(where + ": expected header \"width <K>\"");
      }
      width = k;
      continue;
    }
    if (fields.size() - 1 != *width) {
      throw DataError(where + ": inconsistent width " + std::to_string(fields.size() - 1) + ", declared " +
                      std::to_string(*width));
    }
    std::vector<double> v;
    v.reserve(*width);
    for (std::size_t f = 1; f < fields.size(); ++f) {
      // strtod accepts the full decimal grammar; from_chars for double is not
      // available on every toolchain we build with.
      std::string tok(fields[f]);
      char* end = nullptr;
      const double x = std::strtod(tok.c_str(), &end);
      if (end != tok.c_str() + tok.size() || !std::isfinite(x)) {
        throw DataError(where + ": malformed value \"" + tok + "\"");
      }
      v.push_back(x);
    }
    if (!rows.emplace(std::string(fields[0]), std::move(v)).second) {
      throw DataError(where + ": duplicate id \"" + std::string(fields[0]) + "\"");
    }
  }
  if (!width) throw DataError("embedding file is empty");
  return EmbeddingTable(*width, std::move(rows));
}

inline std::shared_ptr<const EmbeddingTable> import_embeddings(const std::filesystem::path& path) {
  return std::make_shared<const EmbeddingTable>(parse_embeddings(read_file(path)));
}

/// Fitted text-to-vector transform. Immutable after fitting; transform is
/// safe to call concurrently.
class FeaturePipeline {
 public:
  FeaturePipeline(PipelineConfig config, Vocabulary vocabulary) : config_(config), vocabulary_(std::move(vocabulary)) {
    idf_.reserve(vocabulary_.size());
    for (std::size_t i = 0; i < vocabulary_.size(); ++i) {
      idf_.push_back(smoothed_idf(vocabulary_.document_frequency(i), vocabulary_.n_documents()));
    }
  }

  [[nodiscard]] const PipelineConfig& config() const noexcept { return config_; }
  [[nodiscard]] const Vocabulary& vocabulary() const noexcept { return vocabulary_; }
  [[nodiscard]] double idf(std::size_t index) const { return idf_.at(index); }

  [[nodiscard]] std::size_t embedding_width() const noexcept { return embeddings_ ? embeddings_->width() : 0; }
  [[nodiscard]] std::size_t width() const noexcept {
    return vocabulary_.size() + kHandcraftedWidth + embedding_width();
  }

  void attach_embeddings(std::shared_ptr<const EmbeddingTable> table) { embeddings_ = std::move(table); }
  [[nodiscard]] const std::shared_ptr<const EmbeddingTable>& embeddings() const noexcept { return embeddings_; }

  /// Pairs transformed without an embedding row (they receive the zero vector).
  [[nodiscard]] std::size_t missing_embeddings() const noexcept { return missing_->load(); }

  [[nodiscard]] FeatureVector transform(const CodeCommentPair& pair) const {
    std::map<std::uint32_t, double> tf;
    for (const auto& token : tokenize(document_text(pair))) {
      if (auto idx = vocabulary_.index_of(token)) tf[*idx] += 1.0;
    }
    std::vector<FeatureVector::Entry> sparse;
    sparse.reserve(tf.size());
    double norm2 = 0.0;
    for (const auto& [idx, count] : tf) {
      const double v = count * idf_[idx];
      sparse.push_back({idx, v});
      norm2 += v * v;
    }
    if (config_.normalize && norm2 > 0.0) {
      const double inv = 1.0 / std::sqrt(norm2);
      for (auto& e : sparse) e.value *= inv;
    }

    const auto hand = handcrafted(pair);
    std::vector<double> dense(hand.begin(), hand.end());
    if (embeddings_) {
      if (const auto* row = embeddings_->find(pair.id)) {
        dense.insert(dense.end(), row->begin(), row->end());
      } else {
        dense.resize(dense.size() + embeddings_->width(), 0.0);
        missing_->fetch_add(1);
      }
    }
    return FeatureVector(vocabulary_.size(), std::move(sparse), std::move(dense));
  }

  /// Hash of everything that determines transform output.
  [[nodiscard]] std::string fingerprint() const {
    Fnv1a h;
    h.update("comment-judge-pipeline/1");
    h.separator();
    h.update(std::to_string(config_.min_df) + "," + std::to_string(config_.max_vocabulary) + "," +
             (config_.normalize ? "1" : "0") + "," + std::to_string(vocabulary_.n_documents()));
    for (std::size_t i = 0; i < vocabulary_.size(); ++i) {
      h.separator();
      h.update(vocabulary_.tokens()[i]);
      h.separator();
      h.update(std::to_string(vocabulary_.document_frequency(i)));
    }
    h.separator();
    h.update(embeddings_ ? std::to_string(embeddings_->width()) + ":" + embeddings_->digest() : "none");
    return h.hex();
  }

  static std::string document_text(const CodeCommentPair& pair) {
    return pair.comment_text + "\n" + pair.code_context;
  }

 private:
  PipelineConfig config_;
  Vocabulary vocabulary_;
  std::vector<double> idf_;
  std::shared_ptr<const EmbeddingTable> embeddings_;
  std::shared_ptr<std::atomic<std::size_t>> missing_ = std::make_shared<std::atomic<std::size_t>>(0);
};

/// Pairs used for fitting: the training split, or every pair of a dataset
/// that carries no split assignments at all.
inline std::vector<const CodeCommentPair*> fitting_pairs(const Dataset& corpus) {
  if (!corpus.has_splits()) {
    std::vector<const CodeCommentPair*> all;
    for (const auto& p : corpus.pairs) all.push_back(&p);
    return all;
  }
  return corpus.in_split(Split::Train);
}

/// Builds the vocabulary from comment and code text of the fitting pairs,
/// drops tokens below `min_df`, and keeps the `max_vocabulary` most frequent.
inline FeaturePipeline fit(const PipelineConfig& config, const Dataset& corpus) {
  const auto docs = fitting_pairs(corpus);
  if (docs.empty()) throw DataError("cannot fit features: empty training split");

  std::map<std::string, std::size_t> df;
  for (const auto* p : docs) {
    auto tokens = tokenize(FeaturePipeline::document_text(*p));
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    for (auto& t : tokens) ++df[std::move(t)];
  }

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [token, count] : df) {
    if (count >= std::max<std::size_t>(config.min_df, 1)) kept.emplace_back(token, count);
  }
  if (kept.size() > config.max_vocabulary) {
    std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    kept.resize(config.max_vocabulary);
    std::sort(kept.begin(), kept.end());
  }

  std::vector<std::string> tokens;
  std::vector<std::size_t> counts;
  for (auto& [t, c] : kept) {
    tokens.push_back(std::move(t));
    counts.push_back(c);
  }
  return FeaturePipeline(config, Vocabulary(std::move(tokens), std::move(counts), docs.size()));
}

inline nlohmann::json pipeline_to_json(const FeaturePipeline& p) {
  nlohmann::json j;
  j["format"] = "comment-judge-pipeline";
  j["version"] = 1;
  j["min_df"] = p.config().min_df;
  j["max_vocabulary"] = p.config().max_vocabulary;
  j["normalize"] = p.config().normalize;
  j["n_documents"] = p.vocabulary().n_documents();
  j["tokens"] = p.vocabulary().tokens();
  std::vector<std::size_t> df;
  for (std::size_t i = 0; i < p.vocabulary().size(); ++i) df.push_back(p.vocabulary().document_frequency(i));
  j["df"] = df;
  j["embedding_width"] = p.embedding_width();
  j["embedding_digest"] = p.embeddings() ? p.embeddings()->digest() : "";
  j["fingerprint"] = p.fingerprint();
  return j;
}

/// Restores a pipeline; embeddings recorded at save time must be supplied again.
inline FeaturePipeline pipeline_from_json(const nlohmann::json& j,
                                          std::shared_ptr<const EmbeddingTable> embeddings = nullptr) {
  try {
    if (j.at("format") != "comment-judge-pipeline" || j.at("version") != 1) {
      throw DataError("not a version 1 feature pipeline file");
    }
    PipelineConfig cfg;
    cfg.min_df = j.at("min_df").get<std::size_t>();
    cfg.max_vocabulary = j.at("max_vocabulary").get<std::size_t>();
    cfg.normalize = j.at("normalize").get<bool>();
    FeaturePipeline p(cfg, Vocabulary(j.at("tokens").get<std::vector<std::string>>(),
                                      j.at("df").get<std::vector<std::size_t>>(),
                                      j.at("n_documents").get<std::size_t>()));
    const auto width = j.at("embedding_width").get<std::size_t>();
    if (width > 0) {
      if (!embeddings) throw DataError("pipeline was fitted with embeddings; supply the embedding file");
      if (embeddings->width() != width || embeddings->digest() != j.at("embedding_digest").get<std::string>()) {
        throw DataError("embedding file does not match the one used for fitting");
      }
      p.attach_embeddings(std::move(embeddings));
    }
    if (p.fingerprint() != j.at("fingerprint").get<std::string>()) {
      throw DataError("pipeline file is corrupt: fingerprint does not match its contents");
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed pipeline file: ") + e.what());
  }
}

}  // namespace comment_judge
