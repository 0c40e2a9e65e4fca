#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "comment_judge/corpus.hpp"
#include "comment_judge/error.hpp"

namespace comment_judge {

/// A sparse block of width `sparse_width` followed by a dense block.
/// Coordinates of the dense block start at `sparse_width`.
class FeatureVector {
 public:
  struct Entry {
    std::uint32_t index;
    double value;
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  FeatureVector() = default;

  /// Sparse indices must be strictly increasing, below `sparse_width`, and non-zero valued.
  FeatureVector(std::size_t sparse_width, std::vector<Entry> sparse, std::vector<double> dense)
      : sparse_width_(sparse_width), sparse_(std::move(sparse)), dense_(std::move(dense)) {
    for (std::size_t i = 0; i < sparse_.size(); ++i) {
      if (sparse_[i].index >= sparse_width_) throw DataError("sparse index out of range");
      if (i > 0 && sparse_[i].index <= sparse_[i - 1].index) {
        throw DataError("sparse indices must be strictly increasing");
      }
      if (sparse_[i].value == 0.0) throw DataError("explicit zero in sparse block");
    }
  }

  static FeatureVector from_dense(std::vector<double> values) { return FeatureVector(0, {}, std::move(values)); }

  [[nodiscard]] std::size_t width() const noexcept { return sparse_width_ + dense_.size(); }
  [[nodiscard]] std::size_t sparse_width() const noexcept { return sparse_width_; }
  [[nodiscard]] std::span<const Entry> sparse() const noexcept { return sparse_; }
  [[nodiscard]] std::span<const double> dense() const noexcept { return dense_; }

  /// Calls f(index, value) for every stored coordinate in increasing index order.
  template <typename F>
  void for_each(F&& f) const {
    for (const auto& e : sparse_) f(static_cast<std::size_t>(e.index), e.value);
    for (std::size_t k = 0; k < dense_.size(); ++k) f(sparse_width_ + k, dense_[k]);
  }

  [[nodiscard]] double dot(std::span<const double> weights) const {
    if (weights.size() != width()) throw DataError(mismatch(weights.size()));
    double s = 0.0;
    for_each([&](std::size_t i, double v) { s += weights[i] * v; });
    return s;
  }

  [[nodiscard]] double squared_norm() const noexcept {
    double s = 0.0;
    for_each([&](std::size_t, double v) { s += v * v; });
    return s;
  }

  [[nodiscard]] std::vector<double> to_dense() const {
    std::vector<double> out(width(), 0.0);
    for_each([&](std::size_t i, double v) { out[i] = v; });
    return out;
  }

  friend double dot(const FeatureVector& a, const FeatureVector& b) {
    if (a.width() != b.width() || a.sparse_width_ != b.sparse_width_) {
      throw DataError("feature width mismatch: " + std::to_string(a.width()) + " vs " + std::to_string(b.width()));
    }
    double s = 0.0;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.sparse_.size() && j < b.sparse_.size()) {
      if (a.sparse_[i].index < b.sparse_[j].index) {
        ++i;
      } else if (a.sparse_[i].index > b.sparse_[j].index) {
        ++j;
      } else {
        s += a.sparse_[i++].value * b.sparse_[j++].value;
      }
    }
    for (std::size_t k = 0; k < a.dense_.size(); ++k) s += a.dense_[k] * b.dense_[k];
    return s;
  }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

  [[nodiscard]] std::string mismatch(std::size_t expected) const {
    return "dimension mismatch: model expects " + std::to_string(expected) + ", vector has " +
           std::to_string(width());
  }

 private:
  std::size_t sparse_width_ = 0;
  std::vector<Entry> sparse_;
  std::vector<double> dense_;
};

struct Example {
  FeatureVector x;
  Label label;
};

}  // namespace comment_judge
