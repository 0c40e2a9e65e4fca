#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "comment_judge/corpus.hpp"
#include "comment_judge/error.hpp"
#include "comment_judge/feature_vector.hpp"
#include "comment_judge/random.hpp"

namespace comment_judge {

/// Step size at iteration t (1-based): 1 / (lambda * (t + t0)) with
/// t0 = 1 / (lambda * initial_rate), so the first step is about
/// `initial_rate` and later steps decay like 1/(lambda t).
/// initial_rate <= 0 selects t0 = 0.
struct LearningRateSchedule {
  double initial_rate = 0.01;

  [[nodiscard]] double offset(double lambda) const noexcept {
    return initial_rate > 0.0 ? 1.0 / (lambda * initial_rate) : 0.0;
  }
};

struct SvmTrainConfig {
  double lambda = 1e-4;
  std::size_t epochs = 100;
  std::uint64_t rng_seed = 1;
  bool balance_classes = true;
  double averaging_fraction = 0.1;
  LearningRateSchedule schedule;
};

struct LinearSvmModel {
  std::vector<double> w;
  double b = 0.0;
  double lambda = 0.0;

  [[nodiscard]] std::size_t width() const noexcept { return w.size(); }

  [[nodiscard]] double decision(const FeatureVector& x) const { return x.dot(w) + b; }

  /// Useful iff decision >= 0.
  [[nodiscard]] Label predict(const FeatureVector& x) const {
    return decision(x) >= 0.0 ? Label::Useful : Label::NotUseful;
  }

  friend bool operator==(const LinearSvmModel&, const LinearSvmModel&) = default;
};

/// Per-epoch objective of the averaged iterate, for diagnostics.
struct SvmTrainingTrace {
  std::vector<double> objective;
};

/// Geometric margin 2 / ||w||.
inline double margin(const LinearSvmModel& model) {
  double n2 = 0.0;
  for (double v : model.w) n2 += v * v;
  if (n2 == 0.0) throw DataError("margin undefined for a zero weight vector");
  return 2.0 / std::sqrt(n2);
}

/// Fraction of examples with y (w.x + b) >= 1.
inline double constraint_satisfaction(const LinearSvmModel& model, std::span<const Example> data) {
  if (data.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto& e : data) ok += sign_of(e.label) * model.decision(e.x) >= 1.0 ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(data.size());
}

namespace detail {

struct ClassStats {
  std::size_t width = 0;
  double weight_useful = 1.0;
  double weight_not_useful = 1.0;
};

inline ClassStats check_training_data(std::span<const Example> data, bool balance) {
  if (data.empty()) throw DataError("no training data");
  ClassStats s;
  s.width = data.front().x.width();
  std::size_t useful = 0;
  for (const auto& e : data) {
    if (e.x.width() != s.width) throw DataError(e.x.mismatch(s.width));
    useful += e.label == Label::Useful ? 1 : 0;
  }
  const std::size_t not_useful = data.size() - useful;
  if (useful == 0 || not_useful == 0) throw DataError("single class: training data needs both labels");
  if (balance) {
    const double n = static_cast<double>(data.size());
    s.weight_useful = n / (2.0 * static_cast<double>(useful));
    s.weight_not_useful = n / (2.0 * static_cast<double>(not_useful));
  }
  return s;
}

inline double class_weight(const ClassStats& s, Label l) noexcept {
  return l == Label::Useful ? s.weight_useful : s.weight_not_useful;
}

inline void check_config(const SvmTrainConfig& c) {
  if (!(c.lambda > 0.0)) throw UsageError("lambda must be positive");
  if (c.epochs < 1) throw UsageError("epochs must be at least 1");
  if (!(c.averaging_fraction > 0.0 && c.averaging_fraction <= 1.0)) {
    throw UsageError("averaging fraction must lie in (0, 1]");
  }
}

inline std::size_t averaging_window(const SvmTrainConfig& c, std::size_t total_steps) {
  return std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(c.averaging_fraction * static_cast<double>(total_steps))));
}

}  // namespace detail

/// lambda ||w||^2 + mean class-weighted hinge loss.
inline double svm_objective(const LinearSvmModel& model, std::span<const Example> data, bool balance_classes) {
  const auto stats = detail::check_training_data(data, balance_classes);
  double reg = 0.0;
  for (double v : model.w) reg += v * v;
  double loss = 0.0;
  for (const auto& e : data) {
    loss += detail::class_weight(stats, e.label) * std::max(0.0, 1.0 - sign_of(e.label) * model.decision(e.x));
  }
  return model.lambda * reg + loss / static_cast<double>(data.size());
}

/// Stochastic subgradient descent on lambda ||w||^2 + mean hinge loss with an
/// unregularized intercept. Examples are visited in a seeded shuffled order
/// each epoch; the returned model is the average of the last
/// `averaging_fraction` of iterates.
inline LinearSvmModel train_linear(std::span<const Example> data, const SvmTrainConfig& config,
                                   SvmTrainingTrace* trace = nullptr) {
  detail::check_config(config);
  const auto stats = detail::check_training_data(data, config.balance_classes);
  const std::size_t n = data.size();
  const std::size_t d = stats.width;
  const std::size_t total = config.epochs * n;
  const std::size_t window = detail::averaging_window(config, total);
  const double t0 = config.schedule.offset(config.lambda);

  // w = scale * v keeps the shrink step O(1).
  std::vector<double> v(d, 0.0);
  double scale = 1.0;
  double b = 0.0;
  std::vector<double> avg_w(d, 0.0);
  double avg_b = 0.0;
  std::size_t averaged = 0;
  std::vector<double> run_w(d, 0.0);  // running mean of all iterates, for the trace
  double run_b = 0.0;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(config.rng_seed);
  std::size_t t = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(std::span<std::size_t>(order), rng);
    for (std::size_t i : order) {
      ++t;
      const Example& e = data[i];
      const double y = sign_of(e.label);
      const double eta = 1.0 / (config.lambda * (static_cast<double>(t) + t0));
      const double m = y * (scale * e.x.dot(v) + b);

      const double shrink = 1.0 - 2.0 * eta * config.lambda;
      if (shrink == 0.0) {
        std::fill(v.begin(), v.end(), 0.0);
        scale = 1.0;
      } else {
        scale *= shrink;
      }
      if (m < 1.0) {
        const double step = eta * detail::class_weight(stats, e.label) * y;
        e.x.for_each([&](std::size_t k, double xv) { v[k] += step * xv / scale; });
        b += step;
      }
      if (std::abs(scale) < 1e-9) {
        for (double& vk : v) vk *= scale;
        scale = 1.0;
      }

      if (t > total - window) {
        for (std::size_t k = 0; k < d; ++k) avg_w[k] += scale * v[k];
        avg_b += b;
        ++averaged;
      }
      if (trace) {
        const double f = 1.0 / static_cast<double>(t);
        for (std::size_t k = 0; k < d; ++k) run_w[k] += (scale * v[k] - run_w[k]) * f;
        run_b += (b - run_b) * f;
      }
    }
    if (trace) {
      trace->objective.push_back(
          svm_objective(LinearSvmModel{run_w, run_b, config.lambda}, data, config.balance_classes));
    }
  }

  LinearSvmModel model;
  model.lambda = config.lambda;
  model.w.resize(d);
  for (std::size_t k = 0; k < d; ++k) model.w[k] = avg_w[k] / static_cast<double>(averaged);
  model.b = avg_b / static_cast<double>(averaged);
  for (double x : model.w) {
    if (!std::isfinite(x)) throw DataError("linear SVM training diverged (non-finite weight)");
  }
  return model;
}

struct PolyKernel {
  int degree = 3;
  double coef0 = 1.0;
  double scale = 1.0;

  friend bool operator==(const PolyKernel&, const PolyKernel&) = default;
};

inline double poly_kernel(const FeatureVector& x, const FeatureVector& z, int degree, double coef0, double scale) {
  const double base = scale * dot(x, z) + coef0;
  double r = 1.0;
  for (int k = 0; k < degree; ++k) r *= base;
  return r;
}

inline double poly_kernel(const FeatureVector& x, const FeatureVector& z, const PolyKernel& k) {
  return poly_kernel(x, z, k.degree, k.coef0, k.scale);
}

struct SupportVector {
  FeatureVector x;
  Label label;
  double alpha;

  friend bool operator==(const SupportVector&, const SupportVector&) = default;
};

struct KernelSvmModel {
  std::vector<SupportVector> support_vectors;
  PolyKernel kernel;
  double b = 0.0;
  double lambda = 0.0;

  [[nodiscard]] std::size_t width() const noexcept {
    return support_vectors.empty() ? 0 : support_vectors.front().x.width();
  }

  /// sum_i alpha_i y_i K(x_i, x) + b.
  [[nodiscard]] double decision(const FeatureVector& x) const {
    if (x.width() != width()) throw DataError(x.mismatch(width()));
    double s = b;
    for (const auto& sv : support_vectors) s += sv.alpha * sign_of(sv.label) * poly_kernel(sv.x, x, kernel);
    return s;
  }

  [[nodiscard]] Label predict(const FeatureVector& x) const {
    return decision(x) >= 0.0 ? Label::Useful : Label::NotUseful;
  }

  friend bool operator==(const KernelSvmModel&, const KernelSvmModel&) = default;
};

/// Options for the kernel trainer; an unset scale means 1 / feature width.
struct PolyKernelParams {
  int degree = 3;
  double coef0 = 1.0;
  std::optional<double> scale;
};

/// The linear trainer's update rule carried out in the dual representation:
/// the weight vector is a combination of training points, and each margin
/// violation adds to the violator's coefficient.
inline KernelSvmModel train_poly(std::span<const Example> data, const SvmTrainConfig& config,
                                 const PolyKernelParams& params = {}) {
  detail::check_config(config);
  if (params.degree < 1) throw UsageError("kernel degree must be at least 1");
  const auto stats = detail::check_training_data(data, config.balance_classes);
  const std::size_t n = data.size();
  const PolyKernel kernel{params.degree, params.coef0,
                          params.scale.value_or(1.0 / static_cast<double>(std::max<std::size_t>(stats.width, 1)))};

  constexpr std::size_t kGramLimit = 2048;
  std::vector<double> gram;
  if (n <= kGramLimit) {
    gram.resize(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) {
        gram[i * n + j] = gram[j * n + i] = poly_kernel(data[i].x, data[j].x, kernel);
      }
    }
  }
  const auto k_at = [&](std::size_t i, std::size_t j) {
    return gram.empty() ? poly_kernel(data[i].x, data[j].x, kernel) : gram[i * n + j];
  };

  const std::size_t total = config.epochs * n;
  const std::size_t window = detail::averaging_window(config, total);
  const double t0 = config.schedule.offset(config.lambda);

  // Dual coefficients: w = scale * sum_j coef_j phi(x_j), with coef_j y_j >= 0.
  std::vector<double> coef(n, 0.0);
  std::vector<std::size_t> active;
  std::vector<char> is_active(n, 0);
  double scale = 1.0;
  double b = 0.0;
  std::vector<double> avg(n, 0.0);
  double avg_b = 0.0;
  std::size_t averaged = 0;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(config.rng_seed);
  std::size_t t = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(std::span<std::size_t>(order), rng);
    for (std::size_t i : order) {
      ++t;
      const double y = sign_of(data[i].label);
      const double eta = 1.0 / (config.lambda * (static_cast<double>(t) + t0));
      double f = 0.0;
      for (std::size_t j : active) f += coef[j] * k_at(j, i);
      const double m = y * (scale * f + b);

      const double shrink = 1.0 - 2.0 * eta * config.lambda;
      if (shrink == 0.0) {
        for (std::size_t j : active) coef[j] = 0.0;
        scale = 1.0;
      } else {
        scale *= shrink;
      }
      if (m < 1.0) {
        const double step = eta * detail::class_weight(stats, data[i].label) * y;
        coef[i] += step / scale;
        b += step;
        if (!is_active[i]) {
          is_active[i] = 1;
          active.push_back(i);
        }
      }
      if (std::abs(scale) < 1e-9) {
        for (std::size_t j : active) coef[j] *= scale;
        scale = 1.0;
      }
      if (t > total - window) {
        for (std::size_t j : active) avg[j] += scale * coef[j];
        avg_b += b;
        ++averaged;
      }
    }
  }

  KernelSvmModel model;
  model.kernel = kernel;
  model.lambda = config.lambda;
  model.b = avg_b / static_cast<double>(averaged);
  std::sort(active.begin(), active.end());
  for (std::size_t j : active) {
    const double beta = avg[j] / static_cast<double>(averaged);
    const double alpha = beta * sign_of(data[j].label);
    if (!std::isfinite(alpha)) throw DataError("kernel SVM training diverged (non-finite coefficient)");
    if (alpha > 0.0) model.support_vectors.push_back({data[j].x, data[j].label, alpha});
  }
  if (model.support_vectors.empty()) throw DataError("kernel SVM training produced no support vectors");
  return model;
}

}  // namespace comment_judge
