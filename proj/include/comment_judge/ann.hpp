#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "comment_judge/corpus.hpp"
#include "comment_judge/error.hpp"
#include "comment_judge/feature_vector.hpp"
#include "comment_judge/random.hpp"

namespace comment_judge {

enum class ActivationKind { Identity, Logistic, ReLU, Tanh };

inline constexpr std::string_view to_string(ActivationKind k) noexcept {
  switch (k) {
    case ActivationKind::Identity: return "identity";
    case ActivationKind::Logistic: return "logistic";
    case ActivationKind::ReLU: return "relu";
    case ActivationKind::Tanh: return "tanh";
  }
  return "relu";
}

inline std::optional<ActivationKind> parse_activation(std::string_view s) noexcept {
  if (s == "identity") return ActivationKind::Identity;
  if (s == "logistic") return ActivationKind::Logistic;
  if (s == "relu") return ActivationKind::ReLU;
  if (s == "tanh") return ActivationKind::Tanh;
  return std::nullopt;
}

// Branching on the sign keeps exp() from overflowing.
inline double logistic(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double activation(double z, ActivationKind kind) noexcept {
  switch (kind) {
    case ActivationKind::Identity: return z;
    case ActivationKind::Logistic: return logistic(z);
    case ActivationKind::ReLU: return z > 0.0 ? z : 0.0;
    case ActivationKind::Tanh: return std::tanh(z);
  }
  return z;
}

/// relu'(0) is taken as 0.
inline double activation_derivative(double z, ActivationKind kind) noexcept {
  switch (kind) {
    case ActivationKind::Identity: return 1.0;
    case ActivationKind::Logistic: {
      const double s = logistic(z);
      return s * (1.0 - s);
    }
    case ActivationKind::ReLU: return z > 0.0 ? 1.0 : 0.0;
    case ActivationKind::Tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
  }
  return 1.0;
}

/// Fully connected layer; `weights` is row-major (outputs x inputs).
struct DenseLayer {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out) : inputs(in), outputs(out), weights(in * out, 0.0), bias(out, 0.0) {}

  double& w(std::size_t out, std::size_t in) { return weights[out * inputs + in]; }
  [[nodiscard]] double w(std::size_t out, std::size_t in) const { return weights[out * inputs + in]; }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Hidden layers share one activation; the single output unit is logistic.
struct MlpModel {
  std::vector<DenseLayer> layers;
  ActivationKind hidden_activation = ActivationKind::ReLU;

  /// All-zero parameters with the given shape.
  static MlpModel zeros(std::size_t inputs, std::span<const std::size_t> hidden, ActivationKind kind) {
    MlpModel m;
    m.hidden_activation = kind;
    std::size_t in = inputs;
    for (std::size_t h : hidden) {
      if (h < 1) throw UsageError("hidden layer widths must be at least 1");
      m.layers.emplace_back(in, h);
      in = h;
    }
    m.layers.emplace_back(in, 1);
    return m;
  }

  [[nodiscard]] std::size_t input_width() const noexcept { return layers.empty() ? 0 : layers.front().inputs; }

  /// Throws unless adjacent layer shapes chain and the output is a single unit.
  void check_shape() const {
    if (layers.empty()) throw DataError("MLP has no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& L = layers[l];
      if (L.weights.size() != L.inputs * L.outputs || L.bias.size() != L.outputs) {
        throw DataError("MLP layer " + std::to_string(l) + " has inconsistent parameter sizes");
      }
      if (l > 0 && L.inputs != layers[l - 1].outputs) throw DataError("MLP layer shapes do not chain");
    }
    if (layers.back().outputs != 1) throw DataError("MLP output width must be 1");
  }

  friend bool operator==(const MlpModel&, const MlpModel&) = default;
};

namespace detail {

// Pre-activations (z) and activations (a) of every layer for one input.
struct ForwardPass {
  std::vector<std::vector<double>> z;
  std::vector<std::vector<double>> a;
};

inline ForwardPass run_forward(const MlpModel& model, const FeatureVector& x) {
  if (x.width() != model.input_width()) throw DataError(x.mismatch(model.input_width()));
  ForwardPass pass;
  const std::size_t L = model.layers.size();
  pass.z.resize(L);
  pass.a.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    const auto& layer = model.layers[l];
    auto& z = pass.z[l];
    z = layer.bias;
    if (l == 0) {
      x.for_each([&](std::size_t k, double v) {
        if (v == 0.0) return;
        for (std::size_t o = 0; o < layer.outputs; ++o) z[o] += layer.w(o, k) * v;
      });
    } else {
      const auto& in = pass.a[l - 1];
      for (std::size_t o = 0; o < layer.outputs; ++o) {
        const double* row = &layer.weights[o * layer.inputs];
        double s = 0.0;
        for (std::size_t k = 0; k < layer.inputs; ++k) s += row[k] * in[k];
        z[o] += s;
      }
    }
    auto& a = pass.a[l];
    a.resize(z.size());
    const bool output = l + 1 == L;
    for (std::size_t o = 0; o < z.size(); ++o) {
      a[o] = output ? logistic(z[o]) : activation(z[o], model.hidden_activation);
    }
  }
  return pass;
}

inline double target_of(Label l) noexcept { return l == Label::Useful ? 1.0 : 0.0; }

// Cross-entropy of a logistic output computed from its logit: softplus(z) - y z.
inline double cross_entropy_from_logit(double z, double y) noexcept {
  const double softplus = (z > 0.0 ? z : 0.0) + std::log1p(std::exp(-std::abs(z)));
  return softplus - y * z;
}

}  // namespace detail

/// Probability that x is Useful.
inline double forward(const MlpModel& model, const FeatureVector& x) {
  return detail::run_forward(model, x).a.back()[0];
}

/// Useful iff forward >= 0.5.
inline Label predict(const MlpModel& model, const FeatureVector& x) {
  return forward(model, x) >= 0.5 ? Label::Useful : Label::NotUseful;
}

/// Mean binary cross-entropy over `batch`.
inline double mlp_loss(const MlpModel& model, std::span<const Example> batch) {
  if (batch.empty()) throw DataError("empty batch");
  double s = 0.0;
  for (const auto& e : batch) {
    s += detail::cross_entropy_from_logit(detail::run_forward(model, e.x).z.back()[0], detail::target_of(e.label));
  }
  return s / static_cast<double>(batch.size());
}

/// Gradient of the mean cross-entropy; same shape as the model's layers.
struct MlpGradients {
  std::vector<DenseLayer> layers;
};

inline MlpGradients gradients(const MlpModel& model, std::span<const Example> batch) {
  if (batch.empty()) throw DataError("empty batch");
  MlpGradients g;
  for (const auto& layer : model.layers) g.layers.emplace_back(layer.inputs, layer.outputs);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  const std::size_t L = model.layers.size();

  for (const auto& e : batch) {
    const auto pass = detail::run_forward(model, e.x);
    std::vector<double> delta{(pass.a.back()[0] - detail::target_of(e.label)) * inv_n};
    for (std::size_t l = L; l-- > 0;) {
      const auto& layer = model.layers[l];
      auto& gl = g.layers[l];
      for (std::size_t o = 0; o < layer.outputs; ++o) gl.bias[o] += delta[o];
      if (l == 0) {
        e.x.for_each([&](std::size_t k, double v) {
          if (v == 0.0) return;
          for (std::size_t o = 0; o < layer.outputs; ++o) gl.w(o, k) += delta[o] * v;
        });
        break;
      }
      const auto& in = pass.a[l - 1];
      std::vector<double> next(layer.inputs, 0.0);
      for (std::size_t o = 0; o < layer.outputs; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        double* grow = &gl.weights[o * layer.inputs];
        const double* wrow = &layer.weights[o * layer.inputs];
        for (std::size_t k = 0; k < layer.inputs; ++k) {
          grow[k] += d * in[k];
          next[k] += wrow[k] * d;
        }
      }
      const auto& zprev = pass.z[l - 1];
      for (std::size_t k = 0; k < next.size(); ++k) {
        next[k] *= activation_derivative(zprev[k], model.hidden_activation);
      }
      delta = std::move(next);
    }
  }
  return g;
}

struct MlpTrainConfig {
  std::vector<std::size_t> hidden{64};
  ActivationKind activation = ActivationKind::ReLU;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  std::uint64_t rng_seed = 1;
};

/// Scaled-uniform initialization: weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
inline MlpModel init_mlp(std::size_t inputs, const MlpTrainConfig& config) {
  MlpModel m = MlpModel::zeros(inputs, config.hidden, config.activation);
  Rng rng(config.rng_seed);
  for (auto& layer : m.layers) {
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.inputs + layer.outputs));
    for (double& w : layer.weights) w = uniform_real(rng, -bound, bound);
  }
  return m;
}

struct MlpTrainingTrace {
  std::vector<double> loss;  // loss[0] is the initial loss, then one entry per epoch
  std::size_t best_epoch = 0;
};

/// Mini-batch gradient descent with momentum on mean cross-entropy. Returns
/// the parameters with the lowest full training loss among the initial state
/// and every epoch end, so the result never scores worse than initialization.
inline MlpModel train_mlp(std::span<const Example> data, const MlpTrainConfig& config,
                          MlpTrainingTrace* trace = nullptr) {
  if (!(config.learning_rate > 0.0)) throw UsageError("learning rate must be positive");
  if (config.epochs < 1) throw UsageError("epochs must be at least 1");
  if (config.batch_size < 1) throw UsageError("batch size must be at least 1");
  if (data.empty()) throw DataError("no training data");
  const std::size_t width = data.front().x.width();
  std::size_t useful = 0;
  for (const auto& e : data) {
    if (e.x.width() != width) throw DataError(e.x.mismatch(width));
    useful += e.label == Label::Useful ? 1 : 0;
  }
  if (useful == 0 || useful == data.size()) throw DataError("single class: training data needs both labels");

  MlpModel model = init_mlp(width, config);
  std::vector<DenseLayer> velocity;
  for (const auto& layer : model.layers) velocity.emplace_back(layer.inputs, layer.outputs);

  MlpTrainingTrace local;
  MlpTrainingTrace& tr = trace ? *trace : local;
  tr.loss.assign(1, mlp_loss(model, data));
  tr.best_epoch = 0;
  MlpModel best = model;
  double best_loss = tr.loss.front();

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(config.rng_seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Example> batch;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle(std::span<std::size_t>(order), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(data[order[k]]);
      const auto g = gradients(model, batch);
      for (std::size_t l = 0; l < model.layers.size(); ++l) {
        auto& layer = model.layers[l];
        auto& vel = velocity[l];
        for (std::size_t k = 0; k < layer.weights.size(); ++k) {
          vel.weights[k] = config.momentum * vel.weights[k] - config.learning_rate * g.layers[l].weights[k];
          layer.weights[k] += vel.weights[k];
        }
        for (std::size_t k = 0; k < layer.bias.size(); ++k) {
          vel.bias[k] = config.momentum * vel.bias[k] - config.learning_rate * g.layers[l].bias[k];
          layer.bias[k] += vel.bias[k];
        }
      }
    }
    const double loss = mlp_loss(model, data);
    if (!std::isfinite(loss)) {
      throw DataError("MLP training aborted: non-finite loss at epoch " + std::to_string(epoch) +
                      " (try a smaller learning rate)");
    }
    tr.loss.push_back(loss);
    if (loss < best_loss) {
      best_loss = loss;
      best = model;
      tr.best_epoch = epoch;
    }
  }
  return best;
}

}  // namespace comment_judge
