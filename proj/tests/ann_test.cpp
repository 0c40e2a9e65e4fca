#include <gtest/gtest.h>

#include <cmath>

#include "comment_judge/ann.hpp"
#include "support/gradient_check.hpp"
#include "support/synthetic.hpp"

namespace cj = comment_judge;
using cj::ActivationKind;
using cj::FeatureVector;
using cj::Label;

namespace {

constexpr ActivationKind kAll[] = {ActivationKind::Identity, ActivationKind::Logistic, ActivationKind::ReLU,
                                   ActivationKind::Tanh};

double accuracy(const cj::MlpModel& m, const std::vector<cj::Example>& data) {
  std::size_t ok = 0;
  for (const auto& e : data) ok += cj::predict(m, e.x) == e.label ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(data.size());
}

}  // namespace

TEST(Activation, Values) {
  EXPECT_EQ(cj::activation(0.0, ActivationKind::Logistic), 0.5);
  EXPECT_EQ(cj::activation(-3.0, ActivationKind::ReLU), 0.0);
  EXPECT_EQ(cj::activation(2.0, ActivationKind::ReLU), 2.0);
  EXPECT_EQ(cj::activation(0.0, ActivationKind::Tanh), 0.0);
  EXPECT_EQ(cj::activation(-0.7, ActivationKind::Tanh), -cj::activation(0.7, ActivationKind::Tanh));
  EXPECT_EQ(cj::activation(-12.5, ActivationKind::Identity), -12.5);
  EXPECT_EQ(cj::activation(-1000.0, ActivationKind::Logistic), 0.0);
  EXPECT_EQ(cj::activation(1000.0, ActivationKind::Logistic), 1.0);
  EXPECT_NEAR(cj::logistic(-30.0), std::exp(-30.0) / (1.0 + std::exp(-30.0)), 1e-25);
}

TEST(Activation, Ranges) {
  cj::Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double z = cj::uniform_real(rng, -20.0, 20.0);
    const double s = cj::activation(z, ActivationKind::Logistic);
    EXPECT_GT(s, 0.0);
    EXPECT_LT(s, 1.0);
    const double t = cj::activation(z, ActivationKind::Tanh);
    EXPECT_GE(t, -1.0);
    EXPECT_LE(t, 1.0);
    EXPECT_GE(cj::activation(z, ActivationKind::ReLU), 0.0);
  }
}

TEST(Activation, Derivatives) {
  EXPECT_EQ(cj::activation_derivative(0.0, ActivationKind::Logistic), 0.25);
  EXPECT_EQ(cj::activation_derivative(0.0, ActivationKind::ReLU), 0.0);
  EXPECT_EQ(cj::activation_derivative(-1.0, ActivationKind::ReLU), 0.0);
  EXPECT_EQ(cj::activation_derivative(1.0, ActivationKind::ReLU), 1.0);
  EXPECT_EQ(cj::activation_derivative(0.0, ActivationKind::Tanh), 1.0);
  EXPECT_EQ(cj::activation_derivative(5.0, ActivationKind::Identity), 1.0);
}

TEST(Activation, ParseRoundTrip) {
  for (auto k : kAll) EXPECT_EQ(cj::parse_activation(cj::to_string(k)), k);
  EXPECT_FALSE(cj::parse_activation("softmax").has_value());
}

TEST(Forward, ZeroModelAndHandNet) {
  const std::size_t hidden[] = {4};
  const auto zero = cj::MlpModel::zeros(3, hidden, ActivationKind::Tanh);
  EXPECT_EQ(cj::forward(zero, FeatureVector::from_dense({1.0, -2.0, 3.0})), 0.5);
  EXPECT_EQ(cj::predict(zero, FeatureVector::from_dense({1.0, -2.0, 3.0})), Label::Useful);

  const std::size_t one[] = {1};
  auto m = cj::MlpModel::zeros(1, one, ActivationKind::Identity);
  m.layers[0].w(0, 0) = 2.0;
  m.layers[0].bias[0] = -1.0;
  m.layers[1].w(0, 0) = 1.0;
  const auto x = FeatureVector::from_dense({1.0});
  EXPECT_NEAR(cj::forward(m, x), 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
  EXPECT_EQ(cj::forward(m, x), cj::forward(m, x));

  // Output logit ln(0.25) gives 0.2.
  m.layers[1].bias[0] = std::log(0.25) - 1.0;
  EXPECT_NEAR(cj::forward(m, x), 0.2, 1e-12);
  EXPECT_EQ(cj::predict(m, x), Label::NotUseful);
  EXPECT_THROW(cj::forward(m, FeatureVector::from_dense({1.0, 2.0})), cj::DataError);
}

TEST(Gradients, OutputBiasAtZero) {
  const auto m = cj::MlpModel::zeros(2, std::span<const std::size_t>{}, ActivationKind::ReLU);
  const std::vector<cj::Example> batch{{FeatureVector::from_dense({0.0, 0.0}), Label::Useful}};
  const auto g = cj::gradients(m, batch);
  EXPECT_EQ(g.layers.back().bias[0], -0.5);
}

TEST(Gradients, ZeroAtAnalyticMinimum) {
  // A balanced pair of identical inputs with opposite labels: p = 0.5 minimizes the loss.
  const std::size_t hidden[] = {2};
  const auto m = cj::MlpModel::zeros(2, hidden, ActivationKind::Tanh);
  const std::vector<cj::Example> batch{{FeatureVector::from_dense({1.0, 2.0}), Label::Useful},
                                       {FeatureVector::from_dense({1.0, 2.0}), Label::NotUseful}};
  const auto g = cj::gradients(m, batch);
  for (const auto& l : g.layers) {
    for (double w : l.weights) EXPECT_NEAR(w, 0.0, 1e-15);
    for (double b : l.bias) EXPECT_NEAR(b, 0.0, 1e-15);
  }
}

TEST(Gradients, MatchFiniteDifferences) {
  for (auto kind : kAll) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      EXPECT_LE(cj::testing::gradient_check_error(kind, seed), 1e-4) << cj::to_string(kind) << " seed " << seed;
    }
  }
}

TEST(TrainMlp, SeparableBlobsReLU) {
  const auto data = cj::testing::separable_points(20, 6);
  cj::MlpTrainConfig c;
  c.epochs = 200;
  const auto m = cj::train_mlp(data, c);
  EXPECT_EQ(accuracy(m, data), 1.0);
}

TEST(TrainMlp, XorWidthEight) {
  const auto data = cj::testing::xor_points();
  cj::MlpTrainConfig c;
  c.hidden = {8};
  c.learning_rate = 0.1;
  c.epochs = 500;
  c.batch_size = 4;
  const auto m = cj::train_mlp(data, c);
  EXPECT_EQ(accuracy(m, data), 1.0);
}

TEST(TrainMlp, DeterministicAndLossDecreases) {
  const auto data = cj::testing::separable_points(40, 11);
  for (auto kind : kAll) {
    cj::MlpTrainConfig c;
    c.activation = kind;
    c.hidden = {8};
    c.epochs = 30;
    cj::MlpTrainingTrace trace;
    const auto a = cj::train_mlp(data, c, &trace);
    EXPECT_EQ(a, cj::train_mlp(data, c));
    EXPECT_LT(cj::mlp_loss(a, data), trace.loss.front()) << cj::to_string(kind);
    for (const auto& l : a.layers) {
      for (double w : l.weights) ASSERT_TRUE(std::isfinite(w));
    }
  }
}

TEST(TrainMlp, InitBoundsAndErrors) {
  cj::MlpTrainConfig c;
  c.hidden = {7};
  const auto m = cj::init_mlp(5, c);
  const double b0 = std::sqrt(6.0 / 12.0);
  for (double w : m.layers[0].weights) {
    EXPECT_LE(std::abs(w), b0);
  }
  const std::vector<cj::Example> one{{FeatureVector::from_dense({1.0}), Label::Useful}};
  EXPECT_THROW(cj::train_mlp(one, c), cj::DataError);
  c.learning_rate = 0.0;
  EXPECT_THROW(cj::train_mlp(cj::testing::xor_points(), c), cj::UsageError);
}

TEST(TrainMlp, NonFiniteLossAborts) {
  cj::MlpTrainConfig c;
  c.learning_rate = 1e200;
  c.momentum = 0.0;
  c.activation = ActivationKind::Identity;
  auto data = cj::testing::separable_points(10, 2);
  EXPECT_THROW(cj::train_mlp(data, c), cj::DataError);
}
