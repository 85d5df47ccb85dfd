#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "support/random.hpp"
#include "voxflow/errors.hpp"
#include "voxflow/numerics/adam.hpp"

namespace voxflow {
namespace {

using T = BasicTensor<double>;

TEST(Adam, ZeroGradientLeavesParametersAndCountsStep) {
  T p = T::vector({1.5, -2.0});
  std::vector<T*> params{&p};
  auto state = make_adam_state<double>(params);
  const std::vector<T> grads{T(Dims{2})};
  adam_step<double>(state, params, grads);
  EXPECT_EQ(p, T::vector({1.5, -2.0}));
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  T p = T::scalar(0.0);
  std::vector<T*> params{&p};
  auto state = make_adam_state<double>(params);
  const std::vector<T> grads{T::scalar(1.0)};
  adam_step<double>(state, params, grads);
  EXPECT_LT(std::abs(p[0] + 1e-3), 1e-6);
}

TEST(Adam, QuadraticIncreasesTowardMinimum) {
  T p = T::scalar(0.0);
  std::vector<T*> params{&p};
  auto state = make_adam_state<double>(params);
  // Scalar simulation of the same recurrence.
  double m = 0, v = 0, theta = 0;
  for (int t = 1; t <= 10; ++t) {
    const double before = p[0];
    const std::vector<T> grads{T::scalar(2.0 * (p[0] - 2.0))};
    adam_step<double>(state, params, grads);
    EXPECT_GT(p[0], before);
    EXPECT_LT(p[0], 2.0);

    const double g = 2.0 * (theta - 2.0);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    theta -= 1e-3 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    EXPECT_NEAR(p[0], theta, 1e-12);
  }
}

TEST(AdamProperty, ZeroGradientsAreANoOpForManySteps) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    T a = testing::normal_tensor<double>({3, 2}, rng), b = testing::normal_tensor<double>({4}, rng);
    const T a0 = a, b0 = b;
    std::vector<T*> params{&a, &b};
    auto state = make_adam_state<double>(params);
    const std::vector<T> grads{T(Dims{3, 2}), T(Dims{4})};
    const int steps = 1 + static_cast<int>(rng() % 50);
    for (int s = 0; s < steps; ++s) adam_step<double>(state, params, grads);
    EXPECT_EQ(a, a0);
    EXPECT_EQ(b, b0);
  }
}

TEST(Adam, NonFiniteGradientIsANumericError) {
  T p = T::vector({1.0, 2.0});
  std::vector<T*> params{&p};
  auto state = make_adam_state<double>(params);
  const std::vector<T> grads{T::vector({0.5, std::numeric_limits<double>::quiet_NaN()})};
  EXPECT_THROW(adam_step<double>(state, params, grads), NumericError);
  EXPECT_EQ(p, T::vector({1.0, 2.0}));
  EXPECT_EQ(state.step, 0u);
}

TEST(Adam, ShapeMismatchIsRejected) {
  T p = T::vector({1.0, 2.0});
  std::vector<T*> params{&p};
  auto state = make_adam_state<double>(params);
  const std::vector<T> grads{T::vector({1.0})};
  EXPECT_THROW(adam_step<double>(state, params, grads), DimensionError);
}

}  // namespace
}  // namespace voxflow
