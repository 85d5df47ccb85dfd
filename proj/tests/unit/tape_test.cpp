#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "support/random.hpp"
#include "voxflow/errors.hpp"
#include "voxflow/numerics/gradcheck.hpp"
#include "voxflow/numerics/tape.hpp"

namespace voxflow {
namespace {

using T = BasicTensor<double>;

TEST(Backprop, SquareOfParameter) {
  DiffTape<double> tape;
  const auto theta = tape.parameter(T::scalar(3.0));
  const auto grads = backprop(tape, tape.sum(tape.square(theta)));
  ASSERT_EQ(grads.size(), 1u);
  EXPECT_DOUBLE_EQ(grads[0][0], 6.0);
}

TEST(Backprop, InactiveRelu) {
  DiffTape<double> tape;
  const auto theta = tape.parameter(T::scalar(-1.0));
  const auto grads = backprop(tape, tape.sum(tape.relu(theta)));
  EXPECT_EQ(grads[0][0], 0.0);
}

TEST(Backprop, NonScalarLossIsRejected) {
  DiffTape<double> tape;
  const auto theta = tape.parameter(T::vector({1.0, 2.0}));
  EXPECT_THROW(tape.backward(tape.square(theta)), ContractError);
}

TEST(Backprop, UnusedParameterGetsZeroGradient) {
  DiffTape<double> tape;
  const auto used = tape.parameter(T::scalar(2.0));
  tape.parameter(T::vector({5.0, 6.0}));
  const auto grads = backprop(tape, tape.sum(tape.square(used)));
  ASSERT_EQ(grads.size(), 2u);
  EXPECT_EQ(grads[1], T(Dims{2}));
}

// A coupling-style subnet over parameters (w1, b1, w2, b2):
//   h = relu(x w1 + b1); o = h w2 + b2; s = c tanh(o_s / c); t = o_t
//   loss = sum((x_a * exp(s) + t)^2) / n + sum(s) / n
struct Subnet {
  std::size_t n, d_in, hidden, d_out;
  T x, xa;
  std::vector<T> params;   // w1, b1, w2, b2
};

Subnet random_subnet(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Subnet s;
  s.n = 2 + rng() % 4;
  s.d_in = 1 + rng() % 4;
  s.hidden = 2 + rng() % 5;
  s.d_out = 1 + rng() % 3;
  s.x = testing::normal_tensor<double>({s.n, s.d_in}, rng);
  s.xa = testing::normal_tensor<double>({s.n, s.d_out}, rng);
  s.params = {testing::normal_tensor<double>({s.d_in, s.hidden}, rng, 0.8),
              testing::normal_tensor<double>({s.hidden}, rng, 0.5),
              testing::normal_tensor<double>({s.hidden, 2 * s.d_out}, rng, 0.5),
              testing::normal_tensor<double>({2 * s.d_out}, rng, 0.3)};
  // Keep every ReLU pre-activation away from its kink so the loss is smooth
  // within the finite-difference stencil.
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const auto pre = affine_forward(s.x, s.params[0], s.params[1]);
    bool smooth = true;
    for (double v : pre.data()) smooth = smooth && std::abs(v) > 0.05;
    if (smooth) break;
    s.params[1] = testing::normal_tensor<double>({s.hidden}, rng, 0.5);
  }
  return s;
}

double clamp_constant() { return 1.9; }

NodeId record_subnet(DiffTape<double>& tape, const Subnet& s, const std::vector<NodeId>& p) {
  const auto x = tape.constant(s.x);
  const auto xa = tape.constant(s.xa);
  const auto h = tape.relu(tape.affine(x, p[0], p[1]));
  const auto o = tape.affine(h, p[2], p[3]);
  const double c = clamp_constant();
  const auto sv = tape.scale(tape.tanh(tape.scale(tape.slice_cols(o, 0, s.d_out), 1.0 / c)), c);
  const auto t = tape.slice_cols(o, s.d_out, s.d_out);
  const auto y = tape.add(tape.mul(xa, tape.exp(sv)), t);
  const double inv_n = 1.0 / static_cast<double>(s.n);
  return tape.add(tape.scale(tape.sum(tape.square(y)), inv_n), tape.scale(tape.sum(sv), inv_n));
}

// Plain double evaluation of the same function, independent of the tape.
double subnet_loss(const Subnet& s, const std::vector<T>& p) {
  const double c = clamp_constant();
  double loss = 0.0;
  for (std::size_t i = 0; i < s.n; ++i) {
    std::vector<double> h(s.hidden);
    for (std::size_t j = 0; j < s.hidden; ++j) {
      double v = p[1][j];
      for (std::size_t k = 0; k < s.d_in; ++k) v += s.x.at(i, k) * p[0].at(k, j);
      h[j] = v > 0 ? v : 0;
    }
    for (std::size_t j = 0; j < s.d_out; ++j) {
      double os = p[3][j], ot = p[3][s.d_out + j];
      for (std::size_t k = 0; k < s.hidden; ++k) {
        os += h[k] * p[2].at(k, j);
        ot += h[k] * p[2].at(k, s.d_out + j);
      }
      const double sv = c * std::tanh(os / c);
      const double y = s.xa.at(i, j) * std::exp(sv) + ot;
      loss += (y * y + sv) / static_cast<double>(s.n);
    }
  }
  return loss;
}

double subnet_gradient_error(std::uint64_t seed, double h) {
  const Subnet s = random_subnet(seed);
  DiffTape<double> tape;
  std::vector<NodeId> ids;
  for (const auto& p : s.params) ids.push_back(tape.parameter(p));
  const auto loss = record_subnet(tape, s, ids);
  EXPECT_NEAR(tape.value(loss)[0], subnet_loss(s, s.params), 1e-12);
  const auto grads = backprop(tape, loss);

  std::vector<double> point, analytic;
  for (std::size_t i = 0; i < s.params.size(); ++i) {
    point.insert(point.end(), s.params[i].data().begin(), s.params[i].data().end());
    analytic.insert(analytic.end(), grads[i].data().begin(), grads[i].data().end());
  }
  auto value = [&](std::span<const double> flat) {
    std::vector<T> p = s.params;
    std::size_t off = 0;
    for (auto& t : p) {
      std::copy_n(flat.begin() + off, t.size(), t.data().begin());
      off += t.size();
    }
    return subnet_loss(s, p);
  };
  return finite_difference_check(value, point, analytic, h);
}

TEST(Backprop, RandomSubnetMatchesFiniteDifferences) {
  EXPECT_LE(subnet_gradient_error(11, 1e-3), 1e-3);
}

TEST(BackpropProperty, CouplingSubnetsHundredSeeds) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    EXPECT_LE(subnet_gradient_error(1000 + seed, 1e-3), 1e-3) << "seed " << seed;
  }
}

TEST(TapeProperty, ReplayIsBitIdentical) {
  const Subnet s = random_subnet(5);
  DiffTape<double> tape;
  std::vector<NodeId> ids;
  for (const auto& p : s.params) ids.push_back(tape.parameter(p));
  const auto loss = record_subnet(tape, s, ids);
  const double first = tape.value(loss)[0];

  std::mt19937_64 rng(9);
  const auto perturbed = testing::normal_tensor<double>(s.params[0].dims(), rng);
  tape.set_leaf(ids[0], perturbed);
  tape.replay();
  const double moved = tape.value(loss)[0];
  EXPECT_NE(moved, first);

  tape.set_leaf(ids[0], s.params[0]);
  tape.replay();
  EXPECT_EQ(tape.value(loss)[0], first);

  DiffTape<double> fresh;
  std::vector<NodeId> fresh_ids;
  for (const auto& p : s.params) fresh_ids.push_back(fresh.parameter(p));
  const auto fresh_loss = record_subnet(fresh, s, fresh_ids);
  EXPECT_EQ(fresh.value(fresh_loss)[0], first);
  EXPECT_EQ(backprop(fresh, fresh_loss), backprop(tape, loss));
}

TEST(Backprop, GatherScattersIntoSourceRows) {
  DiffTape<double> tape;
  const auto v = tape.parameter(T::vector({1.0, 2.0, 3.0}));
  const auto g = tape.gather(v, {2, 0, 2});
  const auto grads = backprop(tape, tape.sum(tape.square(g)));
  EXPECT_EQ(grads[0], T::vector({2.0, 0.0, 12.0}));
}

TEST(Backprop, AbsSubgradientAtZeroIsZero) {
  DiffTape<double> tape;
  const auto v = tape.parameter(T::vector({-2.0, 0.0, 3.0}));
  const auto grads = backprop(tape, tape.sum(tape.abs(v)));
  EXPECT_EQ(grads[0], T::vector({-1.0, 0.0, 1.0}));
}

TEST(FiniteDifferenceCheck, Quadratic) {
  const std::vector<double> point{1.0}, analytic{2.0};
  auto f = [](std::span<const double> x) { return x[0] * x[0]; };
  EXPECT_LT(finite_difference_check(f, point, analytic, 1e-4), 1e-6);
}

TEST(FiniteDifferenceCheck, Sine) {
  const std::vector<double> point{0.5}, analytic{std::cos(0.5)};
  auto f = [](std::span<const double> x) { return std::sin(x[0]); };
  EXPECT_LT(finite_difference_check(f, point, analytic, 1e-4), 1e-6);
}

TEST(FiniteDifferenceCheck, Constant) {
  const std::vector<double> point{0.3, -2.0}, analytic{0.0, 0.0};
  auto f = [](std::span<const double>) { return 4.0; };
  EXPECT_EQ(finite_difference_check(f, point, analytic, 1e-4), 0.0);
}

TEST(FiniteDifferenceCheck, FlagsWrongGradient) {
  const std::vector<double> point{1.0}, analytic{3.0};
  auto f = [](std::span<const double> x) { return x[0] * x[0]; };
  EXPECT_GT(finite_difference_check(f, point, analytic, 1e-4), 0.3);
}

}  // namespace
}  // namespace voxflow
