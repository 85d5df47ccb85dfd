#include <gtest/gtest.h>

#include <random>

#include "support/random.hpp"
#include "voxflow/errors.hpp"
#include "voxflow/numerics/tensor.hpp"

namespace voxflow {
namespace {

TEST(AffineForward, IdentityWeightZeroBias) {
  const auto out = affine_forward(Tensor::matrix({{1, 2}}), Tensor::matrix({{1, 0}, {0, 1}}),
                                  Tensor::vector({0, 0}));
  EXPECT_EQ(out, Tensor::matrix({{1, 2}}));
}

TEST(AffineForward, ZeroWeightReturnsBias) {
  const auto out = affine_forward(Tensor::matrix({{-7, 11}}), Tensor::matrix({{0, 0}, {0, 0}}),
                                  Tensor::vector({3, 4}));
  EXPECT_EQ(out, Tensor::matrix({{3, 4}}));
}

TEST(AffineForward, HandMultiply) {
  const auto out = affine_forward(Tensor::matrix({{1, 1}}), Tensor::matrix({{1, 2}, {3, 4}}),
                                  Tensor::vector({0, 0}));
  EXPECT_EQ(out, Tensor::matrix({{4, 6}}));
}

TEST(AffineForward, RejectsIncompatibleShapes) {
  EXPECT_THROW(affine_forward(Tensor::matrix({{1, 2, 3}}), Tensor::matrix({{1, 2}, {3, 4}}),
                              Tensor::vector({0, 0})),
               DimensionError);
  EXPECT_THROW(affine_forward(Tensor::matrix({{1, 2}}), Tensor::matrix({{1, 2}, {3, 4}}),
                              Tensor::vector({0, 0, 0})),
               DimensionError);
}

TEST(AffineForward, MatchesNaiveTripleLoop) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng() % 9, k = 1 + rng() % 7, m = 1 + rng() % 5;
    const auto x = testing::normal_tensor<double>({n, k}, rng);
    const auto w = testing::normal_tensor<double>({k, m}, rng);
    const auto b = testing::normal_tensor<double>({m}, rng);
    const auto out = affine_forward(x, w, b);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        double ref = b[j];
        for (std::size_t kk = 0; kk < k; ++kk) ref += x.at(i, kk) * w.at(kk, j);
        EXPECT_NEAR(out.at(i, j), ref, 1e-12);
      }
    }
  }
}

TEST(Kernels, TransposedProductsMatchExplicitTranspose) {
  std::mt19937_64 rng(5);
  const auto a = testing::normal_tensor<double>({600, 3}, rng);
  const auto b = testing::normal_tensor<double>({600, 4}, rng);
  const auto tn = kernels::matmul_tn(a, b);
  ASSERT_EQ(tn.dims(), (Dims{3, 4}));
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      double ref = 0;
      for (std::size_t r = 0; r < 600; ++r) ref += a.at(r, i) * b.at(r, j);
      EXPECT_NEAR(tn.at(i, j), ref, 1e-10);
    }
  }
  const auto c = testing::normal_tensor<double>({5, 4}, rng);
  const auto nt = kernels::matmul_nt(b, c);
  ASSERT_EQ(nt.dims(), (Dims{600, 5}));
  for (std::size_t i = 0; i < 600; i += 37) {
    for (std::size_t j = 0; j < 5; ++j) {
      double ref = 0;
      for (std::size_t k = 0; k < 4; ++k) ref += b.at(i, k) * c.at(j, k);
      EXPECT_NEAR(nt.at(i, j), ref, 1e-12);
    }
  }
}

TEST(Tensor, RejectsEmptyOrZeroDims) {
  EXPECT_THROW(Tensor(Dims{}), DimensionError);
  EXPECT_THROW(Tensor(Dims{2, 0}), DimensionError);
  EXPECT_THROW(Tensor(Dims{2, 2}, std::vector<float>(3)), DimensionError);
}

TEST(Tensor, SliceAndConcatAreInverse) {
  std::mt19937_64 rng(1);
  const auto x = testing::normal_tensor({4, 5}, rng);
  const auto joined = kernels::concat_cols(kernels::slice_cols(x, 0, 2), kernels::slice_cols(x, 2, 3));
  EXPECT_EQ(joined, x);
}

}  // namespace
}  // namespace voxflow
