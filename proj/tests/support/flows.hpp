#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "voxflow/cnf/flow.hpp"
#include "voxflow/cnf/positional.hpp"

namespace voxflow::testing {

/// A flow with every subnet parameter drawn at random, so no coupling layer
/// is the identity. `scale` multiplies the final-map weights. Draws are
/// uniform with unit variance, which keeps d = 1024 models cheap to build.
template <typename Real>
cnf::FlowModel<Real> random_flow(const cnf::FlowConfig& config, std::uint64_t seed, double scale = 0.3) {
  auto model = cnf::make_flow<Real>(config, seed);
  std::mt19937_64 rng(seed ^ 0x5EEDULL);
  std::uniform_real_distribution<double> g(-std::sqrt(3.0), std::sqrt(3.0));
  for (auto& layer : model.layers) {
    if (layer.is_identity()) continue;
    const double h = static_cast<double>(layer.w2.rows());
    for (auto& v : layer.b1.data()) v = static_cast<Real>(0.1 * g(rng));
    for (auto& v : layer.w2.data()) v = static_cast<Real>(scale * g(rng) / std::sqrt(h));
    for (auto& v : layer.b2.data()) v = static_cast<Real>(0.5 * scale * g(rng));
  }
  return model;
}

/// Positional conditions for `rows` cells scattered over a 16 x 16 grid.
template <typename Real>
BasicTensor<Real> random_conditions(std::size_t rows, std::size_t dims, std::mt19937_64& rng) {
  if (dims == 0) return BasicTensor<Real>(Dims{rows, 1});
  BasicTensor<Real> out(Dims{rows, dims});
  for (std::size_t i = 0; i < rows; ++i) {
    const auto e = cnf::positional_encoding(rng() % 16, rng() % 16, 16, 16, dims);
    for (std::size_t k = 0; k < dims; ++k) out.at(i, k) = static_cast<Real>(e[k]);
  }
  return out;
}

}  // namespace voxflow::testing
