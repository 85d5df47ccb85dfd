#pragma once

#include <algorithm>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "support/flows.hpp"
#include "support/gradcheck.hpp"
#include "support/random.hpp"
#include "voxflow/numerics/gradcheck.hpp"
#include "voxflow/objective/objective.hpp"

namespace voxflow::testing {

inline objective::Batch<double> random_batch(std::size_t n, std::size_t m, std::size_t d, std::size_t p,
                                            std::mt19937_64& rng) {
  objective::Batch<double> b;
  b.normal = normal_tensor<double>({n, d}, rng);
  b.normal_cond = random_conditions<double>(n, p, rng);
  b.anomalous = objective::synthesize_anomalies(normal_tensor<double>({m, d}, rng), 0.5, rng());
  b.anomalous_cond = random_conditions<double>(m, p, rng);
  return b;
}

inline cnf::FlowConfig gradient_flow_config() {
  cnf::FlowConfig c;
  c.dim = 4;
  c.cond_dim = 8;
  c.layers = 4;
  c.hidden = 6;
  return c;
}

inline objective::SppConfig spp_config(objective::SppVariant v) {
  objective::SppConfig c;
  c.variant = v;
  return c;
}

struct GradientCase {
  double error = 0.0;
  bool smooth = false;
};

/// Finite-difference check of total_loss_gradient on a random double flow
/// and batch; `smooth` is false when a kink lies within the step.
inline GradientCase gradient_case(objective::SppVariant v, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto model = random_flow<double>(gradient_flow_config(), seed, 0.5);
  const auto batch = random_batch(6, 6, 4, 8, rng);
  const auto cfg = spp_config(v);
  const auto lg = objective::total_loss_gradient(model, batch, cfg, seed);
  const double boundary = lg.parts.boundary;
  std::vector<double> point, analytic;
  for (std::size_t i = 0; i < lg.grads.size(); ++i) {
    const auto* p = model.parameters()[i];
    point.insert(point.end(), p->data().begin(), p->data().end());
    analytic.insert(analytic.end(), lg.grads[i].data().begin(), lg.grads[i].data().end());
  }
  auto value = [&](std::span<const double> flat) {
    auto m = model;
    std::size_t off = 0;
    for (auto* p : m.parameters()) {
      std::copy_n(flat.begin() + off, p->size(), p->data().begin());
      off += p->size();
    }
    const bool frozen = v == objective::SppVariant::kBgSpp;
    return objective::total_loss(m, batch, cfg, seed, frozen ? std::optional<double>(boundary) : std::nullopt)
        .total;
  };
  const double h = 1e-4;
  if (!smooth_at(value, point, h)) return {};
  return {finite_difference_check(value, point, analytic, h), true};
}

}  // namespace voxflow::testing
