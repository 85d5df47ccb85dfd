#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "voxflow/errors.hpp"
#include "voxflow/numerics/tensor.hpp"

namespace voxflow {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename Real>
struct AdamState {
  AdamOptions options;
  std::vector<BasicTensor<Real>> first_moment;
  std::vector<BasicTensor<Real>> second_moment;
  std::uint64_t step = 0;
};

template <typename Real>
AdamState<Real> make_adam_state(std::span<BasicTensor<Real>* const> params,
                                AdamOptions options = {}) {
  AdamState<Real> state;
  state.options = options;
  for (const auto* p : params) {
    state.first_moment.emplace_back(p->dims());
    state.second_moment.emplace_back(p->dims());
  }
  return state;
}

/// One bias-corrected Adam update, in place. Gradients are checked for
/// finiteness before any parameter is touched.
template <typename Real>
void adam_step(AdamState<Real>& state, std::span<BasicTensor<Real>* const> params,
               std::span<const BasicTensor<Real>> grads) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw DimensionError("adam_step: parameter/gradient/state counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->dims() != grads[i].dims() || state.first_moment[i].dims() != grads[i].dims()) {
      throw DimensionError("adam_step: shape mismatch for parameter " + std::to_string(i));
    }
    if (!grads[i].all_finite()) {
      throw NumericError("adam_step: non-finite gradient for parameter " + std::to_string(i));
    }
  }
  const auto& o = state.options;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    auto g = grads[i].data();
    auto m = state.first_moment[i].data();
    auto v = state.second_moment[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = g[k];
      const double mk = o.beta1 * m[k] + (1.0 - o.beta1) * gk;
      const double vk = o.beta2 * v[k] + (1.0 - o.beta2) * gk * gk;
      m[k] = static_cast<Real>(mk);
      v[k] = static_cast<Real>(vk);
      const double update = o.learning_rate * (mk / c1) / (std::sqrt(vk / c2) + o.epsilon);
      p[k] = static_cast<Real>(p[k] - update);
    }
  }
}

}  // namespace voxflow
