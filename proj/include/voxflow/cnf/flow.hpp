#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "voxflow/errors.hpp"
#include "voxflow/numerics/tape.hpp"
#include "voxflow/numerics/tensor.hpp"

namespace voxflow::cnf {

struct FlowConfig {
  std::size_t dim = 1024;       // feature dimension d
  std::size_t cond_dim = 128;   // positional encoding size P
  std::size_t hidden = 0;       // subnet hidden width, 0 means d
  std::size_t layers = 8;
  double clamp = 1.9;           // soft bound on log-scales

  std::size_t hidden_width() const { return hidden ? hidden : dim; }
  friend bool operator==(const FlowConfig&, const FlowConfig&) = default;
};

/// Affine coupling block. Channels [0, d/2) and [d/2, d) alternate between
/// the passive (conditioning) and active (transformed) role from one layer
/// to the next. The subnet is affine -> ReLU -> affine on [x_passive, cond]
/// and emits (raw log-scale, shift) for the active half.
template <typename Real>
struct CouplingLayer {
  std::size_t passive_begin = 0, passive_count = 0;
  std::size_t active_begin = 0, active_count = 0;
  BasicTensor<Real> w1, b1, w2, b2;

  bool is_identity() const { return active_count == 0; }
};

template <typename Real>
struct FlowModel {
  FlowConfig config;
  std::vector<CouplingLayer<Real>> layers;

  std::vector<BasicTensor<Real>*> parameters() {
    std::vector<BasicTensor<Real>*> out;
    for (auto& l : layers) {
      if (l.is_identity()) continue;
      out.insert(out.end(), {&l.w1, &l.b1, &l.w2, &l.b2});
    }
    return out;
  }

  std::vector<const BasicTensor<Real>*> parameters() const {
    std::vector<const BasicTensor<Real>*> out;
    for (const auto& l : layers) {
      if (l.is_identity()) continue;
      out.insert(out.end(), {&l.w1, &l.b1, &l.w2, &l.b2});
    }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : parameters()) n += p->size();
    return n;
  }
};

inline void validate(const FlowConfig& c) {
  if (c.dim == 0) throw ParameterError("flow dimension must be positive");
  if (c.layers == 0) throw ParameterError("flow needs at least one coupling layer");
  if (!(c.clamp > 0.0)) throw ParameterError("scale clamp must be positive");
  if (c.dim == 1 && c.cond_dim == 0) {
    throw ParameterError("a one-dimensional flow needs a conditioning vector");
  }
}

/// Builds a flow whose subnets start with He-initialised first maps and
/// zero final maps, so the initial flow is the identity.
template <typename Real>
FlowModel<Real> make_flow(const FlowConfig& config, std::uint64_t seed) {
  validate(config);
  FlowModel<Real> model;
  model.config = config;
  std::mt19937_64 rng(seed);
  const std::size_t d = config.dim, split = d / 2, hidden = config.hidden_width();
  for (std::size_t i = 0; i < config.layers; ++i) {
    CouplingLayer<Real> layer;
    if (i % 2 == 0) {
      layer.passive_begin = 0;
      layer.passive_count = split;
      layer.active_begin = split;
      layer.active_count = d - split;
    } else {
      layer.passive_begin = split;
      layer.passive_count = d - split;
      layer.active_begin = 0;
      layer.active_count = split;
    }
    if (!layer.is_identity()) {
      const std::size_t fan_in = layer.passive_count + config.cond_dim;
      layer.w1 = BasicTensor<Real>(Dims{fan_in, hidden});
      std::normal_distribution<double> he(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
      for (auto& v : layer.w1.data()) v = static_cast<Real>(he(rng));
      layer.b1 = BasicTensor<Real>(Dims{hidden});
      layer.w2 = BasicTensor<Real>(Dims{hidden, 2 * layer.active_count});
      layer.b2 = BasicTensor<Real>(Dims{2 * layer.active_count});
    }
    model.layers.push_back(std::move(layer));
  }
  return model;
}

/// Tape nodes produced by recording a flow.
struct FlowNodes {
  NodeId z;
  std::optional<NodeId> logdet;   // [n], absent when every layer is the identity
  NodeId log_likelihood;          // [n]
};

/// Per-layer parameter nodes, aligned with FlowModel::parameters().
struct ParameterNodes {
  std::vector<NodeId> ids;
};

template <typename Real>
ParameterNodes register_parameters(DiffTape<Real>& tape, const FlowModel<Real>& model) {
  ParameterNodes p;
  for (const auto* t : model.parameters()) p.ids.push_back(tape.parameter(*t));
  return p;
}

namespace detail {

template <typename Real>
std::pair<NodeId, NodeId> record_coupling(DiffTape<Real>& tape, const CouplingLayer<Real>& layer,
                                          const NodeId* params, NodeId x, std::optional<NodeId> cond,
                                          double clamp) {
  std::optional<NodeId> passive;
  if (layer.passive_count) passive = tape.slice_cols(x, layer.passive_begin, layer.passive_count);
  NodeId input;
  if (passive && cond) {
    input = tape.concat_cols(*passive, *cond);
  } else if (passive) {
    input = *passive;
  } else {
    input = *cond;
  }
  const NodeId hidden = tape.relu(tape.affine(input, params[0], params[1]));
  const NodeId out = tape.affine(hidden, params[2], params[3]);
  const std::size_t a = layer.active_count;
  const NodeId raw = tape.slice_cols(out, 0, a);
  const NodeId shift = tape.slice_cols(out, a, a);
  const NodeId log_scale = tape.scale(tape.tanh(tape.scale(raw, 1.0 / clamp)), clamp);
  const NodeId active = tape.slice_cols(x, layer.active_begin, a);
  const NodeId y_active = tape.add(tape.mul(active, tape.exp(log_scale)), shift);
  NodeId y = y_active;
  if (passive) {
    y = layer.active_begin == 0 ? tape.concat_cols(y_active, *passive)
                                : tape.concat_cols(*passive, y_active);
  }
  return {y, tape.row_sum(log_scale)};
}

}  // namespace detail

/// Records the forward flow and per-row log-likelihood on `tape`.
/// `x` is [n x d]; `cond` is [n x P] (ignored when P == 0).
template <typename Real>
FlowNodes record_flow(DiffTape<Real>& tape, const FlowModel<Real>& model, const ParameterNodes& params,
                      NodeId x, std::optional<NodeId> cond) {
  const auto& cfg = model.config;
  const auto& xv = tape.value(x);
  if (xv.rank() != 2 || xv.cols() != cfg.dim) {
    throw DimensionError("flow input " + dims_to_string(xv.dims()) + " does not have width " +
                         std::to_string(cfg.dim));
  }
  if (cfg.cond_dim == 0) {
    cond.reset();
  } else {
    if (!cond) throw DimensionError("flow requires a conditioning input");
    const auto& cv = tape.value(*cond);
    if (cv.rank() != 2 || cv.cols() != cfg.cond_dim || cv.rows() != xv.rows()) {
      throw DimensionError("condition " + dims_to_string(cv.dims()) + " does not match input " +
                           dims_to_string(xv.dims()));
    }
  }
  FlowNodes nodes;
  NodeId z = x;
  std::optional<NodeId> logdet;
  std::size_t p = 0;
  for (const auto& layer : model.layers) {
    if (layer.is_identity()) continue;
    auto [y, ld] = detail::record_coupling(tape, layer, params.ids.data() + p, z, cond, cfg.clamp);
    p += 4;
    z = y;
    logdet = logdet ? tape.add(*logdet, ld) : ld;
  }
  nodes.z = z;
  nodes.logdet = logdet;
  const double log_norm = -0.5 * static_cast<double>(cfg.dim) * std::log(2.0 * std::numbers::pi);
  NodeId ll = tape.add_scalar(tape.scale(tape.row_sum(tape.square(z)), -0.5), log_norm);
  if (logdet) ll = tape.add(ll, *logdet);
  nodes.log_likelihood = ll;
  return nodes;
}

template <typename Real>
struct FlowOutput {
  BasicTensor<Real> z;        // [n x d]
  BasicTensor<Real> logdet;   // [n]
};

/// Forward pass x -> z with the summed log-determinant per row.
template <typename Real>
FlowOutput<Real> flow_forward(const FlowModel<Real>& model, const BasicTensor<Real>& x,
                              const BasicTensor<Real>& cond) {
  DiffTape<Real> tape;
  const ParameterNodes params = register_parameters(tape, model);
  const NodeId xn = tape.constant(x);
  std::optional<NodeId> cn;
  if (model.config.cond_dim) cn = tape.constant(cond);
  const FlowNodes nodes = record_flow(tape, model, params, xn, cn);
  FlowOutput<Real> out{tape.value(nodes.z), BasicTensor<Real>(Dims{x.rows()})};
  if (nodes.logdet) out.logdet = tape.value(*nodes.logdet);
  if (!out.z.all_finite() || !out.logdet.all_finite()) {
    throw NumericError("flow_forward produced non-finite values");
  }
  return out;
}

/// Single coupling layer applied to a batch; the layer's parameters live on a
/// private tape.
template <typename Real>
FlowOutput<Real> coupling_forward(const CouplingLayer<Real>& layer, const BasicTensor<Real>& x,
                                  const BasicTensor<Real>& cond, double clamp) {
  if (layer.is_identity()) return {x, BasicTensor<Real>(Dims{x.rows()})};
  DiffTape<Real> tape;
  const NodeId params[4] = {tape.parameter(layer.w1), tape.parameter(layer.b1),
                            tape.parameter(layer.w2), tape.parameter(layer.b2)};
  const NodeId xn = tape.constant(x);
  const std::optional<NodeId> cn =
      layer.w1.rows() > layer.passive_count ? std::optional<NodeId>(tape.constant(cond)) : std::nullopt;
  auto [y, ld] = detail::record_coupling(tape, layer, params, xn, cn, clamp);
  FlowOutput<Real> out{tape.value(y), tape.value(ld)};
  if (!out.z.all_finite() || !out.logdet.all_finite()) {
    throw NumericError("coupling layer produced non-finite values");
  }
  return out;
}

namespace detail {

template <typename Real>
BasicTensor<Real> subnet(const CouplingLayer<Real>& layer, const BasicTensor<Real>& input) {
  auto h = kernels::affine(input, layer.w1, &layer.b1);
  for (auto& v : h.data()) v = v > Real{0} ? v : Real{0};
  return kernels::affine(h, layer.w2, &layer.b2);
}

}  // namespace detail

/// Exact inverse z -> x, layers in reverse order.
template <typename Real>
BasicTensor<Real> flow_inverse(const FlowModel<Real>& model, const BasicTensor<Real>& z,
                               const BasicTensor<Real>& cond) {
  const auto& cfg = model.config;
  if (z.rank() != 2 || z.cols() != cfg.dim) throw DimensionError("flow_inverse: bad input width");
  BasicTensor<Real> x = z;
  const std::size_t n = z.rows(), d = cfg.dim;
  for (auto it = model.layers.rbegin(); it != model.layers.rend(); ++it) {
    const auto& layer = *it;
    if (layer.is_identity()) continue;
    BasicTensor<Real> input;
    if (layer.passive_count) {
      input = kernels::slice_cols(x, layer.passive_begin, layer.passive_count);
      if (cfg.cond_dim) input = kernels::concat_cols(input, cond);
    } else {
      input = cond;
    }
    const auto out = detail::subnet(layer, input);
    const std::size_t a = layer.active_count;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < a; ++j) {
        const Real raw = out[i * 2 * a + j];
        const Real shift = out[i * 2 * a + a + j];
        const Real s = static_cast<Real>(cfg.clamp) * std::tanh(raw / static_cast<Real>(cfg.clamp));
        Real& v = x[i * d + layer.active_begin + j];
        v = (v - shift) * std::exp(-s);
      }
    }
  }
  return x;
}

/// log p(x) per row: -(d/2) log 2pi - |phi(x)|^2 / 2 + log|det J|.
template <typename Real>
BasicTensor<Real> log_likelihood(const FlowModel<Real>& model, const BasicTensor<Real>& x,
                                 const BasicTensor<Real>& cond) {
  DiffTape<Real> tape;
  const ParameterNodes params = register_parameters(tape, model);
  const NodeId xn = tape.constant(x);
  std::optional<NodeId> cn;
  if (model.config.cond_dim) cn = tape.constant(cond);
  const auto nodes = record_flow(tape, model, params, xn, cn);
  auto ll = tape.value(nodes.log_likelihood);
  if (!ll.all_finite()) throw NumericError("log_likelihood produced non-finite values");
  return ll;
}

/// log_likelihood in fixed-size row chunks, bounding tape memory.
template <typename Real>
BasicTensor<Real> log_likelihood_chunked(const FlowModel<Real>& model, const BasicTensor<Real>& x,
                                         const BasicTensor<Real>& cond, std::size_t chunk = 1024) {
  const std::size_t n = x.rows();
  if (n <= chunk) return log_likelihood(model, x, cond);
  BasicTensor<Real> out(Dims{n});
  const std::size_t d = x.cols();
  const std::size_t p = model.config.cond_dim;
  for (std::size_t begin = 0; begin < n; begin += chunk) {
    const std::size_t rows = std::min(chunk, n - begin);
    BasicTensor<Real> xs(Dims{rows, d}, std::vector<Real>(x.data().begin() + begin * d,
                                                          x.data().begin() + (begin + rows) * d));
    BasicTensor<Real> cs;
    if (p) {
      cs = BasicTensor<Real>(Dims{rows, p}, std::vector<Real>(cond.data().begin() + begin * p,
                                                              cond.data().begin() + (begin + rows) * p));
    }
    const auto ll = log_likelihood(model, xs, cs);
    std::copy(ll.data().begin(), ll.data().end(), out.data().begin() + begin);
  }
  return out;
}

}  // namespace voxflow::cnf
