#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "voxflow/cnf/flow.hpp"
#include "voxflow/errors.hpp"
#include "voxflow/numerics/tape.hpp"
#include "voxflow/numerics/tensor.hpp"

namespace voxflow::objective {

enum class SppVariant { kBgSpp, kTriplet, kPairwiseRanking, kNone };

inline std::string to_string(SppVariant v) {
  switch (v) {
    case SppVariant::kBgSpp: return "bgspp";
    case SppVariant::kTriplet: return "triplet";
    case SppVariant::kPairwiseRanking: return "prl";
    case SppVariant::kNone: return "none";
  }
  return "?";
}

inline SppVariant parse_spp_variant(const std::string& s) {
  if (s == "bgspp") return SppVariant::kBgSpp;
  if (s == "triplet") return SppVariant::kTriplet;
  if (s == "prl") return SppVariant::kPairwiseRanking;
  if (s == "none") return SppVariant::kNone;
  throw ParameterError("unknown SPP variant '" + s + "' (expected bgspp|triplet|prl|none)");
}

struct SppConfig {
  SppVariant variant = SppVariant::kTriplet;
  double beta = 10.0;    // percentile of normal log-likelihoods used as boundary
  double tau = 0.1;      // BG-SPP margin below the boundary
  double margin = 1.0;   // triplet / pairwise-ranking margin
  double sigma = 0.06;   // std of synthesized feature noise
};

inline void validate(const SppConfig& c) {
  if (!(c.tau > 0.0)) throw ParameterError("tau must be positive");
  if (!(c.sigma >= 0.0)) throw ParameterError("sigma must be non-negative");
  if (!(c.beta >= 0.0 && c.beta <= 100.0)) throw ParameterError("beta must lie in [0, 100]");
  if (!(c.margin >= 0.0)) throw ParameterError("margin must be non-negative");
}

/// features + i.i.d. N(0, sigma^2) noise, reproducible from `seed`.
template <typename Real>
BasicTensor<Real> synthesize_anomalies(const BasicTensor<Real>& features, double sigma,
                                       std::uint64_t seed) {
  if (sigma < 0.0) throw ParameterError("sigma must be non-negative");
  BasicTensor<Real> out = features;
  if (sigma == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  for (auto& v : out.data()) v = static_cast<Real>(static_cast<double>(v) + noise(rng));
  return out;
}

/// Percentile with linear interpolation between order statistics.
inline double percentile(std::span<const double> values, double pct) {
  if (values.empty()) throw ParameterError("percentile of an empty set");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double pos = pct / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

/// Index pairing for the triplet and ranking losses. K = max(N, M) rows;
/// row k uses normal perm_n[k mod N] as anchor, perm_n[(k+1) mod N] as
/// positive and anomaly perm_a[k mod M] as negative.
struct Pairing {
  std::vector<std::size_t> anchor, positive, negative;
};

inline Pairing make_pairing(std::size_t normals, std::size_t anomalies, std::uint64_t seed) {
  if (normals == 0 || anomalies == 0) throw ParameterError("pairing needs both sets non-empty");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> pn(normals), pa(anomalies);
  std::iota(pn.begin(), pn.end(), std::size_t{0});
  std::iota(pa.begin(), pa.end(), std::size_t{0});
  std::shuffle(pn.begin(), pn.end(), rng);
  std::shuffle(pa.begin(), pa.end(), rng);
  const std::size_t k = std::max(normals, anomalies);
  Pairing p;
  p.anchor.resize(k);
  p.positive.resize(k);
  p.negative.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    p.anchor[i] = pn[i % normals];
    p.positive[i] = pn[(i + 1) % normals];
    p.negative[i] = pa[i % anomalies];
  }
  return p;
}

/// Boundary-guided semi-push-pull loss on log-likelihoods. `boundary`
/// overrides the beta-percentile of the normal set when given.
inline double bg_spp_loss(std::span<const double> normal, std::span<const double> anomalous,
                          double beta, double tau, std::optional<double> boundary = std::nullopt) {
  if (normal.empty()) throw ParameterError("bg_spp_loss: empty normal set");
  const double b = boundary ? *boundary : percentile(normal, beta);
  double loss = 0.0;
  for (double lp : normal) loss += std::abs(std::min(lp - b, 0.0));
  for (double lp : anomalous) loss += std::abs(std::max(lp - b + tau, 0.0));
  return loss;
}

inline double triplet_loss(std::span<const double> normal, std::span<const double> anomalous,
                           double margin, std::uint64_t seed = 0) {
  if (normal.empty() || anomalous.empty()) throw ParameterError("triplet_loss: empty set");
  const Pairing p = make_pairing(normal.size(), anomalous.size(), seed);
  double acc = 0.0;
  for (std::size_t k = 0; k < p.anchor.size(); ++k) {
    const double a = normal[p.anchor[k]], pos = normal[p.positive[k]], neg = anomalous[p.negative[k]];
    acc += std::max(0.0, std::abs(a - pos) - (a - neg) + margin);
  }
  return acc / static_cast<double>(p.anchor.size());
}

inline double pairwise_ranking_loss(std::span<const double> normal, std::span<const double> anomalous,
                                    double margin, std::uint64_t seed = 0) {
  if (normal.empty() || anomalous.empty()) throw ParameterError("pairwise_ranking_loss: empty set");
  const Pairing p = make_pairing(normal.size(), anomalous.size(), seed);
  double acc = 0.0;
  for (std::size_t k = 0; k < p.anchor.size(); ++k) {
    acc += std::max(0.0, margin - (normal[p.anchor[k]] - anomalous[p.negative[k]]));
  }
  return acc / static_cast<double>(p.anchor.size());
}

/// One optimisation batch: normal voxel features, their noisy counterparts
/// and the positional conditions of both.
template <typename Real>
struct Batch {
  BasicTensor<Real> normal;           // [N x d]
  BasicTensor<Real> normal_cond;      // [N x P]
  BasicTensor<Real> anomalous;        // [M x d]
  BasicTensor<Real> anomalous_cond;   // [M x P]
};

struct LossParts {
  double total = 0.0;
  double nll = 0.0;
  double spp = 0.0;
  double boundary = 0.0;   // BG-SPP b_n of this batch (0 for other variants)
};

template <typename Real>
void check_finite_rows(const BasicTensor<Real>& ll, const char* what) {
  for (std::size_t i = 0; i < ll.size(); ++i) {
    if (!std::isfinite(static_cast<double>(ll[i]))) {
      throw NumericError(std::string("non-finite log-likelihood in ") + what + " batch at index " +
                         std::to_string(i));
    }
  }
}

/// Mean negative log-likelihood of a normal batch.
template <typename Real>
double nll_objective(const cnf::FlowModel<Real>& model, const BasicTensor<Real>& normal,
                     const BasicTensor<Real>& cond) {
  if (normal.rows() == 0) throw ParameterError("nll_objective: empty batch");
  const auto ll = cnf::log_likelihood(model, normal, cond);
  check_finite_rows(ll, "normal");
  double acc = 0.0;
  for (auto v : ll.data()) acc -= static_cast<double>(v);
  return acc / static_cast<double>(ll.size());
}

template <typename Real>
std::vector<double> to_doubles(const BasicTensor<Real>& t) {
  return std::vector<double>(t.data().begin(), t.data().end());
}

/// SPP term for already-computed log-likelihoods.
inline double spp_loss(std::span<const double> normal, std::span<const double> anomalous,
                       const SppConfig& cfg, std::uint64_t pairing_seed,
                       std::optional<double> boundary = std::nullopt) {
  switch (cfg.variant) {
    case SppVariant::kBgSpp: return bg_spp_loss(normal, anomalous, cfg.beta, cfg.tau, boundary);
    case SppVariant::kTriplet: return triplet_loss(normal, anomalous, cfg.margin, pairing_seed);
    case SppVariant::kPairwiseRanking:
      return pairwise_ranking_loss(normal, anomalous, cfg.margin, pairing_seed);
    case SppVariant::kNone: return 0.0;
  }
  return 0.0;
}

/// nll_objective + SPP term, evaluated without a tape.
template <typename Real>
LossParts total_loss(const cnf::FlowModel<Real>& model, const Batch<Real>& batch, const SppConfig& cfg,
                     std::uint64_t pairing_seed, std::optional<double> boundary = std::nullopt) {
  LossParts parts;
  const auto ll_n = cnf::log_likelihood(model, batch.normal, batch.normal_cond);
  check_finite_rows(ll_n, "normal");
  const auto ln = to_doubles(ll_n);
  for (double v : ln) parts.nll -= v;
  parts.nll /= static_cast<double>(ln.size());
  if (cfg.variant != SppVariant::kNone) {
    const auto ll_a = cnf::log_likelihood(model, batch.anomalous, batch.anomalous_cond);
    check_finite_rows(ll_a, "anomalous");
    const auto la = to_doubles(ll_a);
    if (cfg.variant == SppVariant::kBgSpp) {
      parts.boundary = boundary ? *boundary : percentile(ln, cfg.beta);
      parts.spp = bg_spp_loss(ln, la, cfg.beta, cfg.tau, parts.boundary);
    } else {
      parts.spp = spp_loss(ln, la, cfg, pairing_seed);
    }
  }
  parts.total = parts.nll + parts.spp;
  return parts;
}

/// Records the SPP term on a tape given log-likelihood nodes ([N] and [M]).
/// The BG-SPP boundary enters as a constant.
template <typename Real>
NodeId record_spp(DiffTape<Real>& tape, NodeId ll_normal, NodeId ll_anomalous, const SppConfig& cfg,
                  std::uint64_t pairing_seed, double* boundary_out = nullptr) {
  switch (cfg.variant) {
    case SppVariant::kBgSpp: {
      const auto ln = to_doubles(tape.value(ll_normal));
      const double b = percentile(ln, cfg.beta);
      if (boundary_out) *boundary_out = b;
      const NodeId pull = tape.sum(tape.relu(tape.scale(tape.add_scalar(ll_normal, -b), -1.0)));
      const NodeId push = tape.sum(tape.relu(tape.add_scalar(ll_anomalous, -b + cfg.tau)));
      return tape.add(pull, push);
    }
    case SppVariant::kTriplet: {
      const Pairing p = make_pairing(tape.value(ll_normal).size(), tape.value(ll_anomalous).size(),
                                     pairing_seed);
      const NodeId a = tape.gather(ll_normal, p.anchor);
      const NodeId pos = tape.gather(ll_normal, p.positive);
      const NodeId neg = tape.gather(ll_anomalous, p.negative);
      const NodeId hinge = tape.sub(tape.abs(tape.sub(a, pos)), tape.sub(a, neg));
      return tape.mean(tape.relu(tape.add_scalar(hinge, cfg.margin)));
    }
    case SppVariant::kPairwiseRanking: {
      const Pairing p = make_pairing(tape.value(ll_normal).size(), tape.value(ll_anomalous).size(),
                                     pairing_seed);
      const NodeId n = tape.gather(ll_normal, p.anchor);
      const NodeId a = tape.gather(ll_anomalous, p.negative);
      return tape.mean(tape.relu(tape.add_scalar(tape.scale(tape.sub(n, a), -1.0), cfg.margin)));
    }
    case SppVariant::kNone:
      break;
  }
  throw ParameterError("record_spp called with variant none");
}

template <typename Real>
struct LossGradient {
  LossParts parts;
  std::vector<BasicTensor<Real>> grads;   // aligned with FlowModel::parameters()
};

/// Total loss and its gradient with respect to every flow parameter.
/// Normal and anomalous rows share one flow pass.
template <typename Real>
LossGradient<Real> total_loss_gradient(const cnf::FlowModel<Real>& model, const Batch<Real>& batch,
                                       const SppConfig& cfg, std::uint64_t pairing_seed) {
  const std::size_t n = batch.normal.rows();
  if (n == 0) throw ParameterError("total_loss: empty normal batch");
  const bool with_spp = cfg.variant != SppVariant::kNone;
  DiffTape<Real> tape;
  const auto params = cnf::register_parameters(tape, model);
  const bool conditioned = model.config.cond_dim > 0;
  NodeId x;
  std::optional<NodeId> c;
  std::size_t m = 0;
  if (with_spp) {
    m = batch.anomalous.rows();
    if (m == 0) throw ParameterError("total_loss: empty anomalous batch");
    x = tape.constant(kernels::concat_rows(batch.normal, batch.anomalous));
    if (conditioned) c = tape.constant(kernels::concat_rows(batch.normal_cond, batch.anomalous_cond));
  } else {
    x = tape.constant(batch.normal);
    if (conditioned) c = tape.constant(batch.normal_cond);
  }
  const auto flow = cnf::record_flow(tape, model, params, x, c);
  const auto& ll_all = tape.value(flow.log_likelihood);
  for (std::size_t i = 0; i < ll_all.size(); ++i) {
    if (!std::isfinite(static_cast<double>(ll_all[i]))) {
      throw NumericError(std::string("non-finite log-likelihood in ") +
                         (i < n ? "normal" : "anomalous") + " batch at index " +
                         std::to_string(i < n ? i : i - n));
    }
  }
  std::vector<std::size_t> normal_idx(n), anomalous_idx(m);
  std::iota(normal_idx.begin(), normal_idx.end(), std::size_t{0});
  std::iota(anomalous_idx.begin(), anomalous_idx.end(), n);
  const NodeId ll_n = with_spp ? tape.gather(flow.log_likelihood, normal_idx) : flow.log_likelihood;
  const NodeId nll = tape.scale(tape.mean(ll_n), -1.0);
  LossGradient<Real> out;
  NodeId loss = nll;
  if (with_spp) {
    const NodeId ll_a = tape.gather(flow.log_likelihood, anomalous_idx);
    const NodeId spp = record_spp(tape, ll_n, ll_a, cfg, pairing_seed, &out.parts.boundary);
    out.parts.spp = static_cast<double>(tape.value(spp)[0]);
    loss = tape.add(nll, spp);
  }
  out.parts.nll = static_cast<double>(tape.value(nll)[0]);
  out.parts.total = static_cast<double>(tape.value(loss)[0]);
  if (!std::isfinite(out.parts.total)) throw NumericError("total loss is not finite");
  out.grads = backprop(tape, loss);
  return out;
}

}  // namespace voxflow::objective
