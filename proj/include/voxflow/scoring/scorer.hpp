#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "voxflow/cnf/flow.hpp"
#include "voxflow/cnf/positional.hpp"
#include "voxflow/errors.hpp"
#include "voxflow/pipeline/encoder.hpp"
#include "voxflow/pipeline/resample.hpp"

namespace voxflow::scoring {

/// s = 1 - exp(log p): high likelihood means low anomaly score.
inline double anomaly_score(double log_likelihood) { return 1.0 - std::exp(log_likelihood); }

/// Min-max normalization to [0, 1].
inline std::vector<double> normalize_min_max(std::span<const double> values) {
  if (values.empty()) throw DegenerateVolumeError("cannot normalize an empty score field");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double min = *lo, range = *hi - *lo;
  if (!(range > 0.0) || !std::isfinite(range)) {
    throw DegenerateVolumeError("score field is constant or unbounded; cannot normalize");
  }
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - min) / range;
  return out;
}

/// Min-max normalization of s = 1 - exp(l) computed from the log-likelihoods
/// directly: (s - s_min) / (s_max - s_min) = expm1(l - l_max) / expm1(l_min - l_max).
/// Identical to normalize_min_max over anomaly_score, without overflow.
inline std::vector<double> normalize_log_likelihood(std::span<const double> ll) {
  if (ll.empty()) throw DegenerateVolumeError("cannot normalize an empty score field");
  const auto [lo, hi] = std::minmax_element(ll.begin(), ll.end());
  const double l_min = *lo, l_max = *hi;
  const double denom = std::expm1(l_min - l_max);
  if (!(denom < 0.0)) {
    throw DegenerateVolumeError("log-likelihood field is constant; cannot normalize scores");
  }
  std::vector<double> out(ll.size());
  for (std::size_t i = 0; i < ll.size(); ++i) {
    out[i] = std::clamp(std::expm1(ll[i] - l_max) / denom, 0.0, 1.0);
  }
  return out;
}

struct ScoreVolume {
  std::string id;
  BasicTensor<double> log_likelihood;   // [D, H0, W0]
  BasicTensor<double> raw;              // [D, H0, W0], 1 - exp(log p)
  BasicTensor<double> normalized;       // [D, H0, W0], per-volume min-max of raw
  BasicTensor<double> upscaled;         // [D, H, W]
  std::vector<double> slice_scores;     // [D], max of upscaled per slice

  std::size_t depth() const { return upscaled.dim(0); }
};

/// Positional conditions for every voxel of a [D, H0, W0] grid -> [D*H0*W0, P].
inline Tensor voxel_conditions(std::size_t depth, std::size_t height, std::size_t width,
                               std::size_t cond_dim) {
  if (cond_dim == 0) return Tensor(Dims{depth * height * width, 1});
  const Tensor grid = cnf::positional_grid<float>(height, width, cond_dim);
  Tensor out(Dims{depth * height * width, cond_dim});
  for (std::size_t d = 0; d < depth; ++d) {
    std::copy(grid.data().begin(), grid.data().end(), out.data().begin() + d * grid.size());
  }
  return out;
}

/// Builds the score volume from a log-likelihood field [D, H0, W0].
inline ScoreVolume scores_from_log_likelihood(std::string id, BasicTensor<double> ll,
                                              std::size_t out_h, std::size_t out_w) {
  ScoreVolume sv;
  sv.id = std::move(id);
  const std::size_t depth = ll.dim(0);
  sv.raw = BasicTensor<double>(ll.dims());
  for (std::size_t i = 0; i < ll.size(); ++i) sv.raw[i] = anomaly_score(ll[i]);
  sv.normalized = BasicTensor<double>(ll.dims(), normalize_log_likelihood(ll.data()));
  sv.log_likelihood = std::move(ll);
  sv.upscaled = pipeline::trilinear_resize(sv.normalized, depth, out_h, out_w);
  const std::size_t plane = out_h * out_w;
  sv.slice_scores.resize(depth);
  for (std::size_t d = 0; d < depth; ++d) {
    const auto begin = sv.upscaled.data().begin() + static_cast<std::ptrdiff_t>(d * plane);
    sv.slice_scores[d] = *std::max_element(begin, begin + static_cast<std::ptrdiff_t>(plane));
  }
  return sv;
}

/// Per-voxel log-likelihood -> anomaly score -> per-volume normalization ->
/// upscale to (D, out_h, out_w) -> per-slice maxima.
inline ScoreVolume score_volume(const cnf::FlowModel<float>& model,
                                const pipeline::VolumeEmbedding& volume, std::size_t out_h,
                                std::size_t out_w) {
  if (volume.channels() != model.config.dim) {
    throw DimensionError("embedding has " + std::to_string(volume.channels()) +
                         " channels but the flow expects " + std::to_string(model.config.dim));
  }
  const std::size_t n = volume.voxels();
  const Tensor x = volume.grid.reshaped(Dims{n, volume.channels()});
  const Tensor cond =
      voxel_conditions(volume.depth(), volume.height(), volume.width(), model.config.cond_dim);
  const Tensor ll = cnf::log_likelihood_chunked(model, x, cond);
  BasicTensor<double> field(Dims{volume.depth(), volume.height(), volume.width()});
  for (std::size_t i = 0; i < n; ++i) field[i] = static_cast<double>(ll[i]);
  return scores_from_log_likelihood(volume.id, std::move(field), out_h, out_w);
}

/// Image-level scores: slice maxima of every volume in order, min-max
/// normalized across the whole dataset.
inline std::vector<double> image_scores_dataset(std::span<const ScoreVolume> volumes) {
  if (volumes.empty()) throw ParameterError("image_scores_dataset: no volumes");
  std::vector<double> all;
  for (const auto& v : volumes) all.insert(all.end(), v.slice_scores.begin(), v.slice_scores.end());
  return normalize_min_max(all);
}

}  // namespace voxflow::scoring
