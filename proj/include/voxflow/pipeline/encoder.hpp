#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "voxflow/errors.hpp"
#include "voxflow/numerics/tensor.hpp"
#include "voxflow/pipeline/resample.hpp"
#include "voxflow/store/manifest.hpp"
#include "voxflow/store/tensor_file.hpp"

namespace voxflow::pipeline {

/// Backbone feature maps of one slice, each [C_l, H_l, W_l], ordered by layer id.
struct FeatureStack {
  std::vector<int> layer_ids;
  std::vector<Tensor> maps;
};

/// Fused per-slice grid, [H0, W0, C] (channel-last).
struct SliceEmbedding {
  Tensor grid;
  std::size_t slice = 0;

  std::size_t height() const { return grid.dim(0); }
  std::size_t width() const { return grid.dim(1); }
  std::size_t channels() const { return grid.dim(2); }
};

/// Depth-aggregated grid, [D, H0, W0, C].
struct VolumeEmbedding {
  Tensor grid;
  std::string id;
  std::size_t radius = 0;

  std::size_t depth() const { return grid.dim(0); }
  std::size_t height() const { return grid.dim(1); }
  std::size_t width() const { return grid.dim(2); }
  std::size_t channels() const { return grid.dim(3); }
  std::size_t voxels() const { return depth() * height() * width(); }
};

struct EncoderOptions {
  std::size_t patch = 3;
  std::size_t channels = 1024;
};

/// Mean over the p x p neighbourhood of every position; out-of-bounds cells
/// are skipped and do not count towards the divisor.
inline Tensor patch_aggregate(const Tensor& map, std::size_t p) {
  if (p == 0 || p % 2 == 0) {
    throw ParameterError("patch size must be odd and positive, got " + std::to_string(p));
  }
  if (map.rank() != 3) throw DimensionError("patch_aggregate expects [C,H,W]");
  if (p == 1) return map;
  const std::size_t c = map.dim(0), h = map.dim(1), w = map.dim(2);
  const long half = static_cast<long>(p / 2);
  Tensor out(map.dims());
  for (std::size_t ch = 0; ch < c; ++ch) {
    const float* src = map.data().data() + ch * h * w;
    float* dst = out.data().data() + ch * h * w;
    for (long y = 0; y < static_cast<long>(h); ++y) {
      const long y0 = std::max(0L, y - half), y1 = std::min(static_cast<long>(h) - 1, y + half);
      for (long x = 0; x < static_cast<long>(w); ++x) {
        const long x0 = std::max(0L, x - half), x1 = std::min(static_cast<long>(w) - 1, x + half);
        double acc = 0.0;
        for (long yy = y0; yy <= y1; ++yy) {
          for (long xx = x0; xx <= x1; ++xx) acc += src[yy * static_cast<long>(w) + xx];
        }
        const double count = static_cast<double>((y1 - y0 + 1) * (x1 - x0 + 1));
        dst[y * static_cast<long>(w) + x] = static_cast<float>(acc / count);
      }
    }
  }
  return out;
}

/// Resizes every layer to the first layer's grid and stacks channels in
/// layer order -> [sum C_l, H0, W0].
inline Tensor upscale_concat(const FeatureStack& stack) {
  if (stack.maps.empty()) throw ParameterError("feature stack is empty");
  for (const auto& m : stack.maps) {
    if (m.rank() != 3) throw DimensionError("feature maps must be [C,H,W]");
  }
  const std::size_t h0 = stack.maps.front().dim(1), w0 = stack.maps.front().dim(2);
  std::size_t total = 0;
  for (const auto& m : stack.maps) total += m.dim(0);
  Tensor out(Dims{total, h0, w0});
  std::size_t offset = 0;
  for (const auto& m : stack.maps) {
    Tensor up = bilinear_resize(m, h0, w0);
    std::copy(up.data().begin(), up.data().end(), out.data().begin() + offset);
    offset += up.size();
  }
  return out;
}

/// Half-open channel range of output bin j when C channels are split into
/// `bins` contiguous bins whose sizes differ by at most one.
inline std::pair<std::size_t, std::size_t> channel_bin(std::size_t j, std::size_t c, std::size_t bins) {
  return {(j * c + bins - 1) / bins, ((j + 1) * c + bins - 1) / bins};
}

/// Adaptive mean pooling along channels: [C, H, W] -> [target, H, W].
inline Tensor reduce_channels(const Tensor& map, std::size_t target) {
  if (map.rank() != 3) throw DimensionError("reduce_channels expects [C,H,W]");
  const std::size_t c = map.dim(0), plane = map.dim(1) * map.dim(2);
  if (target == 0 || c < target) {
    throw ParameterError("cannot reduce " + std::to_string(c) + " channels to " +
                         std::to_string(target));
  }
  if (c == target) return map;
  Tensor out(Dims{target, map.dim(1), map.dim(2)});
  std::vector<double> acc(plane);
  for (std::size_t j = 0; j < target; ++j) {
    const auto [b, e] = channel_bin(j, c, target);
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t ch = b; ch < e; ++ch) {
      const float* src = map.data().data() + ch * plane;
      for (std::size_t i = 0; i < plane; ++i) acc[i] += src[i];
    }
    float* dst = out.data().data() + j * plane;
    const double n = static_cast<double>(e - b);
    for (std::size_t i = 0; i < plane; ++i) dst[i] = static_cast<float>(acc[i] / n);
  }
  return out;
}

// [C, H, W] -> [H, W, C]
inline Tensor to_channel_last(const Tensor& map) {
  const std::size_t c = map.dim(0), h = map.dim(1), w = map.dim(2);
  Tensor out(Dims{h, w, c});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < h * w; ++i) out[i * c + ch] = map[ch * h * w + i];
  }
  return out;
}

inline SliceEmbedding encode_slice(const FeatureStack& stack, const EncoderOptions& opt,
                                   std::size_t slice = 0) {
  FeatureStack local;
  local.layer_ids = stack.layer_ids;
  for (const auto& m : stack.maps) local.maps.push_back(patch_aggregate(m, opt.patch));
  return SliceEmbedding{to_channel_last(reduce_channels(upscale_concat(local), opt.channels)), slice};
}

/// Windowed mean over neighbouring slices; radius 0 keeps slices independent.
inline VolumeEmbedding aggregate_depth(const std::vector<SliceEmbedding>& slices, std::size_t radius,
                                       std::string id = {}) {
  if (slices.empty()) throw ParameterError("aggregate_depth: no slices");
  const std::size_t depth = slices.size();
  if (radius >= depth && depth > 1) {
    throw ParameterError("aggregate_depth: radius " + std::to_string(radius) +
                         " must be below depth " + std::to_string(depth));
  }
  const Dims& d0 = slices.front().grid.dims();
  for (const auto& s : slices) {
    if (s.grid.dims() != d0) throw DimensionError("aggregate_depth: slice grids differ in shape");
  }
  const std::size_t plane = slices.front().grid.size();
  Tensor out(Dims{depth, d0[0], d0[1], d0[2]});
  std::vector<double> acc(plane);
  for (std::size_t d = 0; d < depth; ++d) {
    const std::size_t lo = d >= radius ? d - radius : 0;
    const std::size_t hi = std::min(depth - 1, d + radius);
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t j = lo; j <= hi; ++j) {
      const auto src = slices[j].grid.data();
      for (std::size_t i = 0; i < plane; ++i) acc[i] += src[i];
    }
    const double n = static_cast<double>(hi - lo + 1);
    float* dst = out.data().data() + d * plane;
    for (std::size_t i = 0; i < plane; ++i) dst[i] = static_cast<float>(acc[i] / n);
  }
  return VolumeEmbedding{std::move(out), std::move(id), radius};
}

inline FeatureStack load_slice(const store::DatasetManifest& manifest, const store::SliceEntry& slice) {
  FeatureStack stack;
  stack.layer_ids = manifest.layers;
  for (const auto& f : slice.layer_files) stack.maps.push_back(store::read_tensor(f));
  return stack;
}

/// Reads, encodes and depth-aggregates every slice of a manifest volume.
inline VolumeEmbedding encode_volume(const store::DatasetManifest& manifest,
                                     const store::VolumeEntry& volume, const EncoderOptions& opt,
                                     std::size_t radius) {
  std::vector<SliceEmbedding> slices;
  slices.reserve(volume.depth);
  for (std::size_t d = 0; d < volume.slices.size(); ++d) {
    slices.push_back(encode_slice(load_slice(manifest, volume.slices[d]), opt, d));
  }
  return aggregate_depth(slices, radius, volume.id);
}

}  // namespace voxflow::pipeline
