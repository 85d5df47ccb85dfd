#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "voxflow/errors.hpp"
#include "voxflow/numerics/tensor.hpp"

namespace voxflow::pipeline {

// Linear sampling taps along one axis, sample-center (align-corners false)
// convention: source = (out + 0.5) * in / out - 0.5, clamped at the low edge.
struct AxisTaps {
  std::vector<std::size_t> lo, hi;
  std::vector<double> frac;
};

inline AxisTaps axis_taps(std::size_t in, std::size_t out) {
  AxisTaps t;
  t.lo.resize(out);
  t.hi.resize(out);
  t.frac.resize(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
    if (src < 0.0) src = 0.0;
    std::size_t i0 = static_cast<std::size_t>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    const std::size_t i1 = std::min(i0 + 1, in - 1);
    t.lo[o] = i0;
    t.hi[o] = i1;
    t.frac[o] = src - static_cast<double>(i0);
  }
  return t;
}

/// Bilinear resize of every channel of a [C, H, W] map.
template <typename Real>
BasicTensor<Real> bilinear_resize(const BasicTensor<Real>& map, std::size_t out_h, std::size_t out_w) {
  if (map.rank() != 3) throw DimensionError("bilinear_resize expects [C,H,W]");
  const std::size_t c = map.dim(0), h = map.dim(1), w = map.dim(2);
  if (h == out_h && w == out_w) return map;
  const AxisTaps ty = axis_taps(h, out_h), tx = axis_taps(w, out_w);
  BasicTensor<Real> out(Dims{c, out_h, out_w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    const Real* src = map.data().data() + ch * h * w;
    Real* dst = out.data().data() + ch * out_h * out_w;
    for (std::size_t y = 0; y < out_h; ++y) {
      const double fy = ty.frac[y];
      const Real* r0 = src + ty.lo[y] * w;
      const Real* r1 = src + ty.hi[y] * w;
      for (std::size_t x = 0; x < out_w; ++x) {
        const double fx = tx.frac[x];
        const double top = (1.0 - fx) * r0[tx.lo[x]] + fx * r0[tx.hi[x]];
        const double bottom = (1.0 - fx) * r1[tx.lo[x]] + fx * r1[tx.hi[x]];
        dst[y * out_w + x] = static_cast<Real>((1.0 - fy) * top + fy * bottom);
      }
    }
  }
  return out;
}

/// Trilinear resize of a scalar [D, H, W] field.
template <typename Real>
BasicTensor<Real> trilinear_resize(const BasicTensor<Real>& field, std::size_t out_d,
                                   std::size_t out_h, std::size_t out_w) {
  if (field.rank() != 3) throw DimensionError("trilinear_resize expects [D,H,W]");
  const std::size_t d = field.dim(0), h = field.dim(1), w = field.dim(2);
  const AxisTaps tz = axis_taps(d, out_d), ty = axis_taps(h, out_h), tx = axis_taps(w, out_w);
  BasicTensor<Real> out(Dims{out_d, out_h, out_w});
  auto at = [&](std::size_t z, std::size_t y, std::size_t x) -> double {
    return field[(z * h + y) * w + x];
  };
  for (std::size_t z = 0; z < out_d; ++z) {
    const double fz = tz.frac[z];
    for (std::size_t y = 0; y < out_h; ++y) {
      const double fy = ty.frac[y];
      for (std::size_t x = 0; x < out_w; ++x) {
        const double fx = tx.frac[x];
        auto plane = [&](std::size_t zi) {
          const double top = (1.0 - fx) * at(zi, ty.lo[y], tx.lo[x]) + fx * at(zi, ty.lo[y], tx.hi[x]);
          const double bot = (1.0 - fx) * at(zi, ty.hi[y], tx.lo[x]) + fx * at(zi, ty.hi[y], tx.hi[x]);
          return (1.0 - fy) * top + fy * bot;
        };
        const double v = fz == 0.0 ? plane(tz.lo[z])
                                   : (1.0 - fz) * plane(tz.lo[z]) + fz * plane(tz.hi[z]);
        out[(z * out_h + y) * out_w + x] = static_cast<Real>(v);
      }
    }
  }
  return out;
}

}  // namespace voxflow::pipeline
