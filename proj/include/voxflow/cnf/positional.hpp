#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "voxflow/errors.hpp"
#include "voxflow/numerics/tensor.hpp"

namespace voxflow::cnf {

/// 2D sinusoidal encoding of grid cell (h, w). The first P/2 entries encode
/// the row, the last P/2 the column; within each half, entry 2i is
/// sin(pos * f_i) and 2i+1 is cos(pos * f_i) with f_i = 10000^(-4i/P).
inline std::vector<double> positional_encoding(std::size_t h, std::size_t w, std::size_t height,
                                               std::size_t width, std::size_t dims) {
  if (dims == 0 || dims % 4 != 0) {
    throw ParameterError("positional encoding size must be a positive multiple of 4, got " +
                         std::to_string(dims));
  }
  if (h >= height || w >= width) throw ParameterError("grid position out of range");
  const std::size_t half = dims / 2;
  std::vector<double> out(dims);
  for (std::size_t i = 0; i < half / 2; ++i) {
    const double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(half));
    out[2 * i] = std::sin(static_cast<double>(h) * freq);
    out[2 * i + 1] = std::cos(static_cast<double>(h) * freq);
    out[half + 2 * i] = std::sin(static_cast<double>(w) * freq);
    out[half + 2 * i + 1] = std::cos(static_cast<double>(w) * freq);
  }
  return out;
}

/// Encodings for every cell of an H x W grid in row-major order -> [H*W, P].
template <typename Real = float>
BasicTensor<Real> positional_grid(std::size_t height, std::size_t width, std::size_t dims) {
  BasicTensor<Real> out(Dims{height * width, dims});
  for (std::size_t h = 0; h < height; ++h) {
    for (std::size_t w = 0; w < width; ++w) {
      const auto e = positional_encoding(h, w, height, width, dims);
      for (std::size_t k = 0; k < dims; ++k) out.at(h * width + w, k) = static_cast<Real>(e[k]);
    }
  }
  return out;
}

}  // namespace voxflow::cnf
