#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "voxflow/errors.hpp"

namespace voxflow {

/// Largest |analytic - central difference| / max(|analytic|, 1e-6) over all
/// coordinates of `point`. `value` maps a point to a scalar.
template <typename Fn>
double finite_difference_check(Fn&& value, std::span<const double> point,
                               std::span<const double> analytic, double h) {
  if (point.size() != analytic.size()) {
    throw DimensionError("finite_difference_check: gradient length differs from point");
  }
  std::vector<double> x(point.begin(), point.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = value(std::span<const double>(x));
    x[i] = saved - h;
    const double down = value(std::span<const double>(x));
    x[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double err = std::abs(analytic[i] - numeric) / std::max(std::abs(analytic[i]), 1e-6);
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace voxflow
