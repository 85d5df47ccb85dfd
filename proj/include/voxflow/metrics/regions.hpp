#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "voxflow/errors.hpp"
#include "voxflow/metrics/ranking.hpp"

namespace voxflow::metrics {

struct Grid3 {
  std::size_t depth = 1, height = 1, width = 1;
  std::size_t size() const { return depth * height * width; }
};

struct ComponentLabels {
  std::vector<std::uint32_t> label;   // 0 = background, regions numbered from 1
  std::size_t regions = 0;
};

/// Connected components of a binary volume under 26-connectivity (which is
/// 8-connectivity when depth == 1). Regions are numbered in scan order.
inline ComponentLabels label_components(Labels mask, Grid3 g) {
  if (mask.size() != g.size()) throw DimensionError("label_components: mask size does not match grid");
  ComponentLabels out;
  out.label.assign(mask.size(), 0);
  std::vector<std::size_t> stack;
  const long D = static_cast<long>(g.depth), H = static_cast<long>(g.height), W = static_cast<long>(g.width);
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (!mask[start] || out.label[start]) continue;
    const auto id = static_cast<std::uint32_t>(++out.regions);
    out.label[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      const long z = static_cast<long>(v) / (H * W);
      const long y = (static_cast<long>(v) / W) % H;
      const long x = static_cast<long>(v) % W;
      for (long dz = -1; dz <= 1; ++dz) {
        for (long dy = -1; dy <= 1; ++dy) {
          for (long dx = -1; dx <= 1; ++dx) {
            const long zz = z + dz, yy = y + dy, xx = x + dx;
            if (zz < 0 || yy < 0 || xx < 0 || zz >= D || yy >= H || xx >= W) continue;
            const auto u = static_cast<std::size_t>((zz * H + yy) * W + xx);
            if (mask[u] && !out.label[u]) {
              out.label[u] = id;
              stack.push_back(u);
            }
          }
        }
      }
    }
  }
  return out;
}

/// Area under a piecewise-linear curve from x = 0 to x = limit, with the
/// final segment cut by linear interpolation. Points must be sorted by x.
inline double truncated_trapezoid(std::span<const double> xs, std::span<const double> ys, double limit) {
  double area = 0.0;
  for (std::size_t i = 1; i < xs.size(); ++i) {
    const double x0 = xs[i - 1], x1 = xs[i], y0 = ys[i - 1], y1 = ys[i];
    if (x0 >= limit) break;
    if (x1 <= limit) {
      area += (x1 - x0) * (y0 + y1) / 2.0;
    } else {
      const double y_cut = y0 + (y1 - y0) * (limit - x0) / (x1 - x0);
      area += (limit - x0) * (y0 + y_cut) / 2.0;
      break;
    }
  }
  return area;
}

/// Per-region overlap: the mean recall over ground-truth regions, integrated
/// against the false-positive rate on [0, fpr_limit] and divided by fpr_limit.
inline double pro(Scores scores, Labels mask, Grid3 grid, double fpr_limit = 0.3) {
  if (!(fpr_limit > 0.0 && fpr_limit <= 1.0)) throw ParameterError("fpr_limit must lie in (0, 1]");
  const auto classes = count_classes(scores, mask);
  if (classes.positives == 0) throw UndefinedMetricError("PRO needs a non-empty mask");
  if (classes.negatives == 0) throw UndefinedMetricError("PRO needs background voxels");
  const auto comps = label_components(mask, grid);
  std::vector<std::size_t> region_size(comps.regions + 1, 0), region_hits(comps.regions + 1, 0);
  for (auto l : comps.label) region_size[l] += 1;

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<double> fpr{0.0}, overlap{0.0};
  std::size_t fp = 0;
  double overlap_sum = 0.0;
  const double regions = static_cast<double>(comps.regions);
  for (std::size_t i = 0; i < order.size();) {
    const double t = scores[order[i]];
    while (i < order.size() && scores[order[i]] == t) {
      const std::uint32_t l = comps.label[order[i]];
      if (l) {
        region_hits[l] += 1;
        overlap_sum += 1.0 / static_cast<double>(region_size[l]);
      } else {
        fp += 1;
      }
      ++i;
    }
    fpr.push_back(static_cast<double>(fp) / static_cast<double>(classes.negatives));
    overlap.push_back(overlap_sum / regions);
    if (fpr.back() >= fpr_limit) break;
  }
  return truncated_trapezoid(fpr, overlap, fpr_limit) / fpr_limit;
}

}  // namespace voxflow::metrics
