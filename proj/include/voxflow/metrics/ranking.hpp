#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "voxflow/errors.hpp"

namespace voxflow::metrics {

using Labels = std::span<const std::uint8_t>;
using Scores = std::span<const double>;

struct ClassCounts {
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

inline ClassCounts count_classes(Scores scores, Labels labels) {
  if (scores.size() != labels.size()) {
    throw DimensionError("scores and labels differ in length (" + std::to_string(scores.size()) +
                         " vs " + std::to_string(labels.size()) + ")");
  }
  ClassCounts c;
  for (auto l : labels) (l ? c.positives : c.negatives) += 1;
  return c;
}

/// One step of a descending threshold sweep: every sample scoring at least
/// `threshold` is predicted positive.
struct SweepPoint {
  double threshold;
  std::size_t tp;
  std::size_t fp;
};

/// Cumulative confusion counts at every distinct score, highest first.
inline std::vector<SweepPoint> threshold_sweep(Scores scores, Labels labels) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<SweepPoint> sweep;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double t = scores[order[i]];
    while (i < order.size() && scores[order[i]] == t) {
      (labels[order[i]] ? tp : fp) += 1;
      ++i;
    }
    sweep.push_back({t, tp, fp});
  }
  return sweep;
}

/// Trapezoidal area under the ROC curve over all distinct thresholds.
inline double auroc(Scores scores, Labels labels) {
  const auto c = count_classes(scores, labels);
  if (c.positives == 0 || c.negatives == 0) {
    throw UndefinedMetricError("AUROC needs both classes");
  }
  double area = 0.0;
  std::size_t prev_tp = 0, prev_fp = 0;
  for (const auto& p : threshold_sweep(scores, labels)) {
    area += static_cast<double>(p.fp - prev_fp) * static_cast<double>(p.tp + prev_tp) / 2.0;
    prev_tp = p.tp;
    prev_fp = p.fp;
  }
  return area / (static_cast<double>(c.positives) * static_cast<double>(c.negatives));
}

/// Average precision: sum over thresholds of (recall increment x precision).
inline double auprc(Scores scores, Labels labels) {
  const auto c = count_classes(scores, labels);
  if (c.positives == 0) throw UndefinedMetricError("AUPRC needs at least one positive");
  double ap = 0.0;
  std::size_t prev_tp = 0;
  for (const auto& p : threshold_sweep(scores, labels)) {
    if (p.tp != prev_tp) {
      const double precision = static_cast<double>(p.tp) / static_cast<double>(p.tp + p.fp);
      ap += static_cast<double>(p.tp - prev_tp) / static_cast<double>(c.positives) * precision;
    }
    prev_tp = p.tp;
  }
  return ap;
}

/// F1 (== Dice) from confusion counts; 0 when undefined.
inline double f1_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  const std::size_t denom = 2 * tp + fp + fn;
  return denom ? static_cast<double>(2 * tp) / static_cast<double>(denom) : 0.0;
}

/// Dice coefficient 2|A n B| / (|A| + |B|) of two binary masks.
inline double dice(Labels predicted, Labels truth) {
  if (predicted.size() != truth.size()) throw DimensionError("dice: masks differ in length");
  std::size_t inter = 0, a = 0, b = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    a += predicted[i] != 0;
    b += truth[i] != 0;
    inter += (predicted[i] != 0) && (truth[i] != 0);
  }
  return a + b ? static_cast<double>(2 * inter) / static_cast<double>(a + b) : 0.0;
}

struct F1Threshold {
  double threshold = 0.0;
  double f1 = 0.0;   // also the maximum Dice
};

/// Exact F1 maximisation over all distinct cutoffs; ties go to the larger threshold.
inline F1Threshold best_f1_threshold(Scores scores, Labels labels) {
  const auto c = count_classes(scores, labels);
  if (c.positives == 0) throw UndefinedMetricError("F1 threshold needs at least one positive");
  F1Threshold best{0.0, -1.0};
  for (const auto& p : threshold_sweep(scores, labels)) {
    const double f1 = f1_from_counts(p.tp, p.fp, c.positives - p.tp);
    if (f1 > best.f1) best = {p.threshold, f1};
  }
  return best;
}

struct ThresholdStats {
  double accuracy = 0.0;
  double specificity = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
};

/// Confusion-matrix rates with score >= threshold predicted positive.
/// Rates whose denominator is zero are reported as 0.
inline ThresholdStats thresholded_stats(Scores scores, Labels labels, double threshold) {
  count_classes(scores, labels);
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (labels[i]) {
      (pred ? tp : fn) += 1;
    } else {
      (pred ? fp : tn) += 1;
    }
  }
  auto ratio = [](std::size_t a, std::size_t b) {
    return b ? static_cast<double>(a) / static_cast<double>(b) : 0.0;
  };
  ThresholdStats s;
  s.accuracy = ratio(tp + tn, scores.size());
  s.specificity = ratio(tn, tn + fp);
  s.precision = ratio(tp, tp + fp);
  s.f1 = f1_from_counts(tp, fp, fn);
  return s;
}

}  // namespace voxflow::metrics
