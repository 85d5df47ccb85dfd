#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "voxflow/errors.hpp"
#include "voxflow/metrics/ranking.hpp"
#include "voxflow/metrics/regions.hpp"

namespace voxflow::metrics {

struct EvalOptions {
  double fpr_limit = 0.3;
};

/// Pixel-level inputs of one test volume: normalized scores and binary mask
/// on the same [D, H, W] grid.
struct VolumeEval {
  std::string id;
  Grid3 grid;
  std::vector<double> scores;
  std::vector<std::uint8_t> mask;
};

struct PixelMetrics {
  double auroc = 0, auprc = 0, pro = 0, max_dice = 0, specificity = 0, accuracy = 0, precision = 0;
  double threshold = 0;
};

struct ImageMetrics {
  double auroc = 0, auprc = 0, max_dice = 0, specificity = 0, accuracy = 0, precision = 0;
  double threshold = 0;
};

struct VolumeMetrics {
  std::string id;
  PixelMetrics pixel;
};

struct EvalReport {
  PixelMetrics pixel;                  // mean over evaluated volumes
  std::optional<ImageMetrics> image;   // absent when slice labels are single-class
  std::vector<VolumeMetrics> volumes;
  std::size_t skipped_volumes = 0;
  std::vector<std::string> warnings;
};

inline PixelMetrics pixel_metrics(const VolumeEval& v, const EvalOptions& opt) {
  PixelMetrics m;
  m.auroc = auroc(v.scores, v.mask);
  m.auprc = auprc(v.scores, v.mask);
  m.pro = pro(v.scores, v.mask, v.grid, opt.fpr_limit);
  const auto best = best_f1_threshold(v.scores, v.mask);
  m.max_dice = best.f1;
  m.threshold = best.threshold;
  const auto stats = thresholded_stats(v.scores, v.mask, best.threshold);
  m.specificity = stats.specificity;
  m.accuracy = stats.accuracy;
  m.precision = stats.precision;
  return m;
}

inline ImageMetrics image_metrics(Scores scores, Labels labels) {
  ImageMetrics m;
  m.auroc = auroc(scores, labels);
  m.auprc = auprc(scores, labels);
  const auto best = best_f1_threshold(scores, labels);
  m.max_dice = best.f1;
  m.threshold = best.threshold;
  const auto stats = thresholded_stats(scores, labels, best.threshold);
  m.specificity = stats.specificity;
  m.accuracy = stats.accuracy;
  m.precision = stats.precision;
  return m;
}

/// A slice is positive when its mask holds any positive voxel.
inline std::vector<std::uint8_t> slice_labels(const VolumeEval& v) {
  const std::size_t plane = v.grid.height * v.grid.width;
  std::vector<std::uint8_t> out(v.grid.depth, 0);
  for (std::size_t i = 0; i < v.mask.size(); ++i) {
    if (v.mask[i]) out[i / plane] = 1;
  }
  return out;
}

/// Pixel metrics per volume then averaged; image metrics once over the
/// dataset-normalized slice scores. Volumes whose metrics are undefined are
/// skipped and counted.
inline EvalReport evaluate(const std::vector<VolumeEval>& volumes, Scores image_scores,
                           Labels image_labels, const EvalOptions& opt = {}) {
  if (volumes.empty()) throw ParameterError("evaluate: no test volumes");
  EvalReport report;
  for (const auto& v : volumes) {
    try {
      report.volumes.push_back({v.id, pixel_metrics(v, opt)});
    } catch (const UndefinedMetricError& e) {
      report.skipped_volumes += 1;
      report.warnings.push_back("volume '" + v.id + "' skipped: " + e.what());
    }
  }
  if (report.volumes.empty()) {
    throw UndefinedMetricError("no test volume has defined pixel-level metrics");
  }
  auto& p = report.pixel;
  for (const auto& vm : report.volumes) {
    p.auroc += vm.pixel.auroc;
    p.auprc += vm.pixel.auprc;
    p.pro += vm.pixel.pro;
    p.max_dice += vm.pixel.max_dice;
    p.specificity += vm.pixel.specificity;
    p.accuracy += vm.pixel.accuracy;
    p.precision += vm.pixel.precision;
    p.threshold += vm.pixel.threshold;
  }
  const double n = static_cast<double>(report.volumes.size());
  for (double* f : {&p.auroc, &p.auprc, &p.pro, &p.max_dice, &p.specificity, &p.accuracy,
                    &p.precision, &p.threshold}) {
    *f /= n;
  }
  try {
    report.image = image_metrics(image_scores, image_labels);
  } catch (const UndefinedMetricError& e) {
    report.warnings.push_back(std::string("image-level metrics skipped: ") + e.what());
  }
  return report;
}

// Rates are reported x100 with two decimals.
inline double percent(double rate) { return std::round(rate * 10000.0) / 100.0; }

inline nlohmann::json to_json(const PixelMetrics& m) {
  return {{"AUROC", percent(m.auroc)},     {"AUPRC", percent(m.auprc)},
          {"PRO", percent(m.pro)},         {"maxDice", percent(m.max_dice)},
          {"Spec", percent(m.specificity)}, {"ACC", percent(m.accuracy)},
          {"Prec", percent(m.precision)},  {"threshold", m.threshold}};
}

inline nlohmann::json to_json(const ImageMetrics& m) {
  return {{"AUROC", percent(m.auroc)},     {"AUPRC", percent(m.auprc)},
          {"maxDice", percent(m.max_dice)}, {"Spec", percent(m.specificity)},
          {"ACC", percent(m.accuracy)},    {"Prec", percent(m.precision)},
          {"threshold", m.threshold}};
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["pixel"] = to_json(r.pixel);
  j["image"] = r.image ? to_json(*r.image) : nlohmann::json(nullptr);
  j["volumes_evaluated"] = r.volumes.size();
  j["volumes_skipped"] = r.skipped_volumes;
  j["warnings"] = r.warnings;
  nlohmann::json per = nlohmann::json::array();
  for (const auto& v : r.volumes) {
    nlohmann::json jv = to_json(v.pixel);
    jv["id"] = v.id;
    per.push_back(std::move(jv));
  }
  j["per_volume"] = std::move(per);
  return j;
}

}  // namespace voxflow::metrics
