#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "voxflow/app/config.hpp"
#include "voxflow/app/train.hpp"
#include "voxflow/cnf/checkpoint.hpp"
#include "voxflow/errors.hpp"
#include "voxflow/metrics/evaluate.hpp"
#include "voxflow/pipeline/encoder.hpp"
#include "voxflow/scoring/scorer.hpp"
#include "voxflow/store/manifest.hpp"
#include "voxflow/store/tensor_file.hpp"

namespace voxflow::app {

struct LoadedModel {
  cnf::FlowModel<float> model;
  pipeline::EncoderOptions encoder;
  std::size_t radius = 1;
};

/// Loads a checkpoint; patch and radius come from the checkpoint unless the
/// caller marks them as overridden.
inline LoadedModel load_model(const RunConfig& config, bool override_patch = false,
                              bool override_radius = false) {
  if (config.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  cnf::Checkpoint ck = cnf::load_checkpoint(config.checkpoint);
  LoadedModel m;
  m.encoder.channels = ck.model.config.dim;
  m.encoder.patch = ck.pipeline.value("patch", config.patch);
  m.radius = ck.pipeline.value("radius", config.radius);
  if (override_patch) m.encoder.patch = config.patch;
  if (override_radius) m.radius = config.radius;
  m.model = std::move(ck.model);
  return m;
}

inline scoring::ScoreVolume score_entry(const LoadedModel& m, const store::DatasetManifest& manifest,
                                        const store::VolumeEntry& v) {
  pipeline::VolumeEmbedding emb;
  try {
    emb = pipeline::encode_volume(manifest, v, m.encoder, m.radius);
  } catch (const ParameterError& e) {
    throw ConfigError("volume '" + v.id + "' does not match the checkpoint: " + e.what());
  }
  const std::size_t out_h = v.height.value_or(emb.height());
  const std::size_t out_w = v.width.value_or(emb.width());
  return scoring::score_volume(m.model, emb, out_h, out_w);
}

inline Tensor to_float(const BasicTensor<double>& t) { return t.cast<float>(); }

/// Persists logp, normalized, upscaled and slice_scores tensors under dir.
inline void write_score_volume(const fs::path& dir, const scoring::ScoreVolume& sv) {
  fs::create_directories(dir);
  store::write_tensor(dir / "logp.fsx", to_float(sv.log_likelihood));
  store::write_tensor(dir / "normalized.fsx", to_float(sv.normalized));
  store::write_tensor(dir / "upscaled.fsx", to_float(sv.upscaled));
  store::write_tensor(dir / "slice_scores.fsx",
                      Tensor(Dims{sv.slice_scores.size()},
                             std::vector<float>(sv.slice_scores.begin(), sv.slice_scores.end())));
}

/// Rebuilds a score volume from its persisted log-likelihood field. The
/// float normalized/upscaled files saturate near 1, so derived scores are
/// recomputed in double.
inline scoring::ScoreVolume read_score_volume(const fs::path& dir, std::string id, std::size_t out_h,
                                              std::size_t out_w) {
  const Tensor ll = store::read_tensor(dir / "logp.fsx");
  if (ll.rank() != 3) throw FormatError("volume '" + id + "': logp must be [D,H,W]");
  return scoring::scores_from_log_likelihood(std::move(id), ll.cast<double>(), out_h, out_w);
}

/// Scores the named volumes (all test volumes when `ids` is empty) and
/// writes them under out/scores/<id>/.
inline std::vector<scoring::ScoreVolume> cmd_score(const RunConfig& config, const std::vector<std::string>& ids,
                                                   bool override_patch = false, bool override_radius = false) {
  validate(config);
  if (config.out.empty()) throw ConfigError("--out is required");
  const LoadedModel m = load_model(config, override_patch, override_radius);
  const auto manifest = store::load_manifest(config.manifest);
  std::vector<const store::VolumeEntry*> targets;
  if (ids.empty()) {
    targets = manifest.split(store::Split::kTest);
  } else {
    for (const auto& id : ids) targets.push_back(&manifest.volume(id));
  }
  std::vector<scoring::ScoreVolume> out;
  for (const auto* v : targets) {
    out.push_back(score_entry(m, manifest, *v));
    write_score_volume(config.out / "scores" / v->id, out.back());
  }
  return out;
}

/// Assembles evaluation inputs from score volumes and their masks.
inline metrics::EvalReport evaluate_scores(const std::vector<scoring::ScoreVolume>& scores,
                                           const std::vector<store::MaskVolume>& masks,
                                           double fpr_limit) {
  if (scores.empty()) throw DataError("no scored test volumes with masks");
  std::vector<metrics::VolumeEval> vols;
  std::vector<std::uint8_t> image_labels;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& sv = scores[i];
    const auto& mask = masks[i].voxels;
    if (sv.upscaled.dims() != mask.dims()) {
      throw DataError("volume '" + sv.id + "': score dims " + dims_to_string(sv.upscaled.dims()) +
                      " differ from mask dims " + dims_to_string(mask.dims()));
    }
    metrics::VolumeEval ve;
    ve.id = sv.id;
    ve.grid = {mask.dim(0), mask.dim(1), mask.dim(2)};
    ve.scores.assign(sv.upscaled.data().begin(), sv.upscaled.data().end());
    ve.mask.resize(mask.size());
    for (std::size_t k = 0; k < mask.size(); ++k) ve.mask[k] = mask[k] != 0.0f;
    const auto labels = metrics::slice_labels(ve);
    image_labels.insert(image_labels.end(), labels.begin(), labels.end());
    vols.push_back(std::move(ve));
  }
  const auto image_scores = scoring::image_scores_dataset(scores);
  return metrics::evaluate(vols, image_scores, image_labels, {fpr_limit});
}

/// Evaluates every masked test volume and writes out/report.json. Scores are
/// read from config.scores when given, otherwise computed from the checkpoint.
inline metrics::EvalReport cmd_eval(const RunConfig& config, bool override_patch = false,
                                    bool override_radius = false) {
  validate(config);
  if (config.out.empty()) throw ConfigError("--out is required");
  const auto manifest = store::load_manifest(config.manifest);
  std::optional<LoadedModel> model;
  if (config.scores.empty()) model = load_model(config, override_patch, override_radius);
  std::vector<scoring::ScoreVolume> scores;
  std::vector<store::MaskVolume> masks;
  std::vector<std::string> unmasked;
  for (const auto* v : manifest.split(store::Split::kTest)) {
    if (!v->mask) {
      unmasked.push_back(v->id);
      continue;
    }
    masks.push_back(store::load_mask(*v));
    if (model) {
      scores.push_back(score_entry(*model, manifest, *v));
    } else {
      const auto& dims = masks.back().voxels.dims();
      scores.push_back(read_score_volume(config.scores / v->id, v->id, dims[1], dims[2]));
    }
  }
  auto report = evaluate_scores(scores, masks, config.fpr_limit);
  for (const auto& id : unmasked) report.warnings.push_back("volume '" + id + "' has no mask; not evaluated");
  fs::create_directories(config.out);
  write_json(config.out / "report.json", metrics::to_json(report));
  return report;
}

}  // namespace voxflow::app
