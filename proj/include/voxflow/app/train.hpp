#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "voxflow/app/config.hpp"
#include "voxflow/cnf/checkpoint.hpp"
#include "voxflow/cnf/flow.hpp"
#include "voxflow/errors.hpp"
#include "voxflow/numerics/adam.hpp"
#include "voxflow/objective/objective.hpp"
#include "voxflow/pipeline/encoder.hpp"
#include "voxflow/scoring/scorer.hpp"
#include "voxflow/store/manifest.hpp"

namespace voxflow::app {

struct StepRecord {
  std::size_t step = 0;
  objective::LossParts loss;
  std::optional<double> val_log_likelihood;
};

struct TrainResult {
  cnf::FlowModel<float> model;
  std::vector<StepRecord> log;
  std::optional<double> initial_val_log_likelihood;
};

/// Voxel rows (features and conditions) drawn from an embedded volume.
struct VoxelSample {
  Tensor features;     // [n x d]
  Tensor conditions;   // [n x P]
};

/// All voxels when the volume fits under `cap`, otherwise `cap` voxels drawn
/// without replacement (kept in grid order).
inline VoxelSample sample_voxels(const pipeline::VolumeEmbedding& v, std::size_t cond_dim,
                                 std::size_t cap, std::uint64_t seed) {
  const std::size_t n = v.voxels(), d = v.channels();
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  if (n > cap) {
    std::mt19937_64 rng(seed);
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(cap);
    std::sort(rows.begin(), rows.end());
  }
  const Tensor grid_cond = scoring::voxel_conditions(1, v.height(), v.width(), cond_dim);
  const std::size_t p = grid_cond.cols(), plane = v.height() * v.width();
  VoxelSample s{Tensor(Dims{rows.size(), d}), Tensor(Dims{rows.size(), p})};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(v.grid.data().begin() + rows[i] * d, d, s.features.data().begin() + i * d);
    std::copy_n(grid_cond.data().begin() + (rows[i] % plane) * p, p, s.conditions.data().begin() + i * p);
  }
  return s;
}

inline double mean_log_likelihood(const cnf::FlowModel<float>& model, const std::vector<VoxelSample>& sets) {
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto& s : sets) {
    const auto ll = cnf::log_likelihood_chunked(model, s.features, s.conditions);
    for (float v : ll.data()) acc += v;
    n += ll.size();
  }
  return n ? acc / static_cast<double>(n) : 0.0;
}

inline void write_loss_log(const fs::path& path, const std::vector<StepRecord>& log) {
  std::ofstream out(path, std::ios::trunc);
  out << "step,loss,nll,spp,boundary,val_log_likelihood\n";
  char buf[256];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g,", r.step, r.loss.total, r.loss.nll,
                  r.loss.spp, r.loss.boundary);
    out << buf;
    if (r.val_log_likelihood) {
      std::snprintf(buf, sizeof buf, "%.9g", *r.val_log_likelihood);
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw DataError("cannot write loss log " + path.string());
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::trunc);
  out << j.dump(1) << '\n';
  if (!out) throw DataError("cannot write " + path.string());
}

/// Trains the flow on the manifest's train split, one volume per step.
/// Outputs under config.out: config.json, loss_log.csv and the checkpoint
/// (config.checkpoint, default out/checkpoint).
inline TrainResult cmd_train(RunConfig config) {
  validate(config);
  if (config.out.empty()) throw ConfigError("--out is required");
  if (config.checkpoint.empty()) config.checkpoint = config.out / "checkpoint";
  const auto manifest = store::load_manifest(config.manifest);
  const auto train = manifest.split(store::Split::kTrain);
  if (train.empty()) throw ConfigError("manifest has no train volumes");
  fs::create_directories(config.out);
  write_json(config.out / "config.json", to_json(config));

  const auto enc = config.encoder();
  auto encode = [&](const store::VolumeEntry& v) {
    try {
      return pipeline::encode_volume(manifest, v, enc, config.radius);
    } catch (const ParameterError& e) {
      throw ConfigError("volume '" + v.id + "': " + e.what());
    }
  };

  TrainResult result;
  result.model = cnf::make_flow<float>(config.flow(), derive_seed(config.seed, streams::kModelInit));
  auto& model = result.model;
  auto params = model.parameters();
  AdamOptions adam_options;
  adam_options.learning_rate = config.learning_rate;
  auto adam = make_adam_state<float>(params, adam_options);

  std::vector<VoxelSample> validation;
  const auto val = manifest.split(store::Split::kVal);
  if (config.val_every) {
    for (std::size_t i = 0; i < val.size(); ++i) {
      validation.push_back(sample_voxels(encode(*val[i]), config.cond_dim, config.voxel_cap,
                                         derive_seed(config.seed, streams::kValidation, i)));
    }
    if (!validation.empty()) result.initial_val_log_likelihood = mean_log_likelihood(model, validation);
  }

  const nlohmann::json pipeline = pipeline_json(config);
  if (config.checkpoint_every) cnf::save_checkpoint(config.checkpoint, model, pipeline);
  std::vector<std::size_t> order(train.size());
  for (std::size_t step = 0; step < config.steps; ++step) {
    const std::size_t epoch = step / train.size(), pos = step % train.size();
    if (pos == 0) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::mt19937_64 rng(derive_seed(config.seed, streams::kEpochOrder, epoch));
      std::shuffle(order.begin(), order.end(), rng);
    }
    const auto embedding = encode(*train[order[pos]]);
    if (embedding.channels() != config.channels) {
      throw ConfigError("encoded width " + std::to_string(embedding.channels()) + " != --dim");
    }
    VoxelSample sample = sample_voxels(embedding, config.cond_dim, config.voxel_cap,
                                       derive_seed(config.seed, streams::kVoxelSample, step));
    objective::Batch<float> batch;
    batch.anomalous = objective::synthesize_anomalies(sample.features, config.spp.sigma,
                                                      derive_seed(config.seed, streams::kNoise, step));
    batch.anomalous_cond = sample.conditions;
    batch.normal = std::move(sample.features);
    batch.normal_cond = std::move(sample.conditions);

    StepRecord record;
    record.step = step;
    try {
      auto lg = objective::total_loss_gradient(model, batch, config.spp,
                                               derive_seed(config.seed, streams::kPairing, step));
      record.loss = lg.parts;
      adam_step<float>(adam, params, lg.grads);
    } catch (const NumericError& e) {
      write_loss_log(config.out / "loss_log.csv", result.log);
      throw NumericError("training step " + std::to_string(step) + ": " + e.what());
    }
    if (!validation.empty() && (step + 1) % config.val_every == 0) {
      record.val_log_likelihood = mean_log_likelihood(model, validation);
    }
    result.log.push_back(record);
    if (config.checkpoint_every && (step + 1) % config.checkpoint_every == 0 && step + 1 < config.steps) {
      cnf::save_checkpoint(config.checkpoint, model, pipeline);
    }
  }
  cnf::save_checkpoint(config.checkpoint, model, pipeline);
  write_loss_log(config.out / "loss_log.csv", result.log);
  return result;
}

}  // namespace voxflow::app
