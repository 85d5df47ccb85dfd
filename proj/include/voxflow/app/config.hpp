#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "voxflow/cnf/flow.hpp"
#include "voxflow/errors.hpp"
#include "voxflow/objective/objective.hpp"
#include "voxflow/pipeline/encoder.hpp"

namespace voxflow::app {

namespace fs = std::filesystem;

struct RunConfig {
  fs::path manifest;
  fs::path checkpoint;
  fs::path out;
  fs::path scores;           // optional: read persisted score tensors in eval

  std::size_t patch = 3;
  std::size_t radius = 1;
  std::size_t channels = 1024;
  std::size_t layers = 8;
  std::size_t cond_dim = 128;
  std::size_t hidden = 0;    // 0 = same as channels
  double clamp = 1.9;

  objective::SppConfig spp;
  double learning_rate = 1e-3;
  std::size_t steps = 2000;
  std::size_t voxel_cap = 4096;
  std::uint64_t seed = 0;
  double fpr_limit = 0.3;
  std::size_t val_every = 1;         // 0 disables validation
  std::size_t checkpoint_every = 100;

  pipeline::EncoderOptions encoder() const { return {patch, channels}; }

  cnf::FlowConfig flow() const {
    cnf::FlowConfig c;
    c.dim = channels;
    c.cond_dim = cond_dim;
    c.hidden = hidden;
    c.layers = layers;
    c.clamp = clamp;
    return c;
  }
};

inline void validate(const RunConfig& c) {
  auto bad = [](const std::string& what) { return ConfigError("invalid configuration: " + what); };
  if (c.patch == 0 || c.patch % 2 == 0) throw bad("--patch must be odd and positive");
  if (c.channels == 0) throw bad("--dim must be positive");
  if (c.layers == 0) throw bad("--layers must be positive");
  if (c.cond_dim % 4 != 0) throw bad("--pos-dim must be a multiple of 4");
  if (c.channels == 1 && c.cond_dim == 0) throw bad("a one-dimensional flow needs --pos-dim > 0");
  if (!(c.clamp > 0.0)) throw bad("clamp must be positive");
  if (!(c.learning_rate > 0.0)) throw bad("--lr must be positive");
  if (c.voxel_cap == 0) throw bad("--voxels must be positive");
  if (!(c.fpr_limit > 0.0 && c.fpr_limit <= 1.0)) throw bad("--fpr-limit must lie in (0, 1]");
  try {
    objective::validate(c.spp);
  } catch (const ParameterError& e) {
    throw bad(e.what());
  }
}

inline nlohmann::json to_json(const RunConfig& c) {
  return {
      {"manifest", c.manifest.generic_string()},
      {"checkpoint", c.checkpoint.generic_string()},
      {"out", c.out.generic_string()},
      {"patch", c.patch},
      {"radius", c.radius},
      {"dim", c.channels},
      {"layers", c.layers},
      {"pos_dim", c.cond_dim},
      {"hidden", c.hidden ? c.hidden : c.channels},
      {"clamp", c.clamp},
      {"spp", objective::to_string(c.spp.variant)},
      {"beta", c.spp.beta},
      {"tau", c.spp.tau},
      {"margin", c.spp.margin},
      {"sigma", c.spp.sigma},
      {"lr", c.learning_rate},
      {"steps", c.steps},
      {"voxels", c.voxel_cap},
      {"seed", c.seed},
      {"fpr_limit", c.fpr_limit},
      {"val_every", c.val_every},
      {"checkpoint_every", c.checkpoint_every},
  };
}

/// Pipeline settings stored alongside a checkpoint so scoring re-encodes
/// volumes the way training did.
inline nlohmann::json pipeline_json(const RunConfig& c) {
  return {{"patch", c.patch}, {"radius", c.radius}};
}

/// splitmix64 finaliser over (seed, stream, index): independent,
/// reproducible RNG seeds for each consumer.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
  std::uint64_t z = seed ^ (stream * 0x9E3779B97F4A7C15ULL) ^ (index * 0xD1B54A32D192ED03ULL);
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace streams {
inline constexpr std::uint64_t kModelInit = 1;
inline constexpr std::uint64_t kEpochOrder = 2;
inline constexpr std::uint64_t kVoxelSample = 3;
inline constexpr std::uint64_t kNoise = 4;
inline constexpr std::uint64_t kPairing = 5;
inline constexpr std::uint64_t kValidation = 6;
}  // namespace streams

}  // namespace voxflow::app
