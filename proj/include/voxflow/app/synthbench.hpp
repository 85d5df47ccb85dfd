#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "voxflow/app/config.hpp"
#include "voxflow/errors.hpp"
#include "voxflow/store/manifest.hpp"
#include "voxflow/store/tensor_file.hpp"

// Desk-scale surrogate dataset. Every volume is a stack of slices whose
// backbone features are smooth functions of position: a fixed set of
// Gaussian "anatomy" bumps, mixed into each layer's channels by a fixed
// random matrix, with per-volume amplitude jitter and i.i.d. feature noise.
// Test volumes carry one planted, contiguous anomalous region; feature cells
// it covers are shifted along a per-volume random direction in proportion
// to their coverage.

namespace voxflow::app {

struct SynthConfig {
  std::uint64_t seed = 7;
  std::size_t train = 20;
  std::size_t val = 2;
  std::size_t test = 10;          // with planted anomalies
  std::size_t test_normal = 0;    // anomaly-free test volumes
  std::size_t depth = 12;
  std::size_t height = 32;        // original slice resolution
  std::size_t width = 32;
  std::size_t channels_l2 = 24;   // layer 2 at stride 2
  std::size_t channels_l3 = 24;   // layer 3 at stride 4
  std::size_t bumps = 6;
  double anomaly_fraction = 0.05;
  double shift = 0.15;            // per-channel scale of the anomalous shift
  double noise = 0.1;             // per-channel feature noise std
  double jitter = 0.1;            // per-volume amplitude jitter
};

inline void validate(const SynthConfig& c) {
  auto bad = [](const std::string& w) { return ConfigError("invalid synthbench configuration: " + w); };
  if (c.height % 4 != 0 || c.width % 4 != 0 || c.height == 0 || c.width == 0) {
    throw bad("height and width must be positive multiples of 4");
  }
  if (c.depth == 0) throw bad("depth must be positive");
  if (c.channels_l2 == 0 || c.channels_l3 == 0) throw bad("channel counts must be positive");
  if (c.train == 0) throw bad("at least one training volume is required");
  if (!(c.anomaly_fraction > 0.0 && c.anomaly_fraction < 1.0)) throw bad("anomaly fraction must lie in (0, 1)");
  if (c.noise < 0.0 || c.jitter < 0.0) throw bad("noise and jitter must be non-negative");
}

struct PlantedRegion {
  std::vector<std::uint8_t> mask;   // [D, H, W]
  std::size_t voxels = 0;
};

/// Exactly round(fraction * D*H*W) voxels closest to a random centre under a
/// random anisotropic metric. Every chosen voxel has a chosen neighbour one
/// step nearer the centre, so the region is 6-connected.
inline PlantedRegion plant_region(std::size_t depth, std::size_t height, std::size_t width,
                                  double fraction, std::mt19937_64& rng) {
  const std::size_t total = depth * height * width;
  const auto target = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double cz = (0.3 + 0.4 * u(rng)) * static_cast<double>(depth);
  const double cy = (0.3 + 0.4 * u(rng)) * static_cast<double>(height);
  const double cx = (0.3 + 0.4 * u(rng)) * static_cast<double>(width);
  // Depth is measured in slices, the plane in pixels; a slice spans several pixels.
  const double sz = 3.0 * (0.8 + 0.4 * u(rng));
  const double sy = 0.8 + 0.4 * u(rng);
  const double sx = 0.8 + 0.4 * u(rng);
  std::vector<double> dist(total);
  for (std::size_t z = 0; z < depth; ++z) {
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const double dz = (static_cast<double>(z) + 0.5 - cz) * sz;
        const double dy = (static_cast<double>(y) + 0.5 - cy) * sy;
        const double dx = (static_cast<double>(x) + 0.5 - cx) * sx;
        dist[(z * height + y) * width + x] = dz * dz + dy * dy + dx * dx;
      }
    }
  }
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
  PlantedRegion r;
  r.mask.assign(total, 0);
  for (std::size_t i = 0; i < target; ++i) r.mask[order[i]] = 1;
  r.voxels = target;
  return r;
}

namespace detail {

struct Anatomy {
  std::vector<double> cy, cx, width, phase;
  std::vector<std::vector<double>> mix;    // per layer: [C_l x K]
  std::vector<std::vector<double>> offset; // per layer: [C_l]
};

inline Anatomy make_anatomy(const SynthConfig& c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  Anatomy a;
  for (std::size_t k = 0; k < c.bumps; ++k) {
    a.cy.push_back(0.15 + 0.7 * u(rng));
    a.cx.push_back(0.15 + 0.7 * u(rng));
    a.width.push_back(0.15 + 0.15 * u(rng));
    a.phase.push_back(2.0 * M_PI * u(rng));
  }
  for (std::size_t ch : {c.channels_l2, c.channels_l3}) {
    std::vector<double> mix(ch * c.bumps), off(ch);
    for (auto& v : mix) v = g(rng) / std::sqrt(static_cast<double>(c.bumps));
    for (auto& v : off) v = 0.1 * g(rng);
    a.mix.push_back(std::move(mix));
    a.offset.push_back(std::move(off));
  }
  return a;
}

}  // namespace detail

struct SynthSummary {
  fs::path manifest;
  std::vector<std::size_t> planted_voxels;   // per anomalous test volume
};

/// Writes the dataset (feature tensors, masks, manifest.json) under `out`.
inline SynthSummary synthbench(const SynthConfig& c, const fs::path& out) {
  validate(c);
  fs::create_directories(out / "features");
  fs::create_directories(out / "masks");
  std::mt19937_64 rng(derive_seed(c.seed, 100));
  const detail::Anatomy anatomy = detail::make_anatomy(c, rng);
  const std::size_t strides[2] = {2, 4};
  const std::size_t channels[2] = {c.channels_l2, c.channels_l3};

  store::DatasetManifest manifest;
  manifest.layers = {2, 3};
  SynthSummary summary;

  struct Plan {
    std::string id;
    store::Split split;
    bool anomalous;
  };
  std::vector<Plan> plans;
  auto name = [](const char* prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%03zu", prefix, i);
    return std::string(buf);
  };
  for (std::size_t i = 0; i < c.train; ++i) plans.push_back({name("train", i), store::Split::kTrain, false});
  for (std::size_t i = 0; i < c.val; ++i) plans.push_back({name("val", i), store::Split::kVal, false});
  for (std::size_t i = 0; i < c.test; ++i) plans.push_back({name("test", i), store::Split::kTest, true});
  for (std::size_t i = 0; i < c.test_normal; ++i) {
    plans.push_back({name("test_normal", i), store::Split::kTest, false});
  }

  for (std::size_t vi = 0; vi < plans.size(); ++vi) {
    const Plan& plan = plans[vi];
    std::mt19937_64 vrng(derive_seed(c.seed, 200, vi));
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> amp(c.bumps);
    for (auto& a : amp) a = 1.0 + c.jitter * g(vrng);

    PlantedRegion region;
    if (plan.anomalous) {
      region = plant_region(c.depth, c.height, c.width, c.anomaly_fraction, vrng);
      summary.planted_voxels.push_back(region.voxels);
    } else {
      region.mask.assign(c.depth * c.height * c.width, 0);
    }
    std::vector<std::vector<double>> shift(2);
    for (int l = 0; l < 2; ++l) {
      shift[l].resize(channels[l]);
      for (auto& s : shift[l]) s = c.shift * g(vrng);
    }

    store::VolumeEntry entry;
    entry.id = plan.id;
    entry.split = plan.split;
    entry.depth = c.depth;
    entry.height = c.height;
    entry.width = c.width;
    const fs::path vdir = out / "features" / plan.id;
    fs::create_directories(vdir);
    for (std::size_t z = 0; z < c.depth; ++z) {
      store::SliceEntry slice;
      const double zf = (static_cast<double>(z) + 0.5) / static_cast<double>(c.depth);
      for (int l = 0; l < 2; ++l) {
        const std::size_t s = strides[l], hl = c.height / s, wl = c.width / s, cl = channels[l];
        Tensor map(Dims{cl, hl, wl});
        std::vector<double> latent(c.bumps);
        for (std::size_t y = 0; y < hl; ++y) {
          for (std::size_t x = 0; x < wl; ++x) {
            const double py = (static_cast<double>(y) + 0.5) / static_cast<double>(hl);
            const double px = (static_cast<double>(x) + 0.5) / static_cast<double>(wl);
            for (std::size_t k = 0; k < c.bumps; ++k) {
              const double dy = py - anatomy.cy[k], dx = px - anatomy.cx[k];
              const double depth_gain = 1.0 + 0.3 * std::sin(M_PI * zf + anatomy.phase[k]);
              latent[k] = amp[k] * depth_gain *
                          std::exp(-(dy * dy + dx * dx) / (2.0 * anatomy.width[k] * anatomy.width[k]));
            }
            std::size_t covered = 0;
            for (std::size_t yy = y * s; yy < (y + 1) * s; ++yy) {
              for (std::size_t xx = x * s; xx < (x + 1) * s; ++xx) {
                covered += region.mask[(z * c.height + yy) * c.width + xx];
              }
            }
            const double weight = static_cast<double>(covered) / static_cast<double>(s * s);
            for (std::size_t ch = 0; ch < cl; ++ch) {
              double v = anatomy.offset[l][ch];
              for (std::size_t k = 0; k < c.bumps; ++k) v += anatomy.mix[l][ch * c.bumps + k] * latent[k];
              v += weight * shift[l][ch];
              v += c.noise * g(vrng);
              map[(ch * hl + y) * wl + x] = static_cast<float>(v);
            }
          }
        }
        char file[32];
        std::snprintf(file, sizeof file, "s%03zu_l%d.fsx", z, l + 2);
        store::write_tensor(vdir / file, map);
        slice.layer_files.push_back(vdir / file);
      }
      entry.slices.push_back(std::move(slice));
    }
    if (plan.split == store::Split::kTest) {
      Tensor mask(Dims{c.depth, c.height, c.width});
      for (std::size_t i = 0; i < region.mask.size(); ++i) mask[i] = region.mask[i] ? 1.0f : 0.0f;
      const fs::path mpath = out / "masks" / (plan.id + ".fsx");
      store::write_tensor(mpath, mask);
      entry.mask = mpath;
    }
    manifest.volumes.push_back(std::move(entry));
  }
  summary.manifest = out / "manifest.json";
  store::write_manifest(summary.manifest, manifest);
  return summary;
}

}  // namespace voxflow::app
