#pragma once

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "voxflow/app/config.hpp"
#include "voxflow/app/score.hpp"
#include "voxflow/app/synthbench.hpp"
#include "voxflow/app/train.hpp"
#include "voxflow/errors.hpp"

namespace voxflow::app {

enum ExitCode : int { kOk = 0, kConfigExit = 2, kDataExit = 3, kNumericExit = 4 };

/// Maps the in-flight exception to a process exit code and prints it.
inline int report_exception(std::ostream& err) {
  try {
    throw;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataExit;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kNumericExit;
  } catch (const ContractError& e) {
    err << "internal error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kDataExit;
  } catch (const nlohmann::json::exception& e) {
    err << "data error: " << e.what() << '\n';
    return kDataExit;
  }
}

/// Keeps large per-step tensor buffers on the heap instead of fresh mmaps.
inline void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 64 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif
}

namespace detail {

inline void add_model_flags(CLI::App* cmd, RunConfig& c) {
  cmd->add_option("--patch", c.patch, "patch aggregation size p (odd)");
  cmd->add_option("--radius", c.radius, "depth aggregation radius r");
}

inline void add_spp_flags(CLI::App* cmd, RunConfig& c, std::string& spp) {
  cmd->add_option("--spp", spp, "bgspp|triplet|prl|none")->capture_default_str();
  cmd->add_option("--sigma", c.spp.sigma, "anomaly synthesis noise std");
  cmd->add_option("--beta", c.spp.beta, "BG-SPP normal-tail percentile");
  cmd->add_option("--tau", c.spp.tau, "BG-SPP margin");
  cmd->add_option("--margin", c.spp.margin, "triplet / ranking margin");
}

}  // namespace detail

/// Parses argv and runs one subcommand. Returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"voxflow: volumetric anomaly detection with a conditional normalizing flow"};
  app.require_subcommand(1);
  RunConfig config;
  std::string spp = "triplet";
  std::vector<std::string> volumes;
  SynthConfig synth;
  fs::path synth_out;

  auto* train = app.add_subcommand("train", "train the flow on the manifest's train split");
  train->add_option("--manifest", config.manifest)->required();
  train->add_option("--out", config.out)->required();
  train->add_option("--checkpoint", config.checkpoint, "checkpoint directory (default <out>/checkpoint)");
  detail::add_spp_flags(train, config, spp);
  detail::add_model_flags(train, config);
  train->add_option("--steps", config.steps);
  train->add_option("--seed", config.seed);
  train->add_option("--dim", config.channels, "flow dimensionality after channel reduction");
  train->add_option("--pos-dim", config.cond_dim, "positional-encoding width");
  train->add_option("--hidden", config.hidden, "subnet hidden width (0 = --dim)");
  train->add_option("--layers", config.layers, "coupling layers");
  train->add_option("--lr", config.learning_rate);
  train->add_option("--voxels", config.voxel_cap, "voxel features per step");
  train->add_option("--val-every", config.val_every, "validation cadence in steps (0 = off)");
  train->add_option("--checkpoint-every", config.checkpoint_every, "checkpoint cadence in steps (0 = final only)");

  auto* score = app.add_subcommand("score", "write per-volume score tensors");
  score->add_option("--manifest", config.manifest)->required();
  score->add_option("--checkpoint", config.checkpoint)->required();
  score->add_option("--out", config.out)->required();
  auto* score_patch = score->add_option("--patch", config.patch);
  auto* score_radius = score->add_option("--radius", config.radius);
  score->add_option("--volumes", volumes, "volume ids (default: test split)");

  auto* eval = app.add_subcommand("eval", "evaluate masked test volumes and write report.json");
  eval->add_option("--manifest", config.manifest)->required();
  eval->add_option("--checkpoint", config.checkpoint);
  eval->add_option("--scores", config.scores, "directory of persisted scores (instead of --checkpoint)");
  eval->add_option("--out", config.out)->required();
  eval->add_option("--fpr-limit", config.fpr_limit);
  auto* eval_patch = eval->add_option("--patch", config.patch);
  auto* eval_radius = eval->add_option("--radius", config.radius);

  auto* bench = app.add_subcommand("synthbench", "generate the synthetic benchmark");
  bench->add_option("--out", synth_out)->required();
  bench->add_option("--seed", synth.seed);
  bench->add_option("--train", synth.train);
  bench->add_option("--val", synth.val);
  bench->add_option("--test", synth.test, "test volumes with planted anomalies");
  bench->add_option("--test-normal", synth.test_normal, "anomaly-free test volumes");
  bench->add_option("--depth", synth.depth);
  bench->add_option("--height", synth.height);
  bench->add_option("--width", synth.width);
  bench->add_option("--anomaly-fraction", synth.anomaly_fraction);
  bench->add_option("--shift", synth.shift);
  bench->add_option("--noise", synth.noise);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigExit;
  }

  try {
    if (*train || *score || *eval) config.spp.variant = objective::parse_spp_variant(spp);
    if (*train) {
      const auto result = cmd_train(config);
      const auto& last = result.log.empty() ? StepRecord{} : result.log.back();
      out << "trained " << result.log.size() << " steps; final loss " << last.loss.total << '\n';
    } else if (*score) {
      const auto scored = cmd_score(config, volumes, score_patch->count() > 0, score_radius->count() > 0);
      out << "scored " << scored.size() << " volumes\n";
    } else if (*eval) {
      if (config.scores.empty() && config.checkpoint.empty()) {
        throw ConfigError("eval needs --checkpoint or --scores");
      }
      const auto report = cmd_eval(config, eval_patch->count() > 0, eval_radius->count() > 0);
      out << metrics::to_json(report).dump(1) << '\n';
    } else if (*bench) {
      const auto summary = synthbench(synth, synth_out);
      out << "wrote " << summary.manifest.string() << '\n';
    }
  } catch (...) {
    return report_exception(err);
  }
  return kOk;
}

}  // namespace voxflow::app
