#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "voxflow/cnf/flow.hpp"
#include "voxflow/errors.hpp"
#include "voxflow/store/tensor_file.hpp"

// Checkpoint directory:
//   model.json        header (flow hyperparameters + free-form "pipeline" object)
//   param_000.fsx ... one TensorFile per parameter in FlowModel::parameters() order

namespace voxflow::cnf {

namespace fs = std::filesystem;

struct Checkpoint {
  FlowModel<float> model;
  nlohmann::json pipeline = nlohmann::json::object();
};

inline std::string param_file_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "param_%03zu.fsx", i);
  return buf;
}

/// Writes into `dir` via a sibling temporary directory that is renamed into
/// place, so an interrupted save never clobbers the previous checkpoint.
inline void save_checkpoint(const fs::path& dir, const FlowModel<float>& model,
                            const nlohmann::json& pipeline = nlohmann::json::object()) {
  const fs::path tmp = dir.string() + ".tmp";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  const auto& c = model.config;
  nlohmann::json header;
  header["format"] = "voxflow-checkpoint/1";
  header["dim"] = c.dim;
  header["cond_dim"] = c.cond_dim;
  header["hidden"] = c.hidden_width();
  header["layers"] = c.layers;
  header["clamp"] = c.clamp;
  header["pipeline"] = pipeline;
  {
    std::ofstream out(tmp / "model.json", std::ios::trunc);
    out << header.dump(1) << '\n';
    if (!out) throw DataError("cannot write checkpoint header in " + tmp.string());
  }
  const auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    store::write_tensor(tmp / param_file_name(i), *params[i]);
  }
  fs::remove_all(dir);
  fs::rename(tmp, dir);
}

inline Checkpoint load_checkpoint(const fs::path& dir) {
  const fs::path header_path = dir / "model.json";
  std::ifstream in(header_path);
  if (!in) throw ConfigError("checkpoint not found: " + dir.string());
  nlohmann::json header;
  FlowConfig c;
  Checkpoint ck;
  try {
    header = nlohmann::json::parse(in);
    if (header.at("format") != "voxflow-checkpoint/1") throw FormatError("unknown checkpoint format");
    c.dim = header.at("dim").get<std::size_t>();
    c.cond_dim = header.at("cond_dim").get<std::size_t>();
    c.hidden = header.at("hidden").get<std::size_t>();
    c.layers = header.at("layers").get<std::size_t>();
    c.clamp = header.at("clamp").get<double>();
    if (header.contains("pipeline")) ck.pipeline = header.at("pipeline");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint header " + header_path.string() + ": " + e.what());
  }
  ck.model = make_flow<float>(c, 0);
  auto params = ck.model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor t = store::read_tensor(dir / param_file_name(i));
    if (t.dims() != params[i]->dims()) {
      throw FormatError("checkpoint parameter " + std::to_string(i) + " has dims " +
                        dims_to_string(t.dims()) + ", expected " + dims_to_string(params[i]->dims()));
    }
    *params[i] = std::move(t);
  }
  return ck;
}

}  // namespace voxflow::cnf
