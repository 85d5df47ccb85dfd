#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "voxflow/errors.hpp"
#include "voxflow/store/tensor_file.hpp"

namespace voxflow::store {

namespace fs = std::filesystem;

enum class Split { kTrain, kVal, kTest };

inline std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw ValidationError("unknown split tag '" + s + "'");
}

/// Feature files of one slice, aligned with DatasetManifest::layers.
struct SliceEntry {
  std::vector<fs::path> layer_files;
  friend bool operator==(const SliceEntry&, const SliceEntry&) = default;
};

struct VolumeEntry {
  std::string id;
  Split split = Split::kTrain;
  std::size_t depth = 0;
  // Original slice resolution; required when a mask is present.
  std::optional<std::size_t> height;
  std::optional<std::size_t> width;
  std::vector<SliceEntry> slices;
  std::optional<fs::path> mask;
  friend bool operator==(const VolumeEntry&, const VolumeEntry&) = default;
};

struct DatasetManifest {
  std::vector<int> layers;
  std::vector<VolumeEntry> volumes;

  std::vector<const VolumeEntry*> split(Split s) const {
    std::vector<const VolumeEntry*> out;
    for (const auto& v : volumes) {
      if (v.split == s) out.push_back(&v);
    }
    return out;
  }

  const VolumeEntry& volume(const std::string& id) const {
    auto it = std::find_if(volumes.begin(), volumes.end(),
                           [&](const VolumeEntry& v) { return v.id == id; });
    if (it == volumes.end()) throw ValidationError("no volume with id '" + id + "'");
    return *it;
  }

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// Binary ground truth, dims [D, H, W], values exactly 0 or 1.
struct MaskVolume {
  Tensor voxels;

  std::size_t depth() const { return voxels.dim(0); }
  std::size_t height() const { return voxels.dim(1); }
  std::size_t width() const { return voxels.dim(2); }
};

inline MaskVolume validate_mask(Tensor t, const std::string& volume_id) {
  if (t.rank() != 3) {
    throw ValidationError("volume '" + volume_id + "': mask must be rank 3, got " +
                          dims_to_string(t.dims()));
  }
  for (float v : t.data()) {
    if (v != 0.0f && v != 1.0f) {
      throw ValidationError("volume '" + volume_id + "': mask is not binary (value " +
                            std::to_string(v) + ")");
    }
  }
  return MaskVolume{std::move(t)};
}

inline MaskVolume load_mask(const VolumeEntry& v) {
  if (!v.mask) throw ValidationError("volume '" + v.id + "' has no mask");
  return validate_mask(read_tensor(*v.mask), v.id);
}

namespace detail {

inline fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace detail

/// Parses and validates a manifest. Relative paths resolve against the
/// manifest's directory; volumes keep file order.
inline DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest: " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest " + path.string() + ": " + e.what());
  }
  const fs::path base = path.parent_path();
  DatasetManifest m;
  try {
    if (doc.contains("layers")) m.layers = doc.at("layers").get<std::vector<int>>();
    std::set<std::string> ids;
    for (const auto& jv : doc.at("volumes")) {
      VolumeEntry v;
      v.id = jv.at("id").get<std::string>();
      auto fail = [&](const std::string& what) {
        return ValidationError("volume '" + v.id + "': " + what);
      };
      if (!ids.insert(v.id).second) throw fail("duplicate id");
      v.split = parse_split(jv.at("split").get<std::string>());
      v.depth = jv.at("depth").get<std::size_t>();
      if (jv.contains("height")) v.height = jv.at("height").get<std::size_t>();
      if (jv.contains("width")) v.width = jv.at("width").get<std::size_t>();
      const auto& jslices = jv.at("slices");
      if (jslices.size() != v.depth) {
        throw fail("depth " + std::to_string(v.depth) + " but " +
                   std::to_string(jslices.size()) + " slices listed");
      }
      if (v.depth == 0) throw fail("depth must be positive");
      for (const auto& js : jslices) {
        std::vector<int> keys;
        for (const auto& [k, _] : js.items()) keys.push_back(std::stoi(k));
        std::sort(keys.begin(), keys.end());
        if (m.layers.empty()) m.layers = keys;
        std::vector<int> expected = m.layers;
        std::sort(expected.begin(), expected.end());
        if (keys != expected) throw fail("inconsistent layer set across slices");
        SliceEntry s;
        for (int layer : m.layers) {
          fs::path file = detail::resolve(base, js.at(std::to_string(layer)).get<std::string>());
          if (!fs::exists(file)) throw fail("missing tensor file " + file.string());
          s.layer_files.push_back(std::move(file));
        }
        v.slices.push_back(std::move(s));
      }
      if (jv.contains("mask") && !jv.at("mask").is_null()) {
        fs::path file = detail::resolve(base, jv.at("mask").get<std::string>());
        if (!fs::exists(file)) throw fail("missing mask file " + file.string());
        if (!v.height || !v.width) throw fail("mask requires height and width");
        MaskVolume mask = validate_mask(read_tensor(file), v.id);
        const Dims want{v.depth, *v.height, *v.width};
        if (mask.voxels.dims() != want) {
          throw fail("mask dims " + dims_to_string(mask.voxels.dims()) + " != declared " +
                     dims_to_string(want));
        }
        v.mask = std::move(file);
      }
      m.volumes.push_back(std::move(v));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest " + path.string() + ": " + e.what());
  }
  if (m.layers.empty()) throw ValidationError("manifest lists no layers");
  return m;
}

/// Serializes a manifest; paths are written relative to the manifest's
/// directory when they live beneath it.
inline void write_manifest(const fs::path& path, const DatasetManifest& m) {
  const fs::path base = fs::absolute(path).parent_path();
  auto rel = [&](const fs::path& p) {
    const fs::path abs = fs::absolute(p).lexically_normal();
    const fs::path r = abs.lexically_relative(base);
    if (!r.empty() && *r.begin() != "..") return r.generic_string();
    return abs.generic_string();
  };
  nlohmann::json doc;
  doc["format"] = "voxflow-manifest/1";
  doc["layers"] = m.layers;
  doc["volumes"] = nlohmann::json::array();
  for (const auto& v : m.volumes) {
    nlohmann::json jv;
    jv["id"] = v.id;
    jv["split"] = to_string(v.split);
    jv["depth"] = v.depth;
    if (v.height) jv["height"] = *v.height;
    if (v.width) jv["width"] = *v.width;
    jv["slices"] = nlohmann::json::array();
    for (const auto& s : v.slices) {
      nlohmann::json js;
      for (std::size_t l = 0; l < m.layers.size(); ++l) {
        js[std::to_string(m.layers[l])] = rel(s.layer_files.at(l));
      }
      jv["slices"].push_back(std::move(js));
    }
    if (v.mask) jv["mask"] = rel(*v.mask);
    doc["volumes"].push_back(std::move(jv));
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest: " + path.string());
  out << doc.dump(1) << '\n';
}

}  // namespace voxflow::store
