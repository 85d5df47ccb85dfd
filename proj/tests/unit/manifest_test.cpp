#include <gtest/gtest.h>

#include <fstream>

#include <json.hpp>

#include "support/temp_dir.hpp"
#include "voxflow/errors.hpp"
#include "voxflow/store/manifest.hpp"

namespace voxflow::store {
namespace {

using testing::TempDir;

void write_json(const fs::path& p, const nlohmann::json& j) { std::ofstream(p) << j.dump(); }

// One volume with `depth` slices at layers {2,3}, files relative to dir.
nlohmann::json one_volume(const TempDir& dir, const std::string& id, std::size_t depth,
                          const std::string& split = "train") {
  nlohmann::json slices = nlohmann::json::array();
  for (std::size_t z = 0; z < depth; ++z) {
    const std::string a = id + "_s" + std::to_string(z) + "_l2.fsx";
    const std::string b = id + "_s" + std::to_string(z) + "_l3.fsx";
    write_tensor(dir / a, Tensor(Dims{2, 4, 4}));
    write_tensor(dir / b, Tensor(Dims{3, 2, 2}));
    slices.push_back({{"2", a}, {"3", b}});
  }
  return {{"id", id}, {"split", split}, {"depth", depth}, {"slices", slices}};
}

TEST(Manifest, TwoSliceTrainVolume) {
  TempDir dir("mf_basic");
  write_json(dir / "m.json", {{"layers", {2, 3}}, {"volumes", {one_volume(dir, "a", 2)}}});
  const auto m = load_manifest(dir / "m.json");
  ASSERT_EQ(m.volumes.size(), 1u);
  EXPECT_EQ(m.volumes[0].depth, 2u);
  EXPECT_EQ(m.volumes[0].split, Split::kTrain);
  EXPECT_EQ(m.layers, (std::vector<int>{2, 3}));
  EXPECT_EQ(m.volumes[0].slices[1].layer_files[1], dir / "a_s1_l3.fsx");
}

TEST(Manifest, AbsentTensorFileNamesThePath) {
  TempDir dir("mf_absent");
  auto v = one_volume(dir, "a", 2);
  fs::remove(dir / "a_s1_l2.fsx");
  write_json(dir / "m.json", {{"layers", {2, 3}}, {"volumes", {v}}});
  try {
    load_manifest(dir / "m.json");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("a_s1_l2.fsx"), std::string::npos) << e.what();
  }
}

TEST(Manifest, NonBinaryMaskIsAValidationError) {
  TempDir dir("mf_mask");
  auto v = one_volume(dir, "t", 2, "test");
  Tensor mask(Dims{2, 8, 8});
  mask[5] = 2.0f;
  write_tensor(dir / "mask.fsx", mask);
  v["height"] = 8;
  v["width"] = 8;
  v["mask"] = "mask.fsx";
  write_json(dir / "m.json", {{"layers", {2, 3}}, {"volumes", {v}}});
  EXPECT_THROW(load_manifest(dir / "m.json"), ValidationError);
}

TEST(Manifest, MaskDimsMustMatchVolume) {
  TempDir dir("mf_maskdims");
  auto v = one_volume(dir, "t", 2, "test");
  write_tensor(dir / "mask.fsx", Tensor(Dims{2, 8, 4}));
  v["height"] = 8;
  v["width"] = 8;
  v["mask"] = "mask.fsx";
  write_json(dir / "m.json", {{"layers", {2, 3}}, {"volumes", {v}}});
  EXPECT_THROW(load_manifest(dir / "m.json"), ValidationError);
}

TEST(Manifest, StructuralErrors) {
  TempDir dir("mf_struct");
  auto a = one_volume(dir, "a", 2);
  write_json(dir / "dup.json", {{"layers", {2, 3}}, {"volumes", {a, a}}});
  EXPECT_THROW(load_manifest(dir / "dup.json"), ValidationError);

  auto bad_depth = a;
  bad_depth["depth"] = 3;
  write_json(dir / "depth.json", {{"layers", {2, 3}}, {"volumes", {bad_depth}}});
  EXPECT_THROW(load_manifest(dir / "depth.json"), ValidationError);

  auto mixed = a;
  mixed["slices"][1].erase("3");
  write_json(dir / "layers.json", {{"layers", {2, 3}}, {"volumes", {mixed}}});
  EXPECT_THROW(load_manifest(dir / "layers.json"), ValidationError);

  auto split = a;
  split["split"] = "holdout";
  write_json(dir / "split.json", {{"layers", {2, 3}}, {"volumes", {split}}});
  EXPECT_THROW(load_manifest(dir / "split.json"), ValidationError);

  std::ofstream(dir / "broken.json") << "{ not json";
  EXPECT_THROW(load_manifest(dir / "broken.json"), FormatError);
  EXPECT_THROW(load_manifest(dir / "missing.json"), DataError);
}

TEST(ManifestProperty, LoadingIsOrderPreservingAndIdempotent) {
  TempDir dir("mf_idem");
  nlohmann::json vols = nlohmann::json::array();
  const std::vector<std::string> ids{"zeta", "alpha", "mid", "beta"};
  const std::vector<std::string> splits{"test", "train", "val", "train"};
  for (std::size_t i = 0; i < ids.size(); ++i) vols.push_back(one_volume(dir, ids[i], 1 + i % 3, splits[i]));
  write_json(dir / "m.json", {{"layers", {2, 3}}, {"volumes", vols}});
  const auto first = load_manifest(dir / "m.json");
  ASSERT_EQ(first.volumes.size(), ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) EXPECT_EQ(first.volumes[i].id, ids[i]);
  EXPECT_EQ(load_manifest(dir / "m.json"), first);

  write_manifest(dir / "again.json", first);
  EXPECT_EQ(load_manifest(dir / "again.json"), first);
  const auto train = first.split(Split::kTrain);
  ASSERT_EQ(train.size(), 2u);
  EXPECT_EQ(train[0]->id, "alpha");
  EXPECT_EQ(train[1]->id, "beta");
  EXPECT_EQ(first.volume("mid").depth, 3u);
  EXPECT_THROW(first.volume("nope"), ValidationError);
}

}  // namespace
}  // namespace voxflow::store
