#include <filesystem>
#include <fstream>
#include <random>

#include <doctest.h>
#include <json.hpp>

#include "streamscene/dataset.hpp"
#include "streamscene/errors.hpp"
#include "streamscene/simulator.hpp"

namespace ss = streamscene;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("streamscene_test_" + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

ss::SceneDataset small_dataset(std::uint64_t seed, std::size_t frames = 4) {
  const auto scene = ss::generate_scene(seed, 4);
  ss::OrbitOptions orbit;
  orbit.frames = frames;
  const auto poses = ss::orbit_trajectory(scene, orbit, seed).poses();
  return ss::make_dataset(scene, poses, ss::default_sim_intrinsics(), "scene_" +
                                                                          std::to_string(seed));
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

void write_json(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(2); }

}  // namespace

TEST_CASE("map file codecs") {
  ss::DepthMap d(3, 2, 0.0f);
  d.at(1, 1) = 2.5f;
  d.at(2, 0) = NAN;
  const auto bytes = ss::encode_depth(d);
  CHECK(bytes.substr(0, 4) == "SDEP");
  CHECK(bytes.size() == 16 + 6 * 4);
  const auto back = ss::decode_depth(bytes);
  CHECK(back.width == 3);
  CHECK(back.at(1, 1) == 2.5f);
  CHECK(std::isnan(back.at(2, 0)));
  CHECK_THROWS_AS(ss::decode_depth(bytes.substr(0, bytes.size() - 2)), ss::IoError);
  CHECK_THROWS_AS(ss::decode_semantic(bytes), ss::IoError);

  ss::SemanticMap s(2, 2, 0);
  s.at(0, 1) = 7;
  CHECK(ss::decode_semantic(ss::encode_semantic(s)) == s);
}

TEST_CASE("simulator dataset round-trips through disk") {
  TempDir dir;
  const auto ds = small_dataset(3);
  ss::save_dataset(ds, dir.path);
  const auto back = ss::load_dataset(dir.path);
  CHECK(back.scene_id == ds.scene_id);
  CHECK(back.intrinsics.fx == ds.intrinsics.fx);
  CHECK(back.initial_pitch == doctest::Approx(ds.initial_pitch));
  CHECK(back.categories.names() == ds.categories.names());
  REQUIRE(back.frames.size() == ds.frames.size());
  REQUIRE(back.annotations.size() == ds.annotations.size());
  for (std::size_t i = 0; i < ds.annotations.size(); ++i) {
    CHECK(back.annotations[i].id == ds.annotations[i].id);
    CHECK((back.annotations[i].box.center - ds.annotations[i].box.center).norm() < 1e-9);
  }
  for (std::size_t i = 0; i < ds.frames.size(); ++i) {
    CHECK(back.frames[i].timestamp == ds.frames[i].timestamp);
    CHECK((back.frames[i].pose.rotation - ds.frames[i].pose.rotation).norm() < 1e-9);
    const auto a = ss::load_frame(ds, i);
    const auto b = ss::load_frame(back, i);
    CHECK(*a.depth == *b.depth);
    CHECK(*a.semantic == *b.semantic);
    CHECK((back.camera_to_unified(i).translation - ds.camera_to_unified(i).translation).norm() <
          1e-9);
  }
}

TEST_CASE("manifest schema errors carry JSON pointers") {
  TempDir dir;
  ss::save_dataset(small_dataset(5, 3), dir.path);
  const auto manifest = dir.path / "manifest.json";
  const json good = read_json(manifest);

  auto expect_pointer = [&](const json& doc, const std::string& pointer) {
    write_json(manifest, doc);
    try {
      ss::load_dataset(dir.path);
      FAIL("expected SchemaError for " << pointer);
    } catch (const ss::SchemaError& e) {
      CHECK(e.pointer() == pointer);
    }
  };

  json j = good;
  j["frames"] = json::array();
  expect_pointer(j, "/frames");

  j = good;
  j["frames"][1]["timestamp"] = j["frames"][0]["timestamp"];
  expect_pointer(j, "/frames/1/timestamp");

  j = good;
  j["intrinsics"].erase("fx");
  expect_pointer(j, "/intrinsics/fx");

  j = good;
  j["format"] = "other/9";
  expect_pointer(j, "/format");

  j = good;
  j["annotations"][0]["dims"] = json::array({1, 2});
  expect_pointer(j, "/annotations/0/dims");

  j = good;
  j["frames"][0]["pose"][0][0] = 2.0;
  expect_pointer(j, "/frames/0/pose");

  // Every missing file is listed at once.
  write_json(manifest, good);
  fs::remove(dir.path / good["frames"][0]["depth"].get<std::string>());
  fs::remove(dir.path / good["frames"][2]["semantic"].get<std::string>());
  try {
    ss::load_dataset(dir.path);
    FAIL("expected SchemaError");
  } catch (const ss::SchemaError& e) {
    CHECK(e.missing_files().size() == 2);
  }

  std::ofstream(manifest) << "{ not json";
  CHECK_THROWS_AS(ss::load_dataset(manifest), ss::SchemaError);
}

TEST_CASE("sample_frames") {
  SUBCASE("count 1") {
    const auto s = ss::sample_frames(100, 1, 30, 4);
    CHECK(s.indices.size() == 1);
    CHECK(!s.truncated);
  }
  SUBCASE("stride 30, count 4") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const auto s = ss::sample_frames(200, 4, 30, seed);
      REQUIRE(s.indices.size() == 4);
      for (std::size_t i = 1; i < 4; ++i) CHECK(s.indices[i] == s.indices[0] + 30 * i);
      CHECK(s.indices.back() < 200);
    }
    CHECK(ss::sample_frames(200, 4, 30, 9).indices == ss::sample_frames(200, 4, 30, 9).indices);
  }
  SUBCASE("short stream truncates") {
    const auto s = ss::sample_frames(50, 4, 30, 1);
    CHECK(s.truncated);
    CHECK(s.indices == std::vector<std::size_t>{0, 30});
  }
  SUBCASE("exact fit starts at zero") {
    const auto s = ss::sample_frames(91, 4, 30, 77);
    CHECK(s.indices == std::vector<std::size_t>{0, 30, 60, 90});
  }
  CHECK_THROWS_AS(ss::sample_frames(10, 0, 1, 0), ss::ConfigError);
  CHECK_THROWS_AS(ss::sample_frames(10, 33, 1, 0), ss::ConfigError);
  CHECK_THROWS_AS(ss::sample_frames(10, 2, 0, 0), ss::ConfigError);
}
