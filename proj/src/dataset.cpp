#include "streamscene/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "binary_io.hpp"
#include "streamscene/errors.hpp"

namespace streamscene {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const json& require(const json& obj, const std::string& key, const std::string& ptr) {
  if (!obj.is_object()) throw SchemaError(ptr, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(ptr + "/" + key, "missing required field");
  return *it;
}

double number(const json& obj, const std::string& key, const std::string& ptr) {
  const auto& v = require(obj, key, ptr);
  if (!v.is_number()) throw SchemaError(ptr + "/" + key, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw SchemaError(ptr + "/" + key, "expected a finite number");
  return d;
}

std::string string_field(const json& obj, const std::string& key, const std::string& ptr) {
  const auto& v = require(obj, key, ptr);
  if (!v.is_string()) throw SchemaError(ptr + "/" + key, "expected a string");
  return v.get<std::string>();
}

Vec3 vec3(const json& obj, const std::string& key, const std::string& ptr) {
  const auto& v = require(obj, key, ptr);
  if (!v.is_array() || v.size() != 3) throw SchemaError(ptr + "/" + key, "expected 3 numbers");
  Vec3 out;
  for (int i = 0; i < 3; ++i) {
    if (!v[i].is_number()) {
      throw SchemaError(ptr + "/" + key + "/" + std::to_string(i), "expected a number");
    }
    out[i] = v[i].get<double>();
  }
  return out;
}

RigidTransform pose_from_json(const json& v, const std::string& ptr) {
  if (!v.is_array() || v.size() != 4) throw SchemaError(ptr, "expected a 4x4 matrix");
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r) {
    if (!v[r].is_array() || v[r].size() != 4) {
      throw SchemaError(ptr + "/" + std::to_string(r), "expected 4 numbers");
    }
    for (int c = 0; c < 4; ++c) {
      if (!v[r][c].is_number()) {
        throw SchemaError(ptr + "/" + std::to_string(r) + "/" + std::to_string(c),
                          "expected a number");
      }
      m(r, c) = v[r][c].get<double>();
    }
  }
  RigidTransform t;
  t.rotation = m.topLeftCorner<3, 3>();
  t.translation = m.topRightCorner<3, 1>();
  if (!t.is_valid(1e-6) || std::abs(m(3, 3) - 1.0) > 1e-9 ||
      m.bottomLeftCorner<1, 3>().cwiseAbs().maxCoeff() > 1e-9) {
    throw SchemaError(ptr, "pose is not a rigid transform");
  }
  return t;
}

json pose_to_json(const RigidTransform& t) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r) {
    rows.push_back({t.rotation(r, 0), t.rotation(r, 1), t.rotation(r, 2), t.translation[r]});
  }
  rows.push_back({0.0, 0.0, 0.0, 1.0});
  return rows;
}

template <typename T>
std::string encode_grid(const Grid<T>& g, const char* magic) {
  if (g.values.size() != static_cast<std::size_t>(g.width) * g.height) {
    throw DimensionError("grid value count does not match its size");
  }
  std::string out(magic, 4);
  detail::put_u32(out, 1);
  detail::put_u32(out, static_cast<std::uint32_t>(g.width));
  detail::put_u32(out, static_cast<std::uint32_t>(g.height));
  out.reserve(out.size() + g.values.size() * sizeof(T));
  for (const auto v : g.values) {
    if constexpr (std::is_same_v<T, float>) {
      detail::put_f32(out, v);
    } else {
      detail::put_u16(out, v);
    }
  }
  return out;
}

template <typename T>
Grid<T> decode_grid(std::string_view bytes, const char* magic) {
  detail::Reader r(bytes);
  if (r.take(4) != std::string_view(magic, 4)) {
    throw IoError(std::string("bad map magic, expected ") + std::string(magic, 4));
  }
  if (r.u32() != 1) throw IoError("unsupported map version");
  const std::uint32_t w = r.u32(), h = r.u32();
  if (static_cast<std::uint64_t>(w) * h * sizeof(T) != r.remaining()) {
    throw IoError("map payload size does not match its header");
  }
  Grid<T> g(static_cast<int>(w), static_cast<int>(h));
  for (auto& v : g.values) {
    if constexpr (std::is_same_v<T, float>) {
      v = r.f32();
    } else {
      v = r.u16();
    }
  }
  return g;
}

}  // namespace

RigidTransform SceneDataset::camera_to_unified(std::size_t frame) const {
  return ground_align_transform(initial_pitch, initial_roll) * frames.at(frame).pose;
}

std::string encode_depth(const DepthMap& map) { return encode_grid(map, "SDEP"); }
DepthMap decode_depth(std::string_view bytes) { return decode_grid<float>(bytes, "SDEP"); }
std::string encode_semantic(const SemanticMap& map) { return encode_grid(map, "SSEM"); }
SemanticMap decode_semantic(std::string_view bytes) {
  return decode_grid<std::uint16_t>(bytes, "SSEM");
}

FrameMaps load_frame(const SceneDataset& ds, std::size_t frame) {
  const auto& f = ds.frames.at(frame);
  FrameMaps maps{f.depth, f.semantic};
  if (!maps.depth) {
    maps.depth = std::make_shared<DepthMap>(decode_depth(detail::read_file(ds.root / f.depth_file)));
  }
  if (!maps.semantic) {
    maps.semantic = std::make_shared<SemanticMap>(
        decode_semantic(detail::read_file(ds.root / f.semantic_file)));
  }
  const auto& k = ds.intrinsics;
  if (maps.depth->width != k.width || maps.depth->height != k.height ||
      maps.semantic->width != k.width || maps.semantic->height != k.height) {
    throw DimensionError("frame " + std::to_string(frame) + " maps do not match the intrinsics");
  }
  return maps;
}

SceneDataset load_dataset(const fs::path& path) {
  const fs::path manifest_path = fs::is_directory(path) ? path / "manifest.json" : path;
  json doc;
  try {
    doc = json::parse(detail::read_file(manifest_path));
  } catch (const json::parse_error& e) {
    throw SchemaError("", std::string("manifest is not valid JSON: ") + e.what());
  }
  SceneDataset ds;
  ds.root = manifest_path.parent_path();

  const auto format = string_field(doc, "format", "");
  if (format != kDatasetFormat) {
    throw SchemaError("/format", "unsupported dataset format '" + format + "'");
  }
  ds.scene_id = string_field(doc, "scene_id", "");

  const auto& k = require(doc, "intrinsics", "");
  ds.intrinsics.fx = number(k, "fx", "/intrinsics");
  ds.intrinsics.fy = number(k, "fy", "/intrinsics");
  ds.intrinsics.cx = number(k, "cx", "/intrinsics");
  ds.intrinsics.cy = number(k, "cy", "/intrinsics");
  ds.intrinsics.width = static_cast<int>(number(k, "width", "/intrinsics"));
  ds.intrinsics.height = static_cast<int>(number(k, "height", "/intrinsics"));
  try {
    ds.intrinsics.validate();
  } catch (const ContractError& e) {
    throw SchemaError("/intrinsics", e.what());
  }

  const auto& cam = require(doc, "initial_camera", "");
  ds.initial_pitch = number(cam, "pitch", "/initial_camera");
  ds.initial_roll = number(cam, "roll", "/initial_camera");
  try {
    ground_align_transform(ds.initial_pitch, ds.initial_roll);
  } catch (const DegenerateOrientationError& e) {
    throw SchemaError("/initial_camera", e.what());
  }

  if (doc.contains("categories")) {
    const auto& cats = doc["categories"];
    if (!cats.is_array() || cats.empty()) {
      throw SchemaError("/categories", "expected a non-empty array of names");
    }
    std::vector<std::string> names;
    for (std::size_t i = 0; i < cats.size(); ++i) {
      if (!cats[i].is_string()) {
        throw SchemaError("/categories/" + std::to_string(i), "expected a string");
      }
      names.push_back(cats[i].get<std::string>());
    }
    ds.categories = CategoryVocabulary(names);
  }

  const auto& frames = require(doc, "frames", "");
  if (!frames.is_array()) throw SchemaError("/frames", "expected an array");
  if (frames.empty()) throw SchemaError("/frames", "frame list is empty");
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::string ptr = "/frames/" + std::to_string(i);
    FrameInfo f;
    f.timestamp = number(frames[i], "timestamp", ptr);
    if (!ds.frames.empty() && !(f.timestamp > ds.frames.back().timestamp)) {
      throw SchemaError(ptr + "/timestamp", "timestamps must be strictly increasing");
    }
    f.depth_file = string_field(frames[i], "depth", ptr);
    f.semantic_file = string_field(frames[i], "semantic", ptr);
    f.pose = pose_from_json(require(frames[i], "pose", ptr), ptr + "/pose");
    for (const auto* file : {&f.depth_file, &f.semantic_file}) {
      if (!fs::is_regular_file(ds.root / *file)) missing.push_back(*file);
    }
    ds.frames.push_back(std::move(f));
  }

  const auto& anns = require(doc, "annotations", "");
  if (!anns.is_array()) throw SchemaError("/annotations", "expected an array");
  for (std::size_t i = 0; i < anns.size(); ++i) {
    const std::string ptr = "/annotations/" + std::to_string(i);
    const auto id = string_field(anns[i], "id", ptr);
    const auto label = string_field(anns[i], "label", ptr);
    try {
      ds.annotations.push_back({id, OrientedBox3(label, vec3(anns[i], "center", ptr),
                                                 vec3(anns[i], "dims", ptr),
                                                 number(anns[i], "yaw", ptr))});
    } catch (const ContractError& e) {
      throw SchemaError(ptr, e.what());
    }
  }

  if (!missing.empty()) {
    std::string msg = "missing files:";
    for (const auto& m : missing) msg += " " + m;
    throw SchemaError("/frames", msg, missing);
  }
  return ds;
}

void save_dataset(const SceneDataset& ds, const fs::path& dir) {
  fs::create_directories(dir / "frames");
  json doc;
  doc["format"] = kDatasetFormat;
  doc["scene_id"] = ds.scene_id;
  doc["axis_convention"] = kAxisConvention;
  doc["intrinsics"] = {{"fx", ds.intrinsics.fx},       {"fy", ds.intrinsics.fy},
                       {"cx", ds.intrinsics.cx},       {"cy", ds.intrinsics.cy},
                       {"width", ds.intrinsics.width}, {"height", ds.intrinsics.height}};
  doc["initial_camera"] = {{"pitch", ds.initial_pitch}, {"roll", ds.initial_roll}};
  doc["categories"] = ds.categories.names();
  json frames = json::array();
  for (std::size_t i = 0; i < ds.frames.size(); ++i) {
    char base[32];
    std::snprintf(base, sizeof(base), "frames/%06zu", i);
    const std::string depth_file = std::string(base) + ".depth";
    const std::string sem_file = std::string(base) + ".sem";
    const FrameMaps maps = load_frame(ds, i);
    detail::write_file(dir / depth_file, encode_depth(*maps.depth));
    detail::write_file(dir / sem_file, encode_semantic(*maps.semantic));
    frames.push_back({{"timestamp", ds.frames[i].timestamp},
                      {"depth", depth_file},
                      {"semantic", sem_file},
                      {"pose", pose_to_json(ds.frames[i].pose)}});
  }
  doc["frames"] = std::move(frames);
  json anns = json::array();
  for (const auto& a : ds.annotations) {
    anns.push_back({{"id", a.id},
                    {"label", a.box.label},
                    {"center", {a.box.center.x(), a.box.center.y(), a.box.center.z()}},
                    {"dims", {a.box.dims.x(), a.box.dims.y(), a.box.dims.z()}},
                    {"yaw", a.box.yaw}});
  }
  doc["annotations"] = std::move(anns);
  detail::write_file(dir / "manifest.json", doc.dump(2) + "\n");
}

FrameSelection sample_frames(std::size_t n_frames, std::size_t count, std::size_t stride,
                             std::uint64_t seed) {
  if (count < 1 || count > 32) throw ConfigError("frame count must be in [1, 32]");
  if (stride < 1) throw ConfigError("frame stride must be positive");
  FrameSelection sel;
  if (n_frames == 0) {
    sel.truncated = true;
    return sel;
  }
  const std::size_t span = (count - 1) * stride;
  std::size_t start = 0;
  if (span < n_frames) {
    std::mt19937_64 rng(detail::splitmix64(seed));
    std::uniform_int_distribution<std::size_t> pick(0, n_frames - 1 - span);
    start = pick(rng);
  }
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t idx = start + i * stride;
    if (idx >= n_frames) {
      sel.truncated = true;
      spdlog::warn("sample_frames: stream of {} frames holds only {} of {} requested frames",
                   n_frames, i, count);
      break;
    }
    sel.indices.push_back(idx);
  }
  return sel;
}

}  // namespace streamscene
