#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "streamscene/categories.hpp"
#include "streamscene/geometry.hpp"
#include "streamscene/metrics.hpp"

namespace streamscene {

inline constexpr const char* kDatasetFormat = "streamscene-dataset/1";
inline constexpr const char* kAxisConvention =
    "camera: x right, y down, z forward; unified: origin at first camera, z up, "
    "x = first camera forward projected on the ground, y = z cross x; "
    "pitch positive looking up, roll right-handed about forward";

struct FrameInfo {
  double timestamp = 0.0;
  // Camera t -> first-camera coordinates.
  RigidTransform pose;
  std::string depth_file;     // relative to the dataset root
  std::string semantic_file;  // relative to the dataset root
  // In-memory maps (simulator datasets); loaded from files when empty.
  std::shared_ptr<const DepthMap> depth;
  std::shared_ptr<const SemanticMap> semantic;
};

struct SceneDataset {
  std::string scene_id;
  CameraIntrinsics intrinsics;
  double initial_pitch = 0.0;
  double initial_roll = 0.0;
  // Semantic map value i > 0 is categories.name_of(i).
  CategoryVocabulary categories = CategoryVocabulary::standard();
  std::vector<FrameInfo> frames;
  std::vector<AnnotatedObject> annotations;  // unified frame
  std::filesystem::path root;

  // Camera t -> unified ground-aligned frame.
  RigidTransform camera_to_unified(std::size_t frame) const;
};

struct FrameMaps {
  std::shared_ptr<const DepthMap> depth;
  std::shared_ptr<const SemanticMap> semantic;
};

FrameMaps load_frame(const SceneDataset& dataset, std::size_t frame);

// Reads and validates manifest.json under `path` (or `path` itself when it
// names a file). Maps are loaded lazily by load_frame. Throws SchemaError with
// a JSON pointer for schema problems and the list of missing files.
SceneDataset load_dataset(const std::filesystem::path& path);

// Writes manifest.json plus every in-memory map under `dir`, assigning
// frames/NNNNNN.depth / .sem file names.
void save_dataset(const SceneDataset& dataset, const std::filesystem::path& dir);

// Map files: char[4] magic ("SDEP" or "SSEM"), u32 version (1), u32 width,
// u32 height, then width*height little-endian f32 (depth, meters) or u16
// (category id) values in row-major order.
std::string encode_depth(const DepthMap& map);
DepthMap decode_depth(std::string_view bytes);
std::string encode_semantic(const SemanticMap& map);
SemanticMap decode_semantic(std::string_view bytes);

struct FrameSelection {
  std::vector<std::size_t> indices;
  bool truncated = false;  // stream ended before `count` frames
};

// Random start, then every stride-th frame. The start is drawn so that all
// `count` frames fit when the stream is long enough; otherwise the selection
// starts at 0 and is truncated at the end of the stream.
FrameSelection sample_frames(std::size_t n_frames, std::size_t count, std::size_t stride,
                             std::uint64_t seed);

}  // namespace streamscene
