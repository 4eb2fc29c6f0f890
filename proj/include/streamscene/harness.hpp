#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "streamscene/dataset.hpp"
#include "streamscene/detector.hpp"
#include "streamscene/memory.hpp"
#include "streamscene/metrics.hpp"
#include "streamscene/scene_format.hpp"

namespace streamscene {

enum class ReplayMode { kMemoryPipeline, kMergeBaseline };

std::string to_string(ReplayMode mode);
ReplayMode replay_mode_from_string(const std::string& s);  // throws ConfigError

struct ReplayConfig {
  FusionSchedule schedule;
  SamplingStrategy strategy = SamplingStrategy::kUniform;
  double cell_size = 0.32;  // pooling voxel, meters
  double iou_threshold = kDefaultIouThreshold;
  GtThresholds gt;
  VisibilityOptions visibility;
  std::size_t frame_count = 32;  // 1..32
  std::size_t frame_stride = 30;
  ReplayMode mode = ReplayMode::kMemoryPipeline;
  std::uint64_t seed = 0;
  UnitConfig units;

  void validate() const;  // throws ConfigError

  // JSON object; every key optional:
  //   {"N", "p", "strategy": "uniform"|"voxel", "cell_size", "iou_threshold",
  //    "v_strict", "v_lenient", "min_dim", "visibility_samples",
  //    "depth_tolerance", "frame_count", "frame_stride",
  //    "mode": "memory-pipeline"|"merge-baseline", "seed",
  //    "meters_per_unit", "radians_per_unit"}
  static ReplayConfig from_json(const std::string& text);
  static ReplayConfig load(const std::filesystem::path& path);
  std::string to_json() const;
};

struct TimestepResult {
  std::size_t t = 0;            // 1-based step within the replay
  std::size_t frame_index = 0;  // index into the dataset's frame list
  std::size_t frame_points = 0;
  std::size_t memory_size = 0;
  std::size_t patch_count = 0;
  SceneDescription detections;
  std::vector<ParseDiagnostic> diagnostics;
  std::vector<OrientedBox3> boxes;  // detections that map to the vocabulary
  std::size_t dropped_boxes = 0;
  std::size_t n_strict = 0;
  std::size_t n_lenient = 0;
  EvalReport report;
};

struct SceneResult {
  std::string scene_id;
  ReplayMode mode = ReplayMode::kMemoryPipeline;
  bool truncated = false;
  std::vector<TimestepResult> timesteps;
};

// Pseudo-color for a category id; the pipeline carries no RGB.
Eigen::Vector3f label_color(CategoryId id);

// Frames selected for a replay under `config`.
FrameSelection select_frames(const SceneDataset& dataset, const ReplayConfig& config);

// Frame -> unified-frame colored points and their labels.
struct FramePoints {
  std::vector<ColoredPoint> points;
  std::vector<CategoryId> labels;
};
FramePoints frame_points(const SceneDataset& dataset, std::size_t frame);

// Streams the selected frames through the spatial memory and the detector,
// evaluating after every step against the ground truth observed so far.
// Detector failures propagate as ProtocolError.
SceneResult replay(const SceneDataset& dataset, Detector& detector, const ReplayConfig& config);

// Per-frame baseline: the detector sees only the current frame's points and
// its outputs are merged into a running set with merge_detections.
SceneResult run_merge_baseline(const SceneDataset& dataset, Detector& detector,
                               const ReplayConfig& config);

// Dispatches on config.mode.
SceneResult run_scene(const SceneDataset& dataset, Detector& detector, const ReplayConfig& config);

using DetectorFactory = std::function<std::unique_ptr<Detector>()>;

// Replays several scenes on parallel workers (one detector per scene). The
// worker count comes from STREAMSCENE_WORKERS when `workers` is 0. Results
// are in input order; the first failure is rethrown after all workers stop.
std::vector<SceneResult> run_scenes(const std::vector<SceneDataset>& datasets,
                                    const DetectorFactory& make_detector,
                                    const ReplayConfig& config, std::size_t workers = 0);

std::size_t worker_count_from_env();

}  // namespace streamscene
