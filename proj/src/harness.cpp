#include "streamscene/harness.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "binary_io.hpp"
#include "streamscene/encoder_pool.hpp"
#include "streamscene/errors.hpp"
#include "streamscene/matching.hpp"

namespace streamscene {

namespace {

using nlohmann::json;

// Merge rule of the per-frame baseline; independent of the scoring threshold.
constexpr double kMergeThreshold = 0.25;

struct LoadedFrame {
  FramePoints points;
  FrameMaps maps;
};

LoadedFrame load_points(const SceneDataset& ds, std::size_t frame) {
  LoadedFrame out;
  out.maps = load_frame(ds, frame);
  const auto& depth = *out.maps.depth;
  const auto& sem = *out.maps.semantic;
  if (depth.width != sem.width || depth.height != sem.height) {
    throw DimensionError("frame " + std::to_string(frame) + ": depth is " +
                         std::to_string(depth.width) + "x" + std::to_string(depth.height) +
                         ", semantic map is " + std::to_string(sem.width) + "x" +
                         std::to_string(sem.height));
  }
  const RigidTransform to_unified = ds.camera_to_unified(frame);
  const auto pixels = unproject_depth(depth, ds.intrinsics);
  out.points.points.reserve(pixels.size());
  out.points.labels.reserve(pixels.size());
  for (const auto& px : pixels) {
    const CategoryId label = sem.values[px.pixel];
    out.points.points.push_back({to_unified.apply(px.position), label_color(label)});
    out.points.labels.push_back(label);
  }
  return out;
}

std::size_t count_voxels(const MemorySnapshot& snap, double cell) {
  std::set<VoxelCoord> voxels;
  for (const auto& p : snap.points()) voxels.insert(voxel_of(p.position, cell));
  return voxels.size();
}

std::string rethrow_context(const SceneDataset& ds, std::size_t step) {
  return "scene '" + ds.scene_id + "', step " + std::to_string(step) + ": ";
}

std::string call_detector(Detector& detector, const MemorySnapshot& snap,
                          const SceneDataset& ds, std::size_t step) {
  try {
    return detector.detect(snap, ds.categories);
  } catch (const ProtocolError& e) {
    throw ProtocolError(rethrow_context(ds, step) + e.what(), e.transcript());
  }
}

struct Parsed {
  SceneDescription description;
  std::vector<ParseDiagnostic> diagnostics;
  BoxConversion boxes;
};

Parsed parse_detections(const std::string& text, const SceneDataset& ds, const ReplayConfig& cfg,
                        std::size_t step) {
  ParseOptions opts;
  opts.units = cfg.units;
  auto parsed = parse_scene_description(text, opts);
  for (const auto& d : parsed.diagnostics) {
    spdlog::warn("{}detector output line {}, column {}: {}", rethrow_context(ds, step), d.line,
                 d.column, d.message);
  }
  Parsed out{std::move(parsed.description), std::move(parsed.diagnostics), {}};
  out.boxes = to_boxes(out.description, ds.categories);
  return out;
}

void update_visibility(VisibilityTracker& tracker, const SceneDataset& ds, std::size_t frame,
                       const FrameMaps& maps, const ReplayConfig& cfg) {
  const RigidTransform cam = ds.camera_to_unified(frame);
  for (const auto& obj : ds.annotations) {
    tracker.add(obj.id, object_visibility(obj.box, cam, ds.intrinsics, maps.depth.get(),
                                          cfg.visibility));
  }
}

void evaluate_step(TimestepResult& ts, const VisibilityTracker& tracker, const SceneDataset& ds,
                   const ReplayConfig& cfg) {
  const auto gt = build_gt_sets(ds.annotations, tracker.maxima(), cfg.gt);
  ts.n_strict = gt.strict.size();
  ts.n_lenient = gt.lenient.size();
  ts.report = evaluate_report(ts.boxes, gt, ds.categories, cfg.iou_threshold);
}

template <typename T>
void read_key(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

std::string to_string(ReplayMode mode) {
  return mode == ReplayMode::kMemoryPipeline ? "memory-pipeline" : "merge-baseline";
}

ReplayMode replay_mode_from_string(const std::string& s) {
  if (s == "memory-pipeline") return ReplayMode::kMemoryPipeline;
  if (s == "merge-baseline") return ReplayMode::kMergeBaseline;
  throw ConfigError("unknown replay mode '" + s + "'");
}

void ReplayConfig::validate() const {
  schedule.validate();
  if (!(cell_size > 0) || !std::isfinite(cell_size)) throw ConfigError("cell_size must be positive");
  if (!(iou_threshold > 0 && iou_threshold < 1)) throw ConfigError("iou_threshold must be in (0, 1)");
  gt.validate();
  if (visibility.samples_per_side < 1) throw ConfigError("visibility_samples must be positive");
  if (!(visibility.depth_tolerance >= 0)) throw ConfigError("depth_tolerance must be >= 0");
  if (frame_count < 1 || frame_count > 32) throw ConfigError("frame_count must be in [1, 32]");
  if (frame_stride < 1) throw ConfigError("frame_stride must be positive");
  if (!(units.meters_per_unit > 0) || !(units.radians_per_unit > 0)) {
    throw ConfigError("unit scales must be positive");
  }
}

ReplayConfig ReplayConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known = {
      "N", "p", "strategy", "cell_size", "iou_threshold", "v_strict", "v_lenient", "min_dim",
      "visibility_samples", "depth_tolerance", "frame_count", "frame_stride", "mode", "seed",
      "meters_per_unit", "radians_per_unit"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  ReplayConfig c;
  read_key(j, "N", c.schedule.capacity_frames);
  read_key(j, "p", c.schedule.frame_budget);
  std::string strategy = c.strategy == SamplingStrategy::kUniform ? "uniform" : "voxel";
  read_key(j, "strategy", strategy);
  if (strategy == "uniform") {
    c.strategy = SamplingStrategy::kUniform;
  } else if (strategy == "voxel") {
    c.strategy = SamplingStrategy::kVoxelStratified;
  } else {
    throw ConfigError("unknown strategy '" + strategy + "'");
  }
  read_key(j, "cell_size", c.cell_size);
  read_key(j, "iou_threshold", c.iou_threshold);
  read_key(j, "v_strict", c.gt.v_strict);
  read_key(j, "v_lenient", c.gt.v_lenient);
  read_key(j, "min_dim", c.gt.min_dim);
  read_key(j, "visibility_samples", c.visibility.samples_per_side);
  read_key(j, "depth_tolerance", c.visibility.depth_tolerance);
  read_key(j, "frame_count", c.frame_count);
  read_key(j, "frame_stride", c.frame_stride);
  std::string mode = to_string(c.mode);
  read_key(j, "mode", mode);
  c.mode = replay_mode_from_string(mode);
  read_key(j, "seed", c.seed);
  read_key(j, "meters_per_unit", c.units.meters_per_unit);
  read_key(j, "radians_per_unit", c.units.radians_per_unit);
  c.validate();
  return c;
}

ReplayConfig ReplayConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string ReplayConfig::to_json() const {
  json j = {{"N", schedule.capacity_frames},
            {"p", schedule.frame_budget},
            {"strategy", strategy == SamplingStrategy::kUniform ? "uniform" : "voxel"},
            {"cell_size", cell_size},
            {"iou_threshold", iou_threshold},
            {"v_strict", gt.v_strict},
            {"v_lenient", gt.v_lenient},
            {"min_dim", gt.min_dim},
            {"visibility_samples", visibility.samples_per_side},
            {"depth_tolerance", visibility.depth_tolerance},
            {"frame_count", frame_count},
            {"frame_stride", frame_stride},
            {"mode", to_string(mode)},
            {"seed", seed},
            {"meters_per_unit", units.meters_per_unit},
            {"radians_per_unit", units.radians_per_unit}};
  return j.dump(2);
}

Eigen::Vector3f label_color(CategoryId id) {
  if (id == kBackground) return {0.5f, 0.5f, 0.5f};
  // Golden-ratio hue walk, HSV with s = 0.7, v = 0.9.
  const double h = std::fmod(id * 0.6180339887498949, 1.0) * 6.0;
  const double s = 0.7, v = 0.9;
  const int sector = static_cast<int>(h) % 6;
  const double f = h - std::floor(h);
  const double p = v * (1 - s), q = v * (1 - s * f), r = v * (1 - s * (1 - f));
  double rgb[3];
  switch (sector) {
    case 0: rgb[0] = v, rgb[1] = r, rgb[2] = p; break;
    case 1: rgb[0] = q, rgb[1] = v, rgb[2] = p; break;
    case 2: rgb[0] = p, rgb[1] = v, rgb[2] = r; break;
    case 3: rgb[0] = p, rgb[1] = q, rgb[2] = v; break;
    case 4: rgb[0] = r, rgb[1] = p, rgb[2] = v; break;
    default: rgb[0] = v, rgb[1] = p, rgb[2] = q; break;
  }
  return {static_cast<float>(rgb[0]), static_cast<float>(rgb[1]), static_cast<float>(rgb[2])};
}

FrameSelection select_frames(const SceneDataset& dataset, const ReplayConfig& config) {
  return sample_frames(dataset.frames.size(), config.frame_count, config.frame_stride,
                       config.seed);
}

FramePoints frame_points(const SceneDataset& dataset, std::size_t frame) {
  return load_points(dataset, frame).points;
}

SceneResult replay(const SceneDataset& dataset, Detector& detector, const ReplayConfig& config) {
  config.validate();
  SceneResult result;
  result.scene_id = dataset.scene_id;
  result.mode = ReplayMode::kMemoryPipeline;
  const auto sel = select_frames(dataset, config);
  result.truncated = sel.truncated;

  SpatialMemory memory(config.schedule, config.strategy);
  VisibilityTracker tracker;
  for (std::size_t step = 1; step <= sel.indices.size(); ++step) {
    const std::size_t frame = sel.indices[step - 1];
    const auto loaded = load_points(dataset, frame);
    memory.fuse(loaded.points.points, loaded.points.labels,
                detail::splitmix64(config.seed ^ detail::splitmix64(step)));
    const MemorySnapshot snap = memory.snapshot();

    TimestepResult ts;
    ts.t = step;
    ts.frame_index = frame;
    ts.frame_points = loaded.points.points.size();
    ts.memory_size = snap.size();
    ts.patch_count = count_voxels(snap, config.cell_size);
    auto parsed = parse_detections(call_detector(detector, snap, dataset, step), dataset, config,
                                   step);
    ts.detections = std::move(parsed.description);
    ts.diagnostics = std::move(parsed.diagnostics);
    ts.boxes = std::move(parsed.boxes.boxes);
    ts.dropped_boxes = parsed.boxes.dropped;
    update_visibility(tracker, dataset, frame, loaded.maps, config);
    evaluate_step(ts, tracker, dataset, config);
    spdlog::debug("{}memory {} points, {} detections, fuzzy F1 {:.4f}",
                  rethrow_context(dataset, step), ts.memory_size, ts.boxes.size(),
                  ts.report.average_fuzzy_f1);
    result.timesteps.push_back(std::move(ts));
  }
  return result;
}

SceneResult run_merge_baseline(const SceneDataset& dataset, Detector& detector,
                               const ReplayConfig& config) {
  config.validate();
  SceneResult result;
  result.scene_id = dataset.scene_id;
  result.mode = ReplayMode::kMergeBaseline;
  const auto sel = select_frames(dataset, config);
  result.truncated = sel.truncated;

  std::vector<OrientedBox3> merged;
  VisibilityTracker tracker;
  for (std::size_t step = 1; step <= sel.indices.size(); ++step) {
    const std::size_t frame = sel.indices[step - 1];
    const auto loaded = load_points(dataset, frame);
    const std::size_t n = loaded.points.points.size();
    // Single-frame memory holding every point of the frame, so identical
    // frames give identical detector input.
    SpatialMemory memory(FusionSchedule{1, static_cast<std::uint32_t>(std::max<std::size_t>(n, 1))});
    memory.fuse(loaded.points.points, loaded.points.labels, detail::splitmix64(step));
    const MemorySnapshot snap = memory.snapshot();

    TimestepResult ts;
    ts.t = step;
    ts.frame_index = frame;
    ts.frame_points = n;
    ts.memory_size = snap.size();
    ts.patch_count = count_voxels(snap, config.cell_size);
    auto parsed = parse_detections(call_detector(detector, snap, dataset, step), dataset, config,
                                   step);
    ts.diagnostics = std::move(parsed.diagnostics);
    ts.dropped_boxes = parsed.boxes.dropped;
    merged = merge_detections(merged, parsed.boxes.boxes, kMergeThreshold);
    ts.boxes = merged;
    ts.detections = boxes_to_description(merged);
    update_visibility(tracker, dataset, frame, loaded.maps, config);
    evaluate_step(ts, tracker, dataset, config);
    result.timesteps.push_back(std::move(ts));
  }
  return result;
}

SceneResult run_scene(const SceneDataset& dataset, Detector& detector, const ReplayConfig& config) {
  return config.mode == ReplayMode::kMemoryPipeline ? replay(dataset, detector, config)
                                                    : run_merge_baseline(dataset, detector, config);
}

std::size_t worker_count_from_env() {
  if (const char* env = std::getenv("STREAMSCENE_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    spdlog::warn("ignoring STREAMSCENE_WORKERS='{}'", env);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<SceneResult> run_scenes(const std::vector<SceneDataset>& datasets,
                                    const DetectorFactory& make_detector,
                                    const ReplayConfig& config, std::size_t workers) {
  config.validate();
  if (workers == 0) workers = worker_count_from_env();
  workers = std::max<std::size_t>(1, std::min(workers, datasets.size()));
  std::vector<SceneResult> results(datasets.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= datasets.size() || failed.load()) return;
      try {
        auto detector = make_detector();
        results[i] = run_scene(datasets[i], *detector, config);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed = true;
        return;
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

}  // namespace streamscene
