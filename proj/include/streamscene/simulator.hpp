#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "streamscene/dataset.hpp"
#include "streamscene/detector.hpp"
#include "streamscene/geometry.hpp"
#include "streamscene/metrics.hpp"
#include "streamscene/scene_format.hpp"

namespace streamscene {

// Room spans [-x/2, x/2] x [-y/2, y/2] x [0, z]; the floor is z = 0. Objects
// are in world coordinates and stand on the floor.
struct SyntheticScene {
  Vec3 room = Vec3(6.0, 6.0, 3.0);
  std::vector<AnnotatedObject> objects;
};

struct SceneGenOptions {
  double min_gap = 0.5;          // minimum footprint-to-footprint distance, meters
  double wall_margin = 0.1;      // footprints stay this far inside the room
  std::size_t max_attempts = 10000;
  CategoryVocabulary categories = CategoryVocabulary::standard();
};

// Rejection-samples object placements; deterministic under `seed`. Throws
// PlacementError when 10^4 (max_attempts) draws do not fit all objects.
SyntheticScene generate_scene(std::uint64_t seed, std::size_t n_objects,
                              const Vec3& room_dims = Vec3(6.0, 6.0, 3.0),
                              const SceneGenOptions& options = {});

// Typical full extents (x, y, z ranges) for a category; unknown categories
// get a generic 0.3-1.0 m box.
std::pair<Vec3, Vec3> category_dim_range(const std::string& label);

struct CameraPose {
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;    // heading of the forward axis about world z
  double pitch = 0.0;  // positive looking up
  double roll = 0.0;

  // Camera -> world.
  RigidTransform camera_to_world() const;
};

struct TrajectorySpec {
  std::vector<CameraPose> waypoints;
  int frames_per_segment = 1;

  // Linear interpolation between consecutive waypoints (angles along the
  // shortest arc), frames_per_segment frames per segment, plus the final
  // waypoint.
  std::vector<CameraPose> poses() const;
  void validate(const SyntheticScene& scene) const;  // poses inside the room
};

struct OrbitOptions {
  std::size_t frames = 32;
  double radius = 2.0;
  double height = 2.4;
  double pitch = -0.6;         // radians, looking down
  double jitter = 0.03;        // radians of random yaw/pitch/roll jitter
};

// Camera circling the room center, looking at it. One full turn.
TrajectorySpec orbit_trajectory(const SyntheticScene& scene, const OrbitOptions& options,
                                std::uint64_t seed);

struct RenderOptions {
  double label_flip_prob = 0.0;  // per-pixel probability of a wrong category id
  std::uint64_t seed = 0;
};

struct RenderedFrame {
  DepthMap depth;
  SemanticMap semantic;
};

// Ray casts every pixel against the yaw-rotated boxes and the floor inside
// the room. Depth is camera-z distance; 0 where nothing is hit. Semantic ids
// come from `categories`; 0 for floor and misses.
RenderedFrame render_frame(const SyntheticScene& scene, const CameraPose& pose,
                           const CameraIntrinsics& intrinsics,
                           const CategoryVocabulary& categories = CategoryVocabulary::standard(),
                           const RenderOptions& options = {});

// Packages a scene and a trajectory as an in-memory dataset: annotations and
// poses are expressed relative to the first camera, as a reconstruction
// front end would report them.
SceneDataset make_dataset(const SyntheticScene& scene, std::span<const CameraPose> poses,
                          const CameraIntrinsics& intrinsics, const std::string& scene_id,
                          const RenderOptions& render = {});

CameraIntrinsics default_sim_intrinsics();

struct Rect2 {
  Vec2 center = Vec2::Zero();
  Vec2 dims = Vec2::Zero();  // dims.x() >= dims.y()
  double yaw = 0.0;          // direction of the dims.x() side, in (-pi/2, pi/2]
  double area() const { return dims.x() * dims.y(); }
};

std::vector<Vec2> convex_hull(std::span<const Vec2> points);

// Minimum-area enclosing rectangle (one side on a hull edge). Squares
// report yaw in (-pi/4, pi/4]. Throws DegenerateGeometryError for fewer than
// three points or collinear input.
Rect2 min_area_rect(std::span<const Vec2> points);

struct OracleOptions {
  double cluster_distance = 0.3;  // single-linkage threshold, meters
  std::size_t min_points = 20;
  double min_height = 0.01;
};

// Geometric detector: per category, single-linkage clusters of the labeled
// memory points, each fitted with a min-area rectangle and the z extent.
class OracleDetector : public Detector {
 public:
  explicit OracleDetector(OracleOptions options = {}) : options_(options) {}

  std::vector<OrientedBox3> detect_boxes(const MemorySnapshot& memory,
                                         const CategoryVocabulary& categories) const;
  std::string detect(const MemorySnapshot& memory, const CategoryVocabulary& categories) override;

 private:
  OracleOptions options_;
};

// Single-linkage clustering; returns cluster index lists ordered by their
// smallest member index.
std::vector<std::vector<std::size_t>> single_linkage_clusters(std::span<const Vec3> points,
                                                               double distance);

}  // namespace streamscene
