#include "streamscene/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <unordered_map>

#include "streamscene/errors.hpp"

namespace streamscene {

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::Matrix3d rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + t * ab)).norm();
}

double polygon_distance(const ConvexPolygon2& a, const ConvexPolygon2& b) {
  if (polygon_intersection_area(a, b) > 0) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  auto scan = [&best](const ConvexPolygon2& from, const ConvexPolygon2& to) {
    const auto& tv = to.vertices();
    for (const auto& p : from.vertices()) {
      for (std::size_t i = 0; i < tv.size(); ++i) {
        best = std::min(best, point_segment_distance(p, tv[i], tv[(i + 1) % tv.size()]));
      }
    }
  };
  scan(a, b);
  scan(b, a);
  return best;
}

// Ray/box slab test in the box frame. Returns the entry distance along `dir`
// or a negative value on a miss (or when the origin is inside the box).
double ray_box(const Vec3& origin, const Vec3& dir, const OrientedBox3& box) {
  const Vec3 o = box.to_local(origin);
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  const Vec3 d(c * dir.x() + s * dir.y(), -s * dir.x() + c * dir.y(), dir.z());
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    const double h = 0.5 * box.dims[k];
    if (std::abs(d[k]) < 1e-15) {
      if (o[k] < -h || o[k] > h) return -1.0;
      continue;
    }
    double a = (-h - o[k]) / d[k];
    double b = (h - o[k]) / d[k];
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
    if (t0 > t1) return -1.0;
  }
  return t0 > 0 ? t0 : -1.0;
}

double wrap_pi(double a) { return normalize_angle(a); }

}  // namespace

std::pair<Vec3, Vec3> category_dim_range(const std::string& label) {
  const std::string l = to_lower(label);
  if (l == "chair") return {{0.45, 0.45, 0.80}, {0.60, 0.60, 1.00}};
  if (l == "table") return {{0.80, 0.60, 0.70}, {1.60, 1.00, 0.80}};
  if (l == "computer") return {{0.30, 0.20, 0.30}, {0.50, 0.40, 0.50}};
  if (l == "curtain") return {{1.00, 0.08, 1.60}, {2.00, 0.15, 2.00}};
  if (l == "sink") return {{0.50, 0.40, 0.80}, {0.80, 0.60, 0.90}};
  if (l == "bed") return {{1.90, 1.00, 0.50}, {2.10, 1.60, 0.70}};
  if (l == "bookcase") return {{0.80, 0.30, 1.50}, {1.20, 0.40, 1.90}};
  if (l == "sofa") return {{1.60, 0.80, 0.70}, {2.20, 1.00, 0.90}};
  if (l == "toilet") return {{0.40, 0.60, 0.70}, {0.50, 0.70, 0.80}};
  if (l == "tub") return {{1.50, 0.70, 0.50}, {1.70, 0.80, 0.60}};
  return {{0.3, 0.3, 0.3}, {1.0, 1.0, 1.0}};
}

SyntheticScene generate_scene(std::uint64_t seed, std::size_t n_objects, const Vec3& room,
                              const SceneGenOptions& options) {
  if (!(room.x() > 0 && room.y() > 0 && room.z() > 0)) {
    throw ConfigError("room dimensions must be positive");
  }
  if (options.categories.size() == 0) throw ConfigError("scene needs at least one category");
  SyntheticScene scene;
  scene.room = room;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_cat(0, options.categories.size() - 1);

  std::vector<ConvexPolygon2> footprints;
  const double hx = 0.5 * room.x() - options.wall_margin;
  const double hy = 0.5 * room.y() - options.wall_margin;
  std::size_t attempts = 0;
  while (scene.objects.size() < n_objects) {
    if (attempts++ >= options.max_attempts) {
      throw PlacementError("could not place " + std::to_string(n_objects) + " objects after " +
                           std::to_string(options.max_attempts) + " attempts (placed " +
                           std::to_string(scene.objects.size()) + ")");
    }
    const std::string& label = options.categories.names()[pick_cat(rng)];
    const auto [lo, hi] = category_dim_range(label);
    Vec3 dims;
    for (int k = 0; k < 3; ++k) dims[k] = lo[k] + unit(rng) * (hi[k] - lo[k]);
    dims.z() = std::min(dims.z(), room.z());
    const double yaw = wrap_pi((2.0 * unit(rng) - 1.0) * kPi);
    const Vec3 center((2.0 * unit(rng) - 1.0) * hx, (2.0 * unit(rng) - 1.0) * hy, 0.5 * dims.z());
    OrientedBox3 box(label, center, dims, yaw);
    const ConvexPolygon2 fp = box_footprint(box);
    bool ok = true;
    for (const auto& v : fp.vertices()) {
      ok = ok && std::abs(v.x()) <= hx && std::abs(v.y()) <= hy;
    }
    for (std::size_t i = 0; ok && i < footprints.size(); ++i) {
      ok = polygon_distance(fp, footprints[i]) >= options.min_gap;
    }
    if (!ok) continue;
    footprints.push_back(fp);
    scene.objects.push_back({"obj_" + std::to_string(scene.objects.size()), std::move(box)});
  }
  return scene;
}

RigidTransform CameraPose::camera_to_world() const {
  RigidTransform t = ground_align_transform(pitch, roll);
  t.rotation = rot_z(yaw) * t.rotation;
  t.translation = position;
  return t;
}

std::vector<CameraPose> TrajectorySpec::poses() const {
  if (frames_per_segment < 1) throw ConfigError("frames_per_segment must be positive");
  std::vector<CameraPose> out;
  if (waypoints.empty()) return out;
  for (std::size_t i = 0; i + 1 < waypoints.size(); ++i) {
    const auto& a = waypoints[i];
    const auto& b = waypoints[i + 1];
    for (int f = 0; f < frames_per_segment; ++f) {
      const double s = static_cast<double>(f) / frames_per_segment;
      CameraPose p;
      p.position = (1.0 - s) * a.position + s * b.position;
      p.yaw = wrap_pi(a.yaw + s * wrap_pi(b.yaw - a.yaw));
      p.pitch = a.pitch + s * (b.pitch - a.pitch);
      p.roll = a.roll + s * (b.roll - a.roll);
      out.push_back(p);
    }
  }
  out.push_back(waypoints.back());
  return out;
}

void TrajectorySpec::validate(const SyntheticScene& scene) const {
  for (const auto& p : poses()) {
    if (!p.position.allFinite() || !std::isfinite(p.yaw) || !std::isfinite(p.pitch) ||
        !std::isfinite(p.roll)) {
      throw ContractError("trajectory pose is not finite");
    }
    if (std::abs(p.position.x()) > 0.5 * scene.room.x() ||
        std::abs(p.position.y()) > 0.5 * scene.room.y() || p.position.z() < 0 ||
        p.position.z() > scene.room.z()) {
      throw ContractError("trajectory pose leaves the room");
    }
  }
}

TrajectorySpec orbit_trajectory(const SyntheticScene& scene, const OrbitOptions& o,
                                std::uint64_t seed) {
  if (o.frames < 1) throw ConfigError("orbit needs at least one frame");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double phase = kPi * unit(rng);
  TrajectorySpec spec;
  for (std::size_t i = 0; i < o.frames; ++i) {
    const double theta = phase + 2.0 * kPi * static_cast<double>(i) / static_cast<double>(o.frames);
    CameraPose p;
    p.position = Vec3(o.radius * std::cos(theta), o.radius * std::sin(theta), o.height);
    p.yaw = wrap_pi(theta + kPi + o.jitter * unit(rng));
    p.pitch = o.pitch + o.jitter * unit(rng);
    p.roll = o.jitter * unit(rng);
    spec.waypoints.push_back(p);
  }
  spec.validate(scene);
  return spec;
}

CameraIntrinsics default_sim_intrinsics() { return {140.0, 140.0, 80.0, 60.0, 160, 120}; }

RenderedFrame render_frame(const SyntheticScene& scene, const CameraPose& pose,
                           const CameraIntrinsics& k, const CategoryVocabulary& categories,
                           const RenderOptions& options) {
  k.validate();
  const RigidTransform cam = pose.camera_to_world();
  std::vector<CategoryId> ids;
  ids.reserve(scene.objects.size());
  for (const auto& o : scene.objects) ids.push_back(categories.id_of(o.box.label));

  RenderedFrame out{DepthMap(k.width, k.height, 0.0f), SemanticMap(k.width, k.height, 0)};
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double hx = 0.5 * scene.room.x(), hy = 0.5 * scene.room.y();
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const Vec3 dir = cam.rotation * Vec3((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
      double best = std::numeric_limits<double>::infinity();
      CategoryId label = kBackground;
      for (std::size_t i = 0; i < scene.objects.size(); ++i) {
        const double t = ray_box(cam.translation, dir, scene.objects[i].box);
        if (t > 0 && t < best) {
          best = t;
          label = ids[i];
        }
      }
      if (dir.z() < 0) {
        const double t = -cam.translation.z() / dir.z();
        const Vec3 hit = cam.translation + t * dir;
        if (t > 0 && t < best && std::abs(hit.x()) <= hx && std::abs(hit.y()) <= hy) {
          best = t;
          label = kBackground;
        }
      }
      if (!std::isfinite(best)) continue;
      if (options.label_flip_prob > 0 && categories.size() > 1 &&
          unit(rng) < options.label_flip_prob) {
        std::uniform_int_distribution<int> pick(1, static_cast<int>(categories.size()));
        CategoryId flipped = label;
        while (flipped == label) flipped = static_cast<CategoryId>(pick(rng));
        label = flipped;
      }
      out.depth.at(u, v) = static_cast<float>(best);
      out.semantic.at(u, v) = label;
    }
  }
  return out;
}

SceneDataset make_dataset(const SyntheticScene& scene, std::span<const CameraPose> poses,
                          const CameraIntrinsics& intrinsics, const std::string& scene_id,
                          const RenderOptions& render) {
  if (poses.empty()) throw ConfigError("dataset needs at least one pose");
  SceneDataset ds;
  ds.scene_id = scene_id;
  ds.intrinsics = intrinsics;
  ds.initial_pitch = poses[0].pitch;
  ds.initial_roll = poses[0].roll;
  const RigidTransform world_to_first = poses[0].camera_to_world().inverse();
  for (std::size_t i = 0; i < poses.size(); ++i) {
    RenderOptions ro = render;
    ro.seed = render.seed + i;
    auto frame = render_frame(scene, poses[i], intrinsics, ds.categories, ro);
    FrameInfo f;
    f.timestamp = static_cast<double>(i);
    f.pose = world_to_first * poses[i].camera_to_world();
    f.depth = std::make_shared<const DepthMap>(std::move(frame.depth));
    f.semantic = std::make_shared<const SemanticMap>(std::move(frame.semantic));
    ds.frames.push_back(std::move(f));
  }
  const Eigen::Matrix3d to_unified = rot_z(-poses[0].yaw);
  for (const auto& o : scene.objects) {
    ds.annotations.push_back(
        {o.id, OrientedBox3(o.box.label, to_unified * (o.box.center - poses[0].position),
                            o.box.dims, o.box.yaw - poses[0].yaw)});
  }
  return ds;
}

std::vector<Vec2> convex_hull(std::span<const Vec2> points) {
  std::vector<Vec2> pts(points.begin(), points.end());
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross2(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross2(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

Rect2 min_area_rect(std::span<const Vec2> points) {
  if (points.size() < 3) throw DegenerateGeometryError("min_area_rect needs at least 3 points");
  const auto hull = convex_hull(points);
  double extent = 0.0;
  for (const auto& p : points) extent = std::max(extent, (p - points[0]).norm());
  double hull_area = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i) hull_area += cross2(hull[i], hull[(i + 1) % hull.size()]);
  hull_area *= 0.5;
  if (hull.size() < 3 || hull_area <= 1e-12 * std::max(1.0, extent * extent)) {
    throw DegenerateGeometryError("min_area_rect input is collinear");
  }

  // The optimal rectangle has one side on a hull edge; hulls of cluster
  // footprints are small, so every edge is scanned against every vertex.
  const std::size_t n = hull.size();
  double best_area = std::numeric_limits<double>::infinity();
  Rect2 best;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 e = (hull[(i + 1) % n] - hull[i]).normalized();
    const Vec2 nrm(-e.y(), e.x());
    double lo_a = 0, hi_a = 0, lo_n = 0, hi_n = 0;
    for (const auto& p : hull) {
      const Vec2 d = p - hull[i];
      lo_a = std::min(lo_a, d.dot(e));
      hi_a = std::max(hi_a, d.dot(e));
      lo_n = std::min(lo_n, d.dot(nrm));
      hi_n = std::max(hi_n, d.dot(nrm));
    }
    const double area = (hi_a - lo_a) * (hi_n - lo_n);
    if (area < best_area) {
      best_area = area;
      best.dims = Vec2(hi_a - lo_a, hi_n - lo_n);
      best.center = hull[i] + 0.5 * (lo_a + hi_a) * e + 0.5 * (lo_n + hi_n) * nrm;
      best.yaw = std::atan2(e.y(), e.x());
    }
  }

  if (best.dims.y() > best.dims.x()) {
    std::swap(best.dims.x(), best.dims.y());
    best.yaw += 0.5 * kPi;
  }
  best.yaw = wrap_pi(best.yaw);
  if (best.yaw > 0.5 * kPi) best.yaw -= kPi;
  if (best.yaw <= -0.5 * kPi) best.yaw += kPi;
  const double scale = std::max(1.0, best.dims.x());
  if (best.dims.x() - best.dims.y() <= 1e-9 * scale) {
    while (best.yaw > 0.25 * kPi) best.yaw -= 0.5 * kPi;
    while (best.yaw <= -0.25 * kPi) best.yaw += 0.5 * kPi;
  }
  return best;
}

std::vector<std::vector<std::size_t>> single_linkage_clusters(std::span<const Vec3> points,
                                                               double distance) {
  if (!(distance > 0)) throw ConfigError("cluster distance must be positive");
  const std::size_t n = points.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&parent](std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  auto cell_key = [distance](const Vec3& p) {
    const auto cx = static_cast<std::int64_t>(std::floor(p.x() / distance));
    const auto cy = static_cast<std::int64_t>(std::floor(p.y() / distance));
    const auto cz = static_cast<std::int64_t>(std::floor(p.z() / distance));
    return std::array<std::int64_t, 3>{cx, cy, cz};
  };
  struct KeyHash {
    std::size_t operator()(const std::array<std::int64_t, 3>& k) const {
      std::uint64_t h = 1469598103934665603ull;
      for (auto v : k) h = (h ^ static_cast<std::uint64_t>(v)) * 1099511628211ull;
      return static_cast<std::size_t>(h);
    }
  };
  std::unordered_map<std::array<std::int64_t, 3>, std::vector<std::size_t>, KeyHash> grid;
  for (std::size_t i = 0; i < n; ++i) grid[cell_key(points[i])].push_back(i);
  const double d2 = distance * distance;
  for (std::size_t i = 0; i < n; ++i) {
    const auto key = cell_key(points[i]);
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          auto it = grid.find({key[0] + dx, key[1] + dy, key[2] + dz});
          if (it == grid.end()) continue;
          for (std::size_t j : it->second) {
            if (j <= i || (points[i] - points[j]).squaredNorm() > d2) continue;
            const std::size_t a = find(i), b = find(j);
            if (a != b) parent[std::max(a, b)] = std::min(a, b);
          }
        }
      }
    }
  }
  std::vector<std::vector<std::size_t>> clusters;
  std::vector<std::size_t> slot(n, static_cast<std::size_t>(-1));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = find(i);
    if (slot[r] == static_cast<std::size_t>(-1)) {
      slot[r] = clusters.size();
      clusters.emplace_back();
    }
    clusters[slot[r]].push_back(i);
  }
  return clusters;
}

std::vector<OrientedBox3> OracleDetector::detect_boxes(const MemorySnapshot& memory,
                                                       const CategoryVocabulary& categories) const {
  std::vector<OrientedBox3> out;
  for (std::size_t c = 0; c < categories.size(); ++c) {
    const auto id = static_cast<CategoryId>(c + 1);
    std::vector<Vec3> pts;
    for (std::size_t i = 0; i < memory.size(); ++i) {
      if (memory.labels()[i] == id) pts.push_back(memory.points()[i].position);
    }
    if (pts.size() < options_.min_points) continue;
    for (const auto& cluster : single_linkage_clusters(pts, options_.cluster_distance)) {
      if (cluster.size() < options_.min_points) continue;
      std::vector<Vec2> xy;
      xy.reserve(cluster.size());
      double zmin = std::numeric_limits<double>::infinity();
      double zmax = -zmin;
      for (auto i : cluster) {
        xy.emplace_back(pts[i].x(), pts[i].y());
        zmin = std::min(zmin, pts[i].z());
        zmax = std::max(zmax, pts[i].z());
      }
      Rect2 rect;
      try {
        rect = min_area_rect(xy);
      } catch (const DegenerateGeometryError&) {
        continue;  // a single face seen edge-on carries no footprint
      }
      const double floor_dim = options_.min_height;
      out.emplace_back(categories.names()[c],
                       Vec3(rect.center.x(), rect.center.y(), 0.5 * (zmin + zmax)),
                       Vec3(std::max(rect.dims.x(), floor_dim), std::max(rect.dims.y(), floor_dim),
                            std::max(zmax - zmin, floor_dim)),
                       rect.yaw);
    }
  }
  return out;
}

std::string OracleDetector::detect(const MemorySnapshot& memory,
                                   const CategoryVocabulary& categories) {
  return serialize(boxes_to_description(detect_boxes(memory, categories)));
}

}  // namespace streamscene
