#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <random>

#include <Eigen/Geometry>
#include <doctest.h>

#include "streamscene/errors.hpp"
#include "streamscene/simulator.hpp"

namespace ss = streamscene;
using ss::Vec2;
using ss::Vec3;

namespace {

constexpr double kPi = std::numbers::pi;

double point_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (a + t * ab - p).norm();
}

std::vector<Vec2> footprint(const ss::OrientedBox3& b) {
  std::vector<Vec2> out;
  for (const auto& c : ss::box_corners(b)) {
    if (c.z() < b.center.z()) out.push_back(c.head<2>());
  }
  return out;
}

// Minimum footprint gap, or -1 when the footprints overlap.
double footprint_gap(const ss::OrientedBox3& a, const ss::OrientedBox3& b) {
  if (ss::polygon_intersection_area(ss::box_footprint(a), ss::box_footprint(b)) > 0) return -1;
  const auto pa = ss::box_footprint(a).vertices(), pb = ss::box_footprint(b).vertices();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      best = std::min(best, point_segment(pa[i], pb[j], pb[(j + 1) % 4]));
      best = std::min(best, point_segment(pb[i], pa[j], pa[(j + 1) % 4]));
    }
  }
  return best;
}

// Area of the rectangle aligned with angle `t` enclosing the points.
double aligned_area(const std::vector<Vec2>& pts, double t) {
  const Vec2 u(std::cos(t), std::sin(t)), v(-std::sin(t), std::cos(t));
  double lo_u = INFINITY, hi_u = -INFINITY, lo_v = INFINITY, hi_v = -INFINITY;
  for (const auto& p : pts) {
    lo_u = std::min(lo_u, p.dot(u));
    hi_u = std::max(hi_u, p.dot(u));
    lo_v = std::min(lo_v, p.dot(v));
    hi_v = std::max(hi_v, p.dot(v));
  }
  return (hi_u - lo_u) * (hi_v - lo_v);
}

// 0.1 degree sweep over [0, 90) then a fine local search around the best.
double sweep_min_area(const std::vector<Vec2>& pts) {
  const double step = 0.1 * kPi / 180;
  double best_t = 0, best = INFINITY;
  for (int i = 0; i < 900; ++i) {
    const double a = aligned_area(pts, i * step);
    if (a < best) {
      best = a;
      best_t = i * step;
    }
  }
  double lo = best_t - step, hi = best_t + step;
  for (int it = 0; it < 200; ++it) {
    const double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
    if (aligned_area(pts, m1) < aligned_area(pts, m2)) {
      hi = m2;
    } else {
      lo = m1;
    }
  }
  return std::min(best, aligned_area(pts, 0.5 * (lo + hi)));
}

ss::MemorySnapshot surface_memory(const std::vector<ss::OrientedBox3>& boxes, int n = 12) {
  const auto& vocab = ss::CategoryVocabulary::standard();
  ss::MemoryData d;
  for (const auto& box : boxes) {
    const double c = std::cos(box.yaw), s = std::sin(box.yaw);
    for (int axis = 0; axis < 3; ++axis) {
      for (int sign : {-1, 1}) {
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < n; ++j) {
            Vec3 l;
            l[axis] = 0.5 * sign;
            l[(axis + 1) % 3] = (i + 0.5) / n - 0.5;
            l[(axis + 2) % 3] = (j + 0.5) / n - 0.5;
            l = l.cwiseProduct(box.dims);
            d.points.push_back({box.center + Vec3(c * l.x() - s * l.y(), s * l.x() + c * l.y(),
                                                  l.z()),
                                Eigen::Vector3f::Zero()});
            d.labels.push_back(vocab.id_of(box.label));
            d.origins.push_back(1);
          }
        }
      }
    }
  }
  return ss::MemorySnapshot(std::move(d));
}

}  // namespace

TEST_CASE("generate_scene") {
  CHECK(ss::generate_scene(1, 0).objects.empty());
  const auto a = ss::generate_scene(42, 6), b = ss::generate_scene(42, 6);
  REQUIRE(a.objects.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(a.objects[i].id == b.objects[i].id);
    CHECK(a.objects[i].box.center == b.objects[i].box.center);
    CHECK(a.objects[i].box.dims == b.objects[i].box.dims);
  }
  CHECK_THROWS_AS(ss::generate_scene(1, 60, Vec3(2, 2, 3)), ss::PlacementError);
}

TEST_CASE("placement feasibility: 10 objects, 100 seeds") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto scene = ss::generate_scene(seed, 10);
    REQUIRE(scene.objects.size() == 10);
    for (const auto& o : scene.objects) {
      for (const auto& p : footprint(o.box)) {
        CHECK(std::abs(p.x()) <= 3.0 - 0.1 + 1e-9);
        CHECK(std::abs(p.y()) <= 3.0 - 0.1 + 1e-9);
      }
      CHECK(o.box.center.z() == doctest::Approx(o.box.dims.z() / 2));  // on the floor
      CHECK(o.box.dims.z() <= 3.0);
    }
    for (std::size_t i = 0; i < 10; ++i) {
      for (std::size_t j = i + 1; j < 10; ++j) {
        CHECK(footprint_gap(scene.objects[i].box, scene.objects[j].box) >= 0.5 - 1e-9);
      }
    }
  }
}

TEST_CASE("trajectories") {
  const auto scene = ss::generate_scene(3, 5);
  ss::OrbitOptions o;
  o.frames = 16;
  const auto traj = ss::orbit_trajectory(scene, o, 3);
  const auto poses = traj.poses();
  CHECK(poses.size() == 16);
  CHECK_NOTHROW(traj.validate(scene));
  for (const auto& p : poses) {
    CHECK(std::hypot(p.position.x(), p.position.y()) == doctest::Approx(2.0));
    CHECK(p.camera_to_world().is_valid());
  }

  ss::TrajectorySpec line;
  line.waypoints = {ss::CameraPose{Vec3(0, 0, 1), 0.0, 0, 0},
                    ss::CameraPose{Vec3(2, 0, 1), 3 * kPi / 4, 0, 0}};
  line.frames_per_segment = 4;
  const auto lp = line.poses();
  REQUIRE(lp.size() == 5);
  CHECK(lp[2].position.x() == doctest::Approx(1.0));
  CHECK(lp[2].yaw == doctest::Approx(3 * kPi / 8));
  line.waypoints[1].position = Vec3(9, 0, 1);
  CHECK_THROWS_AS(line.validate(scene), ss::ContractError);
}

TEST_CASE("render: empty view and frontal plane") {
  const auto k = ss::default_sim_intrinsics();
  ss::SyntheticScene empty;
  const auto up = ss::render_frame(empty, ss::CameraPose{Vec3(0, 0, 1.5), 0, 0.7, 0}, k);
  for (auto d : up.depth.values) CHECK(d == 0.0f);
  for (auto s : up.semantic.values) CHECK(s == 0);

  ss::SyntheticScene wall;
  wall.objects.push_back(
      {"w", ss::OrientedBox3("bookcase", Vec3(2.05, 0, 1.5), Vec3(0.1, 5, 3), 0)});
  const auto f = ss::render_frame(wall, ss::CameraPose{Vec3(0, 0, 1.5), 0, 0, 0}, k);
  const auto id = ss::CategoryVocabulary::standard().id_of("bookcase");
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      CHECK(std::abs(f.depth.at(u, v) - 2.0) < 1e-6);
      CHECK(f.semantic.at(u, v) == id);
    }
  }
}

TEST_CASE("render: unprojected points lie on surfaces") {
  const auto k = ss::default_sim_intrinsics();
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto scene = ss::generate_scene(seed, 7);
    ss::OrbitOptions o;
    o.frames = 3;
    for (const auto& pose : ss::orbit_trajectory(scene, o, seed).poses()) {
      const auto frame = ss::render_frame(scene, pose, k);
      const auto c2w = pose.camera_to_world();
      std::size_t n = 0;
      for (const auto& pp : ss::unproject_depth(frame.depth, k)) {
        const Vec3 w = c2w.apply(pp.position);
        double resid = std::abs(w.z());  // floor
        for (const auto& obj : scene.objects) {
          const Vec3 l = obj.box.to_local(w);
          const Vec3 excess = l.cwiseAbs() - 0.5 * obj.box.dims;
          resid = std::min(resid, std::abs(excess.maxCoeff()));
        }
        CHECK(resid < 1e-6);
        ++n;
      }
      CHECK(n > 0);
    }
  }
}

TEST_CASE("render: label flips are seeded") {
  const auto k = ss::default_sim_intrinsics();
  const auto scene = ss::generate_scene(9, 6);
  const ss::CameraPose pose{Vec3(0, -2, 2.4), kPi / 2, -0.6, 0};
  ss::RenderOptions flip{0.3, 5};
  const auto a = ss::render_frame(scene, pose, k, ss::CategoryVocabulary::standard(), flip);
  const auto b = ss::render_frame(scene, pose, k, ss::CategoryVocabulary::standard(), flip);
  const auto clean = ss::render_frame(scene, pose, k);
  CHECK(a.semantic == b.semantic);
  CHECK(a.depth == clean.depth);
  std::size_t diff = 0, labeled = 0;
  for (std::size_t i = 0; i < a.semantic.size(); ++i) {
    diff += a.semantic.values[i] != clean.semantic.values[i];
    labeled += clean.depth.values[i] > 0;
  }
  CHECK(diff > 0);
  CHECK(diff < labeled);
}

TEST_CASE("make_dataset: annotations relative to the first camera") {
  const auto scene = ss::generate_scene(4, 5);
  ss::OrbitOptions o;
  o.frames = 5;
  const auto poses = ss::orbit_trajectory(scene, o, 4).poses();
  const auto ds = ss::make_dataset(scene, poses, ss::default_sim_intrinsics(), "s");
  REQUIRE(ds.frames.size() == 5);
  REQUIRE(ds.annotations.size() == 5);
  // The unified frame has the floor at -camera height and the same geometry.
  const double h = poses[0].position.z();
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& a = ds.annotations[i].box;
    const auto& w = scene.objects[i].box;
    CHECK(a.center.z() - a.dims.z() / 2 == doctest::Approx(-h));
    CHECK(a.dims == w.dims);
  }
  // Pairwise distances between object centers are preserved.
  CHECK((ds.annotations[0].box.center - ds.annotations[1].box.center).norm() ==
        doctest::Approx((scene.objects[0].box.center - scene.objects[1].box.center).norm()));
  // Every unified pose is rigid.
  for (std::size_t f = 0; f < 5; ++f) {
    CHECK(ds.camera_to_unified(f).is_valid());
  }
}

TEST_CASE("convex hull") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vec2> pts;
    for (int i = 0; i < 40; ++i) pts.emplace_back(u(rng), u(rng));
    const auto hull = ss::convex_hull(pts);
    REQUIRE(hull.size() >= 3);
    for (std::size_t i = 0; i < hull.size(); ++i) {
      const Vec2 e = hull[(i + 1) % hull.size()] - hull[i];
      for (const auto& p : pts) {
        const Vec2 d = p - hull[i];
        CHECK(e.x() * d.y() - e.y() * d.x() >= -1e-12);
      }
    }
  }
}

TEST_CASE("min_area_rect") {
  std::vector<Vec2> square{{0.5, 0.5}, {-0.5, 0.5}, {-0.5, -0.5}, {0.5, -0.5}};
  auto r = ss::min_area_rect(square);
  CHECK(r.dims.x() == doctest::Approx(1.0));
  CHECK(r.dims.y() == doctest::Approx(1.0));
  CHECK(std::abs(r.yaw) < 1e-9);

  const double t = 30.0 * kPi / 180;
  const Eigen::Rotation2D<double> rot(t);
  std::vector<Vec2> turned;
  for (const auto& p : square) turned.push_back(rot * p + Vec2(2, -1));
  r = ss::min_area_rect(turned);
  CHECK(std::abs(r.yaw - t) < 1e-9);
  CHECK(r.dims.x() == doctest::Approx(1.0));
  CHECK((r.center - Vec2(2, -1)).norm() < 1e-9);

  // Rectangle: yaw follows the long side, in (-pi/2, pi/2].
  std::vector<Vec2> rect{{1, 0.25}, {-1, 0.25}, {-1, -0.25}, {1, -0.25}};
  for (auto& p : rect) p = Eigen::Rotation2D<double>(2.5) * p;
  r = ss::min_area_rect(rect);
  CHECK(r.dims.x() == doctest::Approx(2.0));
  CHECK(r.yaw == doctest::Approx(2.5 - kPi));

  std::mt19937_64 rng(17);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> sx(0.2, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double ax = sx(rng), ay = sx(rng);
    std::vector<Vec2> pts;
    for (int i = 0; i < 30; ++i) pts.emplace_back(ax * g(rng), ay * g(rng));
    const auto rect2 = ss::min_area_rect(pts);
    CHECK(rect2.dims.x() >= rect2.dims.y());
    CHECK(rect2.yaw > -kPi / 2);
    CHECK(rect2.yaw <= kPi / 2);
    CHECK(std::abs(rect2.area() - sweep_min_area(pts)) < 1e-6);
    // Every point is inside the rectangle.
    const Vec2 u(std::cos(rect2.yaw), std::sin(rect2.yaw)), v(-u.y(), u.x());
    for (const auto& p : pts) {
      CHECK(std::abs((p - rect2.center).dot(u)) <= rect2.dims.x() / 2 + 1e-9);
      CHECK(std::abs((p - rect2.center).dot(v)) <= rect2.dims.y() / 2 + 1e-9);
    }
  }

  CHECK_THROWS_AS(ss::min_area_rect(std::vector<Vec2>{{0, 0}, {1, 1}}),
                  ss::DegenerateGeometryError);
  CHECK_THROWS_AS(ss::min_area_rect(std::vector<Vec2>{{0, 0}, {1, 1}, {2, 2}, {3, 3}}),
                  ss::DegenerateGeometryError);
}

TEST_CASE("single-linkage clusters match a brute-force union-find") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vec3> pts;
    for (int i = 0; i < 150; ++i) pts.emplace_back(u(rng), u(rng), u(rng) / 3);
    const double dist = 0.3;
    std::vector<std::size_t> parent(pts.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
      return parent[x] == x ? x : parent[x] = find(parent[x]);
    };
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (std::size_t j = i + 1; j < pts.size(); ++j) {
        if ((pts[i] - pts[j]).norm() <= dist) parent[find(i)] = find(j);
      }
    }
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < pts.size(); ++i) groups[find(i)].push_back(i);
    std::vector<std::vector<std::size_t>> expect;
    for (auto& [root, members] : groups) expect.push_back(members);
    std::sort(expect.begin(), expect.end());

    auto got = ss::single_linkage_clusters(pts, dist);
    for (std::size_t k = 1; k < got.size(); ++k) CHECK(got[k - 1].front() < got[k].front());
    for (auto& c : got) std::sort(c.begin(), c.end());
    std::sort(got.begin(), got.end());
    CHECK(got == expect);
  }
}

TEST_CASE("oracle detector") {
  const ss::OracleDetector det;
  const auto& vocab = ss::CategoryVocabulary::standard();
  CHECK(det.detect_boxes(ss::MemorySnapshot(), vocab).empty());

  const ss::OrientedBox3 chair("chair", Vec3(1, 2, 0.45), Vec3(0.6, 0.5, 0.9), 0.4);
  auto boxes = det.detect_boxes(surface_memory({chair}), vocab);
  REQUIRE(boxes.size() == 1);
  CHECK(ss::iou3d(boxes[0], chair) >= 0.9);

  const ss::OrientedBox3 other("chair", Vec3(-2, -1, 0.45), Vec3(0.5, 0.5, 0.9), -0.2);
  boxes = det.detect_boxes(surface_memory({chair, other}), vocab);
  REQUIRE(boxes.size() == 2);
  CHECK(boxes[0].label == "chair");
  CHECK(boxes[1].label == "chair");

  // Rotating the memory about z rotates the detections.
  const double theta = 0.7;
  const Eigen::Matrix3d rz = Eigen::AngleAxisd(theta, Vec3::UnitZ()).toRotationMatrix();
  auto data = surface_memory({chair, other}).data();
  for (auto& p : data.points) p.position = rz * p.position;
  const auto rotated = det.detect_boxes(ss::MemorySnapshot(data), vocab);
  REQUIRE(rotated.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    const ss::OrientedBox3 expect(boxes[i].label, rz * boxes[i].center, boxes[i].dims,
                                  boxes[i].yaw + theta);
    CHECK(ss::iou3d(rotated[i], expect) > 1 - 1e-6);
  }

  // Too few points: skipped.
  auto sparse = surface_memory({chair}, 1).data();
  CHECK(det.detect_boxes(ss::MemorySnapshot(sparse), vocab).empty());
}
