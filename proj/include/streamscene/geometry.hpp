#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace streamscene {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

// Row-major H x W raster. Used for depth maps (float meters, 0 or NaN =
// invalid) and semantic maps (uint16 category ids).
template <typename T>
struct Grid {
  int width = 0;
  int height = 0;
  std::vector<T> values;

  Grid() = default;
  Grid(int w, int h, T fill = T{})
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

  T& at(int u, int v) { return values[static_cast<std::size_t>(v) * width + u]; }
  const T& at(int u, int v) const {
    return values[static_cast<std::size_t>(v) * width + u];
  }
  std::size_t size() const { return values.size(); }
  bool operator==(const Grid&) const = default;
};

using DepthMap = Grid<float>;
using SemanticMap = Grid<std::uint16_t>;

struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  RigidTransform inverse() const;
  // (a * b).apply(p) == a.apply(b.apply(p))
  RigidTransform operator*(const RigidTransform& rhs) const;

  // Orthonormal with determinant +1 within `tol`.
  bool is_valid(double tol = 1e-9) const;
};

// Camera convention: x right, y down, z forward.
struct CameraIntrinsics {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int width = 0, height = 0;

  void validate() const;  // throws ContractError
};

// Wraps an angle into (-pi, pi].
double normalize_angle(double radians);

// Box with full extents along its local axes and a rotation about world z.
struct OrientedBox3 {
  std::string label;
  Vec3 center = Vec3::Zero();
  Vec3 dims = Vec3::Ones();
  double yaw = 0.0;

  OrientedBox3(std::string label, const Vec3& center, const Vec3& dims, double yaw);

  double volume() const { return dims.x() * dims.y() * dims.z(); }
  // World point -> box-local coordinates (box center at origin, unrotated).
  Vec3 to_local(const Vec3& p) const;
  bool contains(const Vec3& p) const;
};

class ConvexPolygon2 {
 public:
  ConvexPolygon2() = default;

  // Accepts vertices in either winding; drops repeated consecutive vertices
  // and stores them counter-clockwise. Throws ContractError when the polygon
  // is not convex.
  explicit ConvexPolygon2(std::vector<Vec2> vertices);

  const std::vector<Vec2>& vertices() const { return vertices_; }
  std::size_t size() const { return vertices_.size(); }
  double area() const;

 private:
  std::vector<Vec2> vertices_;
};

// Maps initial-camera coordinates into the ground-aligned frame: origin at the
// camera, z up, x along the camera forward axis projected on the ground, and
// y = z cross x. Pitch is positive when the camera looks up; roll is a
// right-handed rotation about the forward axis.
RigidTransform ground_align_transform(double pitch, double roll);

std::vector<Vec3> apply_transform(const RigidTransform& transform, std::span<const Vec3> points);

struct PixelPoint {
  Vec3 position;        // camera frame
  std::size_t pixel;    // v * width + u
};

// One point per valid pixel (depth > 0 and finite), in row-major pixel order.
std::vector<PixelPoint> unproject_depth(const DepthMap& depth, const CameraIntrinsics& intrinsics);

// Corner order: index bit 0 selects +x/-x, bit 1 selects +y/-y, bit 2 selects
// +z/-z in box-local axes (bit set = positive half). Corner i is therefore
// center + R(yaw) * (sx * dx/2, sy * dy/2, sz * dz/2) with s = bit ? +1 : -1.
std::array<Vec3, 8> box_corners(const OrientedBox3& box);

// Counter-clockwise xy footprint of the box.
ConvexPolygon2 box_footprint(const OrientedBox3& box);

// Area of the intersection of two convex polygons (Sutherland-Hodgman
// clipping followed by the shoelace formula). Returns 0 when the clipped
// polygon has fewer than 3 vertices.
double polygon_intersection_area(const ConvexPolygon2& a, const ConvexPolygon2& b);

// Exact IoU for boxes rotated about z only.
double iou3d(const OrientedBox3& a, const OrientedBox3& b);

}  // namespace streamscene
