#include "streamscene/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>

#include <Eigen/LU>

#include "streamscene/errors.hpp"

namespace streamscene {

namespace {

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double signed_area(const std::vector<Vec2>& v) {
  double acc = 0.0;
  for (std::size_t i = 0, n = v.size(); i < n; ++i) {
    acc += cross2(v[i], v[(i + 1) % n]);
  }
  return 0.5 * acc;
}

Eigen::Matrix3d rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

// Keeps the part of `subject` on the left of the directed line e0 -> e1.
std::vector<Vec2> clip_half_plane(const std::vector<Vec2>& subject, const Vec2& e0,
                                  const Vec2& e1) {
  std::vector<Vec2> out;
  const std::size_t n = subject.size();
  if (n == 0) return out;
  out.reserve(n + 1);
  const Vec2 edge = e1 - e0;
  auto side = [&](const Vec2& p) { return cross2(edge, p - e0); };
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& cur = subject[i];
    const Vec2& nxt = subject[(i + 1) % n];
    const double sc = side(cur);
    const double sn = side(nxt);
    if (sc >= 0) out.push_back(cur);
    if ((sc >= 0) != (sn >= 0)) {
      const double t = sc / (sc - sn);
      out.push_back(cur + t * (nxt - cur));
    }
  }
  return out;
}

// Strict weak order on boxes, used to make iou3d exactly symmetric.
bool box_less(const OrientedBox3& a, const OrientedBox3& b) {
  return std::tie(a.center.x(), a.center.y(), a.center.z(), a.dims.x(), a.dims.y(),
                  a.dims.z(), a.yaw) < std::tie(b.center.x(), b.center.y(), b.center.z(),
                                                b.dims.x(), b.dims.y(), b.dims.z(), b.yaw);
}

double iou3d_ordered(const OrientedBox3& a, const OrientedBox3& b) {
  const double za0 = a.center.z() - 0.5 * a.dims.z(), za1 = a.center.z() + 0.5 * a.dims.z();
  const double zb0 = b.center.z() - 0.5 * b.dims.z(), zb1 = b.center.z() + 0.5 * b.dims.z();
  const double z_overlap = std::min(za1, zb1) - std::max(za0, zb0);
  if (z_overlap <= 0) return 0.0;
  const double area = polygon_intersection_area(box_footprint(a), box_footprint(b));
  const double inter = area * z_overlap;
  const double uni = a.volume() + b.volume() - inter;
  if (uni <= 0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

}  // namespace

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

RigidTransform RigidTransform::operator*(const RigidTransform& rhs) const {
  RigidTransform out;
  out.rotation = rotation * rhs.rotation;
  out.translation = rotation * rhs.translation + translation;
  return out;
}

bool RigidTransform::is_valid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const double ortho =
      (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  return ortho < tol && std::abs(rotation.determinant() - 1.0) < tol;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0) || !(fy > 0)) throw ContractError("focal lengths must be positive");
  if (width <= 0 || height <= 0) throw ContractError("image size must be positive");
  if (!(cx >= 0 && cx < width && cy >= 0 && cy < height)) {
    throw ContractError("principal point must lie inside the image");
  }
}

double normalize_angle(double radians) {
  constexpr double kPi = std::numbers::pi;
  if (!std::isfinite(radians)) throw ContractError("angle must be finite");
  double a = std::remainder(radians, 2.0 * kPi);  // [-pi, pi]
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

OrientedBox3::OrientedBox3(std::string label_, const Vec3& center_, const Vec3& dims_,
                           double yaw_)
    : label(std::move(label_)), center(center_), dims(dims_), yaw(normalize_angle(yaw_)) {
  if (!center.allFinite()) throw ContractError("box center must be finite");
  if (!(dims.x() > 0 && dims.y() > 0 && dims.z() > 0) || !dims.allFinite()) {
    throw ContractError("box dimensions must be positive and finite");
  }
}

Vec3 OrientedBox3::to_local(const Vec3& p) const {
  const double c = std::cos(yaw), s = std::sin(yaw);
  const Vec3 d = p - center;
  return {c * d.x() + s * d.y(), -s * d.x() + c * d.y(), d.z()};
}

bool OrientedBox3::contains(const Vec3& p) const {
  const Vec3 l = to_local(p);
  return std::abs(l.x()) <= 0.5 * dims.x() && std::abs(l.y()) <= 0.5 * dims.y() &&
         std::abs(l.z()) <= 0.5 * dims.z();
}

ConvexPolygon2::ConvexPolygon2(std::vector<Vec2> vertices) {
  for (const auto& v : vertices) {
    if (!v.allFinite()) throw ContractError("polygon vertices must be finite");
    if (vertices_.empty() || vertices_.back() != v) vertices_.push_back(v);
  }
  while (vertices_.size() > 1 && vertices_.front() == vertices_.back()) vertices_.pop_back();
  if (signed_area(vertices_) < 0) std::reverse(vertices_.begin(), vertices_.end());

  const std::size_t n = vertices_.size();
  if (n < 3) return;
  double scale = 0.0;
  for (const auto& v : vertices_) scale = std::max(scale, v.cwiseAbs().maxCoeff());
  const double tol = 1e-12 * std::max(1.0, scale * scale);
  // Convex iff every turn is non-negative and the boundary winds once.
  double total_turn = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 e0 = vertices_[(i + 1) % n] - vertices_[i];
    const Vec2 e1 = vertices_[(i + 2) % n] - vertices_[(i + 1) % n];
    if (cross2(e0, e1) < -tol) throw ContractError("polygon is not convex");
    total_turn += std::atan2(cross2(e0, e1), e0.dot(e1));
  }
  if (std::abs(total_turn - 2.0 * std::numbers::pi) > 1e-6) {
    throw ContractError("polygon is not convex (self-intersecting boundary)");
  }
}

double ConvexPolygon2::area() const { return std::abs(signed_area(vertices_)); }

RigidTransform ground_align_transform(double pitch, double roll) {
  constexpr double kHalfPi = 0.5 * std::numbers::pi;
  if (!std::isfinite(pitch) || !std::isfinite(roll)) {
    throw DegenerateOrientationError("pitch and roll must be finite");
  }
  if (std::abs(pitch) >= kHalfPi) {
    throw DegenerateOrientationError(
        "pitch magnitude must be below pi/2: the forward axis has no horizontal projection");
  }
  if (std::abs(roll) >= kHalfPi) {
    throw DegenerateOrientationError("roll magnitude must be below pi/2");
  }
  // Level camera: forward -> +x, right -> -y, down -> -z.
  Eigen::Matrix3d level;
  level << 0, 0, 1,
          -1, 0, 0,
           0, -1, 0;
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  const double cr = std::cos(roll), sr = std::sin(roll);
  Eigen::Matrix3d pitch_up;  // rotation about ground y by -pitch
  pitch_up << cp, 0, -sp,
              0, 1, 0,
              sp, 0, cp;
  Eigen::Matrix3d roll_fwd;  // rotation about ground x by roll
  roll_fwd << 1, 0, 0,
              0, cr, -sr,
              0, sr, cr;
  RigidTransform t;
  t.rotation = pitch_up * roll_fwd * level;
  return t;
}

std::vector<Vec3> apply_transform(const RigidTransform& transform, std::span<const Vec3> points) {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(transform.apply(p));
  return out;
}

std::vector<PixelPoint> unproject_depth(const DepthMap& depth, const CameraIntrinsics& k) {
  k.validate();
  if (depth.width != k.width || depth.height != k.height ||
      depth.values.size() != static_cast<std::size_t>(depth.width) * depth.height) {
    throw DimensionError("depth map is " + std::to_string(depth.width) + "x" +
                         std::to_string(depth.height) + " but intrinsics expect " +
                         std::to_string(k.width) + "x" + std::to_string(k.height));
  }
  std::vector<PixelPoint> out;
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      const double d = depth.at(u, v);
      if (!std::isfinite(d) || d <= 0) continue;
      out.push_back({Vec3((u - k.cx) * d / k.fx, (v - k.cy) * d / k.fy, d),
                     static_cast<std::size_t>(v) * depth.width + u});
    }
  }
  return out;
}

std::array<Vec3, 8> box_corners(const OrientedBox3& box) {
  const Eigen::Matrix3d r = rot_z(box.yaw);
  const Vec3 half = 0.5 * box.dims;
  std::array<Vec3, 8> out;
  for (int i = 0; i < 8; ++i) {
    const Vec3 s((i & 1) ? 1.0 : -1.0, (i & 2) ? 1.0 : -1.0, (i & 4) ? 1.0 : -1.0);
    out[i] = box.center + r * s.cwiseProduct(half);
  }
  return out;
}

ConvexPolygon2 box_footprint(const OrientedBox3& box) {
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  const double hx = 0.5 * box.dims.x(), hy = 0.5 * box.dims.y();
  const Vec2 ctr(box.center.x(), box.center.y());
  const Vec2 ax(c * hx, s * hx), ay(-s * hy, c * hy);
  return ConvexPolygon2({ctr - ax - ay, ctr + ax - ay, ctr + ax + ay, ctr - ax + ay});
}

double polygon_intersection_area(const ConvexPolygon2& a, const ConvexPolygon2& b) {
  if (a.size() < 3 || b.size() < 3) return 0.0;
  std::vector<Vec2> clipped = a.vertices();
  const auto& clip = b.vertices();
  for (std::size_t i = 0, n = clip.size(); i < n && clipped.size() >= 3; ++i) {
    clipped = clip_half_plane(clipped, clip[i], clip[(i + 1) % n]);
  }
  if (clipped.size() < 3) return 0.0;
  const double area = signed_area(clipped);
  return std::clamp(area, 0.0, std::min(a.area(), b.area()));
}

double iou3d(const OrientedBox3& a, const OrientedBox3& b) {
  return box_less(b, a) ? iou3d_ordered(b, a) : iou3d_ordered(a, b);
}

}  // namespace streamscene
