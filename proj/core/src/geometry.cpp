#include "spatial/geometry.hpp"

#include "spatial/error.hpp"

#include <Eigen/LU>

#include <cmath>
#include <cstdio>
#include <numbers>

namespace spatial {

namespace {

// sin/cos of an angle in degrees; exact at multiples of 90.
std::pair<double, double> sin_cos_deg(double deg) {
  double reduced = std::fmod(deg, 360.0);
  if (reduced < 0.0) reduced += 360.0;
  if (reduced == 0.0) return {0.0, 1.0};
  if (reduced == 90.0) return {1.0, 0.0};
  if (reduced == 180.0) return {0.0, -1.0};
  if (reduced == 270.0) return {-1.0, 0.0};
  const double rad = reduced * std::numbers::pi / 180.0;
  return {std::sin(rad), std::cos(rad)};
}

std::string format_distance(double distance, SceneUnits units) {
  char buf[64];
  if (units == SceneUnits::metric_meters) {
    std::snprintf(buf, sizeof(buf), "%.3f meters", distance);
  } else {
    std::snprintf(buf, sizeof(buf), "%.3f", distance);
  }
  return buf;
}

}  // namespace

std::string_view to_string(SceneUnits units) {
  return units == SceneUnits::metric_meters ? "metric-meters" : "normalized";
}

SceneUnits parse_scene_units(std::string_view text) {
  if (text == "normalized") return SceneUnits::normalized;
  if (text == "metric-meters") return SceneUnits::metric_meters;
  throw Error(ErrorCode::invalid_argument, "unknown scene units '" + std::string(text) + "'");
}

void Intrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy)) {
    throw Error(ErrorCode::invalid_intrinsics, "focal lengths must be positive and finite");
  }
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::invalid_intrinsics, "image dimensions must be positive");
  }
  if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
    throw Error(ErrorCode::invalid_intrinsics, "principal point lies outside the image");
  }
}

Mat3 Intrinsics::matrix() const {
  Mat3 k;
  k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return k;
}

Intrinsics Intrinsics::from_matrix(const Mat3& k, int width, int height) {
  if (k(0, 1) != 0.0 || k(1, 0) != 0.0 || k(2, 0) != 0.0 || k(2, 1) != 0.0 || k(2, 2) != 1.0) {
    throw Error(ErrorCode::invalid_intrinsics,
                "intrinsics must be [[fx,0,cx],[0,fy,cy],[0,0,1]]");
  }
  Intrinsics out{k(0, 0), k(1, 1), k(0, 2), k(1, 2), width, height};
  out.validate();
  return out;
}

bool is_rotation(const Mat3& r, double tolerance) {
  if (!r.allFinite()) return false;
  const double ortho = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tolerance && std::abs(r.determinant() - 1.0) <= tolerance;
}

ExtrinsicPose::ExtrinsicPose() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}

ExtrinsicPose::ExtrinsicPose(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  if (!is_rotation(rotation_)) {
    throw Error(ErrorCode::invalid_pose, "rotation is not orthonormal with det +1");
  }
  if (!translation_.allFinite()) {
    throw Error(ErrorCode::invalid_pose, "translation is not finite");
  }
}

ExtrinsicPose ExtrinsicPose::from_row_major(std::span<const double, 12> v) {
  Mat3 r;
  r << v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10];
  return ExtrinsicPose(r, Vec3(v[3], v[7], v[11]));
}

std::array<double, 12> ExtrinsicPose::to_row_major() const {
  std::array<double, 12> out{};
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col) out[row * 4 + col] = rotation_(row, col);
    out[row * 4 + 3] = translation_(row);
  }
  return out;
}

ExtrinsicPose ExtrinsicPose::from_center(const Mat3& cam_to_world, const Vec3& center) {
  const Mat3 r = cam_to_world.transpose();
  return ExtrinsicPose(r, -r * center);
}

Vec3 back_project(Pixel pixel, double depth, const Intrinsics& k) {
  if (!std::isfinite(depth) || depth <= 0.0) {
    throw Error(ErrorCode::invalid_depth, "depth must be positive and finite");
  }
  if (!(pixel.u >= -0.5 && pixel.u < k.width - 0.5 && pixel.v >= -0.5 && pixel.v < k.height - 0.5)) {
    throw Error(ErrorCode::invalid_argument, "pixel lies outside the image");
  }
  return {depth * (pixel.u - k.cx) / k.fx, depth * (pixel.v - k.cy) / k.fy, depth};
}

Vec3 cam_to_world(const Vec3& point_cam, const ExtrinsicPose& pose) {
  return pose.rotation().transpose() * (point_cam - pose.translation());
}

Vec3 camera_center(const ExtrinsicPose& pose) {
  return -(pose.rotation().transpose() * pose.translation());
}

Vec3 view_direction(const ExtrinsicPose& pose) {
  return pose.rotation().transpose().col(2);
}

Vec3 egocentric_displacement(const ExtrinsicPose& from, const ExtrinsicPose& to) {
  return from.rotation() * (camera_center(to) - camera_center(from));
}

std::optional<double> yaw_angle(const Vec3& d) {
  if (std::hypot(d.x(), d.z()) < kNegligibleMotion) return std::nullopt;
  double theta = std::atan2(d.x(), d.z()) * 180.0 / std::numbers::pi;
  // atan2 returns -180 only for a -0.0 x component; fold onto +180.
  if (theta <= -180.0) theta = 180.0;
  return theta;
}

MotionLabel discretize_motion(double theta_deg) {
  // Sector k spans [-22.5 + 45k, 22.5 + 45k), counted clockwise from forward.
  // Compare against the exact edges so values a rounding error below an edge
  // stay in the lower sector.
  long sector = static_cast<long>(std::floor((theta_deg + 22.5) / 45.0));
  if (theta_deg < -22.5 + 45.0 * static_cast<double>(sector)) --sector;
  else if (theta_deg >= 22.5 + 45.0 * static_cast<double>(sector)) ++sector;
  const long index = ((sector % 8) + 8) % 8;
  return static_cast<MotionLabel>(index);
}

std::string_view to_string(MotionLabel label) {
  switch (label) {
    case MotionLabel::forward: return "forward";
    case MotionLabel::forward_right: return "forward-right";
    case MotionLabel::right: return "right";
    case MotionLabel::backward_right: return "backward-right";
    case MotionLabel::backward: return "backward";
    case MotionLabel::backward_left: return "backward-left";
    case MotionLabel::left: return "left";
    case MotionLabel::forward_left: return "forward-left";
    case MotionLabel::negligible: return "negligible";
  }
  return "negligible";
}

std::string describe_camera_motion(std::span<const ExtrinsicPose> poses, SceneUnits units) {
  if (poses.size() < 2) {
    throw Error(ErrorCode::insufficient_views, "camera motion needs at least two views");
  }
  std::string out;
  for (std::size_t i = 0; i + 1 < poses.size(); ++i) {
    const Vec3 world_delta = camera_center(poses[i + 1]) - camera_center(poses[i]);
    const Vec3 local = egocentric_displacement(poses[i], poses[i + 1]);
    const double distance = world_delta.norm();

    std::string line = "From view " + std::to_string(i + 1) + " to view " + std::to_string(i + 2) + ": ";
    const auto theta = yaw_angle(local);
    if (theta) {
      line += "moved ";
      line += to_string(discretize_motion(*theta));
      line += " (distance " + format_distance(distance, units) + ")";
    } else {
      line += "negligible motion";
    }
    // +y points down in the camera frame.
    if (distance > kNegligibleMotion && std::abs(local.y()) > 0.25 * distance) {
      line += local.y() < 0.0 ? " while moving up" : " while moving down";
      if (!theta) line += " (distance " + format_distance(distance, units) + ")";
    }
    if (!out.empty()) out += '\n';
    out += line;
  }
  return out;
}

Mat3 yaw_rotation(double deg) {
  const auto [s, c] = sin_cos_deg(deg);
  Mat3 r;
  r << c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c;
  return r;
}

ExtrinsicPose rotate_yaw_in_place(const ExtrinsicPose& pose, double phi_deg) {
  const Vec3 center = camera_center(pose);
  const Mat3 cam_to_world = yaw_rotation(phi_deg) * pose.rotation().transpose();
  return ExtrinsicPose::from_center(cam_to_world, center);
}

ExtrinsicPose rotate_right(const ExtrinsicPose& pose, double angle_deg) {
  return rotate_yaw_in_place(pose, angle_deg);
}

ExtrinsicPose rotate_left(const ExtrinsicPose& pose, double angle_deg) {
  return rotate_yaw_in_place(pose, -angle_deg);
}

namespace {

ExtrinsicPose translate_along_view(const ExtrinsicPose& pose, double signed_distance) {
  const Vec3 center = camera_center(pose) + signed_distance * view_direction(pose);
  return ExtrinsicPose(pose.rotation(), -pose.rotation() * center);
}

void check_distance(double distance) {
  if (!std::isfinite(distance) || distance < 0.0) {
    throw Error(ErrorCode::invalid_argument, "move distance must be finite and non-negative");
  }
}

}  // namespace

ExtrinsicPose move_forward(const ExtrinsicPose& pose, double distance) {
  check_distance(distance);
  return translate_along_view(pose, distance);
}

ExtrinsicPose move_backward(const ExtrinsicPose& pose, double distance) {
  check_distance(distance);
  return translate_along_view(pose, -distance);
}

ExtrinsicPose turn_around(const ExtrinsicPose& pose) {
  return rotate_yaw_in_place(pose, 180.0);
}

}  // namespace spatial
