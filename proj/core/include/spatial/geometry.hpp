#pragma once

#include <Eigen/Core>

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spatial {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Color = Eigen::Vector3f;

/// Cameras follow the computer-vision convention: +x right, +y down,
/// +z forward. Angles are degrees at every public boundary.
inline constexpr double kDefaultRotationDeg = 45.0;
inline constexpr double kDefaultMoveStep = 0.3;
/// Horizontal displacement norms below this are reported as negligible.
inline constexpr double kNegligibleMotion = 1e-6;
inline constexpr double kRotationTolerance = 1e-6;

enum class SceneUnits { normalized, metric_meters };

std::string_view to_string(SceneUnits units);
SceneUnits parse_scene_units(std::string_view text);

/// Pinhole intrinsics in factored form (no skew).
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  /// Throws invalid_intrinsics when fx, fy are not positive or the
  /// principal point lies outside the image.
  void validate() const;
  Mat3 matrix() const;
  static Intrinsics from_matrix(const Mat3& k, int width, int height);

  bool operator==(const Intrinsics&) const = default;
};

/// World-to-camera rigid transform x_cam = R * x_world + t.
class ExtrinsicPose {
 public:
  ExtrinsicPose();
  /// Validates that R is a proper rotation (orthonormal, det +1) to 1e-6.
  ExtrinsicPose(const Mat3& rotation, const Vec3& translation);

  /// Row-major 3x4 [R | t].
  static ExtrinsicPose from_row_major(std::span<const double, 12> values);
  std::array<double, 12> to_row_major() const;

  /// Builds the world-to-camera pose of a camera at `center` whose
  /// camera-to-world rotation is `cam_to_world`.
  static ExtrinsicPose from_center(const Mat3& cam_to_world, const Vec3& center);

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  /// R * x + t.
  Vec3 apply(const Vec3& world) const { return rotation_ * world + translation_; }

  bool operator==(const ExtrinsicPose& other) const {
    return rotation_ == other.rotation_ && translation_ == other.translation_;
  }

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

/// Checks R^T R = I and det R = +1 within `tolerance`.
bool is_rotation(const Mat3& r, double tolerance = kRotationTolerance);

struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<float> values;                     // row-major
  std::optional<std::vector<float>> confidence;  // same shape when present

  float at(int u, int v) const { return values[static_cast<std::size_t>(v) * width + u]; }
  float confidence_at(int u, int v) const {
    return (*confidence)[static_cast<std::size_t>(v) * width + u];
  }
  bool operator==(const DepthMap&) const = default;
};

struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Color> colors;  // channels in [0, 1]

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

enum class MotionLabel {
  forward,
  forward_right,
  right,
  backward_right,
  backward,
  backward_left,
  left,
  forward_left,
  negligible,
};

std::string_view to_string(MotionLabel label);

struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

/// Lifts a pixel with depth into the camera frame. Throws invalid_depth for
/// non-positive or non-finite depth, invalid_argument for out-of-image pixels.
Vec3 back_project(Pixel pixel, double depth, const Intrinsics& intrinsics);

/// R^T (p - t).
Vec3 cam_to_world(const Vec3& point_cam, const ExtrinsicPose& pose);

/// C = -R^T t.
Vec3 camera_center(const ExtrinsicPose& pose);

/// Camera-to-world rotation applied to +z.
Vec3 view_direction(const ExtrinsicPose& pose);

/// R1 (C2 - C1): the move from camera 1 to camera 2 seen from camera 1.
Vec3 egocentric_displacement(const ExtrinsicPose& from, const ExtrinsicPose& to);

/// atan2(d_x, d_z) in degrees, in (-180, 180]. Empty when the horizontal
/// part of the displacement is below kNegligibleMotion.
std::optional<double> yaw_angle(const Vec3& displacement);

/// 45-degree sectors centred on the eight headings, closed on the lower edge.
MotionLabel discretize_motion(double theta_deg);

/// One line per consecutive pair, views numbered from 1. Throws
/// insufficient_views for fewer than two poses.
std::string describe_camera_motion(std::span<const ExtrinsicPose> poses,
                                   SceneUnits units = SceneUnits::normalized);

/// Pans the camera about the world y-axis through its own centre. Positive
/// angles swing the view toward the camera's +x (right).
ExtrinsicPose rotate_yaw_in_place(const ExtrinsicPose& pose, double phi_deg);
ExtrinsicPose rotate_right(const ExtrinsicPose& pose, double angle_deg = kDefaultRotationDeg);
ExtrinsicPose rotate_left(const ExtrinsicPose& pose, double angle_deg = kDefaultRotationDeg);
ExtrinsicPose move_forward(const ExtrinsicPose& pose, double distance = kDefaultMoveStep);
ExtrinsicPose move_backward(const ExtrinsicPose& pose, double distance = kDefaultMoveStep);
ExtrinsicPose turn_around(const ExtrinsicPose& pose);

/// Rotation about the world y-axis by `deg`.
Mat3 yaw_rotation(double deg);

}  // namespace spatial
