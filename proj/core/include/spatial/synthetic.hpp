#pragma once

#include "spatial/bundle.hpp"
#include "spatial/geometry.hpp"
#include "spatial/renderer.hpp"

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace spatial {

struct SceneObject {
  enum class Shape { sphere, box };
  Shape shape = Shape::sphere;
  std::string name;
  Vec3 center = Vec3::Zero();
  double radius = 0.5;                   // sphere
  Vec3 half_extents = Vec3::Constant(0.5);  // box, axis-aligned
  std::array<std::uint8_t, 3> color{200, 40, 40};
};

enum class TrajectoryPattern { orbit, lateral, approach, eight_sector };

std::string_view to_string(TrajectoryPattern pattern);
TrajectoryPattern parse_trajectory_pattern(std::string_view text);

/// An upright camera: +y (down) aligned with world y, looking along
/// (sin heading, 0, cos heading).
struct Waypoint {
  Vec3 position = Vec3::Zero();
  double heading_deg = 0.0;
};

ExtrinsicPose waypoint_pose(const Waypoint& waypoint);
std::vector<Waypoint> pattern_waypoints(TrajectoryPattern pattern);

/// Axis-aligned room centred on the origin holding spheres and boxes. Walls
/// carry a checker texture; objects are flat colored.
struct SyntheticSceneSpec {
  Vec3 room_half_extents{3.0, 1.5, 3.0};
  std::vector<SceneObject> objects;
  double checker_period = 0.5;
  std::variant<TrajectoryPattern, std::vector<Waypoint>, std::vector<ExtrinsicPose>> trajectory =
      TrajectoryPattern::orbit;
  int width = 256;
  int height = 192;
  double focal = 200.0;
  SceneUnits units = SceneUnits::normalized;
  bool emit_confidence = true;
  std::string source_tag = "synthetic";

  /// Two spheres and two boxes spread around the room.
  static SyntheticSceneSpec box_and_spheres(TrajectoryPattern pattern = TrajectoryPattern::orbit);

  /// Throws invalid_argument for an empty trajectory, objects outside the
  /// room, or cameras outside the room / inside an object.
  void validate() const;
};

struct GroundTruth {
  Vec3 room_half_extents;
  std::vector<SceneObject> objects;
  /// One label per consecutive pose pair.
  std::vector<MotionLabel> motion_labels;
  /// object_pixels[frame][object]: projection of the object centre.
  std::vector<std::vector<std::optional<Projection>>> object_pixels;

  /// Distance from `point` to the closest analytic surface (walls, spheres, boxes).
  double distance_to_nearest_surface(const Vec3& point) const;
};

/// Ray-casts every pixel of every trajectory pose; depth is exact camera z.
std::pair<ReconstructionBundle, GroundTruth> synthesize_scene(const SyntheticSceneSpec& spec);

}  // namespace spatial
