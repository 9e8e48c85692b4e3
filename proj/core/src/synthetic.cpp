#include "spatial/synthetic.hpp"

#include "spatial/error.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace spatial {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kHitEpsilon = 1e-9;

double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }

// Wall base colors (light, dark) indexed by face: -x, +x, -y, +y, -z, +z.
constexpr std::array<std::array<std::array<std::uint8_t, 3>, 2>, 6> kWallColors{{
    {{{230, 210, 180}, {150, 120, 90}}},
    {{{180, 210, 230}, {80, 110, 150}}},
    {{{240, 240, 240}, {170, 170, 170}}},
    {{{200, 180, 160}, {110, 90, 70}}},
    {{{200, 230, 190}, {100, 140, 90}}},
    {{{230, 190, 220}, {140, 90, 130}}},
}};

struct Hit {
  double t = kInf;
  int object = -1;  // -1 = room
  int face = 0;
};

double ray_sphere(const Vec3& origin, const Vec3& dir, const SceneObject& s) {
  const Vec3 oc = origin - s.center;
  const double a = dir.squaredNorm();
  const double half_b = dir.dot(oc);
  const double c = oc.squaredNorm() - s.radius * s.radius;
  const double disc = half_b * half_b - a * c;
  if (disc < 0.0) return kInf;
  const double root = std::sqrt(disc);
  // Stable form of the nearer root.
  const double q = -(half_b + std::copysign(root, half_b));
  double t0 = q / a;
  double t1 = c / q;
  if (t0 > t1) std::swap(t0, t1);
  if (t0 > kHitEpsilon) return t0;
  if (t1 > kHitEpsilon) return t1;
  return kInf;
}

double ray_box(const Vec3& origin, const Vec3& dir, const SceneObject& b) {
  double t_enter = -kInf, t_exit = kInf;
  for (int axis = 0; axis < 3; ++axis) {
    const double lo = b.center[axis] - b.half_extents[axis];
    const double hi = b.center[axis] + b.half_extents[axis];
    if (dir[axis] == 0.0) {
      if (origin[axis] < lo || origin[axis] > hi) return kInf;
      continue;
    }
    double t0 = (lo - origin[axis]) / dir[axis];
    double t1 = (hi - origin[axis]) / dir[axis];
    if (t0 > t1) std::swap(t0, t1);
    t_enter = std::max(t_enter, t0);
    t_exit = std::min(t_exit, t1);
  }
  if (t_enter > t_exit || t_enter <= kHitEpsilon) return kInf;
  return t_enter;
}

Hit ray_room(const Vec3& origin, const Vec3& dir, const Vec3& half) {
  Hit hit;
  for (int axis = 0; axis < 3; ++axis) {
    if (dir[axis] == 0.0) continue;
    const double bound = dir[axis] > 0.0 ? half[axis] : -half[axis];
    const double t = (bound - origin[axis]) / dir[axis];
    if (t < hit.t) {
      hit.t = t;
      hit.face = axis * 2 + (dir[axis] > 0.0 ? 1 : 0);
    }
  }
  return hit;
}

std::array<std::uint8_t, 3> wall_color(const Vec3& p, int face, double period) {
  const long parity = static_cast<long>(std::floor(p.x() / period)) +
                      static_cast<long>(std::floor(p.y() / period)) +
                      static_cast<long>(std::floor(p.z() / period));
  return kWallColors[static_cast<std::size_t>(face)][static_cast<std::size_t>(((parity % 2) + 2) % 2)];
}

double box_surface_distance(const Vec3& p, const Vec3& center, const Vec3& half) {
  const Vec3 q = (p - center).cwiseAbs() - half;
  if ((q.array() <= 0.0).all()) return -q.maxCoeff();
  return q.cwiseMax(0.0).norm();
}

bool inside_object(const Vec3& p, const SceneObject& o) {
  if (o.shape == SceneObject::Shape::sphere) return (p - o.center).norm() <= o.radius;
  return ((p - o.center).cwiseAbs() - o.half_extents).maxCoeff() <= 0.0;
}

// Label of a displacement seen by an upright camera with the given heading,
// snapped to the nearest of the eight sector centres.
MotionLabel upright_label(const Vec3& from, double heading_deg, const Vec3& to) {
  const double dx = to.x() - from.x();
  const double dz = to.z() - from.z();
  const double h = deg2rad(heading_deg);
  const double local_x = std::cos(h) * dx - std::sin(h) * dz;
  const double local_z = std::sin(h) * dx + std::cos(h) * dz;
  if (std::hypot(local_x, local_z) < kNegligibleMotion) return MotionLabel::negligible;
  const double deg = std::atan2(local_x, local_z) * 180.0 / std::numbers::pi;
  const long sector = std::lround(deg / 45.0);
  return static_cast<MotionLabel>(((sector % 8) + 8) % 8);
}

MotionLabel pose_label(const ExtrinsicPose& a, const ExtrinsicPose& b) {
  // Independent of camera_center(): solve R c + t = 0 directly.
  const Vec3 ca = a.rotation().colPivHouseholderQr().solve(-a.translation());
  const Vec3 cb = b.rotation().colPivHouseholderQr().solve(-b.translation());
  const Vec3 local = a.rotation() * (cb - ca);
  if (std::hypot(local.x(), local.z()) < kNegligibleMotion) return MotionLabel::negligible;
  const double deg = std::atan2(local.x(), local.z()) * 180.0 / std::numbers::pi;
  const long sector = std::lround(deg / 45.0);
  return static_cast<MotionLabel>(((sector % 8) + 8) % 8);
}

}  // namespace

std::string_view to_string(TrajectoryPattern pattern) {
  switch (pattern) {
    case TrajectoryPattern::orbit: return "orbit";
    case TrajectoryPattern::lateral: return "lateral";
    case TrajectoryPattern::approach: return "approach";
    case TrajectoryPattern::eight_sector: return "eight-sector";
  }
  return "orbit";
}

TrajectoryPattern parse_trajectory_pattern(std::string_view text) {
  if (text == "orbit") return TrajectoryPattern::orbit;
  if (text == "lateral") return TrajectoryPattern::lateral;
  if (text == "approach") return TrajectoryPattern::approach;
  if (text == "eight-sector") return TrajectoryPattern::eight_sector;
  throw Error(ErrorCode::invalid_argument, "unknown trajectory pattern '" + std::string(text) + "'");
}

ExtrinsicPose waypoint_pose(const Waypoint& w) {
  return ExtrinsicPose::from_center(yaw_rotation(w.heading_deg), w.position);
}

std::vector<Waypoint> pattern_waypoints(TrajectoryPattern pattern) {
  std::vector<Waypoint> out;
  switch (pattern) {
    case TrajectoryPattern::orbit:
      for (double alpha : {0.0, 20.0, 40.0, 60.0}) {
        const double a = deg2rad(alpha);
        out.push_back({Vec3(-1.2 * std::sin(a), 0.0, -1.2 * std::cos(a)), alpha});
      }
      break;
    case TrajectoryPattern::lateral:
      for (double x : {-0.3, 0.0, 0.3}) out.push_back({Vec3(x, 0.0, -0.5), 0.0});
      break;
    case TrajectoryPattern::approach:
      for (double z : {-1.0, -0.6, -0.2}) out.push_back({Vec3(0.0, 0.0, z), 0.0});
      break;
    case TrajectoryPattern::eight_sector: {
      // Step k moves toward sector k of the current camera while the
      // heading drifts 20 degrees per step.
      Waypoint w{Vec3(0.0, 0.0, -0.3), 0.0};
      out.push_back(w);
      for (int k = 0; k < 8; ++k) {
        const double move = deg2rad(w.heading_deg + 45.0 * k);
        w.position += 0.3 * Vec3(std::sin(move), 0.0, std::cos(move));
        w.heading_deg = 20.0 * (k + 1);
        out.push_back(w);
      }
      break;
    }
  }
  return out;
}

SyntheticSceneSpec SyntheticSceneSpec::box_and_spheres(TrajectoryPattern pattern) {
  SyntheticSceneSpec spec;
  spec.trajectory = pattern;
  SceneObject red;
  red.shape = SceneObject::Shape::sphere;
  red.name = "red sphere";
  red.center = Vec3(0.9, 0.6, 2.0);
  red.radius = 0.45;
  red.color = {210, 40, 40};
  SceneObject blue;
  blue.shape = SceneObject::Shape::box;
  blue.name = "blue box";
  blue.center = Vec3(-1.0, 0.9, 1.8);
  blue.half_extents = Vec3(0.4, 0.6, 0.4);
  blue.color = {40, 70, 210};
  SceneObject green;
  green.shape = SceneObject::Shape::sphere;
  green.name = "green sphere";
  green.center = Vec3(1.8, 0.2, -1.8);
  green.radius = 0.35;
  green.color = {40, 190, 60};
  SceneObject yellow;
  yellow.shape = SceneObject::Shape::box;
  yellow.name = "yellow box";
  yellow.center = Vec3(-2.0, 1.1, -1.5);
  yellow.half_extents = Vec3(0.4, 0.4, 0.4);
  yellow.color = {220, 200, 40};
  spec.objects = {red, blue, green, yellow};
  return spec;
}

namespace {

std::vector<Waypoint> waypoints_of(const SyntheticSceneSpec& spec) {
  if (const auto* p = std::get_if<TrajectoryPattern>(&spec.trajectory)) return pattern_waypoints(*p);
  if (const auto* w = std::get_if<std::vector<Waypoint>>(&spec.trajectory)) return *w;
  return {};
}

std::vector<ExtrinsicPose> poses_of(const SyntheticSceneSpec& spec) {
  if (const auto* poses = std::get_if<std::vector<ExtrinsicPose>>(&spec.trajectory)) return *poses;
  std::vector<ExtrinsicPose> out;
  for (const auto& w : waypoints_of(spec)) out.push_back(waypoint_pose(w));
  return out;
}

}  // namespace

void SyntheticSceneSpec::validate() const {
  if (width <= 0 || height <= 0 || !(focal > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "synthetic camera needs positive size and focal length");
  }
  if (!(room_half_extents.array() > 0.0).all()) {
    throw Error(ErrorCode::invalid_argument, "room half-extents must be positive");
  }
  if (!(checker_period > 0.0)) throw Error(ErrorCode::invalid_argument, "checker period must be positive");
  for (const auto& o : objects) {
    const Vec3 reach = o.shape == SceneObject::Shape::sphere ? Vec3::Constant(o.radius) : o.half_extents;
    if (((o.center.cwiseAbs() + reach) - room_half_extents).maxCoeff() > 1e-12) {
      throw Error(ErrorCode::invalid_argument, "object '" + o.name + "' extends outside the room");
    }
  }
  const auto poses = poses_of(*this);
  if (poses.empty()) throw Error(ErrorCode::invalid_argument, "synthetic trajectory is empty");
  for (const auto& pose : poses) {
    const Vec3 c = camera_center(pose);
    if ((c.cwiseAbs() - room_half_extents).maxCoeff() >= 0.0) {
      throw Error(ErrorCode::invalid_argument, "camera lies outside the room");
    }
    for (const auto& o : objects) {
      if (inside_object(c, o)) throw Error(ErrorCode::invalid_argument, "camera lies inside '" + o.name + "'");
    }
  }
}

double GroundTruth::distance_to_nearest_surface(const Vec3& p) const {
  double best = std::abs(box_surface_distance(p, Vec3::Zero(), room_half_extents));
  for (const auto& o : objects) {
    const double d = o.shape == SceneObject::Shape::sphere ? std::abs((p - o.center).norm() - o.radius)
                                                          : std::abs(box_surface_distance(p, o.center, o.half_extents));
    best = std::min(best, d);
  }
  return best;
}

std::pair<ReconstructionBundle, GroundTruth> synthesize_scene(const SyntheticSceneSpec& spec) {
  spec.validate();
  const auto poses = poses_of(spec);
  const auto waypoints = waypoints_of(spec);

  Intrinsics k;
  k.fx = k.fy = spec.focal;
  k.cx = spec.width / 2.0;
  k.cy = spec.height / 2.0;
  k.width = spec.width;
  k.height = spec.height;
  k.validate();

  ReconstructionBundle bundle;
  bundle.units = spec.units;
  bundle.source_tag = spec.source_tag;
  GroundTruth truth;
  truth.room_half_extents = spec.room_half_extents;
  truth.objects = spec.objects;

  for (const auto& pose : poses) {
    Frame frame;
    frame.intrinsics = k;
    frame.pose = pose;
    frame.image = Image(spec.width, spec.height);
    frame.depth.width = spec.width;
    frame.depth.height = spec.height;
    frame.depth.values.assign(static_cast<std::size_t>(spec.width) * spec.height, 0.0f);
    if (spec.emit_confidence) frame.depth.confidence.emplace(frame.depth.values.size(), 1.0f);

    const Vec3 origin = camera_center(pose);
    const Mat3 cam_to_world = pose.rotation().transpose();
    for (int v = 0; v < spec.height; ++v) {
      for (int u = 0; u < spec.width; ++u) {
        // Camera-frame direction with unit z, so the ray parameter is camera depth.
        const Vec3 dir = cam_to_world * Vec3((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
        Hit hit = ray_room(origin, dir, spec.room_half_extents);
        for (std::size_t i = 0; i < spec.objects.size(); ++i) {
          const auto& o = spec.objects[i];
          const double t = o.shape == SceneObject::Shape::sphere ? ray_sphere(origin, dir, o) : ray_box(origin, dir, o);
          if (t < hit.t) hit = {t, static_cast<int>(i), 0};
        }
        const std::size_t idx = static_cast<std::size_t>(v) * spec.width + u;
        frame.depth.values[idx] = static_cast<float>(hit.t);
        const auto color = hit.object >= 0 ? spec.objects[static_cast<std::size_t>(hit.object)].color
                                           : wall_color(origin + hit.t * dir, hit.face, spec.checker_period);
        std::copy(color.begin(), color.end(), frame.image.pixel(u, v));
      }
    }

    std::vector<std::optional<Projection>> pixels;
    for (const auto& o : spec.objects) pixels.push_back(project_point(o.center, pose, k));
    truth.object_pixels.push_back(std::move(pixels));
    bundle.frames.push_back(std::move(frame));
  }

  for (std::size_t i = 0; i + 1 < poses.size(); ++i) {
    truth.motion_labels.push_back(waypoints.empty()
                                      ? pose_label(poses[i], poses[i + 1])
                                      : upright_label(waypoints[i].position, waypoints[i].heading_deg,
                                                      waypoints[i + 1].position));
  }
  return {std::move(bundle), std::move(truth)};
}

}  // namespace spatial
