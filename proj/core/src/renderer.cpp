#include "spatial/renderer.hpp"

#include "spatial/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace spatial {

void RenderOptions::validate() const {
  if (width < 0 || height < 0) throw Error(ErrorCode::invalid_argument, "render size must be positive");
  if (point_radius < 0) throw Error(ErrorCode::invalid_argument, "point radius must be non-negative");
  if (!(near_clip > 0.0)) throw Error(ErrorCode::invalid_argument, "near clip must be positive");
  if (!(depth_tolerance >= 0.0)) throw Error(ErrorCode::invalid_argument, "depth tolerance must be non-negative");
}

Image RenderedImage::to_image() const {
  Image out(width, height);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const float c = std::clamp(pixels[i], 0.0f, 1.0f);
    out.rgb[i] = static_cast<std::uint8_t>(std::lround(c * 255.0f));
  }
  return out;
}

std::optional<Projection> project_point(const Vec3& world, const ExtrinsicPose& pose,
                                        const Intrinsics& k, double near_clip) {
  const Vec3 cam = pose.apply(world);
  if (!(cam.z() >= near_clip)) return std::nullopt;
  return Projection{k.fx * cam.x() / cam.z() + k.cx, k.fy * cam.y() / cam.z() + k.cy, cam.z()};
}

namespace {

struct Splat {
  double u, v, z;
  int px, py;
};

struct Candidate {
  double center_dist2 = std::numeric_limits<double>::infinity();
  double z = std::numeric_limits<double>::infinity();
  std::int64_t index = -1;

  bool beats(const Candidate& other) const {
    if (center_dist2 != other.center_dist2) return center_dist2 < other.center_dist2;
    if (z != other.z) return z < other.z;
    return index < other.index;
  }
};

}  // namespace

RenderedImage synthesize_novel_view(const PointCloud& cloud, const ExtrinsicPose& pose,
                                    const Intrinsics& intrinsics, const RenderOptions& options) {
  options.validate();
  if (cloud.empty()) throw Error(ErrorCode::empty_cloud, "cannot render an empty point cloud");
  if (cloud.points.size() != cloud.colors.size()) {
    throw Error(ErrorCode::invalid_argument, "point cloud has mismatched point and color counts");
  }
  const int width = options.width > 0 ? options.width : intrinsics.width;
  const int height = options.height > 0 ? options.height : intrinsics.height;
  const int r = options.point_radius;
  const std::size_t npix = static_cast<std::size_t>(width) * height;

  std::vector<Splat> splats(cloud.size());
  std::vector<bool> visible(cloud.size(), false);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto p = project_point(cloud.points[i], pose, intrinsics, options.near_clip);
    if (!p) continue;
    const double px = std::round(p->u);
    const double py = std::round(p->v);
    if (px < -r || py < -r || px > width - 1 + r || py > height - 1 + r) continue;
    splats[i] = {p->u, p->v, p->z, static_cast<int>(px), static_cast<int>(py)};
    visible[i] = true;
  }

  auto for_each_pixel = [&](const Splat& s, auto&& fn) {
    const int x0 = std::max(0, s.px - r), x1 = std::min(width - 1, s.px + r);
    const int y0 = std::max(0, s.py - r), y1 = std::min(height - 1, s.py + r);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) fn(static_cast<std::size_t>(y) * width + x, x, y);
  };

  std::vector<double> znear(npix, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < splats.size(); ++i) {
    if (!visible[i]) continue;
    for_each_pixel(splats[i], [&](std::size_t idx, int, int) { znear[idx] = std::min(znear[idx], splats[i].z); });
  }

  std::vector<Candidate> best(npix);
  const double slack = 1.0 + options.depth_tolerance;
  for (std::size_t i = 0; i < splats.size(); ++i) {
    if (!visible[i]) continue;
    const Splat& s = splats[i];
    for_each_pixel(s, [&](std::size_t idx, int x, int y) {
      if (s.z > znear[idx] * slack) return;
      const double du = s.u - x, dv = s.v - y;
      const Candidate c{du * du + dv * dv, s.z, static_cast<std::int64_t>(i)};
      if (c.beats(best[idx])) best[idx] = c;
    });
  }

  RenderedImage out;
  out.width = width;
  out.height = height;
  out.pixels.resize(npix * 3);
  out.depth.resize(npix);
  out.source_index.resize(npix);
  std::size_t covered = 0;
  for (std::size_t idx = 0; idx < npix; ++idx) {
    const auto src = best[idx].index;
    out.source_index[idx] = src;
    out.depth[idx] = static_cast<float>(znear[idx]);
    const Color& c = src >= 0 ? cloud.colors[static_cast<std::size_t>(src)] : options.background;
    out.pixels[idx * 3 + 0] = c.x();
    out.pixels[idx * 3 + 1] = c.y();
    out.pixels[idx * 3 + 2] = c.z();
    if (src >= 0) ++covered;
  }
  out.coverage_fraction = npix ? static_cast<double>(covered) / static_cast<double>(npix) : 0.0;
  return out;
}

}  // namespace spatial
