#pragma once

#include "spatial/geometry.hpp"
#include "spatial/image.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace spatial {

inline constexpr double kDefaultNearClip = 1e-4;
inline constexpr int kDefaultPointRadius = 2;
inline constexpr double kDefaultDepthTolerance = 0.05;

struct RenderOptions {
  /// Zero means "use the intrinsics image size".
  int width = 0;
  int height = 0;
  /// Half-width in pixels of the square each point covers.
  int point_radius = kDefaultPointRadius;
  double near_clip = kDefaultNearClip;
  Color background = Color::Zero();
  /// Points within this relative depth of a pixel's nearest surface compete
  /// for its color by distance from their projected centre.
  double depth_tolerance = kDefaultDepthTolerance;

  void validate() const;
};

struct RenderedImage {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;              // row-major RGB in [0, 1]
  std::vector<float> depth;               // nearest camera z per pixel, +inf if empty
  std::vector<std::int64_t> source_index; // point that colored the pixel, -1 if empty
  double coverage_fraction = 0.0;

  bool covered(int u, int v) const { return source_index[static_cast<std::size_t>(v) * width + u] >= 0; }
  const float* pixel(int u, int v) const { return pixels.data() + (static_cast<std::size_t>(v) * width + u) * 3; }

  /// Quantized to 8 bits per channel.
  Image to_image() const;
};

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double z = 0.0;
};

/// Pinhole projection of a world point; empty when z_cam < near_clip.
std::optional<Projection> project_point(const Vec3& world, const ExtrinsicPose& pose,
                                        const Intrinsics& intrinsics, double near_clip = kDefaultNearClip);

/// Z-buffered square splatting. Each pixel's depth is the nearest covering
/// point; among points within depth_tolerance of it, the one projecting
/// closest to the pixel centre supplies the color (then nearer z, then lower
/// index). Throws empty_cloud for an empty cloud.
RenderedImage synthesize_novel_view(const PointCloud& cloud, const ExtrinsicPose& pose,
                                    const Intrinsics& intrinsics, const RenderOptions& options = {});

}  // namespace spatial
