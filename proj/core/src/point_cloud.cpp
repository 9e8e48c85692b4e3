#include "spatial/point_cloud.hpp"

#include <cmath>

namespace spatial {

PointCloud build_point_cloud(const ReconstructionBundle& bundle, const PointCloudOptions& options) {
  if (options.stride < 1) throw Error(ErrorCode::invalid_argument, "stride must be at least 1");
  bundle.validate();

  PointCloud cloud;
  for (const Frame& frame : bundle.frames) {
    const DepthMap& depth = frame.depth;
    const bool filter_confidence = depth.confidence.has_value();
    for (int v = 0; v < depth.height; v += options.stride) {
      for (int u = 0; u < depth.width; u += options.stride) {
        const double d = depth.at(u, v);
        if (!std::isfinite(d) || d <= 0.0 || d < options.depth_min || d > options.depth_max) continue;
        if (filter_confidence && depth.confidence_at(u, v) < options.confidence_min) continue;
        const Vec3 cam = back_project({static_cast<double>(u), static_cast<double>(v)}, d, frame.intrinsics);
        cloud.points.push_back(cam_to_world(cam, frame.pose));
        const std::uint8_t* px = frame.image.pixel(u, v);
        cloud.colors.emplace_back(px[0] / 255.0f, px[1] / 255.0f, px[2] / 255.0f);
      }
    }
  }
  if (cloud.empty()) throw Error(ErrorCode::empty_cloud, "no pixels survived point-cloud filtering");
  return cloud;
}

}  // namespace spatial
