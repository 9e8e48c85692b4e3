#pragma once

#include "spatial/bundle.hpp"
#include "spatial/geometry.hpp"

#include <limits>

namespace spatial {

struct PointCloudOptions {
  int stride = 1;
  /// Pixels whose confidence is below this are dropped. Frames without a
  /// confidence map are not filtered by confidence.
  float confidence_min = 0.0f;
  double depth_min = 0.0;
  double depth_max = std::numeric_limits<double>::infinity();
};

/// Back-projects every retained pixel of every frame into world space.
/// Ordering is frame-major then row-major. Throws empty_cloud when nothing
/// survives the filters.
PointCloud build_point_cloud(const ReconstructionBundle& bundle, const PointCloudOptions& options = {});

}  // namespace spatial
