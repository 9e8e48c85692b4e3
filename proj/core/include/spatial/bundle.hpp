#pragma once

#include "spatial/error.hpp"
#include "spatial/geometry.hpp"
#include "spatial/image.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace spatial {

struct Frame {
  Image image;
  DepthMap depth;
  Intrinsics intrinsics;
  ExtrinsicPose pose;

  bool operator==(const Frame&) const = default;
};

/// Per-frame depth, intrinsics, extrinsics and colors from one reconstruction.
/// Frame order matches the input image order.
struct ReconstructionBundle {
  std::vector<Frame> frames;
  SceneUnits units = SceneUnits::normalized;
  std::string source_tag;

  int width() const { return frames.empty() ? 0 : frames.front().image.width; }
  int height() const { return frames.empty() ? 0 : frames.front().image.height; }
  std::vector<ExtrinsicPose> poses() const;

  /// Throws shape_mismatch / invalid_pose / invalid_intrinsics / invalid_argument.
  void validate() const;

  bool operator==(const ReconstructionBundle&) const = default;
};

/// Bundle load failure with the offending file or manifest field.
class BundleError : public Error {
 public:
  BundleError(ErrorCode code, std::string locus, const std::string& message)
      : Error(code, locus + ": " + message), locus_(std::move(locus)) {}
  const std::string& locus() const { return locus_; }

 private:
  std::string locus_;
};

/// Files of a bundle keyed by relative path ("manifest.json", "depth/0.f32").
/// Directories and zip archives both load through this view.
using BundleFiles = std::map<std::string, std::vector<std::uint8_t>>;

/// Reads and validates a bundle directory (manifest.json + rasters + images).
ReconstructionBundle load_bundle(const std::filesystem::path& dir);
ReconstructionBundle load_bundle_files(const BundleFiles& files, const std::string& origin);

/// Canonical serialization: manifest.json, images/NNNN.png, depth/NNNN.f32,
/// confidence/NNNN.f32. Deterministic byte-for-byte.
BundleFiles serialize_bundle(const ReconstructionBundle& bundle);
void save_bundle(const ReconstructionBundle& bundle, const std::filesystem::path& dir);

/// The stored depth map of one frame.
DepthMap estimate_depth(const ReconstructionBundle& bundle, std::size_t frame_index);

}  // namespace spatial
