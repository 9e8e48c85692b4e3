#pragma once

#include "spatial/bundle.hpp"
#include "spatial/image.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace spatial {

/// A question over an ordered set of input views.
struct Scene {
  std::string question;
  std::vector<std::filesystem::path> image_paths;
  std::vector<std::shared_ptr<const Image>> images;  // parallel to image_paths when loaded from disk

  /// Expands `inputs` (files or directories), then decodes every image.
  /// Throws missing_file, image_decode or invalid_argument (no images).
  static Scene load(std::string question, const std::vector<std::filesystem::path>& inputs);

  /// Uses the bundle's frame images as the views; image_paths stays empty.
  static Scene from_bundle(std::string question, const ReconstructionBundle& bundle);
};

/// Directories contribute their .png/.jpg/.jpeg files (any letter case) in
/// lexicographic order; files are kept in the given order. Later duplicates
/// of the same file are dropped.
std::vector<std::filesystem::path> expand_image_inputs(const std::vector<std::filesystem::path>& inputs);

}  // namespace spatial
