#pragma once

#include "spatial/bundle.hpp"

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

namespace spatial {

/// Extracts a bundle from a zip archive whose manifest.json sits either at
/// the archive root or inside a single top-level directory.
ReconstructionBundle bundle_from_archive(std::span<const std::uint8_t> archive, const std::string& origin);

/// Zips a bundle's canonical files at the archive root.
std::vector<std::uint8_t> bundle_to_archive(const ReconstructionBundle& bundle);

/// POSTs the images, in order, as multipart field "images" to
/// <endpoint>/reconstruct and validates the zipped bundle that comes back.
///
/// Throws transport_timeout when the deadline passes, transport_failure
/// when the connection cannot be made, backend_failure on a non-200 status,
/// malformed_archive for an unreadable zip, and the load_bundle errors for an
/// invalid bundle.
ReconstructionBundle reconstruct_remote(const std::vector<std::filesystem::path>& image_paths,
                                        const std::string& endpoint,
                                        std::chrono::duration<double> timeout = std::chrono::seconds(120));

}  // namespace spatial
