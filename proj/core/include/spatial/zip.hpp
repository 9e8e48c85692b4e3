#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace spatial::zip {

using Entries = std::map<std::string, std::vector<std::uint8_t>>;

/// Reads a zip archive held in memory. Supports stored and deflated entries
/// (no zip64, no encryption). Directory entries are skipped. Throws
/// malformed_archive on any structural problem or unsafe entry name.
Entries read_archive(std::span<const std::uint8_t> bytes);

/// Writes entries in key order, deflated. Deterministic: timestamps are fixed.
std::vector<std::uint8_t> write_archive(const Entries& entries);

}  // namespace spatial::zip
