#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace spatial {

/// 8-bit interleaved RGB raster, row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::uint8_t* pixel(int u, int v) { return rgb.data() + (static_cast<std::size_t>(v) * width + u) * 3; }
  const std::uint8_t* pixel(int u, int v) const {
    return rgb.data() + (static_cast<std::size_t>(v) * width + u) * 3;
  }
  bool operator==(const Image&) const = default;
};

/// Decodes PNG or JPEG (sniffed from the magic bytes). Throws image_decode.
Image decode_image(std::span<const std::uint8_t> bytes, const std::string& name = "<memory>");
Image read_image(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const Image& image);
void write_png(const Image& image, const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace spatial
