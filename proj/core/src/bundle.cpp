#include "spatial/bundle.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>

namespace spatial {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

std::vector<float> decode_raster(const std::vector<std::uint8_t>& bytes, int width, int height,
                                 const std::string& locus) {
  const std::size_t expected = static_cast<std::size_t>(width) * height * sizeof(float);
  if (bytes.size() != expected) {
    throw BundleError(ErrorCode::malformed_raster, locus,
                      "expected " + std::to_string(expected) + " bytes of float32, found " +
                          std::to_string(bytes.size()));
  }
  std::vector<float> values(static_cast<std::size_t>(width) * height);
  std::memcpy(values.data(), bytes.data(), expected);
  if constexpr (std::endian::native == std::endian::big) {
    for (float& v : values) {
      auto raw = std::bit_cast<std::uint32_t>(v);
      raw = __builtin_bswap32(raw);
      v = std::bit_cast<float>(raw);
    }
  }
  return values;
}

std::vector<std::uint8_t> encode_raster(const std::vector<float>& values) {
  std::vector<std::uint8_t> bytes(values.size() * sizeof(float));
  std::memcpy(bytes.data(), values.data(), bytes.size());
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < bytes.size(); i += 4) {
      std::swap(bytes[i], bytes[i + 3]);
      std::swap(bytes[i + 1], bytes[i + 2]);
    }
  }
  return bytes;
}

const std::vector<std::uint8_t>& require_file(const BundleFiles& files, const std::string& rel,
                                              const std::string& origin) {
  const auto it = files.find(rel);
  if (it == files.end()) {
    throw BundleError(ErrorCode::missing_file, origin + "/" + rel, "file not found");
  }
  return it->second;
}

std::vector<double> read_numbers(const json& node, std::size_t count, const std::string& locus) {
  if (!node.is_array() || node.size() != count) {
    throw BundleError(ErrorCode::malformed_manifest, locus,
                      "expected an array of " + std::to_string(count) + " numbers");
  }
  std::vector<double> out;
  out.reserve(count);
  for (const auto& v : node) {
    if (!v.is_number()) throw BundleError(ErrorCode::malformed_manifest, locus, "non-numeric entry");
    out.push_back(v.get<double>());
  }
  return out;
}

std::string frame_name(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04zu", index);
  return buf;
}

template <typename T>
T field(const json& manifest, const char* key, const std::string& origin) {
  const std::string locus = origin + "/manifest.json: " + key;
  if (!manifest.contains(key)) throw BundleError(ErrorCode::malformed_manifest, locus, "missing field");
  try {
    return manifest.at(key).get<T>();
  } catch (const json::exception&) {
    throw BundleError(ErrorCode::malformed_manifest, locus, "wrong type");
  }
}

}  // namespace

std::vector<ExtrinsicPose> ReconstructionBundle::poses() const {
  std::vector<ExtrinsicPose> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(f.pose);
  return out;
}

void ReconstructionBundle::validate() const {
  if (frames.empty()) throw Error(ErrorCode::invalid_argument, "bundle has no frames");
  const int w = width();
  const int h = height();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Frame& f = frames[i];
    const std::string where = "frame " + std::to_string(i);
    if (f.image.width != w || f.image.height != h ||
        f.image.rgb.size() != static_cast<std::size_t>(w) * h * 3) {
      throw Error(ErrorCode::shape_mismatch, where + ": image size differs from the bundle");
    }
    if (f.depth.width != w || f.depth.height != h ||
        f.depth.values.size() != static_cast<std::size_t>(w) * h) {
      throw Error(ErrorCode::shape_mismatch, where + ": depth size differs from the bundle");
    }
    if (f.depth.confidence && f.depth.confidence->size() != f.depth.values.size()) {
      throw Error(ErrorCode::shape_mismatch, where + ": confidence size differs from depth");
    }
    if (f.intrinsics.width != w || f.intrinsics.height != h) {
      throw Error(ErrorCode::shape_mismatch, where + ": intrinsics image size differs");
    }
    f.intrinsics.validate();
    if (!is_rotation(f.pose.rotation())) {
      throw Error(ErrorCode::invalid_pose, where + ": rotation is not orthonormal");
    }
  }
}

ReconstructionBundle load_bundle(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const std::string origin = dir.string();
  if (!fs::is_directory(dir)) {
    throw BundleError(ErrorCode::missing_file, origin, "bundle directory not found");
  }
  BundleFiles files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    files[fs::relative(entry.path(), dir).generic_string()] = read_file_bytes(entry.path());
  }
  return load_bundle_files(files, origin);
}

ReconstructionBundle load_bundle_files(const BundleFiles& files, const std::string& origin) {
  const auto& manifest_bytes = require_file(files, "manifest.json", origin);
  json manifest;
  try {
    manifest = json::parse(manifest_bytes.begin(), manifest_bytes.end());
  } catch (const json::parse_error& e) {
    throw BundleError(ErrorCode::malformed_manifest, origin + "/manifest.json", e.what());
  }
  if (!manifest.is_object()) {
    throw BundleError(ErrorCode::malformed_manifest, origin + "/manifest.json", "not a JSON object");
  }

  const auto version = field<int>(manifest, "version", origin);
  if (version != kFormatVersion) {
    throw BundleError(ErrorCode::malformed_manifest, origin + "/manifest.json: version",
                      "unsupported version " + std::to_string(version));
  }

  ReconstructionBundle bundle;
  try {
    bundle.units = parse_scene_units(field<std::string>(manifest, "units", origin));
  } catch (const BundleError&) {
    throw;
  } catch (const Error& e) {
    throw BundleError(ErrorCode::malformed_manifest, origin + "/manifest.json: units", e.what());
  }
  bundle.source_tag = field<std::string>(manifest, "source_tag", origin);
  const int width = field<int>(manifest, "width", origin);
  const int height = field<int>(manifest, "height", origin);
  if (width <= 0 || height <= 0) {
    throw BundleError(ErrorCode::malformed_manifest, origin + "/manifest.json: width/height",
                      "dimensions must be positive");
  }
  const json& frames = manifest.contains("frames") ? manifest["frames"] : json();
  if (!frames.is_array() || frames.empty()) {
    throw BundleError(ErrorCode::malformed_manifest, origin + "/manifest.json: frames",
                      "expected a non-empty array");
  }

  // Frame count is declared by the manifest; every frame needs its raster.
  std::size_t depth_present = 0;
  for (const auto& f : frames) {
    if (f.is_object() && f.contains("depth") && f["depth"].is_string() &&
        files.count(f["depth"].get<std::string>())) {
      ++depth_present;
    }
  }
  if (depth_present != frames.size()) {
    throw BundleError(ErrorCode::shape_mismatch, origin + "/manifest.json: frames",
                      "manifest declares " + std::to_string(frames.size()) + " frames but " +
                          std::to_string(depth_present) + " depth rasters are present");
  }

  for (std::size_t i = 0; i < frames.size(); ++i) {
    const json& entry = frames[i];
    const std::string locus = origin + "/manifest.json: frames[" + std::to_string(i) + "]";
    if (!entry.is_object()) throw BundleError(ErrorCode::malformed_manifest, locus, "not an object");
    for (const char* key : {"image", "depth"}) {
      if (!entry.contains(key) || !entry[key].is_string()) {
        throw BundleError(ErrorCode::malformed_manifest, locus + "." + key, "expected a path string");
      }
    }
    Frame frame;
    const auto image_rel = entry["image"].get<std::string>();
    const auto& image_bytes = require_file(files, image_rel, origin);
    try {
      frame.image = decode_image(image_bytes, origin + "/" + image_rel);
    } catch (const Error& e) {
      throw BundleError(ErrorCode::image_decode, origin + "/" + image_rel, e.what());
    }
    if (frame.image.width != width || frame.image.height != height) {
      throw BundleError(ErrorCode::shape_mismatch, origin + "/" + image_rel,
                        "image is " + std::to_string(frame.image.width) + "x" +
                            std::to_string(frame.image.height) + ", manifest says " +
                            std::to_string(width) + "x" + std::to_string(height));
    }

    const auto depth_rel = entry["depth"].get<std::string>();
    frame.depth.width = width;
    frame.depth.height = height;
    frame.depth.values = decode_raster(files.at(depth_rel), width, height, origin + "/" + depth_rel);
    if (entry.contains("confidence") && !entry["confidence"].is_null()) {
      if (!entry["confidence"].is_string()) {
        throw BundleError(ErrorCode::malformed_manifest, locus + ".confidence", "expected a path or null");
      }
      const auto conf_rel = entry["confidence"].get<std::string>();
      frame.depth.confidence =
          decode_raster(require_file(files, conf_rel, origin), width, height, origin + "/" + conf_rel);
    }

    const auto k = read_numbers(entry.value("intrinsics", json()), 9, locus + ".intrinsics");
    Mat3 kmat;
    kmat << k[0], k[1], k[2], k[3], k[4], k[5], k[6], k[7], k[8];
    try {
      frame.intrinsics = Intrinsics::from_matrix(kmat, width, height);
    } catch (const Error& e) {
      throw BundleError(ErrorCode::malformed_manifest, locus + ".intrinsics", e.what());
    }

    const auto g = read_numbers(entry.value("extrinsics", json()), 12, locus + ".extrinsics");
    try {
      frame.pose = ExtrinsicPose::from_row_major(std::span<const double, 12>(g.data(), 12));
    } catch (const Error& e) {
      throw BundleError(ErrorCode::invalid_pose, locus + ".extrinsics", e.what());
    }
    bundle.frames.push_back(std::move(frame));
  }
  return bundle;
}

BundleFiles serialize_bundle(const ReconstructionBundle& bundle) {
  if (bundle.frames.empty()) {
    throw Error(ErrorCode::invalid_argument, "cannot save an empty bundle");
  }
  bundle.validate();
  BundleFiles files;
  json frames = json::array();
  for (std::size_t i = 0; i < bundle.frames.size(); ++i) {
    const Frame& f = bundle.frames[i];
    const std::string name = frame_name(i);
    json entry;
    entry["image"] = "images/" + name + ".png";
    entry["depth"] = "depth/" + name + ".f32";
    files[entry["image"].get<std::string>()] = encode_png(f.image);
    files[entry["depth"].get<std::string>()] = encode_raster(f.depth.values);
    if (f.depth.confidence) {
      entry["confidence"] = "confidence/" + name + ".f32";
      files[entry["confidence"].get<std::string>()] = encode_raster(*f.depth.confidence);
    } else {
      entry["confidence"] = nullptr;
    }
    const Mat3 k = f.intrinsics.matrix();
    json kjson = json::array();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) kjson.push_back(k(r, c));
    entry["intrinsics"] = kjson;
    json gjson = json::array();
    for (double v : f.pose.to_row_major()) gjson.push_back(v);
    entry["extrinsics"] = gjson;
    frames.push_back(entry);
  }
  json manifest;
  manifest["version"] = kFormatVersion;
  manifest["units"] = std::string(to_string(bundle.units));
  manifest["source_tag"] = bundle.source_tag;
  manifest["width"] = bundle.width();
  manifest["height"] = bundle.height();
  manifest["frames"] = frames;
  const std::string text = manifest.dump(2) + "\n";
  files["manifest.json"] = std::vector<std::uint8_t>(text.begin(), text.end());
  return files;
}

void save_bundle(const ReconstructionBundle& bundle, const std::filesystem::path& dir) {
  const BundleFiles files = serialize_bundle(bundle);
  std::filesystem::create_directories(dir);
  for (const auto& [rel, bytes] : files) write_file_bytes(dir / rel, bytes);
}

DepthMap estimate_depth(const ReconstructionBundle& bundle, std::size_t frame_index) {
  if (frame_index >= bundle.frames.size()) {
    throw Error(ErrorCode::index_out_of_range,
                "frame index " + std::to_string(frame_index) + " out of range for " +
                    std::to_string(bundle.frames.size()) + " frames");
  }
  return bundle.frames[frame_index].depth;
}

}  // namespace spatial
