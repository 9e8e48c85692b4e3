#include "spatial/remote.hpp"

#include "spatial/image.hpp"
#include "spatial/zip.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>

namespace spatial {

ReconstructionBundle bundle_from_archive(std::span<const std::uint8_t> archive, const std::string& origin) {
  const zip::Entries entries = zip::read_archive(archive);
  std::string prefix;
  if (!entries.count("manifest.json")) {
    std::vector<std::string> candidates;
    for (const auto& [name, _] : entries) {
      const auto slash = name.find('/');
      if (slash != std::string::npos && name.substr(slash + 1) == "manifest.json") {
        candidates.push_back(name.substr(0, slash + 1));
      }
    }
    if (candidates.size() != 1) {
      throw Error(ErrorCode::malformed_archive, origin + ": archive has no unique manifest.json");
    }
    prefix = candidates.front();
  }
  BundleFiles files;
  for (const auto& [name, bytes] : entries) {
    if (name.compare(0, prefix.size(), prefix) == 0) files.emplace(name.substr(prefix.size()), bytes);
  }
  return load_bundle_files(files, origin);
}

std::vector<std::uint8_t> bundle_to_archive(const ReconstructionBundle& bundle) {
  const BundleFiles files = serialize_bundle(bundle);
  return zip::write_archive(zip::Entries(files.begin(), files.end()));
}

namespace {

std::string content_type_for(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  return "application/octet-stream";
}

struct Endpoint {
  std::string base;  // scheme://host[:port]
  std::string path;  // prefix without trailing slash
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::invalid_argument, "endpoint '" + url + "' must start with http:// or https://");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.base = url.substr(0, path_start);
  e.path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!e.path.empty() && e.path.back() == '/') e.path.pop_back();
  return e;
}

}  // namespace

ReconstructionBundle reconstruct_remote(const std::vector<std::filesystem::path>& image_paths,
                                        const std::string& endpoint, std::chrono::duration<double> timeout) {
  if (image_paths.empty()) throw Error(ErrorCode::invalid_argument, "no images to reconstruct");
  const Endpoint ep = split_endpoint(endpoint);

  httplib::MultipartFormDataItems items;
  for (const auto& path : image_paths) {
    const auto bytes = read_file_bytes(path);
    items.push_back({"images", std::string(bytes.begin(), bytes.end()), path.filename().string(),
                     content_type_for(path)});
  }

  httplib::Client client(ep.base);
  const auto usec = std::chrono::duration_cast<std::chrono::microseconds>(timeout).count();
  client.set_connection_timeout(usec / 1000000, usec % 1000000);
  client.set_read_timeout(usec / 1000000, usec % 1000000);
  client.set_write_timeout(usec / 1000000, usec % 1000000);

  const std::string target = ep.path + "/reconstruct";
  auto result = client.Post(target, items);
  if (!result) {
    const auto err = result.error();
    const std::string what = httplib::to_string(err);
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read || err == httplib::Error::Write) {
      throw Error(ErrorCode::transport_timeout, endpoint + target + ": " + what);
    }
    throw Error(ErrorCode::transport_failure, endpoint + target + ": " + what);
  }
  if (result->status != 200) {
    throw Error(ErrorCode::backend_failure,
                endpoint + target + ": status " + std::to_string(result->status) + " " + result->body.substr(0, 200));
  }
  const auto* data = reinterpret_cast<const std::uint8_t*>(result->body.data());
  return bundle_from_archive({data, result->body.size()}, endpoint + target);
}

}  // namespace spatial
