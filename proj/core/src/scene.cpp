#include "spatial/scene.hpp"

#include <algorithm>
#include <set>

namespace spatial {

namespace {

bool has_image_extension(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace

std::vector<std::filesystem::path> expand_image_inputs(const std::vector<std::filesystem::path>& inputs) {
  namespace fs = std::filesystem;
  std::vector<fs::path> out;
  std::set<fs::path> seen;
  auto add = [&](const fs::path& p) {
    std::error_code ec;
    fs::path key = fs::weakly_canonical(p, ec);
    if (ec) key = p.lexically_normal();
    if (seen.insert(key).second) out.push_back(p);
  };
  for (const auto& input : inputs) {
    std::error_code ec;
    if (fs::is_directory(input, ec)) {
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(input)) {
        if (entry.is_regular_file() && has_image_extension(entry.path())) files.push_back(entry.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) add(f);
    } else if (fs::exists(input, ec)) {
      add(input);
    } else {
      throw Error(ErrorCode::missing_file, "image input not found: " + input.string());
    }
  }
  return out;
}

Scene Scene::load(std::string question, const std::vector<std::filesystem::path>& inputs) {
  Scene scene;
  scene.question = std::move(question);
  scene.image_paths = expand_image_inputs(inputs);
  if (scene.image_paths.empty()) throw Error(ErrorCode::invalid_argument, "scene has no images");
  for (const auto& path : scene.image_paths) {
    scene.images.push_back(std::make_shared<const Image>(read_image(path)));
  }
  return scene;
}

Scene Scene::from_bundle(std::string question, const ReconstructionBundle& bundle) {
  Scene scene;
  scene.question = std::move(question);
  for (const auto& frame : bundle.frames) scene.images.push_back(std::make_shared<const Image>(frame.image));
  if (scene.images.empty()) throw Error(ErrorCode::invalid_argument, "scene has no images");
  return scene;
}

}  // namespace spatial
