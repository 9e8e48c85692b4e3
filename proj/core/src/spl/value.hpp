#pragma once

#include "spatial/bundle.hpp"
#include "spatial/geometry.hpp"
#include "spatial/image.hpp"
#include "spatial/point_cloud.hpp"
#include "spatial/scene.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace spatial::spl {

struct Value;
using List = std::shared_ptr<std::vector<Value>>;

struct NoneValue {};

struct RangeValue {
  std::int64_t start = 0;
  std::int64_t stop = 0;
  std::int64_t step = 1;

  std::int64_t size() const;
  std::int64_t at(std::int64_t i) const { return start + i * step; }
};

struct SceneValue {
  const Scene* scene = nullptr;
  List images;  // created once per execution so mutations persist like Python
};

struct ReconState {
  ReconstructionBundle bundle;
  std::shared_ptr<const PointCloud> cloud;  // built on first render or attribute access
  List extrinsics;
  List intrinsics;
};

struct ReconValue {
  std::shared_ptr<ReconState> state;
};

/// `frame` is the input view the pose derives from; novel views use that
/// frame's intrinsics.
struct PoseValue {
  ExtrinsicPose pose;
  std::size_t frame = 0;
};

/// `frame` is set for input views and unset for rendered ones.
struct ImageValue {
  std::shared_ptr<const Image> image;
  std::optional<std::size_t> frame;
};

struct DepthValue {
  std::shared_ptr<const DepthMap> depth;
};

struct IntrinsicsValue {
  Intrinsics intrinsics;
};

struct CloudValue {
  std::shared_ptr<const PointCloud> cloud;
};

struct NamespaceValue {};

/// A callable: "range", "len" or "pySpatial.<member>".
struct BuiltinValue {
  std::string name;
};

struct AppendMethod {
  List list;
};

struct Value {
  std::variant<NoneValue, bool, std::int64_t, double, std::string, List, RangeValue, SceneValue, ReconValue,
               PoseValue, ImageValue, DepthValue, IntrinsicsValue, CloudValue, NamespaceValue, BuiltinValue,
               AppendMethod>
      v;

  Value() = default;
  template <typename T>
  Value(T x) : v(std::move(x)) {}

  template <typename T>
  bool is() const { return std::holds_alternative<T>(v); }
  template <typename T>
  const T* get() const { return std::get_if<T>(&v); }
  template <typename T>
  T* get() { return std::get_if<T>(&v); }
};

inline Value make_list(std::vector<Value> items = {}) {
  return Value(std::make_shared<std::vector<Value>>(std::move(items)));
}

/// Python-like type name used in error messages ("int", "list", "Pose").
std::string type_name(const Value& v);
/// Short kind tag used in trace records ("text", "pose", "image", ...).
std::string kind_tag(const Value& v);

bool truthy(const Value& v);
/// Python str(): strings unquoted at the top level.
std::string to_display(const Value& v);
/// Python repr(): strings quoted.
std::string to_repr(const Value& v);

std::string python_quote(const std::string& s);

/// UTF-8 code point boundaries of s (size = code points + 1).
std::vector<std::size_t> utf8_offsets(const std::string& s);

}  // namespace spatial::spl
