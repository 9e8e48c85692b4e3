#include "value.hpp"

#include "spatial/spl/interpreter.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace spatial::spl {

std::int64_t RangeValue::size() const {
  const __int128 span = step > 0 ? static_cast<__int128>(stop) - start : static_cast<__int128>(start) - stop;
  if (span <= 0) return 0;
  const __int128 s = step > 0 ? step : -static_cast<__int128>(step);
  return static_cast<std::int64_t>((span - 1) / s + 1);
}

std::string format_python_float(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::scientific);
  const std::string sci(buf, res.ptr);
  const auto e_pos = sci.find('e');
  std::string mantissa = sci.substr(0, e_pos);
  const int exponent = std::stoi(sci.substr(e_pos + 1));
  std::string sign;
  if (mantissa[0] == '-') {
    sign = "-";
    mantissa.erase(0, 1);
  }
  std::string digits;
  for (const char c : mantissa) {
    if (c != '.') digits += c;
  }
  if (exponent >= -4 && exponent < 16) {
    const int point = exponent + 1;
    std::string out;
    if (point <= 0) {
      out = "0." + std::string(static_cast<std::size_t>(-point), '0') + digits;
    } else if (static_cast<std::size_t>(point) >= digits.size()) {
      out = digits + std::string(static_cast<std::size_t>(point) - digits.size(), '0') + ".0";
    } else {
      out = digits.substr(0, static_cast<std::size_t>(point)) + "." + digits.substr(static_cast<std::size_t>(point));
    }
    return sign + out;
  }
  std::string out = digits.substr(0, 1);
  if (digits.size() > 1) out += "." + digits.substr(1);
  char exp_buf[16];
  std::snprintf(exp_buf, sizeof(exp_buf), "e%c%02d", exponent < 0 ? '-' : '+', std::abs(exponent));
  return sign + out + exp_buf;
}

std::vector<std::size_t> utf8_offsets(const std::string& s) {
  std::vector<std::size_t> offsets;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) offsets.push_back(i);
  }
  offsets.push_back(s.size());
  return offsets;
}

std::string python_quote(const std::string& s) {
  const bool use_double = s.find('\'') != std::string::npos && s.find('"') == std::string::npos;
  const char q = use_double ? '"' : '\'';
  std::string out(1, q);
  for (const char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (c == q) {
          out += '\\';
          out += c;
        } else if (static_cast<unsigned char>(c) < 0x20 || c == 0x7f) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\x%02x", static_cast<unsigned char>(c));
          out += buf;
        } else {
          out += c;
        }
    }
  }
  return out + q;
}

std::string type_name(const Value& v) {
  static const char* names[] = {"NoneType",   "bool",      "int",        "float",      "str",       "list",
                                "range",      "Scene",     "Reconstruction", "Pose",     "Image",     "DepthMap",
                                "Intrinsics", "PointCloud", "module",    "builtin_function", "method"};
  return names[v.v.index()];
}

std::string kind_tag(const Value& v) {
  static const char* tags[] = {"none",       "bool",        "int",    "float",  "text",  "list",
                               "range",      "scene",       "reconstruction", "pose", "image", "depth_map",
                               "intrinsics", "point_cloud", "module", "function", "method"};
  if (const auto* l = v.get<List>()) {
    if (!(*l)->empty() && std::all_of((*l)->begin(), (*l)->end(), [](const Value& x) { return x.is<ImageValue>(); })) {
      return "image_list";
    }
  }
  return tags[v.v.index()];
}

bool truthy(const Value& v) {
  if (v.is<NoneValue>()) return false;
  if (const auto* b = v.get<bool>()) return *b;
  if (const auto* i = v.get<std::int64_t>()) return *i != 0;
  if (const auto* d = v.get<double>()) return *d != 0.0;
  if (const auto* s = v.get<std::string>()) return !s->empty();
  if (const auto* l = v.get<List>()) return !(*l)->empty();
  if (const auto* r = v.get<RangeValue>()) return r->size() > 0;
  return true;
}

namespace {

std::string fixed3(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", x);
  std::string s = buf;
  return s == "-0.000" ? "0.000" : s;
}

std::string render(const Value& v, bool quote_strings, std::vector<const void*>& active) {
  if (v.is<NoneValue>()) return "None";
  if (const auto* b = v.get<bool>()) return *b ? "True" : "False";
  if (const auto* i = v.get<std::int64_t>()) return std::to_string(*i);
  if (const auto* d = v.get<double>()) return format_python_float(*d);
  if (const auto* s = v.get<std::string>()) return quote_strings ? python_quote(*s) : *s;
  if (const auto* l = v.get<List>()) {
    const void* key = l->get();
    if (std::find(active.begin(), active.end(), key) != active.end()) return "[...]";
    active.push_back(key);
    std::string out = "[";
    for (std::size_t i = 0; i < (*l)->size(); ++i) {
      if (i) out += ", ";
      out += render((**l)[i], true, active);
    }
    active.pop_back();
    return out + "]";
  }
  if (const auto* r = v.get<RangeValue>()) {
    std::string out = "range(" + std::to_string(r->start) + ", " + std::to_string(r->stop);
    if (r->step != 1) out += ", " + std::to_string(r->step);
    return out + ")";
  }
  if (const auto* s = v.get<SceneValue>()) {
    return "<scene: " + std::to_string(s->scene->images.size()) + " images>";
  }
  if (const auto* r = v.get<ReconValue>()) {
    const auto& b = r->state->bundle;
    return "<reconstruction: " + std::to_string(b.frames.size()) + " views, " + std::string(to_string(b.units)) +
           " units>";
  }
  if (const auto* p = v.get<PoseValue>()) {
    const Vec3 c = camera_center(p->pose);
    return "Pose(view=" + std::to_string(p->frame + 1) + ", center=[" + fixed3(c.x()) + ", " + fixed3(c.y()) + ", " +
           fixed3(c.z()) + "])";
  }
  if (const auto* im = v.get<ImageValue>()) {
    std::string out = "<image " + std::to_string(im->image->width) + "x" + std::to_string(im->image->height);
    if (im->frame) out += ", view " + std::to_string(*im->frame + 1);
    return out + ">";
  }
  if (const auto* d = v.get<DepthValue>()) {
    return "<depth map " + std::to_string(d->depth->width) + "x" + std::to_string(d->depth->height) + ">";
  }
  if (const auto* k = v.get<IntrinsicsValue>()) {
    const auto& in = k->intrinsics;
    return "Intrinsics(fx=" + format_python_float(in.fx) + ", fy=" + format_python_float(in.fy) +
           ", cx=" + format_python_float(in.cx) + ", cy=" + format_python_float(in.cy) +
           ", width=" + std::to_string(in.width) + ", height=" + std::to_string(in.height) + ")";
  }
  if (const auto* c = v.get<CloudValue>()) {
    return "<point cloud: " + std::to_string(c->cloud->points.size()) + " points>";
  }
  if (v.is<NamespaceValue>()) return "<module pySpatial>";
  if (const auto* b = v.get<BuiltinValue>()) return "<built-in function " + b->name + ">";
  return "<built-in method append of list>";
}

}  // namespace

std::string to_display(const Value& v) {
  std::vector<const void*> active;
  return render(v, false, active);
}

std::string to_repr(const Value& v) {
  std::vector<const void*> active;
  return render(v, true, active);
}

}  // namespace spatial::spl
