#include "spatial/spl/interpreter.hpp"

#include "spatial/spl/parser.hpp"
#include "value.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <limits>
#include <map>

namespace spatial::spl {

void ExecutionLimits::validate() const {
  if (max_steps <= 0 || max_rendered_images <= 0 || max_loop_iterations <= 0 || !(wall_clock_budget > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "execution limits must all be positive");
  }
}

std::string_view to_string(OutputKind kind) {
  switch (kind) {
    case OutputKind::text: return "text";
    case OutputKind::image: return "image";
    case OutputKind::image_list: return "image_list";
  }
  return "text";
}

std::string trace_to_jsonl(const std::vector<TraceRecord>& trace) {
  std::string out;
  for (const auto& r : trace) {
    nlohmann::ordered_json j;
    j["step"] = r.step;
    j["call"] = r.call;
    j["args_summary"] = r.args_summary;
    j["output_kind"] = r.output_kind;
    out += j.dump() + "\n";
  }
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

constexpr int kMaxCompareDepth = 100;
constexpr std::size_t kSummaryWidth = 80;

bool is_number(const Value& v) { return v.is<bool>() || v.is<std::int64_t>() || v.is<double>(); }
bool is_integral(const Value& v) { return v.is<bool>() || v.is<std::int64_t>(); }

std::int64_t as_int(const Value& v) {
  if (const auto* b = v.get<bool>()) return *b ? 1 : 0;
  return *v.get<std::int64_t>();
}

double as_double(const Value& v) {
  if (const auto* d = v.get<double>()) return *d;
  return static_cast<double>(as_int(v));
}

std::string truncate(std::string s) {
  if (s.size() > kSummaryWidth) s = s.substr(0, kSummaryWidth - 3) + "...";
  return s;
}

struct Args {
  std::vector<Value> positional;
  std::vector<std::pair<std::string, Value>> keywords;
};

class Interpreter {
 public:
  Interpreter(const Program& program, const Scene& scene, const BundleProvider& provider, const ExecutionLimits& limits,
              const ToolOptions& tools)
      : program_(program), scene_(scene), provider_(provider), limits_(limits), tools_(tools) {}

  ProgramOutput run() {
    limits_.validate();
    deadline_ = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                   std::chrono::duration<double>(limits_.wall_clock_budget));
    ProgramOutput out;
    try {
      std::vector<Value> images;
      for (std::size_t i = 0; i < scene_.images.size(); ++i) images.push_back(ImageValue{scene_.images[i], i});
      vars_[program_.param] = SceneValue{&scene_, std::make_shared<std::vector<Value>>(std::move(images))};
      exec_block(program_.body);
      classify(result_, out);
    } catch (const ProgramError& e) {
      throw ProgramError(e.code(), e.location(), e.detail(), trace_);
    } catch (const std::bad_alloc&) {
      throw ProgramError(ErrorCode::step_limit, current_, "program exhausted memory", trace_);
    }
    out.trace = trace_;
    out.comments = program_.comments;
    return out;
  }

 private:
  enum class Flow { normal, returned };

  [[noreturn]] static void fail(ErrorCode code, SourceLocation loc, const std::string& message) {
    throw ProgramError(code, loc, message);
  }

  void step(SourceLocation loc, std::int64_t cost = 1) {
    current_ = loc;
    if (cost > limits_.max_steps - steps_) {
      steps_ = limits_.max_steps;
      fail(ErrorCode::step_limit, loc, "step budget of " + std::to_string(limits_.max_steps) + " exhausted");
    }
    steps_ += cost;
    check_clock(loc);
  }

  void check_clock(SourceLocation loc) const {
    if (Clock::now() > deadline_) {
      fail(ErrorCode::wall_clock, loc,
           "wall-clock budget of " + format_python_float(limits_.wall_clock_budget) + " s exceeded");
    }
  }

  static void classify(const Value& v, ProgramOutput& out) {
    if (const auto* s = v.get<std::string>()) {
      out.kind = OutputKind::text;
      out.text = *s;
    } else if (const auto* im = v.get<ImageValue>()) {
      out.kind = OutputKind::image;
      out.images.push_back(*im->image);
    } else if (kind_tag(v) == "image_list") {
      out.kind = OutputKind::image_list;
      for (const auto& item : **v.get<List>()) out.images.push_back(*item.get<ImageValue>()->image);
    } else {
      out.kind = OutputKind::text;
      out.text = to_display(v);
    }
  }

  // ---- statements ----

  Flow exec_block(const Block& block) {
    for (const auto& s : block) {
      if (exec(*s) == Flow::returned) return Flow::returned;
    }
    return Flow::normal;
  }

  Flow exec(const Stmt& stmt) {
    step(stmt.loc);
    return std::visit(
        [&](const auto& n) -> Flow {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, AssignStmt>) {
            Value value = eval(*n.value);
            assign(*n.target, std::move(value));
          } else if constexpr (std::is_same_v<T, AugAssignStmt>) {
            exec_augassign(n);
          } else if constexpr (std::is_same_v<T, ExprStmt>) {
            eval(*n.value);
          } else if constexpr (std::is_same_v<T, ReturnStmt>) {
            result_ = n.value ? eval(*n.value) : Value(NoneValue{});
            return Flow::returned;
          } else if constexpr (std::is_same_v<T, IfStmt>) {
            for (const auto& branch : n.branches) {
              if (truthy(eval(*branch.condition))) return exec_block(branch.body);
            }
            return exec_block(n.else_body);
          } else if constexpr (std::is_same_v<T, ForStmt>) {
            return exec_for(n, stmt.loc);
          }
          return Flow::normal;
        },
        stmt.node);
  }

  void assign(const Expr& target, Value value) {
    if (const auto* name = std::get_if<NameExpr>(&target.node)) {
      vars_[name->id] = std::move(value);
      return;
    }
    const auto& sub = std::get<SubscriptExpr>(target.node);
    Value object = eval(*sub.object);
    const Value index = eval(*sub.index);
    auto* list = object.get<List>();
    if (!list) fail(ErrorCode::type_mismatch, target.loc, "'" + type_name(object) + "' object does not support item assignment");
    (**list)[normalize_index(index, (*list)->size(), target.loc, "list assignment")] = std::move(value);
  }

  void exec_augassign(const AugAssignStmt& n) {
    if (const auto* name = std::get_if<NameExpr>(&n.target->node)) {
      const Value current = lookup(name->id, n.target->loc);
      const Value rhs = eval(*n.value);
      if (const auto* list = current.get<List>(); list && n.op == "+") {
        extend(*list, rhs, n.target->loc);
        return;
      }
      vars_[name->id] = binary(n.op, current, rhs, n.target->loc);
      return;
    }
    const auto& sub = std::get<SubscriptExpr>(n.target->node);
    Value object = eval(*sub.object);
    const Value index = eval(*sub.index);
    auto* list = object.get<List>();
    if (!list) fail(ErrorCode::type_mismatch, n.target->loc, "'" + type_name(object) + "' object does not support item assignment");
    const std::size_t i = normalize_index(index, (*list)->size(), n.target->loc, "list");
    const Value current = (**list)[i];
    const Value rhs = eval(*n.value);
    if (const auto* inner = current.get<List>(); inner && n.op == "+") {
      extend(*inner, rhs, n.target->loc);
      return;
    }
    Value updated = binary(n.op, current, rhs, n.target->loc);
    if (i >= (*list)->size()) fail(ErrorCode::index_out_of_range, n.target->loc, "list index out of range");
    (**list)[i] = std::move(updated);
  }

  void extend(const List& list, const Value& rhs, SourceLocation loc) {
    std::vector<Value> items = iterate_snapshot(rhs, loc);
    step(loc, static_cast<std::int64_t>(items.size()));
    for (auto& item : items) list->push_back(std::move(item));
  }

  Flow exec_for(const ForStmt& n, SourceLocation loc) {
    const Value iterable = eval(*n.iterable);
    std::int64_t count = 0;
    auto next_iteration = [&] {
      if (++count > limits_.max_loop_iterations) {
        fail(ErrorCode::step_limit, loc,
             "loop exceeded " + std::to_string(limits_.max_loop_iterations) + " iterations");
      }
      step(loc);
    };
    if (const auto* r = iterable.get<RangeValue>()) {
      const std::int64_t size = r->size();
      for (std::int64_t i = 0; i < size; ++i) {
        next_iteration();
        vars_[n.var] = r->at(i);
        if (exec_block(n.body) == Flow::returned) return Flow::returned;
      }
    } else if (const auto* l = iterable.get<List>()) {
      const List list = *l;
      for (std::size_t i = 0; i < list->size(); ++i) {
        next_iteration();
        vars_[n.var] = (*list)[i];
        if (exec_block(n.body) == Flow::returned) return Flow::returned;
      }
    } else if (const auto* s = iterable.get<std::string>()) {
      const std::string text = *s;
      const auto offsets = utf8_offsets(text);
      for (std::size_t i = 0; i + 1 < offsets.size(); ++i) {
        next_iteration();
        vars_[n.var] = text.substr(offsets[i], offsets[i + 1] - offsets[i]);
        if (exec_block(n.body) == Flow::returned) return Flow::returned;
      }
    } else {
      fail(ErrorCode::type_mismatch, n.iterable->loc, "'" + type_name(iterable) + "' object is not iterable");
    }
    return Flow::normal;
  }

  std::vector<Value> iterate_snapshot(const Value& v, SourceLocation loc) {
    if (const auto* l = v.get<List>()) return **l;
    if (const auto* r = v.get<RangeValue>()) {
      const std::int64_t size = r->size();
      step(loc, size);
      std::vector<Value> out;
      for (std::int64_t i = 0; i < size; ++i) out.emplace_back(r->at(i));
      return out;
    }
    if (const auto* s = v.get<std::string>()) {
      std::vector<Value> out;
      const auto offsets = utf8_offsets(*s);
      for (std::size_t i = 0; i + 1 < offsets.size(); ++i) out.emplace_back(s->substr(offsets[i], offsets[i + 1] - offsets[i]));
      return out;
    }
    fail(ErrorCode::type_mismatch, loc, "'" + type_name(v) + "' object is not iterable");
  }

  // ---- expressions ----

  Value lookup(const std::string& id, SourceLocation loc) const {
    if (auto it = vars_.find(id); it != vars_.end()) return it->second;
    if (id == "pySpatial") return NamespaceValue{};
    if (id == "range" || id == "len") return BuiltinValue{id};
    fail(ErrorCode::unknown_name, loc, "name '" + id + "' is not defined");
  }

  Value eval(const Expr& e) {
    return std::visit(
        [&](const auto& n) -> Value {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, NameExpr>) {
            return lookup(n.id, e.loc);
          } else if constexpr (std::is_same_v<T, IntLiteral>) {
            return n.value;
          } else if constexpr (std::is_same_v<T, FloatLiteral>) {
            return n.value;
          } else if constexpr (std::is_same_v<T, StringLiteral>) {
            return n.value;
          } else if constexpr (std::is_same_v<T, BoolLiteral>) {
            return n.value;
          } else if constexpr (std::is_same_v<T, NoneLiteral>) {
            return NoneValue{};
          } else if constexpr (std::is_same_v<T, ListExpr>) {
            std::vector<Value> items;
            for (const auto& item : n.items) items.push_back(eval(*item));
            return make_list(std::move(items));
          } else if constexpr (std::is_same_v<T, AttributeExpr>) {
            return attribute(eval(*n.object), n.attr, e.loc);
          } else if constexpr (std::is_same_v<T, SliceExpr>) {
            fail(ErrorCode::type_mismatch, e.loc, "slice outside a subscript");
          } else if constexpr (std::is_same_v<T, SubscriptExpr>) {
            const Value object = eval(*n.object);
            if (const auto* sl = std::get_if<SliceExpr>(&n.index->node)) return slice(object, *sl, e.loc);
            return subscript(object, eval(*n.index), e.loc);
          } else if constexpr (std::is_same_v<T, CallExpr>) {
            const Value callee = eval(*n.callee);
            Args args;
            for (const auto& a : n.args) args.positional.push_back(eval(*a));
            for (const auto& k : n.keywords) args.keywords.emplace_back(k.name, eval(*k.value));
            return call(callee, args, e.loc);
          } else if constexpr (std::is_same_v<T, UnaryExpr>) {
            return unary(n.op, eval(*n.operand), e.loc);
          } else if constexpr (std::is_same_v<T, BinaryExpr>) {
            const Value left = eval(*n.left);
            const Value right = eval(*n.right);
            return binary(n.op, left, right, e.loc);
          } else if constexpr (std::is_same_v<T, BoolOpExpr>) {
            Value left = eval(*n.left);
            const bool t = truthy(left);
            if ((n.op == "and" && !t) || (n.op == "or" && t)) return left;
            return eval(*n.right);
          } else if constexpr (std::is_same_v<T, CompareExpr>) {
            Value left = eval(*n.operands[0]);
            for (std::size_t i = 0; i < n.ops.size(); ++i) {
              Value right = eval(*n.operands[i + 1]);
              if (!compare(n.ops[i], left, right, e.loc)) return false;
              left = std::move(right);
            }
            return true;
          }
        },
        e.node);
  }

  Value attribute(const Value& object, const std::string& attr, SourceLocation loc) {
    if (object.is<NamespaceValue>()) {
      if (namespace_members().count(attr)) return BuiltinValue{"pySpatial." + attr};
      fail(ErrorCode::unknown_name, loc, "pySpatial has no tool named '" + attr + "'");
    }
    if (const auto* s = object.get<SceneValue>()) {
      if (attr == "images") return s->images;
      if (attr == "question") return s->scene->question;
    } else if (const auto* r = object.get<ReconValue>()) {
      if (attr == "extrinsics") return r->state->extrinsics;
      if (attr == "intrinsics") return r->state->intrinsics;
      if (attr == "point_cloud") return CloudValue{cloud(*r->state, loc)};
    } else if (const auto* k = object.get<IntrinsicsValue>()) {
      const Intrinsics& in = k->intrinsics;
      if (attr == "fx") return in.fx;
      if (attr == "fy") return in.fy;
      if (attr == "cx") return in.cx;
      if (attr == "cy") return in.cy;
      if (attr == "width") return std::int64_t{in.width};
      if (attr == "height") return std::int64_t{in.height};
    } else if (const auto* im = object.get<ImageValue>()) {
      if (attr == "width") return std::int64_t{im->image->width};
      if (attr == "height") return std::int64_t{im->image->height};
    } else if (const auto* d = object.get<DepthValue>()) {
      if (attr == "width") return std::int64_t{d->depth->width};
      if (attr == "height") return std::int64_t{d->depth->height};
    } else if (const auto* l = object.get<List>()) {
      if (attr == "append") return AppendMethod{*l};
    }
    fail(ErrorCode::unknown_name, loc, "'" + type_name(object) + "' object has no attribute '" + attr + "'");
  }

  std::size_t normalize_index(const Value& index, std::size_t size, SourceLocation loc, const std::string& what) const {
    if (!is_integral(index)) {
      fail(ErrorCode::type_mismatch, loc, what + " indices must be integers, not " + type_name(index));
    }
    std::int64_t i = as_int(index);
    const auto n = static_cast<std::int64_t>(size);
    if (i < 0) i += n;
    if (i < 0 || i >= n) fail(ErrorCode::index_out_of_range, loc, what + " index out of range");
    return static_cast<std::size_t>(i);
  }

  Value subscript(const Value& object, const Value& index, SourceLocation loc) {
    if (const auto* l = object.get<List>()) return (**l)[normalize_index(index, (*l)->size(), loc, "list")];
    if (const auto* s = object.get<std::string>()) {
      const auto offsets = utf8_offsets(*s);
      const std::size_t i = normalize_index(index, offsets.size() - 1, loc, "string");
      return s->substr(offsets[i], offsets[i + 1] - offsets[i]);
    }
    if (const auto* r = object.get<RangeValue>()) {
      const std::size_t i = normalize_index(index, static_cast<std::size_t>(r->size()), loc, "range object");
      return r->at(static_cast<std::int64_t>(i));
    }
    fail(ErrorCode::type_mismatch, loc, "'" + type_name(object) + "' object is not subscriptable");
  }

  Value slice(const Value& object, const SliceExpr& sl, SourceLocation loc) {
    auto bound = [&](const ExprPtr& e) -> std::optional<std::int64_t> {
      if (!e) return std::nullopt;
      const Value v = eval(*e);
      if (v.is<NoneValue>()) return std::nullopt;
      if (!is_integral(v)) fail(ErrorCode::type_mismatch, e->loc, "slice indices must be integers or None");
      return as_int(v);
    };
    const auto lower = bound(sl.lower);
    const auto upper = bound(sl.upper);
    const std::int64_t stride = bound(sl.step).value_or(1);
    if (stride == 0) fail(ErrorCode::arithmetic_error, loc, "slice step cannot be zero");

    std::int64_t length = 0;
    std::vector<std::size_t> offsets;
    const List* list = object.get<List>();
    const std::string* text = object.get<std::string>();
    if (list) {
      length = static_cast<std::int64_t>((*list)->size());
    } else if (text) {
      offsets = utf8_offsets(*text);
      length = static_cast<std::int64_t>(offsets.size()) - 1;
    } else {
      fail(ErrorCode::type_mismatch, loc, "'" + type_name(object) + "' object is not subscriptable");
    }
    // Same clamping as CPython's PySlice_AdjustIndices.
    auto adjust = [&](std::optional<std::int64_t> v, std::int64_t dflt) {
      if (!v) return dflt;
      std::int64_t x = *v;
      if (x < 0) {
        x += length;
        if (x < 0) x = stride < 0 ? -1 : 0;
      } else if (x >= length) {
        x = stride < 0 ? length - 1 : length;
      }
      return x;
    };
    const std::int64_t start = adjust(lower, stride < 0 ? length - 1 : 0);
    const std::int64_t stop = adjust(upper, stride < 0 ? -1 : length);
    std::vector<std::int64_t> picks;
    for (std::int64_t i = start; stride > 0 ? i < stop : i > stop; i += stride) picks.push_back(i);
    step(loc, static_cast<std::int64_t>(picks.size()));
    if (list) {
      std::vector<Value> out;
      for (const auto i : picks) out.push_back((**list)[static_cast<std::size_t>(i)]);
      return make_list(std::move(out));
    }
    std::string out;
    for (const auto i : picks) {
      const auto k = static_cast<std::size_t>(i);
      out += text->substr(offsets[k], offsets[k + 1] - offsets[k]);
    }
    return out;
  }

  Value unary(const std::string& op, const Value& v, SourceLocation loc) {
    if (op == "not") return !truthy(v);
    if (!is_number(v)) fail(ErrorCode::type_mismatch, loc, "bad operand type for unary " + op + ": '" + type_name(v) + "'");
    if (op == "+") return is_integral(v) ? Value(as_int(v)) : v;
    if (const auto* d = v.get<double>()) return -*d;
    const std::int64_t i = as_int(v);
    if (i == std::numeric_limits<std::int64_t>::min()) fail(ErrorCode::arithmetic_error, loc, "integer overflow");
    return -i;
  }

  [[noreturn]] static void unsupported(const std::string& op, const Value& a, const Value& b, SourceLocation loc) {
    fail(ErrorCode::type_mismatch, loc,
         "unsupported operand type(s) for " + op + ": '" + type_name(a) + "' and '" + type_name(b) + "'");
  }

  Value repeat(const Value& seq, const Value& count, SourceLocation loc) {
    const std::int64_t n = std::max<std::int64_t>(0, as_int(count));
    if (const auto* s = seq.get<std::string>()) {
      const __int128 bytes = static_cast<__int128>(s->size()) * n;
      if (bytes > 0) step(loc, bytes / 64 > limits_.max_steps ? limits_.max_steps + 1 : static_cast<std::int64_t>(bytes / 64) + 1);
      std::string out;
      for (std::int64_t i = 0; i < n; ++i) out += *s;
      return out;
    }
    const List& l = *seq.get<List>();
    const __int128 total = static_cast<__int128>(l->size()) * n;
    if (total > 0) step(loc, total > limits_.max_steps ? limits_.max_steps + 1 : static_cast<std::int64_t>(total));
    std::vector<Value> out;
    for (std::int64_t i = 0; i < n; ++i) out.insert(out.end(), l->begin(), l->end());
    return make_list(std::move(out));
  }

  template <typename Op>
  static std::int64_t checked(Op op, std::int64_t x, std::int64_t y, SourceLocation loc) {
    std::int64_t r = 0;
    if (op(x, y, &r)) fail(ErrorCode::arithmetic_error, loc, "integer overflow");
    return r;
  }
  static bool add_overflow(std::int64_t x, std::int64_t y, std::int64_t* r) { return __builtin_add_overflow(x, y, r); }
  static bool sub_overflow(std::int64_t x, std::int64_t y, std::int64_t* r) { return __builtin_sub_overflow(x, y, r); }
  static bool mul_overflow(std::int64_t x, std::int64_t y, std::int64_t* r) { return __builtin_mul_overflow(x, y, r); }

  Value binary(const std::string& op, const Value& a, const Value& b, SourceLocation loc) {
    if (op == "+") {
      if (const auto* s = a.get<std::string>()) {
        if (const auto* t = b.get<std::string>()) {
          step(loc, static_cast<std::int64_t>((s->size() + t->size()) / 1024));
          return *s + *t;
        }
        fail(ErrorCode::type_mismatch, loc, "can only concatenate str (not \"" + type_name(b) + "\") to str");
      }
      if (const auto* l = a.get<List>()) {
        if (const auto* r = b.get<List>()) {
          std::vector<Value> out = **l;
          step(loc, static_cast<std::int64_t>((*l)->size() + (*r)->size()));
          out.insert(out.end(), (*r)->begin(), (*r)->end());
          return make_list(std::move(out));
        }
        fail(ErrorCode::type_mismatch, loc, "can only concatenate list (not \"" + type_name(b) + "\") to list");
      }
    }
    if (op == "*") {
      if ((a.is<std::string>() || a.is<List>()) && is_integral(b)) return repeat(a, b, loc);
      if ((b.is<std::string>() || b.is<List>()) && is_integral(a)) return repeat(b, a, loc);
    }
    if (!is_number(a) || !is_number(b)) unsupported(op, a, b, loc);

    if (is_integral(a) && is_integral(b)) {
      const std::int64_t x = as_int(a);
      const std::int64_t y = as_int(b);
      if (op == "+") return checked(add_overflow, x, y, loc);
      if (op == "-") return checked(sub_overflow, x, y, loc);
      if (op == "*") return checked(mul_overflow, x, y, loc);
      if (op == "/") {
        if (y == 0) fail(ErrorCode::arithmetic_error, loc, "division by zero");
        return static_cast<double>(x) / static_cast<double>(y);
      }
      if (op == "//" || op == "%") {
        if (y == 0) fail(ErrorCode::arithmetic_error, loc, "integer division or modulo by zero");
        if (x == std::numeric_limits<std::int64_t>::min() && y == -1) {
          if (op == "%") return std::int64_t{0};
          fail(ErrorCode::arithmetic_error, loc, "integer overflow");
        }
        std::int64_t q = x / y;
        std::int64_t m = x % y;
        if (m != 0 && ((m < 0) != (y < 0))) {
          --q;
          m += y;
        }
        return op == "//" ? q : m;
      }
      if (op == "**") {
        if (y < 0) {
          if (x == 0) fail(ErrorCode::arithmetic_error, loc, "0 cannot be raised to a negative power");
          return std::pow(static_cast<double>(x), static_cast<double>(y));
        }
        std::int64_t result = 1;
        std::int64_t base = x;
        std::int64_t e = y;
        while (e > 0) {
          if (e & 1) result = checked(mul_overflow, result, base, loc);
          e >>= 1;
          if (e > 0) base = checked(mul_overflow, base, base, loc);
        }
        return result;
      }
    }

    const double x = as_double(a);
    const double y = as_double(b);
    if (op == "+") return x + y;
    if (op == "-") return x - y;
    if (op == "*") return x * y;
    if (op == "/") {
      if (y == 0.0) fail(ErrorCode::arithmetic_error, loc, "float division by zero");
      return x / y;
    }
    if (op == "//" || op == "%") {
      if (y == 0.0) fail(ErrorCode::arithmetic_error, loc, "float modulo by zero");
      // CPython's float_divmod.
      double m = std::fmod(x, y);
      double div = (x - m) / y;
      if (m != 0.0 && ((y < 0) != (m < 0))) {
        m += y;
        div -= 1.0;
      }
      if (op == "%") return m;
      double floordiv = std::floor(div);
      if (div - floordiv > 0.5) floordiv += 1.0;
      return floordiv;
    }
    if (op == "**") {
      if (x == 0.0 && y < 0) fail(ErrorCode::arithmetic_error, loc, "0.0 cannot be raised to a negative power");
      if (x < 0 && std::floor(y) != y) fail(ErrorCode::arithmetic_error, loc, "negative number cannot be raised to a fractional power");
      return std::pow(x, y);
    }
    unsupported(op, a, b, loc);
  }

  static bool equals(const Value& a, const Value& b, SourceLocation loc, int depth = 0) {
    if (depth > kMaxCompareDepth) fail(ErrorCode::type_mismatch, loc, "comparison nested too deeply");
    if (is_number(a) && is_number(b)) {
      if (is_integral(a) && is_integral(b)) return as_int(a) == as_int(b);
      return as_double(a) == as_double(b);
    }
    if (a.v.index() != b.v.index()) return false;
    if (a.is<NoneValue>() || a.is<NamespaceValue>()) return true;
    if (const auto* s = a.get<std::string>()) return *s == *b.get<std::string>();
    if (const auto* l = a.get<List>()) {
      const List& r = *b.get<List>();
      if (l->get() == r.get()) return true;
      if ((*l)->size() != r->size()) return false;
      for (std::size_t i = 0; i < r->size(); ++i) {
        if (!equals((**l)[i], (*r)[i], loc, depth + 1)) return false;
      }
      return true;
    }
    if (const auto* r = a.get<RangeValue>()) {
      const auto& o = *b.get<RangeValue>();
      const std::int64_t n = r->size();
      if (n != o.size()) return false;
      return n == 0 || (r->start == o.start && (n == 1 || r->step == o.step));
    }
    if (const auto* s = a.get<SceneValue>()) return s->scene == b.get<SceneValue>()->scene;
    if (const auto* r = a.get<ReconValue>()) return r->state == b.get<ReconValue>()->state;
    if (const auto* p = a.get<PoseValue>()) return p->pose == b.get<PoseValue>()->pose;
    if (const auto* im = a.get<ImageValue>()) {
      const auto& o = *b.get<ImageValue>();
      return im->image == o.image || *im->image == *o.image;
    }
    if (const auto* d = a.get<DepthValue>()) {
      const auto& o = *b.get<DepthValue>();
      return d->depth == o.depth || *d->depth == *o.depth;
    }
    if (const auto* k = a.get<IntrinsicsValue>()) return k->intrinsics == b.get<IntrinsicsValue>()->intrinsics;
    if (const auto* c = a.get<CloudValue>()) return c->cloud == b.get<CloudValue>()->cloud;
    if (const auto* f = a.get<BuiltinValue>()) return f->name == b.get<BuiltinValue>()->name;
    if (const auto* m = a.get<AppendMethod>()) return m->list == b.get<AppendMethod>()->list;
    return false;
  }

  static bool identical(const Value& a, const Value& b, SourceLocation loc) {
    if (a.v.index() != b.v.index()) return false;
    if (const auto* l = a.get<List>()) return l->get() == b.get<List>()->get();
    if (const auto* im = a.get<ImageValue>()) return im->image == b.get<ImageValue>()->image;
    if (const auto* d = a.get<DepthValue>()) return d->depth == b.get<DepthValue>()->depth;
    return equals(a, b, loc);
  }

  // Returns <0, 0, >0; throws type_mismatch for unordered types.
  static int order(const Value& a, const Value& b, const std::string& op, SourceLocation loc, int depth = 0) {
    if (depth > kMaxCompareDepth) fail(ErrorCode::type_mismatch, loc, "comparison nested too deeply");
    if (is_number(a) && is_number(b)) {
      if (is_integral(a) && is_integral(b)) {
        const auto x = as_int(a);
        const auto y = as_int(b);
        return x < y ? -1 : (x > y ? 1 : 0);
      }
      const double x = as_double(a);
      const double y = as_double(b);
      if (std::isnan(x) || std::isnan(y)) return 2;  // every ordering comparison with nan is false
      return x < y ? -1 : (x > y ? 1 : 0);
    }
    if (a.is<std::string>() && b.is<std::string>()) {
      const int c = a.get<std::string>()->compare(*b.get<std::string>());
      return c < 0 ? -1 : (c > 0 ? 1 : 0);
    }
    if (a.is<List>() && b.is<List>()) {
      const auto& l = **a.get<List>();
      const auto& r = **b.get<List>();
      for (std::size_t i = 0; i < l.size() && i < r.size(); ++i) {
        if (!equals(l[i], r[i], loc, depth + 1)) return order(l[i], r[i], op, loc, depth + 1);
      }
      return l.size() < r.size() ? -1 : (l.size() > r.size() ? 1 : 0);
    }
    fail(ErrorCode::type_mismatch, loc,
         "'" + op + "' not supported between instances of '" + type_name(a) + "' and '" + type_name(b) + "'");
  }

  bool contains(const Value& container, const Value& item, SourceLocation loc) {
    if (const auto* l = container.get<List>()) {
      for (const auto& x : **l) {
        if (equals(x, item, loc)) return true;
      }
      return false;
    }
    if (const auto* s = container.get<std::string>()) {
      const auto* needle = item.get<std::string>();
      if (!needle) fail(ErrorCode::type_mismatch, loc, "'in <string>' requires string as left operand, not " + type_name(item));
      return s->find(*needle) != std::string::npos;
    }
    if (const auto* r = container.get<RangeValue>()) {
      if (!is_number(item)) return false;
      if (!is_integral(item)) {
        const double d = as_double(item);
        if (std::floor(d) != d || std::abs(d) > 9.0e18) return false;
        return contains(container, static_cast<std::int64_t>(d), loc);
      }
      const __int128 x = as_int(item);
      const __int128 offset = x - r->start;
      if (r->size() == 0 || offset % r->step != 0) return false;
      const __int128 k = offset / r->step;
      return k >= 0 && k < r->size();
    }
    fail(ErrorCode::type_mismatch, loc, "argument of type '" + type_name(container) + "' is not iterable");
  }

  bool compare(const std::string& op, const Value& a, const Value& b, SourceLocation loc) {
    if (op == "==") return equals(a, b, loc);
    if (op == "!=") return !equals(a, b, loc);
    if (op == "is") return identical(a, b, loc);
    if (op == "is not") return !identical(a, b, loc);
    if (op == "in") return contains(b, a, loc);
    if (op == "not in") return !contains(b, a, loc);
    const int c = order(a, b, op, loc);
    if (c == 2) return false;
    if (op == "<") return c < 0;
    if (op == "<=") return c <= 0;
    if (op == ">") return c > 0;
    return c >= 0;
  }

  // ---- calls ----

  Value call(const Value& callee, const Args& args, SourceLocation loc) {
    step(loc);
    if (const auto* m = callee.get<AppendMethod>()) {
      if (args.positional.size() != 1 || !args.keywords.empty()) {
        fail(ErrorCode::type_mismatch, loc, "append() takes exactly one argument");
      }
      m->list->push_back(args.positional[0]);
      return NoneValue{};
    }
    const auto* fn = callee.get<BuiltinValue>();
    if (!fn) fail(ErrorCode::type_mismatch, loc, "'" + type_name(callee) + "' object is not callable");
    if (fn->name == "range") return builtin_range(args, loc);
    if (fn->name == "len") return builtin_len(args, loc);
    return call_tool(fn->name.substr(std::string("pySpatial.").size()), args, loc);
  }

  // Binds arguments to named parameters; the first `required` are mandatory.
  static std::vector<std::optional<Value>> bind(const std::string& fname, const Args& args,
                                                const std::vector<std::string>& params, std::size_t required,
                                                SourceLocation loc) {
    if (args.positional.size() > params.size()) {
      fail(ErrorCode::type_mismatch, loc,
           fname + "() takes at most " + std::to_string(params.size()) + " arguments (" +
               std::to_string(args.positional.size()) + " given)");
    }
    std::vector<std::optional<Value>> bound(params.size());
    for (std::size_t i = 0; i < args.positional.size(); ++i) bound[i] = args.positional[i];
    for (const auto& [name, value] : args.keywords) {
      const auto it = std::find(params.begin(), params.end(), name);
      if (it == params.end()) fail(ErrorCode::type_mismatch, loc, fname + "() got an unexpected keyword argument '" + name + "'");
      auto& slot = bound[static_cast<std::size_t>(it - params.begin())];
      if (slot) fail(ErrorCode::type_mismatch, loc, fname + "() got multiple values for argument '" + name + "'");
      slot = value;
    }
    for (std::size_t i = 0; i < required; ++i) {
      if (!bound[i]) fail(ErrorCode::type_mismatch, loc, fname + "() missing required argument '" + params[i] + "'");
    }
    return bound;
  }

  static Value builtin_range(const Args& args, SourceLocation loc) {
    if (!args.keywords.empty()) fail(ErrorCode::type_mismatch, loc, "range() takes no keyword arguments");
    const auto& a = args.positional;
    if (a.empty() || a.size() > 3) fail(ErrorCode::type_mismatch, loc, "range expected 1 to 3 arguments");
    for (const auto& v : a) {
      if (!is_integral(v)) fail(ErrorCode::type_mismatch, loc, "'" + type_name(v) + "' object cannot be interpreted as an integer");
    }
    RangeValue r;
    if (a.size() == 1) {
      r.stop = as_int(a[0]);
    } else {
      r.start = as_int(a[0]);
      r.stop = as_int(a[1]);
      if (a.size() == 3) r.step = as_int(a[2]);
    }
    if (r.step == 0) fail(ErrorCode::arithmetic_error, loc, "range() arg 3 must not be zero");
    if (r.step == std::numeric_limits<std::int64_t>::min()) fail(ErrorCode::arithmetic_error, loc, "range() step out of range");
    return r;
  }

  static Value builtin_len(const Args& args, SourceLocation loc) {
    if (args.positional.size() != 1 || !args.keywords.empty()) {
      fail(ErrorCode::type_mismatch, loc, "len() takes exactly one argument");
    }
    const Value& v = args.positional[0];
    if (const auto* l = v.get<List>()) return static_cast<std::int64_t>((*l)->size());
    if (const auto* s = v.get<std::string>()) return static_cast<std::int64_t>(utf8_offsets(*s).size() - 1);
    if (const auto* r = v.get<RangeValue>()) return r->size();
    fail(ErrorCode::type_mismatch, loc, "object of type '" + type_name(v) + "' has no len()");
  }

  static const PoseValue& expect_pose(const std::optional<Value>& v, const std::string& fname, SourceLocation loc) {
    const auto* p = v->get<PoseValue>();
    if (!p) {
      fail(ErrorCode::type_mismatch, loc,
           fname + "() expects a camera pose (an element of recon.extrinsics), got " + type_name(*v));
    }
    return *p;
  }

  static double expect_number(const std::optional<Value>& v, double fallback, const std::string& what,
                              SourceLocation loc) {
    if (!v) return fallback;
    if (!is_number(*v)) fail(ErrorCode::type_mismatch, loc, what + " must be a number, not " + type_name(*v));
    return as_double(*v);
  }

  std::shared_ptr<ReconState> ensure_reconstruction(SourceLocation loc) {
    if (recon_) return recon_;
    ReconstructionBundle bundle;
    const auto started = Clock::now();
    try {
      if (!provider_) throw Error(ErrorCode::reconstruction_failed, "no reconstruction backend configured");
      bundle = provider_(scene_);
      bundle.validate();
    } catch (const std::exception& e) {
      fail(ErrorCode::reconstruction_failed, loc, std::string("reconstruction failed: ") + e.what());
    }
    // the backend's latency is not charged to the program
    deadline_ += Clock::now() - started;
    auto state = std::make_shared<ReconState>();
    state->bundle = std::move(bundle);
    std::vector<Value> poses;
    std::vector<Value> intrinsics;
    for (std::size_t i = 0; i < state->bundle.frames.size(); ++i) {
      poses.emplace_back(PoseValue{state->bundle.frames[i].pose, i});
      intrinsics.emplace_back(IntrinsicsValue{state->bundle.frames[i].intrinsics});
    }
    state->extrinsics = std::make_shared<std::vector<Value>>(std::move(poses));
    state->intrinsics = std::make_shared<std::vector<Value>>(std::move(intrinsics));
    recon_ = state;
    return recon_;
  }

  std::shared_ptr<const PointCloud> cloud(ReconState& state, SourceLocation loc) {
    if (!state.cloud) {
      state.cloud = std::make_shared<const PointCloud>(build_point_cloud(state.bundle, tools_.cloud));
      check_clock(loc);
    }
    return state.cloud;
  }

  Value call_tool(const std::string& name, const Args& args, SourceLocation loc) {
    TraceRecord record;
    record.step = steps_;
    record.call = "pySpatial." + name;
    std::string summary;
    for (const auto& a : args.positional) summary += (summary.empty() ? "" : ", ") + truncate(to_repr(a));
    for (const auto& [k, v] : args.keywords) summary += (summary.empty() ? "" : ", ") + k + "=" + truncate(to_repr(v));
    record.args_summary = summary;
    try {
      Value result = run_tool(name, args, loc);
      record.output_kind = kind_tag(result);
      trace_.push_back(std::move(record));
      return result;
    } catch (const ProgramError&) {
      record.output_kind = "error";
      trace_.push_back(std::move(record));
      throw;
    } catch (const Error& e) {
      record.output_kind = "error";
      trace_.push_back(std::move(record));
      const ErrorCode code =
          e.code() == ErrorCode::index_out_of_range ? ErrorCode::index_out_of_range : ErrorCode::tool_failure;
      fail(code, loc, "pySpatial." + name + ": " + e.what());
    }
  }

  Value run_tool(const std::string& name, const Args& args, SourceLocation loc) {
    const std::string fname = "pySpatial." + name;
    if (name == "reconstruct") {
      const auto a = bind(fname, args, {"scene"}, 1, loc);
      if (!a[0]->is<SceneValue>()) fail(ErrorCode::type_mismatch, loc, fname + "() expects the input scene, got " + type_name(*a[0]));
      return ReconValue{ensure_reconstruction(loc)};
    }
    if (name == "describe_camera_motion") {
      const auto a = bind(fname, args, {"recon"}, 1, loc);
      std::vector<ExtrinsicPose> poses;
      SceneUnits units = SceneUnits::normalized;
      if (const auto* r = a[0]->get<ReconValue>()) {
        poses = r->state->bundle.poses();
        units = r->state->bundle.units;
      } else if (const auto* l = a[0]->get<List>()) {
        for (const auto& item : **l) poses.push_back(expect_pose(item, fname, loc).pose);
        if (recon_) units = recon_->bundle.units;
      } else {
        fail(ErrorCode::type_mismatch, loc, fname + "() expects a reconstruction, got " + type_name(*a[0]));
      }
      return describe_camera_motion(poses, units);
    }
    if (name == "synthesize_novel_view") {
      const auto a = bind(fname, args, {"recon", "new_camera_pose"}, 2, loc);
      const auto* r = a[0]->get<ReconValue>();
      if (!r) fail(ErrorCode::type_mismatch, loc, fname + "() expects a reconstruction, got " + type_name(*a[0]));
      const PoseValue& pose = expect_pose(a[1], fname, loc);
      if (rendered_ >= limits_.max_rendered_images) {
        fail(ErrorCode::image_budget, loc,
             "rendered-image budget of " + std::to_string(limits_.max_rendered_images) + " exhausted");
      }
      const auto& frames = r->state->bundle.frames;
      if (pose.frame >= frames.size()) fail(ErrorCode::index_out_of_range, loc, "pose refers to a missing view");
      const auto points = cloud(*r->state, loc);
      RenderedImage view = synthesize_novel_view(*points, pose.pose, frames[pose.frame].intrinsics, tools_.render);
      ++rendered_;
      check_clock(loc);
      return ImageValue{std::make_shared<const Image>(view.to_image()), std::nullopt};
    }
    if (name == "rotate_right" || name == "rotate_left") {
      const auto a = bind(fname, args, {"extrinsic", "angle"}, 1, loc);
      const PoseValue& p = expect_pose(a[0], fname, loc);
      const double angle = expect_number(a[1], tools_.rotation_deg, "angle", loc);
      return PoseValue{name == "rotate_right" ? rotate_right(p.pose, angle) : rotate_left(p.pose, angle), p.frame};
    }
    if (name == "move_forward" || name == "move_backward") {
      const auto a = bind(fname, args, {"extrinsic", "distance"}, 1, loc);
      const PoseValue& p = expect_pose(a[0], fname, loc);
      const double distance = expect_number(a[1], tools_.move_step, "distance", loc);
      return PoseValue{name == "move_forward" ? move_forward(p.pose, distance) : move_backward(p.pose, distance),
                       p.frame};
    }
    if (name == "turn_around") {
      const auto a = bind(fname, args, {"extrinsic"}, 1, loc);
      const PoseValue& p = expect_pose(a[0], fname, loc);
      return PoseValue{turn_around(p.pose), p.frame};
    }
    if (name == "estimate_depth") {
      const auto a = bind(fname, args, {"image"}, 1, loc);
      std::size_t frame = 0;
      if (const auto* im = a[0]->get<ImageValue>()) {
        if (!im->frame) fail(ErrorCode::type_mismatch, loc, fname + "() needs one of the input images, not a rendered view");
        frame = *im->frame;
      } else if (is_integral(*a[0])) {
        const std::int64_t i = as_int(*a[0]);
        if (i < 0) fail(ErrorCode::index_out_of_range, loc, "frame index out of range");
        frame = static_cast<std::size_t>(i);
      } else {
        fail(ErrorCode::type_mismatch, loc, fname + "() expects an input image, got " + type_name(*a[0]));
      }
      const auto state = ensure_reconstruction(loc);
      return DepthValue{std::make_shared<const DepthMap>(estimate_depth(state->bundle, frame))};
    }
    fail(ErrorCode::unknown_name, loc, "pySpatial has no tool named '" + name + "'");
  }

  const Program& program_;
  const Scene& scene_;
  const BundleProvider& provider_;
  const ExecutionLimits& limits_;
  const ToolOptions& tools_;

  std::map<std::string, Value> vars_;
  Value result_ = NoneValue{};
  std::int64_t steps_ = 0;
  std::int64_t rendered_ = 0;
  std::vector<TraceRecord> trace_;
  std::shared_ptr<ReconState> recon_;
  Clock::time_point deadline_;
  SourceLocation current_;
};

}  // namespace

ProgramOutput execute(const Program& program, const Scene& scene, const BundleProvider& bundle_provider,
                      const ExecutionLimits& limits, const ToolOptions& tools) {
  return Interpreter(program, scene, bundle_provider, limits, tools).run();
}

}  // namespace spatial::spl
