#include "spatial/spl/ast.hpp"

#include <charconv>
#include <cstdio>

namespace spatial::spl {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string format_float(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (const char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '"': out += "\\\""; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20 || c == 0x7f) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\x%02x", static_cast<unsigned char>(c));
          out += buf;
        } else {
          out += c;
        }
    }
  }
  return out + "\"";
}

// ---- S-expressions ----

void sexpr(const Expr& e, std::string& out);

void sexpr_opt(const ExprPtr& e, std::string& out) {
  if (e) {
    sexpr(*e, out);
  } else {
    out += "_";
  }
}

void sexpr(const Expr& e, std::string& out) {
  std::visit(overloaded{
                 [&](const NameExpr& n) { out += "(name " + n.id + ")"; },
                 [&](const IntLiteral& n) { out += "(int " + std::to_string(n.value) + ")"; },
                 [&](const FloatLiteral& n) { out += "(float " + format_float(n.value) + ")"; },
                 [&](const StringLiteral& n) { out += "(str " + quote(n.value) + ")"; },
                 [&](const BoolLiteral& n) { out += n.value ? "(bool True)" : "(bool False)"; },
                 [&](const NoneLiteral&) { out += "(none)"; },
                 [&](const ListExpr& n) {
                   out += "(list";
                   for (const auto& item : n.items) {
                     out += ' ';
                     sexpr(*item, out);
                   }
                   out += ')';
                 },
                 [&](const AttributeExpr& n) {
                   out += "(attr ";
                   sexpr(*n.object, out);
                   out += ' ' + n.attr + ')';
                 },
                 [&](const SliceExpr& n) {
                   out += "(slice ";
                   sexpr_opt(n.lower, out);
                   out += ' ';
                   sexpr_opt(n.upper, out);
                   out += ' ';
                   sexpr_opt(n.step, out);
                   out += ')';
                 },
                 [&](const SubscriptExpr& n) {
                   out += "(index ";
                   sexpr(*n.object, out);
                   out += ' ';
                   sexpr(*n.index, out);
                   out += ')';
                 },
                 [&](const CallExpr& n) {
                   out += "(call ";
                   sexpr(*n.callee, out);
                   for (const auto& a : n.args) {
                     out += ' ';
                     sexpr(*a, out);
                   }
                   for (const auto& k : n.keywords) {
                     out += " (kw " + k.name + ' ';
                     sexpr(*k.value, out);
                     out += ')';
                   }
                   out += ')';
                 },
                 [&](const UnaryExpr& n) {
                   out += "(unary " + n.op + ' ';
                   sexpr(*n.operand, out);
                   out += ')';
                 },
                 [&](const BinaryExpr& n) {
                   out += "(binop " + n.op + ' ';
                   sexpr(*n.left, out);
                   out += ' ';
                   sexpr(*n.right, out);
                   out += ')';
                 },
                 [&](const BoolOpExpr& n) {
                   out += "(" + n.op + ' ';
                   sexpr(*n.left, out);
                   out += ' ';
                   sexpr(*n.right, out);
                   out += ')';
                 },
                 [&](const CompareExpr& n) {
                   out += "(compare ";
                   sexpr(*n.operands[0], out);
                   for (std::size_t i = 0; i < n.ops.size(); ++i) {
                     out += " [" + n.ops[i] + "] ";
                     sexpr(*n.operands[i + 1], out);
                   }
                   out += ')';
                 },
             },
             e.node);
}

void sexpr(const Block& block, std::string& out);

void sexpr(const Stmt& s, std::string& out) {
  std::visit(overloaded{
                 [&](const AssignStmt& n) {
                   out += "(assign ";
                   sexpr(*n.target, out);
                   out += ' ';
                   sexpr(*n.value, out);
                   out += ')';
                 },
                 [&](const AugAssignStmt& n) {
                   out += "(augassign " + n.op + ' ';
                   sexpr(*n.target, out);
                   out += ' ';
                   sexpr(*n.value, out);
                   out += ')';
                 },
                 [&](const ExprStmt& n) {
                   out += "(expr ";
                   sexpr(*n.value, out);
                   out += ')';
                 },
                 [&](const ReturnStmt& n) {
                   out += "(return ";
                   sexpr_opt(n.value, out);
                   out += ')';
                 },
                 [&](const IfStmt& n) {
                   out += "(if";
                   for (const auto& b : n.branches) {
                     out += " (branch ";
                     sexpr(*b.condition, out);
                     out += ' ';
                     sexpr(b.body, out);
                     out += ')';
                   }
                   out += " (else ";
                   sexpr(n.else_body, out);
                   out += "))";
                 },
                 [&](const ForStmt& n) {
                   out += "(for " + n.var + ' ';
                   sexpr(*n.iterable, out);
                   out += ' ';
                   sexpr(n.body, out);
                   out += ')';
                 },
             },
             s.node);
}

void sexpr(const Block& block, std::string& out) {
  out += "(block";
  for (const auto& s : block) {
    out += ' ';
    sexpr(*s, out);
  }
  out += ')';
}

// ---- pretty printing ----

enum Prec : int {
  kOr = 1,
  kAnd = 2,
  kNot = 3,
  kCompare = 4,
  kAdditive = 5,
  kMultiplicative = 6,
  kUnary = 7,
  kPower = 8,
  kPrimary = 9,
};

int precedence(const Expr& e) {
  return std::visit(overloaded{
                        [](const BoolOpExpr& n) { return n.op == "or" ? int{kOr} : int{kAnd}; },
                        [](const UnaryExpr& n) { return n.op == "not" ? int{kNot} : int{kUnary}; },
                        [](const CompareExpr&) { return int{kCompare}; },
                        [](const BinaryExpr& n) {
                          if (n.op == "+" || n.op == "-") return int{kAdditive};
                          if (n.op == "**") return int{kPower};
                          return int{kMultiplicative};
                        },
                        [](const auto&) { return int{kPrimary}; },
                    },
                    e.node);
}

std::string print_expr(const Expr& e);

std::string print_at(const Expr& e, int required) {
  std::string s = print_expr(e);
  return precedence(e) < required ? "(" + s + ")" : s;
}

std::string print_opt(const ExprPtr& e) { return e ? print_expr(*e) : ""; }

std::string print_expr(const Expr& e) {
  return std::visit(
      overloaded{
          [](const NameExpr& n) { return n.id; },
          [](const IntLiteral& n) { return std::to_string(n.value); },
          [](const FloatLiteral& n) { return format_float(n.value); },
          [](const StringLiteral& n) { return quote(n.value); },
          [](const BoolLiteral& n) { return std::string(n.value ? "True" : "False"); },
          [](const NoneLiteral&) { return std::string("None"); },
          [](const ListExpr& n) {
            std::string s = "[";
            for (std::size_t i = 0; i < n.items.size(); ++i) {
              if (i) s += ", ";
              s += print_expr(*n.items[i]);
            }
            return s + "]";
          },
          [](const AttributeExpr& n) {
            // "1 .real" style ambiguity cannot arise: integer objects are parenthesized.
            const bool is_number = std::holds_alternative<IntLiteral>(n.object->node) ||
                                   std::holds_alternative<FloatLiteral>(n.object->node);
            const std::string obj = print_at(*n.object, kPrimary);
            return (is_number ? "(" + obj + ")" : obj) + "." + n.attr;
          },
          [](const SliceExpr& n) {
            std::string s = print_opt(n.lower) + ":" + print_opt(n.upper);
            if (n.step) s += ":" + print_expr(*n.step);
            return s;
          },
          [](const SubscriptExpr& n) { return print_at(*n.object, kPrimary) + "[" + print_expr(*n.index) + "]"; },
          [](const CallExpr& n) {
            std::string s = print_at(*n.callee, kPrimary) + "(";
            bool first = true;
            for (const auto& a : n.args) {
              if (!first) s += ", ";
              first = false;
              s += print_expr(*a);
            }
            for (const auto& k : n.keywords) {
              if (!first) s += ", ";
              first = false;
              s += k.name + "=" + print_expr(*k.value);
            }
            return s + ")";
          },
          [](const UnaryExpr& n) {
            if (n.op == "not") return "not " + print_at(*n.operand, kNot);
            return n.op + print_at(*n.operand, kUnary);
          },
          [](const BinaryExpr& n) {
            if (n.op == "**") return print_at(*n.left, kPrimary) + " ** " + print_at(*n.right, kUnary);
            const int p = n.op == "+" || n.op == "-" ? kAdditive : kMultiplicative;
            return print_at(*n.left, p) + " " + n.op + " " + print_at(*n.right, p + 1);
          },
          [](const BoolOpExpr& n) {
            const int p = n.op == "or" ? kOr : kAnd;
            return print_at(*n.left, p) + " " + n.op + " " + print_at(*n.right, p + 1);
          },
          [](const CompareExpr& n) {
            std::string s = print_at(*n.operands[0], kCompare + 1);
            for (std::size_t i = 0; i < n.ops.size(); ++i) {
              s += " " + n.ops[i] + " " + print_at(*n.operands[i + 1], kCompare + 1);
            }
            return s;
          },
      },
      e.node);
}

void print_block(const Block& block, int indent, std::string& out);

void print_stmt(const Stmt& s, int indent, std::string& out) {
  const std::string pad(static_cast<std::size_t>(indent) * 4, ' ');
  std::visit(overloaded{
                 [&](const AssignStmt& n) {
                   out += pad + print_expr(*n.target) + " = " + print_expr(*n.value) + "\n";
                 },
                 [&](const AugAssignStmt& n) {
                   out += pad + print_expr(*n.target) + " " + n.op + "= " + print_expr(*n.value) + "\n";
                 },
                 [&](const ExprStmt& n) { out += pad + print_expr(*n.value) + "\n"; },
                 [&](const ReturnStmt& n) {
                   out += pad + (n.value ? "return " + print_expr(*n.value) : std::string("return")) + "\n";
                 },
                 [&](const IfStmt& n) {
                   for (std::size_t i = 0; i < n.branches.size(); ++i) {
                     out += pad + (i == 0 ? "if " : "elif ") + print_expr(*n.branches[i].condition) + ":\n";
                     print_block(n.branches[i].body, indent + 1, out);
                   }
                   if (!n.else_body.empty()) {
                     out += pad + "else:\n";
                     print_block(n.else_body, indent + 1, out);
                   }
                 },
                 [&](const ForStmt& n) {
                   out += pad + "for " + n.var + " in " + print_expr(*n.iterable) + ":\n";
                   print_block(n.body, indent + 1, out);
                 },
             },
             s.node);
}

void print_block(const Block& block, int indent, std::string& out) {
  for (const auto& s : block) print_stmt(*s, indent, out);
}

}  // namespace

std::string to_sexpr(const Expr& expr) {
  std::string out;
  sexpr(expr, out);
  return out;
}

std::string to_sexpr(const Program& program) {
  std::string out = "(program " + program.param;
  out += " (annotation " + program.param_annotation.value_or("_") + ")";
  out += " (returns " + program.return_annotation.value_or("_") + ") ";
  sexpr(program.body, out);
  return out + ")";
}

std::string pretty_print(const Expr& expr) { return print_expr(expr); }

std::string pretty_print(const Program& program) {
  std::string out = "def program(" + program.param;
  if (program.param_annotation) out += ": " + *program.param_annotation;
  out += ")";
  if (program.return_annotation) out += " -> " + *program.return_annotation;
  out += ":\n";
  print_block(program.body, 1, out);
  return out;
}

}  // namespace spatial::spl
