#pragma once

#include "spatial/spl/lexer.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace spatial::spl {

struct Expr;
struct Stmt;
using ExprPtr = std::unique_ptr<Expr>;
using StmtPtr = std::unique_ptr<Stmt>;
using Block = std::vector<StmtPtr>;

struct NameExpr {
  std::string id;
};
struct IntLiteral {
  std::int64_t value = 0;
};
struct FloatLiteral {
  double value = 0.0;
};
struct StringLiteral {
  std::string value;
};
struct BoolLiteral {
  bool value = false;
};
struct NoneLiteral {};
struct ListExpr {
  std::vector<ExprPtr> items;
};
struct AttributeExpr {
  ExprPtr object;
  std::string attr;
};
/// lower/upper/step are null when omitted.
struct SliceExpr {
  ExprPtr lower;
  ExprPtr upper;
  ExprPtr step;
};
struct SubscriptExpr {
  ExprPtr object;
  ExprPtr index;  // may hold a SliceExpr
};
struct KeywordArg {
  std::string name;
  ExprPtr value;
  SourceLocation loc;
};
struct CallExpr {
  ExprPtr callee;
  std::vector<ExprPtr> args;
  std::vector<KeywordArg> keywords;
};
/// op is one of "-", "+", "not".
struct UnaryExpr {
  std::string op;
  ExprPtr operand;
};
/// op is one of "+", "-", "*", "/", "//", "%", "**".
struct BinaryExpr {
  std::string op;
  ExprPtr left;
  ExprPtr right;
};
/// op is "and" or "or"; short-circuiting, returns an operand like Python.
struct BoolOpExpr {
  std::string op;
  ExprPtr left;
  ExprPtr right;
};
/// Chained comparison: operands.size() == ops.size() + 1. Ops are "==",
/// "!=", "<", "<=", ">", ">=", "in", "not in", "is", "is not".
struct CompareExpr {
  std::vector<ExprPtr> operands;
  std::vector<std::string> ops;
};

struct Expr {
  SourceLocation loc;
  std::variant<NameExpr, IntLiteral, FloatLiteral, StringLiteral, BoolLiteral, NoneLiteral, ListExpr,
               AttributeExpr, SliceExpr, SubscriptExpr, CallExpr, UnaryExpr, BinaryExpr, BoolOpExpr, CompareExpr>
      node;
};

/// target is a NameExpr or SubscriptExpr.
struct AssignStmt {
  ExprPtr target;
  ExprPtr value;
};
/// op is the arithmetic operator without '=' ("+", "-", "*", "/").
struct AugAssignStmt {
  ExprPtr target;
  std::string op;
  ExprPtr value;
};
struct ExprStmt {
  ExprPtr value;
};
struct ReturnStmt {
  ExprPtr value;  // null for a bare return
};
struct IfBranch {
  ExprPtr condition;
  Block body;
  SourceLocation loc;
};
/// if / elif... / else.
struct IfStmt {
  std::vector<IfBranch> branches;
  Block else_body;
};
struct ForStmt {
  std::string var;
  ExprPtr iterable;
  Block body;
};

struct Stmt {
  SourceLocation loc;
  std::variant<AssignStmt, AugAssignStmt, ExprStmt, ReturnStmt, IfStmt, ForStmt> node;
};

/// The single entry function `def program(<param>): ...`.
struct Program {
  std::string param;
  /// Annotation text as written (e.g. "Scene"); not evaluated.
  std::optional<std::string> param_annotation;
  std::optional<std::string> return_annotation;
  Block body;
  std::vector<Comment> comments;
  SourceLocation loc;
};

/// Canonical S-expression of the program structure; ignores locations and
/// comments. Two programs are structurally identical when these match.
std::string to_sexpr(const Program& program);
std::string to_sexpr(const Expr& expr);

/// Re-emits source text that parses back to a structurally identical AST.
std::string pretty_print(const Program& program);
std::string pretty_print(const Expr& expr);

}  // namespace spatial::spl
