#include "spatial/spl/parser.hpp"

#include <charconv>
#include <cstdlib>
#include <functional>

namespace spatial::spl {

const std::set<std::string>& builtin_names() {
  static const std::set<std::string> names{"pySpatial", "range", "len"};
  return names;
}

const std::set<std::string>& namespace_members() {
  static const std::set<std::string> members{
      "reconstruct",  "describe_camera_motion", "synthesize_novel_view", "rotate_right", "rotate_left",
      "move_forward", "move_backward",          "turn_around",           "estimate_depth"};
  return members;
}

namespace {

const std::set<std::string>& forbidden_keywords() {
  static const std::set<std::string> words{"import", "from",   "while",  "class", "lambda", "try",
                                           "except", "finally", "with",  "pass",  "break",  "continue",
                                           "global", "nonlocal", "del",  "assert", "raise", "yield",
                                           "async",  "await",  "as"};
  return words;
}

std::string describe(const Token& t) {
  switch (t.kind) {
    case TokenKind::newline: return "end of line";
    case TokenKind::indent: return "indent";
    case TokenKind::dedent: return "dedent";
    case TokenKind::end_of_file: return "end of input";
    case TokenKind::string: return "string literal";
    default: return "'" + t.text + "'";
  }
}

template <typename T>
ExprPtr make_expr(SourceLocation loc, T node) {
  auto e = std::make_unique<Expr>();
  e->loc = loc;
  e->node = std::move(node);
  return e;
}

template <typename T>
StmtPtr make_stmt(SourceLocation loc, T node) {
  auto s = std::make_unique<Stmt>();
  s->loc = loc;
  s->node = std::move(node);
  return s;
}

class Parser {
 public:
  explicit Parser(const TokenStream& stream)
      : toks_(stream.tokens), comments_(stream.comments), lex_error_(stream.error) {}

  Program run() {
    std::optional<Program> program;
    while (!at(TokenKind::end_of_file)) {
      if (at(TokenKind::newline)) {
        ++pos_;
        continue;
      }
      const Token& t = cur();
      if (t.is_keyword("def")) {
        if (program) {
          throw ProgramError(ErrorCode::entry_function, t.loc,
                             "only one top-level function is allowed; found a second definition");
        }
        program = parse_def();
        continue;
      }
      if (t.is_op("@")) forbid(t, "decorators");
      if (t.kind == TokenKind::keyword && forbidden_keywords().count(t.text)) forbid(t, "'" + t.text + "'");
      if (t.kind == TokenKind::indent) throw ProgramError(ErrorCode::inconsistent_indentation, t.loc, "unexpected indent");
      // A lone string literal at top level is a module docstring.
      if (t.kind == TokenKind::string && (peek(1).kind == TokenKind::newline || peek(1).kind == TokenKind::end_of_file)) {
        pos_ += 1;
        continue;
      }
      throw ProgramError(ErrorCode::entry_function, t.loc,
                         "statements outside 'def program(...)' are not allowed");
    }
    if (!program) {
      throw ProgramError(ErrorCode::entry_function, cur().loc, "no 'def program(...)' function found");
    }
    program->comments = comments_;
    check_names(*program);
    return std::move(*program);
  }

 private:
  const Token& cur() const {
    if (lex_error_ && toks_[pos_].kind == TokenKind::end_of_file) throw *lex_error_;
    return toks_[pos_];
  }
  const Token& peek(std::size_t ahead) const { return toks_[std::min(pos_ + ahead, toks_.size() - 1)]; }
  bool at(TokenKind kind) const { return cur().kind == kind; }
  bool at_op(std::string_view op) const { return cur().is_op(op); }
  bool at_keyword(std::string_view kw) const { return cur().is_keyword(kw); }

  // Bounds recursion on adversarial input such as thousands of '('.
  struct Nest {
    explicit Nest(Parser& p) : parser(p) {
      if (++parser.depth_ > kMaxNesting) {
        throw ProgramError(ErrorCode::syntax_error, parser.cur().loc, "program is nested too deeply");
      }
    }
    ~Nest() { --parser.depth_; }
    Parser& parser;
  };
  static constexpr int kMaxNesting = 100;

  const Token& take() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

  [[noreturn]] void expected(const std::string& what) const {
    throw ProgramError(ErrorCode::syntax_error, cur().loc, "expected " + what + ", found " + describe(cur()));
  }

  [[noreturn]] static void forbid(const Token& t, const std::string& what) {
    throw ProgramError(ErrorCode::forbidden_construct, t.loc, what + " is not allowed in programs");
  }

  const Token& expect_op(std::string_view op, const std::string& context) {
    if (!at_op(op)) expected("'" + std::string(op) + "' " + context);
    return take();
  }

  Program parse_def() {
    Program p;
    p.loc = take().loc;  // def
    if (!at(TokenKind::name)) expected("function name after 'def'");
    const Token& name = take();
    if (name.text != "program") {
      throw ProgramError(ErrorCode::entry_function, name.loc,
                         "the entry function must be named 'program', not '" + name.text + "'");
    }
    expect_op("(", "after 'def program'");
    if (!at(TokenKind::name)) {
      throw ProgramError(ErrorCode::entry_function, cur().loc, "'program' must take exactly one parameter");
    }
    p.param = take().text;
    if (at_op(":")) {
      take();
      p.param_annotation = pretty_print(*parse_expression());
    }
    if (at_op("=")) forbid(cur(), "default parameter values");
    if (at_op(",")) {
      throw ProgramError(ErrorCode::entry_function, cur().loc, "'program' must take exactly one parameter");
    }
    expect_op(")", "to close the parameter list");
    if (at_op("->")) {
      take();
      p.return_annotation = pretty_print(*parse_expression());
    }
    expect_op(":", "after the function signature");
    p.body = parse_suite(/*top_function=*/true);
    return p;
  }

  Block parse_suite(bool top_function = false) {
    Nest nest(*this);
    Block body;
    if (!at(TokenKind::newline)) {
      body.push_back(parse_simple_statement());
      end_of_simple_statement();
      return body;
    }
    take();
    if (!at(TokenKind::indent)) expected("an indented block");
    take();
    while (!at(TokenKind::dedent) && !at(TokenKind::end_of_file)) {
      if (at(TokenKind::newline)) {
        take();
        continue;
      }
      if (top_function && at_keyword("def")) forbid(cur(), "nested function definitions");
      body.push_back(parse_statement());
    }
    if (at(TokenKind::dedent)) take();
    return body;
  }

  void end_of_simple_statement() {
    if (at_op(";")) forbid(cur(), "';' statement separators");
    if (at(TokenKind::end_of_file)) return;
    if (!at(TokenKind::newline)) expected("end of line");
    take();
  }

  StmtPtr parse_statement() {
    const Token& t = cur();
    if (t.is_keyword("if")) return parse_if();
    if (t.is_keyword("for")) return parse_for();
    if (t.is_keyword("def")) forbid(t, "nested function definitions");
    if (t.is_keyword("elif") || t.is_keyword("else")) expected("a statement ('" + t.text + "' without a matching 'if')");
    if (t.is_op("@")) forbid(t, "decorators");
    if (t.kind == TokenKind::indent) throw ProgramError(ErrorCode::inconsistent_indentation, t.loc, "unexpected indent");
    auto stmt = parse_simple_statement();
    end_of_simple_statement();
    return stmt;
  }

  StmtPtr parse_simple_statement() {
    const Token& t = cur();
    if (t.kind == TokenKind::keyword && forbidden_keywords().count(t.text)) forbid(t, "'" + t.text + "'");
    if (t.is_keyword("def")) forbid(t, "nested function definitions");
    if (t.is_keyword("if") || t.is_keyword("for")) expected("a simple statement on the same line");
    if (t.is_keyword("return")) {
      take();
      ReturnStmt r;
      if (!at(TokenKind::newline) && !at(TokenKind::end_of_file) && !at(TokenKind::dedent)) {
        r.value = parse_expression();
      }
      return make_stmt(t.loc, std::move(r));
    }
    ExprPtr first = parse_expression();
    if (at_op(",")) forbid(cur(), "tuples");
    if (at_op("=")) {
      take();
      check_target(*first);
      ExprPtr value = parse_expression();
      if (at_op("=")) forbid(cur(), "chained assignment");
      if (at_op(",")) forbid(cur(), "tuples");
      return make_stmt(t.loc, AssignStmt{std::move(first), std::move(value)});
    }
    for (std::string_view op : {"+=", "-=", "*=", "/="}) {
      if (at_op(op)) {
        take();
        check_target(*first);
        ExprPtr value = parse_expression();
        return make_stmt(t.loc, AugAssignStmt{std::move(first), std::string(op.substr(0, 1)), std::move(value)});
      }
    }
    for (std::string_view op : {"//=", "%=", "**=", "&=", "|=", "^=", ">>=", "<<=", "@=", ":="}) {
      if (at_op(op)) forbid(cur(), "'" + std::string(op) + "'");
    }
    if (at_op(":")) forbid(cur(), "variable annotations");
    return make_stmt(t.loc, ExprStmt{std::move(first)});
  }

  void check_target(const Expr& target) {
    if (std::holds_alternative<NameExpr>(target.node)) return;
    if (const auto* sub = std::get_if<SubscriptExpr>(&target.node)) {
      if (std::holds_alternative<SliceExpr>(sub->index->node)) {
        throw ProgramError(ErrorCode::forbidden_construct, target.loc, "slice assignment is not allowed in programs");
      }
      return;
    }
    if (std::holds_alternative<AttributeExpr>(target.node)) {
      throw ProgramError(ErrorCode::forbidden_construct, target.loc, "attribute assignment is not allowed in programs");
    }
    throw ProgramError(ErrorCode::syntax_error, target.loc, "cannot assign to this expression");
  }

  StmtPtr parse_if() {
    const SourceLocation loc = cur().loc;
    IfStmt stmt;
    do {
      const SourceLocation branch_loc = take().loc;  // if / elif
      IfBranch branch;
      branch.loc = branch_loc;
      branch.condition = parse_expression();
      expect_op(":", "after the condition");
      branch.body = parse_suite();
      stmt.branches.push_back(std::move(branch));
    } while (at_keyword("elif"));
    if (at_keyword("else")) {
      take();
      expect_op(":", "after 'else'");
      stmt.else_body = parse_suite();
    }
    return make_stmt(loc, std::move(stmt));
  }

  StmtPtr parse_for() {
    const SourceLocation loc = take().loc;
    if (!at(TokenKind::name)) expected("a loop variable name");
    ForStmt stmt;
    stmt.var = take().text;
    if (at_op(",")) forbid(cur(), "tuple unpacking in for loops");
    if (!at_keyword("in")) expected("'in' after the loop variable");
    take();
    stmt.iterable = parse_expression();
    expect_op(":", "after the loop header");
    stmt.body = parse_suite();
    if (at_keyword("else")) forbid(cur(), "'for ... else'");
    return make_stmt(loc, std::move(stmt));
  }

  // ---- expressions ----

  ExprPtr parse_expression() {
    Nest nest(*this);
    const Token& t = cur();
    if (t.is_keyword("lambda")) forbid(t, "'lambda'");
    if (t.is_keyword("yield") || t.is_keyword("await")) forbid(t, "'" + t.text + "'");
    ExprPtr e = parse_or();
    if (at_keyword("if")) forbid(cur(), "conditional expressions");
    if (at_op(":=")) forbid(cur(), "assignment expressions");
    return e;
  }

  ExprPtr parse_or() {
    ExprPtr left = parse_and();
    while (at_keyword("or")) {
      const SourceLocation loc = take().loc;
      left = make_expr(loc, BoolOpExpr{"or", std::move(left), parse_and()});
    }
    return left;
  }

  ExprPtr parse_and() {
    ExprPtr left = parse_not();
    while (at_keyword("and")) {
      const SourceLocation loc = take().loc;
      left = make_expr(loc, BoolOpExpr{"and", std::move(left), parse_not()});
    }
    return left;
  }

  ExprPtr parse_not() {
    if (at_keyword("not")) {
      Nest nest(*this);
      const SourceLocation loc = take().loc;
      return make_expr(loc, UnaryExpr{"not", parse_not()});
    }
    return parse_comparison();
  }

  std::optional<std::string> comparison_op() {
    for (std::string_view op : {"==", "!=", "<=", ">=", "<", ">"}) {
      if (at_op(op)) {
        take();
        return std::string(op);
      }
    }
    if (at_keyword("in")) {
      take();
      return "in";
    }
    if (at_keyword("not") && peek(1).is_keyword("in")) {
      pos_ += 2;
      return "not in";
    }
    if (at_keyword("is")) {
      take();
      if (at_keyword("not")) {
        take();
        return "is not";
      }
      return "is";
    }
    return std::nullopt;
  }

  ExprPtr parse_comparison() {
    const SourceLocation loc = cur().loc;
    ExprPtr first = parse_arith();
    CompareExpr cmp;
    while (auto op = comparison_op()) {
      if (cmp.operands.empty()) cmp.operands.push_back(std::move(first));
      cmp.ops.push_back(*op);
      cmp.operands.push_back(parse_arith());
    }
    if (cmp.operands.empty()) return first;
    return make_expr(loc, std::move(cmp));
  }

  void reject_bitwise() {
    for (std::string_view op : {"&", "|", "^", "<<", ">>", "@"}) {
      if (at_op(op)) forbid(cur(), "operator '" + std::string(op) + "'");
    }
  }

  ExprPtr parse_arith() {
    ExprPtr left = parse_term();
    while (at_op("+") || at_op("-")) {
      const Token& op = take();
      left = make_expr(op.loc, BinaryExpr{op.text, std::move(left), parse_term()});
    }
    reject_bitwise();
    return left;
  }

  ExprPtr parse_term() {
    ExprPtr left = parse_factor();
    while (at_op("*") || at_op("/") || at_op("//") || at_op("%")) {
      const Token& op = take();
      left = make_expr(op.loc, BinaryExpr{op.text, std::move(left), parse_factor()});
    }
    reject_bitwise();
    return left;
  }

  ExprPtr parse_factor() {
    if (at_op("-") || at_op("+")) {
      Nest nest(*this);
      const Token& op = take();
      return make_expr(op.loc, UnaryExpr{op.text, parse_factor()});
    }
    if (at_op("~")) forbid(cur(), "operator '~'");
    return parse_power();
  }

  ExprPtr parse_power() {
    ExprPtr base = parse_primary();
    if (at_op("**")) {
      const Token& op = take();
      return make_expr(op.loc, BinaryExpr{"**", std::move(base), parse_factor()});
    }
    return base;
  }

  ExprPtr parse_primary() {
    ExprPtr e = parse_atom();
    while (true) {
      if (at_op("(")) {
        const SourceLocation loc = take().loc;
        CallExpr call;
        call.callee = std::move(e);
        parse_arguments(call);
        e = make_expr(loc, std::move(call));
      } else if (at_op("[")) {
        const SourceLocation loc = take().loc;
        ExprPtr index = parse_subscript();
        expect_op("]", "to close the subscript");
        e = make_expr(loc, SubscriptExpr{std::move(e), std::move(index)});
      } else if (at_op(".")) {
        const SourceLocation loc = take().loc;
        if (!at(TokenKind::name)) expected("an attribute name after '.'");
        e = make_expr(loc, AttributeExpr{std::move(e), take().text});
      } else {
        return e;
      }
    }
  }

  void parse_arguments(CallExpr& call) {
    while (!at_op(")")) {
      if (at_op("*") || at_op("**")) forbid(cur(), "argument unpacking");
      if (at(TokenKind::name) && peek(1).is_op("=")) {
        const Token& name = take();
        take();  // '='
        for (const auto& k : call.keywords) {
          if (k.name == name.text) {
            throw ProgramError(ErrorCode::syntax_error, name.loc, "keyword argument '" + name.text + "' repeated");
          }
        }
        call.keywords.push_back({name.text, parse_expression(), name.loc});
      } else {
        if (!call.keywords.empty()) {
          throw ProgramError(ErrorCode::syntax_error, cur().loc, "positional argument follows keyword argument");
        }
        call.args.push_back(parse_expression());
      }
      if (at_keyword("for")) forbid(cur(), "generator expressions");
      if (!at_op(",")) break;
      take();
    }
    expect_op(")", "to close the argument list");
  }

  ExprPtr parse_subscript() {
    const SourceLocation loc = cur().loc;
    ExprPtr lower;
    if (!at_op(":")) {
      lower = parse_expression();
      if (at_op(",")) forbid(cur(), "tuple subscripts");
      if (!at_op(":")) return lower;
    }
    SliceExpr slice;
    slice.lower = std::move(lower);
    take();  // ':'
    if (!at_op(":") && !at_op("]")) slice.upper = parse_expression();
    if (at_op(":")) {
      take();
      if (!at_op("]")) slice.step = parse_expression();
    }
    return make_expr(loc, std::move(slice));
  }

  ExprPtr parse_atom() {
    const Token& t = cur();
    switch (t.kind) {
      case TokenKind::name:
        take();
        return make_expr(t.loc, NameExpr{t.text});
      case TokenKind::integer: {
        take();
        std::int64_t value = 0;
        const auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), value);
        if (res.ec != std::errc() || res.ptr != t.text.data() + t.text.size()) {
          throw ProgramError(ErrorCode::syntax_error, t.loc, "integer literal '" + t.text + "' is out of range");
        }
        return make_expr(t.loc, IntLiteral{value});
      }
      case TokenKind::floating: {
        take();
        return make_expr(t.loc, FloatLiteral{std::strtod(t.text.c_str(), nullptr)});
      }
      case TokenKind::string:
        take();
        return make_expr(t.loc, StringLiteral{t.text});
      case TokenKind::keyword:
        if (t.text == "True" || t.text == "False") {
          take();
          return make_expr(t.loc, BoolLiteral{t.text == "True"});
        }
        if (t.text == "None") {
          take();
          return make_expr(t.loc, NoneLiteral{});
        }
        if (forbidden_keywords().count(t.text)) forbid(t, "'" + t.text + "'");
        expected("an expression");
      case TokenKind::op:
        if (t.text == "(") {
          take();
          if (at_op(")")) forbid(t, "tuples");
          ExprPtr inner = parse_expression();
          if (at_op(",")) forbid(cur(), "tuples");
          if (at_keyword("for")) forbid(cur(), "generator expressions");
          expect_op(")", "to close the parenthesis");
          return inner;
        }
        if (t.text == "[") {
          take();
          ListExpr list;
          while (!at_op("]")) {
            list.items.push_back(parse_expression());
            if (at_keyword("for")) forbid(cur(), "list comprehensions");
            if (!at_op(",")) break;
            take();
          }
          expect_op("]", "to close the list");
          return make_expr(t.loc, std::move(list));
        }
        if (t.text == "{") forbid(t, "dict and set literals");
        if (t.text == "...") forbid(t, "'...'");
        [[fallthrough]];
      default:
        expected("an expression");
    }
  }

  // ---- name resolution ----

  void collect_bound(const Block& block, std::set<std::string>& bound) {
    for (const auto& s : block) {
      if (const auto* a = std::get_if<AssignStmt>(&s->node)) {
        if (const auto* n = std::get_if<NameExpr>(&a->target->node)) bound.insert(n->id);
      } else if (const auto* f = std::get_if<ForStmt>(&s->node)) {
        bound.insert(f->var);
        collect_bound(f->body, bound);
      } else if (const auto* i = std::get_if<IfStmt>(&s->node)) {
        for (const auto& b : i->branches) collect_bound(b.body, bound);
        collect_bound(i->else_body, bound);
      }
    }
  }

  void check_expr(const Expr& e, const std::set<std::string>& bound) {
    auto check = [&](const ExprPtr& child) {
      if (child) check_expr(*child, bound);
    };
    if (const auto* n = std::get_if<NameExpr>(&e.node)) {
      if (!bound.count(n->id) && !builtin_names().count(n->id)) {
        throw ProgramError(ErrorCode::unknown_name, e.loc, "name '" + n->id + "' is not defined");
      }
    } else if (const auto* a = std::get_if<AttributeExpr>(&e.node)) {
      const auto* base = std::get_if<NameExpr>(&a->object->node);
      if (base && base->id == "pySpatial" && !bound.count("pySpatial") && !namespace_members().count(a->attr)) {
        throw ProgramError(ErrorCode::unknown_name, e.loc, "pySpatial has no tool named '" + a->attr + "'");
      }
      check(a->object);
    } else if (const auto* l = std::get_if<ListExpr>(&e.node)) {
      for (const auto& item : l->items) check(item);
    } else if (const auto* s = std::get_if<SliceExpr>(&e.node)) {
      check(s->lower);
      check(s->upper);
      check(s->step);
    } else if (const auto* sub = std::get_if<SubscriptExpr>(&e.node)) {
      check(sub->object);
      check(sub->index);
    } else if (const auto* c = std::get_if<CallExpr>(&e.node)) {
      check(c->callee);
      for (const auto& arg : c->args) check(arg);
      for (const auto& k : c->keywords) check(k.value);
    } else if (const auto* u = std::get_if<UnaryExpr>(&e.node)) {
      check(u->operand);
    } else if (const auto* b = std::get_if<BinaryExpr>(&e.node)) {
      check(b->left);
      check(b->right);
    } else if (const auto* bo = std::get_if<BoolOpExpr>(&e.node)) {
      check(bo->left);
      check(bo->right);
    } else if (const auto* cmp = std::get_if<CompareExpr>(&e.node)) {
      for (const auto& o : cmp->operands) check(o);
    }
  }

  void check_block(const Block& block, const std::set<std::string>& bound) {
    for (const auto& s : block) {
      std::visit(
          [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, AssignStmt> || std::is_same_v<T, AugAssignStmt>) {
              check_expr(*n.target, bound);
              check_expr(*n.value, bound);
            } else if constexpr (std::is_same_v<T, ExprStmt>) {
              check_expr(*n.value, bound);
            } else if constexpr (std::is_same_v<T, ReturnStmt>) {
              if (n.value) check_expr(*n.value, bound);
            } else if constexpr (std::is_same_v<T, IfStmt>) {
              for (const auto& b : n.branches) {
                check_expr(*b.condition, bound);
                check_block(b.body, bound);
              }
              check_block(n.else_body, bound);
            } else if constexpr (std::is_same_v<T, ForStmt>) {
              check_expr(*n.iterable, bound);
              check_block(n.body, bound);
            }
          },
          s->node);
    }
  }

  void check_names(const Program& program) {
    std::set<std::string> bound{program.param};
    collect_bound(program.body, bound);
    check_block(program.body, bound);
  }

  const std::vector<Token>& toks_;
  const std::vector<Comment>& comments_;
  const std::optional<ProgramError>& lex_error_;
  std::size_t pos_ = 0;
  int depth_ = 0;
};

}  // namespace

Program parse(const TokenStream& tokens) { return Parser(tokens).run(); }

Program parse_program(const ProgramSource& source) { return parse(tokenize_prefix(source)); }

}  // namespace spatial::spl
