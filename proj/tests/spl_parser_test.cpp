#include "spatial/spl/parser.hpp"
#include "support/test_support.hpp"

#include <gtest/gtest.h>

#include <random>

namespace spatial::spl {
namespace {

ProgramSource src(std::string text) { return {std::move(text), SourceOrigin::fixture}; }

std::vector<TokenKind> kinds(const TokenStream& ts) {
  std::vector<TokenKind> out;
  for (const auto& t : ts.tokens) out.push_back(t.kind);
  return out;
}

ErrorCode parse_error(const std::string& text, SourceLocation* loc = nullptr, std::string* message = nullptr) {
  try {
    parse_program(src(text));
  } catch (const ProgramError& e) {
    if (loc) *loc = e.location();
    if (message) *message = e.what();
    return e.code();
  }
  ADD_FAILURE() << "expected a ProgramError for:\n" << text;
  return ErrorCode::invalid_argument;
}

std::size_t count_calls(const Expr& e, const std::string& member);

std::size_t count_calls(const Block& block, const std::string& member) {
  std::size_t n = 0;
  for (const auto& s : block) {
    if (const auto* a = std::get_if<AssignStmt>(&s->node)) n += count_calls(*a->value, member);
    if (const auto* r = std::get_if<ReturnStmt>(&s->node); r && r->value) n += count_calls(*r->value, member);
    if (const auto* x = std::get_if<ExprStmt>(&s->node)) n += count_calls(*x->value, member);
  }
  return n;
}

std::size_t count_calls(const Expr& e, const std::string& member) {
  if (const auto* c = std::get_if<CallExpr>(&e.node)) {
    const auto* attr = std::get_if<AttributeExpr>(&c->callee->node);
    std::size_t n = attr && attr->attr == member ? 1 : 0;
    for (const auto& a : c->args) n += count_calls(*a, member);
    return n;
  }
  if (const auto* l = std::get_if<ListExpr>(&e.node)) {
    std::size_t n = 0;
    for (const auto& item : l->items) n += count_calls(*item, member);
    return n;
  }
  return 0;
}

TEST(Lexer, MinimalProgramTokens) {
  const auto ts = tokenize(src("def program(s):\n    return 1"));
  const std::vector<TokenKind> expected{TokenKind::keyword, TokenKind::name,    TokenKind::op,      TokenKind::name,
                                        TokenKind::op,      TokenKind::op,      TokenKind::newline, TokenKind::indent,
                                        TokenKind::keyword, TokenKind::integer, TokenKind::newline, TokenKind::dedent,
                                        TokenKind::end_of_file};
  EXPECT_EQ(kinds(ts), expected);
  EXPECT_EQ(ts.tokens[0].text, "def");
  EXPECT_EQ(ts.tokens[8].loc, (SourceLocation{2, 5}));
  EXPECT_EQ(ts.tokens[ts.tokens.size() - 2].kind, TokenKind::dedent);
}

TEST(Lexer, TabSpaceMixIsLocated) {
  SourceLocation loc;
  EXPECT_EQ(parse_error("def program(s):\n    x = 1\n\tx = 2\n    return x\n", &loc),
            ErrorCode::inconsistent_indentation);
  EXPECT_EQ(loc.line, 3);
  EXPECT_EQ(parse_error("def program(s):\n  \tx = 1\n    return x\n", &loc), ErrorCode::inconsistent_indentation);
  EXPECT_EQ(loc.line, 2);
}

TEST(Lexer, DedentToUnknownLevel) {
  SourceLocation loc;
  EXPECT_EQ(parse_error("def program(s):\n    if s:\n        x = 1\n      return x\n", &loc),
            ErrorCode::inconsistent_indentation);
  EXPECT_EQ(loc.line, 4);
}

TEST(Lexer, IllegalCharacters) {
  SourceLocation loc;
  EXPECT_EQ(parse_error("def program(s):\n    return $x\n", &loc), ErrorCode::illegal_character);
  EXPECT_EQ(loc, (SourceLocation{2, 12}));
  EXPECT_EQ(parse_error("def program(s):\n    return s ? 1\n"), ErrorCode::illegal_character);
  EXPECT_EQ(parse_error("def program(s):\n    return `s`\n"), ErrorCode::illegal_character);
}

TEST(Lexer, StringsAndComments) {
  const auto ts = tokenize(src("x = 'a\\n' \"b\"  # note\ny = r'\\d' + '''t\nq'''\n"));
  ASSERT_EQ(ts.tokens[2].kind, TokenKind::string);
  EXPECT_EQ(ts.tokens[2].text, "a\nb");
  ASSERT_EQ(ts.comments.size(), 1u);
  EXPECT_EQ(ts.comments[0].text, "note");
  EXPECT_EQ(ts.comments[0].line, 1);
  EXPECT_EQ(ts.tokens[6].text, "\\d");
  EXPECT_EQ(ts.tokens[8].text, "t\nq");
  EXPECT_EQ(parse_error("def program(s):\n    return 'abc\n"), ErrorCode::syntax_error);
  EXPECT_EQ(parse_error("def program(s):\n    return f'{s}'\n"), ErrorCode::forbidden_construct);
}

TEST(Lexer, ImplicitAndExplicitLineJoining) {
  const auto ts = tokenize(src("x = (1 +\n      2)\ny = 3 + \\\n    4\n"));
  int newlines = 0;
  for (const auto& t : ts.tokens) newlines += t.kind == TokenKind::newline;
  EXPECT_EQ(newlines, 2);
}

TEST(Lexer, EmptySourceRejected) {
  EXPECT_THROW(tokenize(src("  \n\t\n")), ProgramError);
}

TEST(Parser, ProblemOneTokenizesAndParses) {
  const auto text = testing::read_text(testing::fixture_path("programs/problem1.spl"));
  EXPECT_NO_THROW(tokenize(src(text)));
  const Program p = parse_program(src(text));
  EXPECT_EQ(p.param, "input_scene");
  EXPECT_EQ(p.param_annotation, "Scene");
  EXPECT_EQ(p.body.size(), 3u);
  EXPECT_EQ(count_calls(p.body, "describe_camera_motion"), 1u);
}

TEST(Parser, ProblemTwoHasTwoRenders) {
  const Program p = parse_program(src(testing::read_text(testing::fixture_path("programs/problem2.spl"))));
  EXPECT_EQ(count_calls(p.body, "synthesize_novel_view"), 2u);
  EXPECT_EQ(count_calls(p.body, "rotate_right"), 1u);
  EXPECT_EQ(count_calls(p.body, "move_forward"), 1u);
  ASSERT_EQ(p.comments.size(), 2u);
  EXPECT_EQ(p.comments[0].text, "the image 1 indicates the 0th index in the array");
}

TEST(Parser, PdfWrappedProblemTwoFailsWithLocation) {
  SourceLocation loc;
  const auto code = parse_error(testing::read_text(testing::fixture_path("programs/problem2_wrapped.spl")), &loc);
  EXPECT_TRUE(code == ErrorCode::inconsistent_indentation || code == ErrorCode::syntax_error);
  EXPECT_EQ(loc.line, 9);
}

TEST(Parser, ForbiddenConstructs) {
  const std::vector<std::string> bodies{
      "import os",         "from os import path", "while s:\n        pass", "x = lambda a: a",
      "x = [a for a in s]", "x = {1: 2}",         "x = 1 if s else 2",      "x, y = 1, 2",
      "s.images = 1",      "pass",                "x = s & 1",              "del s",
      "try:\n        x = 1\n    except:\n        x = 2",
      "with s:\n        x = 1", "class A:\n        x = 1", "def inner(a):\n        return a",
      "x = (y := 1)", "return ..."};
  for (const auto& body : bodies) {
    SCOPED_TRACE(body);
    EXPECT_EQ(parse_error("def program(s):\n    " + body + "\n"), ErrorCode::forbidden_construct);
  }
  EXPECT_EQ(parse_error("import os\ndef program(s):\n    return 1\n"), ErrorCode::forbidden_construct);
}

TEST(Parser, EntryFunctionViolations) {
  EXPECT_EQ(parse_error("def program(s):\n    return 1\ndef program(t):\n    return 2\n"), ErrorCode::entry_function);
  EXPECT_EQ(parse_error("def helper(s):\n    return 1\n"), ErrorCode::entry_function);
  EXPECT_EQ(parse_error("def program(a, b):\n    return 1\n"), ErrorCode::entry_function);
  EXPECT_EQ(parse_error("def program():\n    return 1\n"), ErrorCode::entry_function);
  EXPECT_EQ(parse_error("x = 1\ndef program(s):\n    return x\n"), ErrorCode::entry_function);
  EXPECT_EQ(parse_error("# only a comment\n"), ErrorCode::entry_function);
}

TEST(Parser, SingleLineSuite) {
  const Program p = parse_program(src("def program(s): return \"x\""));
  ASSERT_EQ(p.body.size(), 1u);
  EXPECT_EQ(to_sexpr(p), "(program s (annotation _) (returns _) (block (return (str \"x\"))))");
}

TEST(Parser, UnknownNames) {
  std::string message;
  EXPECT_EQ(parse_error("def program(s):\n    return pySpatial.fly(s)\n", nullptr, &message), ErrorCode::unknown_name);
  EXPECT_NE(message.find("fly"), std::string::npos);
  EXPECT_EQ(parse_error("def program(s):\n    return open('x')\n"), ErrorCode::unknown_name);
  EXPECT_EQ(parse_error("def program(s):\n    return print\n"), ErrorCode::unknown_name);
  // Bound later in the body is still a local name; use-before-assignment is a runtime concern.
  EXPECT_NO_THROW(parse_program(src("def program(s):\n    for i in range(2):\n        y = i\n    return y\n")));
}

TEST(Parser, SyntaxErrorsCarryExpectedHint) {
  SourceLocation loc;
  std::string message;
  EXPECT_EQ(parse_error("def program(s)\n    return 1\n", &loc, &message), ErrorCode::syntax_error);
  EXPECT_EQ(loc, (SourceLocation{1, 15}));
  EXPECT_NE(message.find("expected ':'"), std::string::npos) << message;
  EXPECT_EQ(parse_error("def program(s):\n    x = (1 + \n    return x\n", &loc, &message), ErrorCode::syntax_error);
  EXPECT_NE(message.find("expected"), std::string::npos);
  EXPECT_EQ(parse_error("def program(s):\n    return 99999999999999999999\n"), ErrorCode::syntax_error);
}

TEST(Parser, DeepNestingIsASyntaxError) {
  std::string message;
  const std::string deep = "def program(s):\n    return " + std::string(500, '(') + "1" + std::string(500, ')') + "\n";
  EXPECT_EQ(parse_error(deep, nullptr, &message), ErrorCode::syntax_error);
  EXPECT_NE(message.find("nested too deeply"), std::string::npos);
  std::string unary = "def program(s):\n    return ";
  for (int i = 0; i < 5000; ++i) unary += "-";
  EXPECT_EQ(parse_error(unary + "1\n"), ErrorCode::syntax_error);
  const std::string ok = "def program(s):\n    return " + std::string(40, '(') + "1" + std::string(40, ')') + "\n";
  EXPECT_NO_THROW(parse_program(src(ok)));
}

TEST(Parser, Precedence) {
  const Program p = parse_program(src("def program(s):\n    return -2 ** 2 + 3 * 4 < 5 == 6 and not s or s\n"));
  EXPECT_EQ(to_sexpr(p),
            "(program s (annotation _) (returns _) (block (return (or (and (compare "
            "(binop + (unary - (binop ** (int 2) (int 2))) (binop * (int 3) (int 4))) [<] (int 5) [==] (int 6)) "
            "(unary not (name s))) (name s)))))");
}

TEST(Parser, CallsKeywordsSlices) {
  const Program p = parse_program(
      src("def program(s) -> str:\n    v = pySpatial.rotate_left(s, angle=90)\n    w = s.images[1:-1:2]\n"
          "    w[0] = v\n    w += [1]\n    return len(w)\n"));
  EXPECT_EQ(p.return_annotation, "str");
  EXPECT_EQ(to_sexpr(p),
            "(program s (annotation _) (returns str) (block "
            "(assign (name v) (call (attr (name pySpatial) rotate_left) (name s) (kw angle (int 90)))) "
            "(assign (name w) (index (attr (name s) images) (slice (int 1) (unary - (int 1)) (int 2)))) "
            "(assign (index (name w) (int 0)) (name v)) "
            "(augassign + (name w) (list (int 1))) "
            "(return (call (name len) (name w)))))");
}

// ---- round-trip property over randomly generated ASTs ----

class AstGen {
 public:
  explicit AstGen(std::uint64_t seed) : rng_(seed) {}

  Program program() {
    Program p;
    p.param = "s";
    if (coin()) p.param_annotation = "Scene";
    for (const char* v : {"x", "y", "z"}) {
      p.body.push_back(stmt(AssignStmt{name(v), expr(1)}));
    }
    const int n = pick(1, 5);
    for (int i = 0; i < n; ++i) p.body.push_back(statement(0));
    return p;
  }

 private:
  int pick(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  bool coin() { return pick(0, 1) == 1; }

  template <typename T>
  static ExprPtr make(T node) {
    auto e = std::make_unique<Expr>();
    e->node = std::move(node);
    return e;
  }
  template <typename T>
  static StmtPtr stmt(T node) {
    auto s = std::make_unique<Stmt>();
    s->node = std::move(node);
    return s;
  }

  ExprPtr name(const std::string& id) { return make(NameExpr{id}); }
  ExprPtr var() {
    static const char* names[] = {"s", "x", "y", "z", "range", "len"};
    return name(names[pick(0, 5)]);
  }

  ExprPtr leaf() {
    switch (pick(0, 6)) {
      case 0: return var();
      case 1: return make(IntLiteral{pick(0, 1000)});
      case 2: return make(FloatLiteral{pick(0, 4000) / 8.0});
      case 3: {
        static const char* strings[] = {"", "a b", "q\"uote", "it's", "line\nbreak", "tab\t", "back\\slash", "\xc3\xbc"};
        return make(StringLiteral{strings[pick(0, 7)]});
      }
      case 4: return make(BoolLiteral{coin()});
      case 5: return make(NoneLiteral{});
      default: {
        static const char* members[] = {"rotate_right", "move_forward", "turn_around", "reconstruct"};
        CallExpr c;
        c.callee = make(AttributeExpr{name("pySpatial"), members[pick(0, 3)]});
        c.args.push_back(var());
        return make(std::move(c));
      }
    }
  }

  ExprPtr expr(int depth) {
    if (depth >= 4) return leaf();
    static const char* binops[] = {"+", "-", "*", "/", "//", "%", "**"};
    static const char* cmpops[] = {"==", "!=", "<", "<=", ">", ">=", "in", "not in", "is", "is not"};
    switch (pick(0, 10)) {
      case 0: {
        ListExpr l;
        const int n = pick(0, 3);
        for (int i = 0; i < n; ++i) l.items.push_back(expr(depth + 1));
        return make(std::move(l));
      }
      case 1: return make(AttributeExpr{expr(depth + 1), coin() ? "images" : "extrinsics"});
      case 2: {
        if (coin()) return make(SubscriptExpr{expr(depth + 1), expr(depth + 1)});
        SliceExpr sl;
        if (coin()) sl.lower = expr(depth + 1);
        if (coin()) sl.upper = expr(depth + 1);
        if (coin()) sl.step = expr(depth + 1);
        return make(SubscriptExpr{expr(depth + 1), make(std::move(sl))});
      }
      case 3: {
        CallExpr c;
        c.callee = coin() ? var() : make(AttributeExpr{var(), "append"});
        const int n = pick(0, 2);
        for (int i = 0; i < n; ++i) c.args.push_back(expr(depth + 1));
        if (coin()) c.keywords.push_back({"angle", expr(depth + 1), {}});
        return make(std::move(c));
      }
      case 4: {
        static const char* ops[] = {"-", "+", "not"};
        return make(UnaryExpr{ops[pick(0, 2)], expr(depth + 1)});
      }
      case 5:
      case 6: return make(BinaryExpr{binops[pick(0, 6)], expr(depth + 1), expr(depth + 1)});
      case 7: return make(BoolOpExpr{coin() ? "and" : "or", expr(depth + 1), expr(depth + 1)});
      case 8: {
        CompareExpr c;
        const int n = pick(1, 3);
        c.operands.push_back(expr(depth + 1));
        for (int i = 0; i < n; ++i) {
          c.ops.push_back(cmpops[pick(0, 9)]);
          c.operands.push_back(expr(depth + 1));
        }
        return make(std::move(c));
      }
      default: return leaf();
    }
  }

  Block block(int depth) {
    Block b;
    const int n = pick(1, 3);
    for (int i = 0; i < n; ++i) b.push_back(statement(depth + 1));
    return b;
  }

  StmtPtr statement(int depth) {
    static const char* targets[] = {"x", "y", "z"};
    switch (pick(0, depth >= 2 ? 3 : 5)) {
      case 0: {
        ExprPtr target = coin() ? name(targets[pick(0, 2)]) : make(SubscriptExpr{var(), expr(2)});
        return stmt(AssignStmt{std::move(target), expr(0)});
      }
      case 1: {
        static const char* ops[] = {"+", "-", "*", "/"};
        return stmt(AugAssignStmt{name(targets[pick(0, 2)]), ops[pick(0, 3)], expr(1)});
      }
      case 2: return stmt(ExprStmt{expr(0)});
      case 3: return stmt(ReturnStmt{coin() ? expr(0) : nullptr});
      case 4: {
        IfStmt s;
        const int n = pick(1, 3);
        for (int i = 0; i < n; ++i) s.branches.push_back({expr(1), block(depth), {}});
        if (coin()) s.else_body = block(depth);
        return stmt(std::move(s));
      }
      default: return stmt(ForStmt{targets[pick(0, 2)], expr(1), block(depth)});
    }
  }

  std::mt19937_64 rng_;
};

TEST(ParserProperty, PrettyPrintRoundTrip) {
  for (std::uint64_t seed = 0; seed < 400; ++seed) {
    AstGen gen(seed);
    const Program original = gen.program();
    const std::string text = pretty_print(original);
    SCOPED_TRACE("seed " + std::to_string(seed) + "\n" + text);
    Program reparsed;
    ASSERT_NO_THROW(reparsed = parse_program(src(text)));
    EXPECT_EQ(to_sexpr(reparsed), to_sexpr(original));
    EXPECT_EQ(pretty_print(reparsed), text);
  }
}

TEST(ParserProperty, FixturesRoundTrip) {
  for (const char* name : {"programs/problem1.spl", "programs/problem2.spl"}) {
    const Program p = parse_program(src(testing::read_text(testing::fixture_path(name))));
    const Program q = parse_program(src(pretty_print(p)));
    EXPECT_EQ(to_sexpr(p), to_sexpr(q)) << name;
  }
}

// Arbitrary mutations of valid programs must fail with a located ProgramError, never anything else.
TEST(ParserProperty, MutatedSourcesNeverCrash) {
  const std::string base = testing::read_text(testing::fixture_path("programs/problem2.spl"));
  const std::string alphabet = "()[]:=.,+-*/ \n\t'\"#\\abcdefxyz0123456789$?{}";
  std::mt19937_64 rng(7);
  for (int i = 0; i < 3000; ++i) {
    std::string text = base;
    const int edits = std::uniform_int_distribution<int>(1, 4)(rng);
    for (int k = 0; k < edits; ++k) {
      const std::size_t pos = std::uniform_int_distribution<std::size_t>(0, text.size() - 1)(rng);
      const char c = alphabet[std::uniform_int_distribution<std::size_t>(0, alphabet.size() - 1)(rng)];
      switch (std::uniform_int_distribution<int>(0, 2)(rng)) {
        case 0: text[pos] = c; break;
        case 1: text.insert(text.begin() + static_cast<std::ptrdiff_t>(pos), c); break;
        default: text.erase(pos, 1);
      }
    }
    try {
      parse_program(src(text));
    } catch (const ProgramError& e) {
      EXPECT_GE(e.location().line, 1);
      EXPECT_GE(e.location().column, 1);
    } catch (const std::exception& e) {
      ADD_FAILURE() << "unexpected exception " << e.what() << " for:\n" << text;
    }
  }
}

}  // namespace
}  // namespace spatial::spl
