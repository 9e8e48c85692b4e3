#include "spatial/spl/lexer.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace spatial::spl {

std::string to_string(SourceLocation loc) {
  return "line " + std::to_string(loc.line) + ", column " + std::to_string(loc.column);
}

std::string_view to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::name: return "name";
    case TokenKind::keyword: return "keyword";
    case TokenKind::integer: return "integer";
    case TokenKind::floating: return "float";
    case TokenKind::string: return "string";
    case TokenKind::op: return "operator";
    case TokenKind::newline: return "newline";
    case TokenKind::indent: return "indent";
    case TokenKind::dedent: return "dedent";
    case TokenKind::end_of_file: return "end of input";
  }
  return "token";
}

namespace {

constexpr std::array<std::string_view, 35> kKeywords{
    "False", "None",   "True",  "and",    "as",       "assert", "async", "await", "break",
    "class", "continue", "def", "del",    "elif",     "else",   "except", "finally", "for",
    "from",  "global", "if",    "import", "in",       "is",     "lambda", "nonlocal", "not",
    "or",    "pass",   "raise", "return", "try",      "while",  "with",  "yield"};

// Longest first so that maximal munch works by scanning in order.
constexpr std::array<std::string_view, 47> kOperators{
    "**=", "//=", ">>=", "<<=", "...", "->", "**", "//", "==", "!=", "<=", ">=", "+=", "-=", "*=", "/=",
    "%=",  ":=",  "<<",  ">>",  "&=",  "|=", "^=", "@=", "+",  "-",  "*",  "/",  "%",  "(",  ")",  "[",
    "]",   "{",   "}",   ",",   ":",   ".",  ";",  "=",  "<",  ">",  "@",  "&",  "|",  "^",  "~"};

bool is_keyword(std::string_view word) {
  return std::find(kKeywords.begin(), kKeywords.end(), word) != kKeywords.end();
}

bool ident_start(unsigned char c) { return std::isalpha(c) || c == '_'; }
bool ident_char(unsigned char c) { return std::isalnum(c) || c == '_'; }

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

class Lexer {
 public:
  explicit Lexer(const std::string& text) : src_(text) {}

  TokenStream run() {
    try {
      scan_all();
    } catch (const ProgramError& e) {
      out_.error = e;
      out_.tokens.push_back({TokenKind::end_of_file, "", e.location()});
    }
    return std::move(out_);
  }

 private:
  void scan_all() {
    indents_.push_back("");
    while (pos_ < src_.size()) {
      if (line_start_ && depth_ == 0) {
        if (!handle_indentation()) continue;
      }
      scan_token();
    }
    if (!out_.tokens.empty() && out_.tokens.back().kind != TokenKind::newline) {
      push(TokenKind::newline, "", here());
    }
    while (indents_.size() > 1) {
      indents_.pop_back();
      push(TokenKind::dedent, "", here());
    }
    push(TokenKind::end_of_file, "", here());
  }
  SourceLocation here() const { return {line_, col_}; }

  char peek(std::size_t ahead = 0) const { return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0'; }

  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void push(TokenKind kind, std::string text, SourceLocation loc) {
    out_.tokens.push_back({kind, std::move(text), loc});
  }

  [[noreturn]] void fail(ErrorCode code, SourceLocation loc, const std::string& message) {
    throw ProgramError(code, loc, message);
  }

  void read_comment() {
    const int line = line_;
    advance();  // '#'
    const std::size_t start = pos_;
    while (pos_ < src_.size() && peek() != '\n') advance();
    std::string text = src_.substr(start, pos_ - start);
    const auto first = text.find_first_not_of(" \t");
    const auto last = text.find_last_not_of(" \t\r");
    text = first == std::string::npos ? "" : text.substr(first, last - first + 1);
    out_.comments.push_back({line, std::move(text)});
  }

  // Returns false when the line was blank or comment-only and has been consumed.
  bool handle_indentation() {
    const SourceLocation loc = here();
    std::string prefix;
    while (peek() == ' ' || peek() == '\t' || peek() == '\f') {
      if (peek() != '\f') prefix += peek();
      advance();
    }
    if (peek() == '#') read_comment();
    if (pos_ >= src_.size()) return false;
    if (peek() == '\r' && peek(1) == '\n') advance();
    if (peek() == '\n') {
      advance();
      return false;
    }
    line_start_ = false;

    const bool has_tab = prefix.find('\t') != std::string::npos;
    const bool has_space = prefix.find(' ') != std::string::npos;
    if (has_tab && has_space) {
      fail(ErrorCode::inconsistent_indentation, loc, "indentation mixes tabs and spaces");
    }
    const std::string& top = indents_.back();
    if (prefix == top) return true;
    if (prefix.size() > top.size() && prefix.compare(0, top.size(), top) == 0) {
      indents_.push_back(prefix);
      push(TokenKind::indent, "", {loc.line, static_cast<int>(prefix.size()) + 1});
      return true;
    }
    while (indents_.size() > 1 && indents_.back().size() > prefix.size()) {
      indents_.pop_back();
      push(TokenKind::dedent, "", {loc.line, static_cast<int>(prefix.size()) + 1});
    }
    if (indents_.back() != prefix) {
      fail(ErrorCode::inconsistent_indentation, loc,
           "indentation does not match any enclosing block");
    }
    return true;
  }

  void scan_token() {
    const char c = peek();
    const SourceLocation loc = here();
    if (c == ' ' || c == '\t' || c == '\f' || c == '\r') {
      advance();
      return;
    }
    if (c == '#') {
      read_comment();
      return;
    }
    if (c == '\n') {
      advance();
      if (depth_ == 0) {
        if (!out_.tokens.empty() && out_.tokens.back().kind != TokenKind::newline &&
            out_.tokens.back().kind != TokenKind::indent && out_.tokens.back().kind != TokenKind::dedent) {
          push(TokenKind::newline, "", loc);
        }
        line_start_ = true;
      }
      return;
    }
    if (c == '\\') {
      if (peek(1) == '\n' || (peek(1) == '\r' && peek(2) == '\n')) {
        advance();
        if (peek() == '\r') advance();
        advance();
        return;
      }
      fail(ErrorCode::illegal_character, loc, "stray '\\' outside a string");
    }
    if (ident_start(static_cast<unsigned char>(c))) {
      scan_word(loc);
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
      scan_number(loc);
      return;
    }
    if (c == '"' || c == '\'') {
      scan_string(loc, false);
      return;
    }
    for (std::string_view op : kOperators) {
      if (src_.compare(pos_, op.size(), op) == 0) {
        for (std::size_t i = 0; i < op.size(); ++i) advance();
        if (op == "(" || op == "[" || op == "{") ++depth_;
        if ((op == ")" || op == "]" || op == "}") && depth_ > 0) --depth_;
        push(TokenKind::op, std::string(op), loc);
        return;
      }
    }
    const auto uc = static_cast<unsigned char>(c);
    std::string shown = uc >= 0x20 && uc < 0x7f ? std::string(1, c) : "\\x" + [&] {
      static const char* hex = "0123456789abcdef";
      return std::string{hex[uc >> 4], hex[uc & 15]};
    }();
    fail(ErrorCode::illegal_character, loc, "illegal character '" + shown + "'");
  }

  void scan_word(SourceLocation loc) {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && ident_char(static_cast<unsigned char>(peek()))) advance();
    std::string word = src_.substr(start, pos_ - start);
    if ((peek() == '"' || peek() == '\'') && word.size() <= 2) {
      std::string lower = word;
      std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
      if (lower.find('f') != std::string::npos) {
        fail(ErrorCode::forbidden_construct, loc, "f-strings are not supported; concatenate with '+'");
      }
      if (lower.find('b') != std::string::npos) {
        fail(ErrorCode::forbidden_construct, loc, "byte strings are not supported");
      }
      if (lower == "r" || lower == "u") {
        scan_string(loc, lower == "r");
        return;
      }
    }
    const TokenKind kind = is_keyword(word) ? TokenKind::keyword : TokenKind::name;
    push(kind, std::move(word), loc);
  }

  void scan_digits() {
    while (std::isdigit(static_cast<unsigned char>(peek())) ||
           (peek() == '_' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
      advance();
    }
  }

  void scan_number(SourceLocation loc) {
    const std::size_t start = pos_;
    bool is_float = false;
    scan_digits();
    if (peek() == '.' && !(peek(1) == '.' && peek(2) == '.')) {
      is_float = true;
      advance();
      scan_digits();
    }
    if (peek() == 'e' || peek() == 'E') {
      const char sign = peek(1);
      const bool has_sign = sign == '+' || sign == '-';
      if (std::isdigit(static_cast<unsigned char>(peek(has_sign ? 2 : 1)))) {
        is_float = true;
        advance();
        if (has_sign) advance();
        scan_digits();
      }
    }
    if (ident_char(static_cast<unsigned char>(peek()))) {
      fail(ErrorCode::syntax_error, loc, "invalid number literal");
    }
    std::string text = src_.substr(start, pos_ - start);
    text.erase(std::remove(text.begin(), text.end(), '_'), text.end());
    push(is_float ? TokenKind::floating : TokenKind::integer, std::move(text), loc);
  }

  void scan_string(SourceLocation loc, bool raw) {
    const char quote = peek();
    const bool triple = peek(1) == quote && peek(2) == quote;
    for (int i = 0; i < (triple ? 3 : 1); ++i) advance();
    std::string value;
    while (true) {
      if (pos_ >= src_.size()) fail(ErrorCode::syntax_error, loc, "unterminated string literal");
      const char c = peek();
      if (c == quote && (!triple || (peek(1) == quote && peek(2) == quote))) {
        for (int i = 0; i < (triple ? 3 : 1); ++i) advance();
        break;
      }
      if (c == '\n' && !triple) fail(ErrorCode::syntax_error, loc, "unterminated string literal");
      if (c == '\\') {
        if (raw) {
          value += c;
          advance();
          if (pos_ < src_.size()) {
            value += peek();
            advance();
          }
          continue;
        }
        advance();
        if (pos_ >= src_.size()) fail(ErrorCode::syntax_error, loc, "unterminated string literal");
        read_escape(value);
        continue;
      }
      value += c;
      advance();
    }
    // Adjacent literals concatenate, as in Python.
    if (!out_.tokens.empty() && out_.tokens.back().kind == TokenKind::string && adjacent_string_) {
      out_.tokens.back().text += value;
    } else {
      push(TokenKind::string, std::move(value), loc);
    }
    adjacent_string_ = true;
    skip_to_next_string_candidate();
  }

  // Peeks past spaces (and newlines inside brackets) to see whether another
  // literal follows; resets the adjacency flag otherwise.
  void skip_to_next_string_candidate() {
    std::size_t p = pos_;
    while (p < src_.size() && (src_[p] == ' ' || src_[p] == '\t' || (depth_ > 0 && (src_[p] == '\n' || src_[p] == '\r')))) ++p;
    if (p >= src_.size() || (src_[p] != '"' && src_[p] != '\'')) adjacent_string_ = false;
  }

  void read_escape(std::string& value) {
    const char e = peek();
    auto hex_value = [&](int digits) -> std::uint32_t {
      std::uint32_t v = 0;
      for (int i = 0; i < digits; ++i) {
        const char h = peek();
        if (!std::isxdigit(static_cast<unsigned char>(h))) {
          fail(ErrorCode::syntax_error, here(), "invalid escape sequence");
        }
        v = v * 16 + static_cast<std::uint32_t>(std::isdigit(static_cast<unsigned char>(h)) ? h - '0' : std::tolower(h) - 'a' + 10);
        advance();
      }
      return v;
    };
    switch (e) {
      case 'n': value += '\n'; advance(); return;
      case 't': value += '\t'; advance(); return;
      case 'r': value += '\r'; advance(); return;
      case '0': value += '\0'; advance(); return;
      case '\\': value += '\\'; advance(); return;
      case '\'': value += '\''; advance(); return;
      case '"': value += '"'; advance(); return;
      case '\n': advance(); return;
      case 'x': advance(); append_utf8(value, hex_value(2)); return;
      case 'u': advance(); append_utf8(value, hex_value(4)); return;
      case 'U': advance(); append_utf8(value, hex_value(8)); return;
      default:
        value += '\\';
        value += e;
        advance();
    }
  }

  const std::string& src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
  int depth_ = 0;
  bool line_start_ = true;
  bool adjacent_string_ = false;
  std::vector<std::string> indents_;
  TokenStream out_;
};

}  // namespace

TokenStream tokenize(const ProgramSource& source) {
  if (source.text.find_first_not_of(" \t\r\n\f") == std::string::npos) {
    throw ProgramError(ErrorCode::syntax_error, {1, 1}, "program source is empty");
  }
  TokenStream ts = tokenize_prefix(source);
  if (ts.error) throw *ts.error;
  return ts;
}

TokenStream tokenize_prefix(const ProgramSource& source) {
  if (source.text.find_first_not_of(" \t\r\n\f") == std::string::npos) {
    throw ProgramError(ErrorCode::syntax_error, {1, 1}, "program source is empty");
  }
  return Lexer(source.text).run();
}

}  // namespace spatial::spl
