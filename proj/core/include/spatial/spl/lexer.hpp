#pragma once

#include "spatial/error.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace spatial::spl {

struct SourceLocation {
  int line = 1;    // 1-based
  int column = 1;  // 1-based, in bytes

  bool operator==(const SourceLocation&) const = default;
};

std::string to_string(SourceLocation loc);

/// Tool invocation recorded by the interpreter.
struct TraceRecord {
  std::int64_t step = 0;
  std::string call;
  std::string args_summary;
  std::string output_kind;

  bool operator==(const TraceRecord&) const = default;
};

/// Any tokenize, parse or runtime failure of a program. Runtime failures
/// carry the trace of tool calls made before the failure.
class ProgramError : public Error {
 public:
  ProgramError(ErrorCode code, SourceLocation loc, const std::string& message,
               std::vector<TraceRecord> partial_trace = {})
      : Error(code, to_string(loc) + ": " + message),
        location_(loc),
        detail_(message),
        trace_(std::move(partial_trace)) {}

  SourceLocation location() const { return location_; }
  /// The message without the location prefix.
  const std::string& detail() const { return detail_; }
  const std::vector<TraceRecord>& partial_trace() const { return trace_; }

 private:
  SourceLocation location_;
  std::string detail_;
  std::vector<TraceRecord> trace_;
};

enum class SourceOrigin { agent, fixture, cli };

struct ProgramSource {
  std::string text;
  SourceOrigin origin = SourceOrigin::cli;
};

enum class TokenKind {
  name,
  keyword,
  integer,
  floating,
  string,
  op,
  newline,
  indent,
  dedent,
  end_of_file,
};

std::string_view to_string(TokenKind kind);

struct Token {
  TokenKind kind = TokenKind::end_of_file;
  /// Identifier, keyword or operator spelling; decoded value for strings;
  /// source spelling for numbers.
  std::string text;
  SourceLocation loc;

  bool is(TokenKind k, std::string_view t) const { return kind == k && text == t; }
  bool is_op(std::string_view t) const { return is(TokenKind::op, t); }
  bool is_keyword(std::string_view t) const { return is(TokenKind::keyword, t); }
};

struct Comment {
  int line = 0;
  std::string text;  // without the leading '#', trimmed

  bool operator==(const Comment&) const = default;
};

struct TokenStream {
  std::vector<Token> tokens;  // always ends with end_of_file
  std::vector<Comment> comments;
  /// Set by tokenize_prefix when lexing stopped early; tokens then hold
  /// everything before the offending position.
  std::optional<ProgramError> error;
};

/// Python-style tokenization: indentation becomes indent/dedent tokens,
/// newlines inside brackets are ignored, comments are collected aside.
/// Throws ProgramError with illegal_character, inconsistent_indentation,
/// syntax_error (unterminated strings, empty source) or forbidden_construct
/// (f-strings, byte strings).
TokenStream tokenize(const ProgramSource& source);

/// Like tokenize, but a lexical error is stored in `error` instead of
/// thrown, so the parser can report an earlier syntax error first.
TokenStream tokenize_prefix(const ProgramSource& source);

}  // namespace spatial::spl
