#pragma once

#include "spatial/spl/ast.hpp"
#include "spatial/spl/lexer.hpp"

#include <set>
#include <string>

namespace spatial::spl {

/// Names a program may reference without binding them.
const std::set<std::string>& builtin_names();
/// Members of the `pySpatial` namespace.
const std::set<std::string>& namespace_members();

/// Builds the AST and checks the program invariants: exactly one top-level
/// `def program(param)`, only whitelisted constructs, and no free names
/// other than builtins. Errors are ProgramError with syntax_error (with an
/// expected-token hint), forbidden_construct, entry_function or
/// unknown_name.
Program parse(const TokenStream& tokens);

/// tokenize + parse.
Program parse_program(const ProgramSource& source);

}  // namespace spatial::spl
