// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fkb/world.hpp"

namespace fkb::fmdl {

struct SourceSpan {
  std::string file;
  int line = 1;
  int column = 1;
  int length = 0;
};

enum class Severity { Error, Warning };

struct Diagnostic {
  Severity severity = Severity::Error;
  SourceSpan span;
  std::string code;
  std::string message;

  std::string to_string() const;  // file:line:col: error[code]: message
};

bool has_errors(const std::vector<Diagnostic>& diagnostics);

enum class Tok {
  Ident,
  Int,
  String,
  // punctuation
  LBrace,
  RBrace,
  LParen,
  RParen,
  LBracket,
  RBracket,
  Colon,
  Semi,
  Comma,
  Dot,
  Slash,
  Assign,  // :=
  Eq,
  Ne,
  Lt,
  Le,
  Gt,
  Ge,
  Plus,
  Minus,
  Star,
  // keywords
  KwFrame,
  KwSlot,
  KwInteger,
  KwBoolean,
  KwString,
  KwReference,
  KwList,
  KwOf,
  KwDefault,
  KwIf,
  KwOn,
  KwConstraint,
  KwAsk,
  KwRules,
  KwFrom,
  KwRemote,
  KwAt,
  KwFrameset,
  KwTable,
  KwKey,
  KwExtern,
  KwExternal,
  KwFunction,
  KwQuery,
  KwAnd,
  KwOr,
  KwNot,
  KwIn,
  KwExists,
  KwWhere,
  KwSpecialize,
  KwUnknown,
  KwTrue,
  KwFalse,
  End,
};

std::string_view to_string(Tok kind);

struct Token {
  Tok kind = Tok::End;
  std::string text;  // identifier name, decoded string payload, or digits
  SourceSpan span;
};

/// Splits source text into tokens; `//` and `/* */` comments are skipped.
/// On failure returns the diagnostic (UnterminatedString, IllegalCharacter).
struct TokenizeResult {
  std::vector<Token> tokens;  // terminated by Tok::End
  std::vector<Diagnostic> diagnostics;
};
TokenizeResult tokenize(std::string_view text, const std::string& file = "<input>");

/// Source positions of parsed declarations, keyed by frame name and by the
/// member's index within its frame's slot / constraint / action list.
struct SourceMap {
  std::map<std::string, SourceSpan> frames;
  std::map<std::pair<std::string, std::size_t>, SourceSpan> slots;
  std::map<std::pair<std::string, std::size_t>, SourceSpan> constraints;
  std::map<std::pair<std::string, std::size_t>, SourceSpan> actions;
};

/// Parses a whole knowledge source. `world` is set only when no errors were
/// reported; syntax errors are recovered at member boundaries so one pass
/// reports as many as possible.
struct ParseResult {
  std::optional<WorldBuild> world;
  std::vector<Diagnostic> diagnostics;
  SourceMap sources;
};
ParseResult parse(std::string_view text, const std::string& file = "<input>");

/// Parses a single expression (used by tests and tooling).
ExprPtr parse_expression(std::string_view text);

/// Semantic checks on a parsed build: unknown parents and default type
/// errors; warnings for slot references undeclared along the static chain.
std::vector<Diagnostic> validate(const WorldBuild& build, const SourceMap* sources = nullptr);

/// Canonical source rendering: 2-space indent, one member per line.
std::string pretty_print(const WorldBuild& build);

/// parse + validate + freeze. Throws Error(Syntax) carrying all diagnostic
/// lines in details when anything fails.
std::shared_ptr<const FrameWorld> load_source(std::string_view text, const std::string& file = "<input>",
                                              const std::filesystem::path& base_dir = {});
std::shared_ptr<const FrameWorld> load_file(const std::filesystem::path& path);

}  // namespace fkb::fmdl
