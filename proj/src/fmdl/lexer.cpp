// SPDX-License-Identifier: Apache-2.0
#include <map>

#include "fkb/fmdl.hpp"

namespace fkb::fmdl {

std::string Diagnostic::to_string() const {
  return span.file + ":" + std::to_string(span.line) + ":" + std::to_string(span.column) + ": " +
         (severity == Severity::Error ? "error" : "warning") + "[" + code + "]: " + message;
}

bool has_errors(const std::vector<Diagnostic>& diagnostics) {
  for (const auto& d : diagnostics) {
    if (d.severity == Severity::Error) return true;
  }
  return false;
}

namespace {

const std::map<std::string_view, Tok>& keywords() {
  static const std::map<std::string_view, Tok> table{
      {"frame", Tok::KwFrame},         {"slot", Tok::KwSlot},
      {"integer", Tok::KwInteger},     {"boolean", Tok::KwBoolean},
      {"string", Tok::KwString},       {"reference", Tok::KwReference},
      {"list", Tok::KwList},           {"of", Tok::KwOf},
      {"default", Tok::KwDefault},     {"if", Tok::KwIf},
      {"on", Tok::KwOn},               {"constraint", Tok::KwConstraint},
      {"ask", Tok::KwAsk},             {"rules", Tok::KwRules},
      {"from", Tok::KwFrom},           {"remote", Tok::KwRemote},
      {"at", Tok::KwAt},               {"frameset", Tok::KwFrameset},
      {"table", Tok::KwTable},         {"key", Tok::KwKey},
      {"extern", Tok::KwExtern},       {"external", Tok::KwExternal},
      {"function", Tok::KwFunction},   {"query", Tok::KwQuery},
      {"and", Tok::KwAnd},             {"or", Tok::KwOr},
      {"not", Tok::KwNot},             {"in", Tok::KwIn},
      {"exists", Tok::KwExists},       {"where", Tok::KwWhere},
      {"specialize", Tok::KwSpecialize}, {"unknown", Tok::KwUnknown},
      {"true", Tok::KwTrue},           {"false", Tok::KwFalse},
  };
  return table;
}

class Lexer {
public:
  Lexer(std::string_view text, const std::string& file) : text_(text), file_(file) {}

  TokenizeResult run() {
    TokenizeResult out;
    while (true) {
      skip_trivia(out);
      if (pos_ >= text_.size()) break;
      const auto start = mark();
      const char c = text_[pos_];
      if (is_alpha(c)) {
        std::string word;
        while (pos_ < text_.size() && (is_alpha(text_[pos_]) || is_digit(text_[pos_]))) word += advance();
        auto kw = keywords().find(word);
        out.tokens.push_back(finish(kw == keywords().end() ? Tok::Ident : kw->second, word, start));
      } else if (is_digit(c)) {
        std::string digits;
        while (pos_ < text_.size() && is_digit(text_[pos_])) digits += advance();
        out.tokens.push_back(finish(Tok::Int, digits, start));
      } else if (c == '"') {
        if (!lex_string(out, start)) break;
      } else if (auto kind = punctuation()) {
        out.tokens.push_back(finish(*kind, "", start));
      } else {
        advance();
        auto span = finish(Tok::End, "", start).span;
        out.diagnostics.push_back({Severity::Error, span, "illegal-character",
                                   "illegal character '" + std::string(1, c) + "'"});
      }
    }
    out.tokens.push_back(finish(Tok::End, "", mark()));
    return out;
  }

private:
  struct Mark {
    std::size_t pos;
    int line;
    int column;
  };

  static bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
  static bool is_digit(char c) { return c >= '0' && c <= '9'; }

  Mark mark() const { return {pos_, line_, column_}; }

  char advance() {
    const char c = text_[pos_++];
    if (c == '\n') {
      ++line_;
      column_ = 1;
    } else if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) {
      ++column_;
    }
    return c;
  }

  Token finish(Tok kind, std::string text, const Mark& start) const {
    Token t;
    t.kind = kind;
    t.text = std::move(text);
    t.span.file = file_;
    t.span.line = start.line;
    t.span.column = start.column;
    int length = 0;
    for (std::size_t i = start.pos; i < pos_; ++i) {
      if ((static_cast<unsigned char>(text_[i]) & 0xC0) != 0x80) ++length;
    }
    t.span.length = length;
    return t;
  }

  void skip_trivia(TokenizeResult& out) {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else if (c == '/' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '/') {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else if (c == '/' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '*') {
        const auto start = mark();
        advance();
        advance();
        bool closed = false;
        while (pos_ < text_.size()) {
          if (text_[pos_] == '*' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '/') {
            advance();
            advance();
            closed = true;
            break;
          }
          advance();
        }
        if (!closed) {
          out.diagnostics.push_back({Severity::Error, finish(Tok::End, "", start).span,
                                     "unterminated-comment", "unterminated block comment"});
        }
      } else {
        break;
      }
    }
  }

  bool lex_string(TokenizeResult& out, const Mark& start) {
    advance();  // opening quote
    std::string payload;
    while (pos_ < text_.size()) {
      const char c = advance();
      if (c == '"') {
        out.tokens.push_back(finish(Tok::String, payload, start));
        return true;
      }
      if (c == '\\') {
        if (pos_ >= text_.size()) break;
        const char e = advance();
        if (e == '"' || e == '\\') {
          payload += e;
        } else {
          out.diagnostics.push_back({Severity::Error, finish(Tok::End, "", start).span, "invalid-escape",
                                     "invalid escape '\\" + std::string(1, e) + "' in string"});
          payload += e;
        }
        continue;
      }
      payload += c;
    }
    out.diagnostics.push_back({Severity::Error, finish(Tok::End, "", start).span,
                               "unterminated-string", "unterminated string literal"});
    return false;
  }

  std::optional<Tok> punctuation() {
    const char c = text_[pos_];
    const char n = pos_ + 1 < text_.size() ? text_[pos_ + 1] : '\0';
    auto two = [&](Tok t) {
      advance();
      advance();
      return t;
    };
    auto one = [&](Tok t) {
      advance();
      return t;
    };
    switch (c) {
      case '{': return one(Tok::LBrace);
      case '}': return one(Tok::RBrace);
      case '(': return one(Tok::LParen);
      case ')': return one(Tok::RParen);
      case '[': return one(Tok::LBracket);
      case ']': return one(Tok::RBracket);
      case ';': return one(Tok::Semi);
      case ',': return one(Tok::Comma);
      case '.': return one(Tok::Dot);
      case '/': return one(Tok::Slash);
      case '+': return one(Tok::Plus);
      case '-': return one(Tok::Minus);
      case '*': return one(Tok::Star);
      case '=': return one(Tok::Eq);
      case ':': return n == '=' ? two(Tok::Assign) : one(Tok::Colon);
      case '<':
        if (n == '=') return two(Tok::Le);
        if (n == '>') return two(Tok::Ne);
        return one(Tok::Lt);
      case '>': return n == '=' ? two(Tok::Ge) : one(Tok::Gt);
      default: return std::nullopt;
    }
  }

  std::string_view text_;
  std::string file_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int column_ = 1;
};

}  // namespace

std::string_view to_string(Tok kind) {
  switch (kind) {
    case Tok::Ident: return "identifier";
    case Tok::Int: return "integer literal";
    case Tok::String: return "string literal";
    case Tok::LBrace: return "'{'";
    case Tok::RBrace: return "'}'";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::LBracket: return "'['";
    case Tok::RBracket: return "']'";
    case Tok::Colon: return "':'";
    case Tok::Semi: return "';'";
    case Tok::Comma: return "','";
    case Tok::Dot: return "'.'";
    case Tok::Slash: return "'/'";
    case Tok::Assign: return "':='";
    case Tok::Eq: return "'='";
    case Tok::Ne: return "'<>'";
    case Tok::Lt: return "'<'";
    case Tok::Le: return "'<='";
    case Tok::Gt: return "'>'";
    case Tok::Ge: return "'>='";
    case Tok::Plus: return "'+'";
    case Tok::Minus: return "'-'";
    case Tok::Star: return "'*'";
    case Tok::End: return "end of input";
    default: break;
  }
  for (const auto& [word, tok] : keywords()) {
    if (tok == kind) return word;
  }
  return "?";
}

TokenizeResult tokenize(std::string_view text, const std::string& file) {
  return Lexer(text, file).run();
}

}  // namespace fkb::fmdl
