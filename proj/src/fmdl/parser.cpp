// SPDX-License-Identifier: Apache-2.0
#include <charconv>
#include <set>

#include "fkb/error.hpp"
#include "fkb/fmdl.hpp"

namespace fkb::fmdl {

namespace {

struct ParseFail {};

class Parser {
public:
  Parser(std::vector<Token> tokens, std::vector<Diagnostic>& diagnostics, SourceMap& sources)
      : tokens_(std::move(tokens)), diags_(diagnostics), sources_(sources) {}

  WorldBuild parse_world() {
    WorldBuild build;
    while (!at(Tok::End)) {
      const auto before = pos_;
      try {
        parse_item(build);
      } catch (const ParseFail&) {
        sync_item();
        if (pos_ == before) ++pos_;
      }
    }
    return build;
  }

  ExprPtr parse_single_expression() {
    auto e = expression();
    expect(Tok::End, "end of expression");
    return e;
  }

private:
  // ---- token helpers -------------------------------------------------------

  const Token& peek(std::size_t ahead = 0) const {
    auto i = std::min(pos_ + ahead, tokens_.size() - 1);
    return tokens_[i];
  }
  bool at(Tok kind) const { return peek().kind == kind; }
  bool accept(Tok kind) {
    if (!at(kind)) return false;
    ++pos_;
    return true;
  }
  const Token& advance() {
    const auto& t = peek();
    if (pos_ < tokens_.size() - 1) ++pos_;
    return t;
  }

  SourceSpan span_of(const Token& t) const {
    if (t.kind != Tok::End || pos_ == 0) return t.span;
    // Report end-of-input problems on the last real token.
    for (auto i = std::min(pos_, tokens_.size() - 1); i-- > 0;) {
      if (tokens_[i].kind != Tok::End) return tokens_[i].span;
    }
    return t.span;
  }

  [[noreturn]] void fail(const std::string& expected) {
    const auto& t = peek();
    std::string found = t.kind == Tok::Ident   ? "identifier '" + t.text + "'"
                        : t.kind == Tok::Int    ? "integer " + t.text
                        : t.kind == Tok::String ? "string literal"
                                                : std::string(to_string(t.kind));
    diags_.push_back({Severity::Error, span_of(t), "syntax", "expected " + expected + ", found " + found});
    throw ParseFail{};
  }

  const Token& expect(Tok kind, const std::string& what = {}) {
    if (!at(kind)) fail(what.empty() ? std::string(to_string(kind)) : what);
    return advance();
  }

  std::string identifier(const std::string& what = "identifier") {
    return expect(Tok::Ident, what).text;
  }

  // Skip to the start of the next top-level declaration.
  void sync_item() {
    int depth = 0;
    while (!at(Tok::End)) {
      const auto k = peek().kind;
      if (depth == 0 && (k == Tok::KwFrame || k == Tok::KwRemote || k == Tok::KwFrameset ||
                         k == Tok::KwExtern || k == Tok::KwExternal)) {
        return;
      }
      if (k == Tok::LBrace) ++depth;
      if (k == Tok::RBrace && depth > 0) --depth;
      ++pos_;
    }
  }

  // Skip past the current member: a ';' at depth 0 is consumed, a '}' at
  // depth 0 (end of frame) is left for the caller.
  void sync_member() {
    int depth = 0;
    while (!at(Tok::End)) {
      const auto k = peek().kind;
      if (k == Tok::LBrace) ++depth;
      if (k == Tok::RBrace) {
        if (depth == 0) return;
        --depth;
        if (depth == 0) {
          ++pos_;
          return;
        }
      }
      if (k == Tok::Semi && depth == 0) {
        ++pos_;
        return;
      }
      ++pos_;
    }
  }

  // ---- declarations --------------------------------------------------------

  void parse_item(WorldBuild& build) {
    switch (peek().kind) {
      case Tok::KwFrame: return frame_decl(build, FrameKind::Local);
      case Tok::KwExternal:
        advance();
        return frame_decl(build, FrameKind::ExternalObject);
      case Tok::KwRemote: return remote_decl(build);
      case Tok::KwFrameset: return frameset_decl(build);
      case Tok::KwExtern: return extern_decl(build);
      default: fail("'frame', 'remote', 'frameset', 'external' or 'extern'");
    }
  }

  void register_frame(WorldBuild& build, FrameDef frame, const SourceSpan& span) {
    const auto name = frame.name;
    try {
      build.add_frame(std::move(frame));
      sources_.frames[name] = span;
    } catch (const Error& e) {
      std::string code = e.code() == Errc::DuplicateFrame  ? "duplicate-frame"
                         : e.code() == Errc::DuplicateSlot ? "duplicate-slot"
                         : e.code() == Errc::ReservedSlot  ? "reserved-slot"
                                                           : "invalid-declaration";
      diags_.push_back({Severity::Error, span, code, e.what()});
    }
  }

  void frame_decl(WorldBuild& build, FrameKind kind) {
    expect(Tok::KwFrame);
    const auto& name_tok = expect(Tok::Ident, "frame name");
    FrameDef frame;
    frame.name = name_tok.text;
    frame.kind = kind;
    const auto span = name_tok.span;
    if (accept(Tok::Colon)) frame.parent = identifier("parent frame name");
    if (kind == FrameKind::ExternalObject && accept(Tok::Semi)) {
      register_frame(build, std::move(frame), span);
      return;
    }
    expect(Tok::LBrace);
    std::set<std::string> slot_names;
    while (!at(Tok::RBrace) && !at(Tok::End)) {
      const auto before = pos_;
      try {
        member(frame, slot_names);
      } catch (const ParseFail&) {
        sync_member();
        if (pos_ == before) ++pos_;
      }
    }
    expect(Tok::RBrace, "'}' closing frame '" + frame.name + "'");
    register_frame(build, std::move(frame), span);
  }

  void remote_decl(WorldBuild& build) {
    expect(Tok::KwRemote);
    expect(Tok::KwFrame);
    const auto& name_tok = expect(Tok::Ident, "frame name");
    FrameDef frame;
    frame.name = name_tok.text;
    frame.kind = FrameKind::RemoteStub;
    if (accept(Tok::Colon)) frame.parent = identifier("parent frame name");
    expect(Tok::KwAt);
    frame.url = expect(Tok::String, "instance url string").text;
    expect(Tok::Semi);
    register_frame(build, std::move(frame), name_tok.span);
  }

  void frameset_decl(WorldBuild& build) {
    expect(Tok::KwFrameset);
    const auto& name_tok = expect(Tok::Ident, "frameset name");
    FrameDef frame;
    frame.name = name_tok.text;
    frame.kind = FrameKind::Frameset;
    expect(Tok::KwFrom);
    expect(Tok::KwTable);
    frame.table = expect(Tok::String, "table location string").text;
    expect(Tok::KwKey);
    frame.key = identifier("key column name");
    if (at(Tok::Ident) && peek().text == kParentSlot) {
      advance();
      frame.parent = identifier("parent frame name");
    }
    expect(Tok::Semi);
    register_frame(build, std::move(frame), name_tok.span);
  }

  void extern_decl(WorldBuild& build) {
    const auto& kw = expect(Tok::KwExtern);
    expect(Tok::KwFunction);
    auto name = identifier("function name");
    expect(Tok::Slash);
    auto arity = integer_token(expect(Tok::Int, "arity"), false);
    expect(Tok::Semi);
    if (build.externs().count(name)) {
      diags_.push_back({Severity::Error, kw.span, "duplicate-extern", "function '" + name + "' declared twice"});
      return;
    }
    build.add_extern(name, static_cast<int>(arity));
  }

  void member(FrameDef& frame, std::set<std::string>& slot_names) {
    const auto start = peek().span;
    switch (peek().kind) {
      case Tok::KwSlot: {
        advance();
        const auto& name_tok = expect(Tok::Ident, "slot name");
        expect(Tok::Colon);
        SlotDef slot;
        slot.name = name_tok.text;
        slot.type = type();
        if (accept(Tok::KwDefault)) slot.default_value = literal(slot.type);
        expect(Tok::Semi);
        if (!slot_names.insert(slot.name).second) {
          diags_.push_back({Severity::Error, name_tok.span, "duplicate-slot",
                            "duplicate slot '" + slot.name + "' in frame '" + frame.name + "'"});
          return;
        }
        sources_.slots[{frame.name, frame.slots.size()}] = start;
        frame.slots.push_back(std::move(slot));
        return;
      }
      case Tok::KwConstraint: {
        advance();
        auto e = expression();
        expect(Tok::Semi);
        sources_.constraints[{frame.name, frame.constraints.size()}] = start;
        frame.constraints.push_back(std::move(e));
        return;
      }
      case Tok::KwAsk: {
        advance();
        auto slot = identifier("slot name");
        expect(Tok::Colon);
        auto prompt = expect(Tok::String, "prompt string").text;
        expect(Tok::Semi);
        add_action(frame, Action::ask(std::move(slot), std::move(prompt)), start);
        return;
      }
      case Tok::KwRules: {
        advance();
        expect(Tok::KwFrom);
        auto url = expect(Tok::String, "rule repository url string").text;
        expect(Tok::Semi);
        frame.rules_from = std::move(url);
        return;
      }
      case Tok::KwOn: {
        advance();
        Rule rule;
        rule.direction = Direction::Forward;
        rule.target_slot = identifier("slot name");
        if (accept(Tok::KwIf)) rule.condition = expression();
        expect(Tok::LBrace);
        do {
          auto slot = identifier("slot assignment");
          expect(Tok::Assign);
          auto value = expression();
          expect(Tok::Semi);
          rule.assignments.emplace_back(std::move(slot), std::move(value));
        } while (!at(Tok::RBrace));
        expect(Tok::RBrace);
        add_action(frame, Action::forward(std::move(rule)), start);
        return;
      }
      case Tok::KwQuery: {
        advance();
        auto slot = identifier("slot name");
        expect(Tok::KwFrom);
        QuerySpec q;
        q.table = identifier("table (frameset) name");
        expect(Tok::Dot);
        q.column = identifier("column name");
        expect(Tok::KwWhere);
        q.key_column = identifier("key column name");
        q.op = comparison_op();
        q.key = additive();
        expect(Tok::Semi);
        add_action(frame, Action::query_value(std::move(slot), std::move(q)), start);
        return;
      }
      case Tok::Ident: {
        Rule rule;
        rule.target_slot = advance().text;
        expect(Tok::Assign, "':='");
        auto value = expression();
        if (accept(Tok::KwIf)) rule.condition = expression();
        expect(Tok::Semi);
        rule.assignments.emplace_back(rule.target_slot, std::move(value));
        add_action(frame, Action::backward(std::move(rule)), start);
        return;
      }
      default:
        fail("frame member ('slot', 'constraint', 'ask', 'on', 'query', 'rules' or a rule)");
    }
  }

  void add_action(FrameDef& frame, Action action, const SourceSpan& span) {
    sources_.actions[{frame.name, frame.actions.size()}] = span;
    frame.actions.push_back(std::move(action));
  }

  ValueKind scalar_type() {
    switch (advance().kind) {
      case Tok::KwInteger: return ValueKind::Integer;
      case Tok::KwBoolean: return ValueKind::Boolean;
      case Tok::KwString: return ValueKind::String;
      default:
        --pos_;
        fail("scalar type (integer, boolean, string)");
    }
  }

  SlotType type() {
    switch (peek().kind) {
      case Tok::KwInteger:
      case Tok::KwBoolean:
      case Tok::KwString: return {scalar_type()};
      case Tok::KwReference: advance(); return {ValueKind::Reference};
      case Tok::KwList:
        advance();
        expect(Tok::KwOf);
        return SlotType::list_of(scalar_type());
      default: fail("type (integer, boolean, string, reference, list of ...)");
    }
  }

  std::int64_t integer_token(const Token& t, bool negative) {
    std::uint64_t magnitude = 0;
    auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), magnitude);
    const std::uint64_t limit = negative ? std::uint64_t(INT64_MAX) + 1 : std::uint64_t(INT64_MAX);
    if (ec != std::errc{} || magnitude > limit) {
      diags_.push_back({Severity::Error, t.span, "integer-range", "integer literal out of 64-bit range"});
      throw ParseFail{};
    }
    if (negative) return magnitude == limit ? INT64_MIN : -static_cast<std::int64_t>(magnitude);
    return static_cast<std::int64_t>(magnitude);
  }

  Value scalar_literal() {
    const auto& t = peek();
    switch (t.kind) {
      case Tok::Int: advance(); return Value::integer(integer_token(t, false));
      case Tok::Minus: {
        advance();
        return Value::integer(integer_token(expect(Tok::Int, "integer literal"), true));
      }
      case Tok::String: advance(); return Value::string(t.text);
      case Tok::KwTrue: advance(); return Value::boolean(true);
      case Tok::KwFalse: advance(); return Value::boolean(false);
      case Tok::KwFrame: advance(); return Value::reference(identifier("frame name"));
      case Tok::KwUnknown: advance(); return Value::unknown();
      default: fail("literal");
    }
  }

  Value literal(const SlotType& type) {
    if (!accept(Tok::LBracket)) return scalar_literal();
    const auto span = peek().span;
    std::vector<Value> items;
    if (!at(Tok::RBracket)) {
      do {
        items.push_back(scalar_literal());
      } while (accept(Tok::Comma));
    }
    expect(Tok::RBracket);
    try {
      auto elem = type.kind == ValueKind::List ? type.element : ValueKind::Unknown;
      if (!items.empty()) elem = ValueKind::Unknown;
      auto v = Value::list(elem, std::move(items));
      return conform(type, std::move(v));
    } catch (const Error& e) {
      diags_.push_back({Severity::Error, span, "type-mismatch", e.what()});
      throw ParseFail{};
    }
  }

  // ---- expressions ---------------------------------------------------------

  ExprPtr expression() { return disjunction(); }

  ExprPtr disjunction() {
    auto lhs = conjunction();
    while (accept(Tok::KwOr)) lhs = expr::binary(ExprOp::Or, lhs, conjunction());
    return lhs;
  }

  ExprPtr conjunction() {
    auto lhs = negation();
    while (accept(Tok::KwAnd)) lhs = expr::binary(ExprOp::And, lhs, negation());
    return lhs;
  }

  ExprPtr negation() {
    if (accept(Tok::KwNot)) return expr::unary(ExprOp::Not, negation());
    return comparison();
  }

  std::optional<ExprOp> peek_comparison() const {
    switch (peek().kind) {
      case Tok::Eq: return ExprOp::Eq;
      case Tok::Ne: return ExprOp::Ne;
      case Tok::Lt: return ExprOp::Lt;
      case Tok::Le: return ExprOp::Le;
      case Tok::Gt: return ExprOp::Gt;
      case Tok::Ge: return ExprOp::Ge;
      case Tok::KwIn: return ExprOp::In;
      default: return std::nullopt;
    }
  }

  ExprOp comparison_op() {
    auto op = peek_comparison();
    if (!op) fail("comparison operator");
    advance();
    return *op;
  }

  ExprPtr comparison() {
    auto lhs = additive();
    if (auto op = peek_comparison()) {
      advance();
      lhs = expr::binary(*op, lhs, additive());
    }
    return lhs;
  }

  ExprPtr additive() {
    auto lhs = multiplicative();
    while (true) {
      if (accept(Tok::Plus)) {
        lhs = expr::binary(ExprOp::Add, lhs, multiplicative());
      } else if (accept(Tok::Minus)) {
        lhs = expr::binary(ExprOp::Sub, lhs, multiplicative());
      } else {
        return lhs;
      }
    }
  }

  ExprPtr multiplicative() {
    auto lhs = unary();
    while (true) {
      if (accept(Tok::Star)) {
        lhs = expr::binary(ExprOp::Mul, lhs, unary());
      } else if (accept(Tok::Slash)) {
        lhs = expr::binary(ExprOp::Div, lhs, unary());
      } else {
        return lhs;
      }
    }
  }

  ExprPtr unary() {
    if (accept(Tok::Minus)) {
      if (at(Tok::Int)) return expr::lit(Value::integer(integer_token(advance(), true)));
      return expr::unary(ExprOp::Neg, unary());
    }
    return primary();
  }

  ExprPtr primary() {
    const auto& t = peek();
    switch (t.kind) {
      case Tok::Int: advance(); return expr::lit(Value::integer(integer_token(t, false)));
      case Tok::String: advance(); return expr::lit(Value::string(t.text));
      case Tok::KwTrue: advance(); return expr::lit(Value::boolean(true));
      case Tok::KwFalse: advance(); return expr::lit(Value::boolean(false));
      case Tok::KwUnknown: advance(); return expr::lit(Value::unknown());
      case Tok::KwFrame: advance(); return expr::lit(Value::reference(identifier("frame name")));
      case Tok::LParen: {
        advance();
        auto e = expression();
        expect(Tok::RParen);
        return e;
      }
      case Tok::LBracket: {
        advance();
        std::vector<ExprPtr> items;
        if (!at(Tok::RBracket)) {
          do {
            items.push_back(expression());
          } while (accept(Tok::Comma));
        }
        expect(Tok::RBracket);
        return expr::list(std::move(items));
      }
      case Tok::KwExists: {
        advance();
        auto var = identifier("variable name");
        expect(Tok::KwIn);
        auto root = identifier("frame name");
        expect(Tok::KwWhere);
        return expr::exists(std::move(var), std::move(root), expression());
      }
      case Tok::KwSpecialize: {
        advance();
        expect(Tok::LParen);
        auto root = identifier("frame name");
        expect(Tok::RParen);
        return expr::specialize(std::move(root));
      }
      case Tok::Ident: {
        auto name = advance().text;
        if (accept(Tok::Dot)) return expr::slot(identifier("slot name"), std::move(name));
        if (accept(Tok::LParen)) {
          std::vector<ExprPtr> args;
          if (!at(Tok::RParen)) {
            do {
              args.push_back(expression());
            } while (accept(Tok::Comma));
          }
          expect(Tok::RParen);
          return expr::call(std::move(name), std::move(args));
        }
        return expr::slot(std::move(name));
      }
      default: fail("expression");
    }
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  std::vector<Diagnostic>& diags_;
  SourceMap& sources_;
};

}  // namespace

ParseResult parse(std::string_view text, const std::string& file) {
  ParseResult result;
  auto lexed = tokenize(text, file);
  result.diagnostics = std::move(lexed.diagnostics);
  Parser parser(std::move(lexed.tokens), result.diagnostics, result.sources);
  auto build = parser.parse_world();
  if (!has_errors(result.diagnostics)) result.world = std::move(build);
  return result;
}

ExprPtr parse_expression(std::string_view text) {
  auto lexed = tokenize(text, "<expr>");
  std::vector<Diagnostic> diags = std::move(lexed.diagnostics);
  SourceMap sources;
  Parser parser(std::move(lexed.tokens), diags, sources);
  ExprPtr e;
  try {
    e = parser.parse_single_expression();
  } catch (const ParseFail&) {
  }
  if (has_errors(diags) || !e) {
    std::vector<std::string> lines;
    for (const auto& d : diags) lines.push_back(d.to_string());
    throw Error(Errc::Syntax, lines.empty() ? "syntax error" : lines.front(), lines);
  }
  return e;
}

}  // namespace fkb::fmdl
