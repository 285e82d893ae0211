// Copyright 2026 The apisync Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <array>
#include <string>

#include "apisync/error.hpp"
#include "apisync/pysource.hpp"
#include "text_util.hpp"

namespace apisync::pysrc {

namespace {

constexpr std::array<std::string_view, 13> kAugOps = {
    "+=", "-=", "*=", "/=", "//=", "%=", "@=", "&=", "|=", "^=", ">>=", "<<=", "**="};

constexpr int kMaxNesting = 200;

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  Module module() {
    Module m;
    while (peek().kind != TokKind::End) statement(m.body);
    return m;
  }

  std::optional<ArgumentList> argument_list() {
    if (!at_op("(")) return std::nullopt;
    advance();
    ArgumentList out;
    out.args = call_arguments();
    if (peek().kind == TokKind::Newline) advance();
    if (peek().kind != TokKind::End) return std::nullopt;
    return out;
  }

 private:
  // -------------------------------------------------------------------------
  // Token access

  const Token& peek(std::size_t k = 0) const {
    return toks_[std::min(p_ + k, toks_.size() - 1)];
  }
  void advance() {
    if (p_ + 1 < toks_.size()) ++p_;
  }
  bool at_op(std::string_view s, std::size_t k = 0) const {
    const auto& t = peek(k);
    return t.kind == TokKind::Op && t.text == s;
  }
  bool at_kw(std::string_view s, std::size_t k = 0) const {
    const auto& t = peek(k);
    return t.kind == TokKind::Name && t.text == s;
  }
  bool accept_op(std::string_view s) {
    if (!at_op(s)) return false;
    advance();
    return true;
  }
  bool accept_kw(std::string_view s) {
    if (!at_kw(s)) return false;
    advance();
    return true;
  }
  void expect_op(std::string_view s) {
    if (!accept_op(s)) fail("expected '" + std::string(s) + "'");
  }
  void expect_kw(std::string_view s) {
    if (!accept_kw(s)) fail("expected '" + std::string(s) + "'");
  }
  std::string expect_name() {
    const auto& t = peek();
    if (t.kind != TokKind::Name || is_keyword(t.text)) fail("expected a name");
    std::string out(t.text);
    advance();
    return out;
  }
  void expect(TokKind kind, const char* what) {
    if (peek().kind != kind) fail(std::string("expected ") + what);
    advance();
  }

  [[noreturn]] void fail(const std::string& what) const {
    const auto& t = peek();
    std::string near = t.kind == TokKind::End ? "end of input" : "'" + std::string(t.text) + "'";
    throw Error(Errc::ParseError,
                "line " + std::to_string(t.span.begin.line) + ": " + what + " near " + near);
  }

  Pos here() const { return peek().span.begin; }

  // End of the last consumed token that carries source text.
  Pos last_end() const {
    for (std::size_t k = p_; k > 0; --k) {
      const auto& t = toks_[k - 1];
      if (t.kind == TokKind::Newline || t.kind == TokKind::Indent ||
          t.kind == TokKind::Dedent) {
        continue;
      }
      return t.span.end;
    }
    return Pos{};
  }

  static ExprPtr node(ExprKind kind, Pos begin) {
    auto e = std::make_unique<Expr>();
    e->kind = kind;
    e->span.begin = begin;
    return e;
  }
  static ExprPtr compound(std::string tag, Pos begin) {
    auto e = node(ExprKind::Compound, begin);
    e->tag = std::move(tag);
    return e;
  }
  ExprPtr finish(ExprPtr e) const {
    e->span.end = last_end();
    return e;
  }

  StmtPtr stmt_node(StmtKind kind, Pos begin) const {
    auto s = std::make_unique<Stmt>();
    s->kind = kind;
    s->span.begin = begin;
    return s;
  }
  StmtPtr finish(StmtPtr s) const {
    s->span.end = last_end();
    return s;
  }

  bool starts_expression() const {
    const auto& t = peek();
    switch (t.kind) {
      case TokKind::Number:
      case TokKind::String:
        return true;
      case TokKind::Name:
        if (!is_keyword(t.text)) return true;
        return t.text == "not" || t.text == "lambda" || t.text == "await" || t.text == "None" ||
               t.text == "True" || t.text == "False" || t.text == "yield";
      case TokKind::Op:
        return t.text == "(" || t.text == "[" || t.text == "{" || t.text == "-" ||
               t.text == "+" || t.text == "~" || t.text == "*" || t.text == "**" ||
               t.text == "...";
      default:
        return false;
    }
  }

  bool at_comprehension() const {
    return at_kw("for") || (at_kw("async") && at_kw("for", 1));
  }

  // -------------------------------------------------------------------------
  // Statements

  void statement(Block& out) {
    const auto& t = peek();
    if (t.kind == TokKind::Indent) fail("unexpected indent");
    if (t.kind == TokKind::Dedent) fail("unexpected dedent");
    if (at_op("@")) {
      out.push_back(decorated());
      return;
    }
    if (t.kind == TokKind::Name) {
      auto w = t.text;
      if (w == "if") return out.push_back(if_stmt());
      if (w == "while") return out.push_back(while_stmt());
      if (w == "for") return out.push_back(for_stmt(here()));
      if (w == "try") return out.push_back(try_stmt());
      if (w == "with") return out.push_back(with_stmt(here()));
      if (w == "def") return out.push_back(funcdef(here(), {}));
      if (w == "class") return out.push_back(classdef(here(), {}));
      if (w == "async") {
        if (at_kw("def", 1)) return out.push_back(funcdef(here(), {}));
        if (at_kw("for", 1)) return out.push_back(for_stmt(here()));
        if (at_kw("with", 1)) return out.push_back(with_stmt(here()));
      }
      if (w == "match") {
        if (auto m = try_match()) return out.push_back(std::move(m));
      }
    }
    simple_line(out);
  }

  void simple_line(Block& out) {
    while (true) {
      out.push_back(small_statement());
      if (!accept_op(";")) break;
      if (peek().kind == TokKind::Newline) break;
    }
    expect(TokKind::Newline, "end of statement");
  }

  Block block() {
    expect_op(":");
    Block body;
    if (peek().kind == TokKind::Newline) {
      advance();
      expect(TokKind::Indent, "an indented block");
      while (peek().kind != TokKind::Dedent && peek().kind != TokKind::End) statement(body);
      expect(TokKind::Dedent, "dedent");
    } else {
      simple_line(body);
    }
    return body;
  }

  bool at_statement_end() const {
    return peek().kind == TokKind::Newline || at_op(";") || peek().kind == TokKind::End;
  }

  StmtPtr small_statement() {
    Pos b = here();
    const auto& t = peek();
    if (t.kind == TokKind::Name) {
      auto w = t.text;
      if (w == "pass" || w == "break" || w == "continue") {
        advance();
        auto kind = w == "pass" ? StmtKind::Pass
                    : w == "break" ? StmtKind::Break
                                   : StmtKind::Continue;
        return finish(stmt_node(kind, b));
      }
      if (w == "return") {
        advance();
        auto s = stmt_node(StmtKind::Return, b);
        if (!at_statement_end()) s->value = star_expressions();
        return finish(std::move(s));
      }
      if (w == "raise") {
        advance();
        auto s = stmt_node(StmtKind::Raise, b);
        if (!at_statement_end()) {
          s->value = expression();
          if (accept_kw("from")) s->extra = expression();
        }
        return finish(std::move(s));
      }
      if (w == "global" || w == "nonlocal") {
        advance();
        auto s = stmt_node(w == "global" ? StmtKind::Global : StmtKind::Nonlocal, b);
        do {
          s->identifiers.push_back(expect_name());
        } while (accept_op(","));
        return finish(std::move(s));
      }
      if (w == "del") {
        advance();
        auto s = stmt_node(StmtKind::Delete, b);
        s->targets.push_back(target_list());
        return finish(std::move(s));
      }
      if (w == "assert") {
        advance();
        auto s = stmt_node(StmtKind::Assert, b);
        s->value = expression();
        if (accept_op(",")) s->extra = expression();
        return finish(std::move(s));
      }
      if (w == "import") return import_stmt();
      if (w == "from") return from_import();
      if (w == "type" && peek(1).kind == TokKind::Name && !is_keyword(peek(1).text) &&
          (at_op("=", 2) || at_op("[", 2))) {
        advance();
        auto s = stmt_node(StmtKind::TypeAlias, b);
        s->name = expect_name();
        skip_type_params();
        expect_op("=");
        s->value = expression();
        return finish(std::move(s));
      }
    }
    return expression_statement();
  }

  ExprPtr yield_or_star_expressions() {
    if (at_kw("yield")) return yield_expression();
    return star_expressions();
  }

  StmtPtr expression_statement() {
    Pos b = here();
    auto first = yield_or_star_expressions();
    if (accept_op(":")) {
      auto s = stmt_node(StmtKind::AnnAssign, b);
      s->targets.push_back(std::move(first));
      s->annotation = expression();
      if (accept_op("=")) s->value = yield_or_star_expressions();
      return finish(std::move(s));
    }
    for (auto op : kAugOps) {
      if (at_op(op)) {
        advance();
        auto s = stmt_node(StmtKind::AugAssign, b);
        s->targets.push_back(std::move(first));
        s->value = yield_or_star_expressions();
        return finish(std::move(s));
      }
    }
    if (at_op("=")) {
      auto s = stmt_node(StmtKind::Assign, b);
      while (accept_op("=")) {
        s->targets.push_back(std::move(first));
        first = yield_or_star_expressions();
      }
      s->value = std::move(first);
      return finish(std::move(s));
    }
    auto s = stmt_node(StmtKind::Expr, b);
    s->value = std::move(first);
    return finish(std::move(s));
  }

  std::string dotted_name() {
    std::string out = expect_name();
    while (accept_op(".")) out += "." + expect_name();
    return out;
  }

  StmtPtr import_stmt() {
    Pos b = here();
    expect_kw("import");
    auto s = stmt_node(StmtKind::Import, b);
    do {
      ImportName n;
      n.module = dotted_name();
      if (accept_kw("as")) n.asname = expect_name();
      s->names.push_back(std::move(n));
    } while (accept_op(","));
    return finish(std::move(s));
  }

  StmtPtr from_import() {
    Pos b = here();
    expect_kw("from");
    auto s = stmt_node(StmtKind::ImportFrom, b);
    while (true) {
      if (accept_op(".")) {
        s->level += 1;
      } else if (accept_op("...")) {
        s->level += 3;
      } else {
        break;
      }
    }
    if (!at_kw("import")) s->module = dotted_name();
    if (s->module.empty() && s->level == 0) fail("expected a module name");
    expect_kw("import");
    if (accept_op("*")) {
      s->star = true;
      return finish(std::move(s));
    }
    bool paren = accept_op("(");
    do {
      if (paren && at_op(")")) break;
      ImportName n;
      n.module = expect_name();
      if (accept_kw("as")) n.asname = expect_name();
      s->names.push_back(std::move(n));
    } while (accept_op(","));
    if (paren) expect_op(")");
    return finish(std::move(s));
  }

  StmtPtr if_stmt() {
    Pos b = here();
    advance();  // "if" or "elif"
    auto s = stmt_node(StmtKind::If, b);
    s->value = named_expression();
    s->body = block();
    if (at_kw("elif")) {
      s->orelse.push_back(if_stmt());
    } else if (accept_kw("else")) {
      s->orelse = block();
    }
    return finish(std::move(s));
  }

  StmtPtr while_stmt() {
    Pos b = here();
    expect_kw("while");
    auto s = stmt_node(StmtKind::While, b);
    s->value = named_expression();
    s->body = block();
    if (accept_kw("else")) s->orelse = block();
    return finish(std::move(s));
  }

  StmtPtr for_stmt(Pos b) {
    auto s = stmt_node(StmtKind::For, b);
    s->is_async = accept_kw("async");
    expect_kw("for");
    s->targets.push_back(target_list());
    expect_kw("in");
    s->value = star_expressions();
    s->body = block();
    if (accept_kw("else")) s->orelse = block();
    return finish(std::move(s));
  }

  StmtPtr try_stmt() {
    Pos b = here();
    expect_kw("try");
    auto s = stmt_node(StmtKind::Try, b);
    s->body = block();
    while (at_kw("except")) {
      advance();
      accept_op("*");
      ExceptHandler h;
      if (!at_op(":")) {
        h.type = expression();
        if (accept_kw("as")) h.name = expect_name();
      }
      h.body = block();
      s->handlers.push_back(std::move(h));
    }
    if (accept_kw("else")) s->orelse = block();
    if (accept_kw("finally")) s->finalbody = block();
    if (s->handlers.empty() && s->finalbody.empty()) fail("try without except or finally");
    return finish(std::move(s));
  }

  WithItem with_item() {
    WithItem item;
    item.context = expression();
    if (accept_kw("as")) item.target = star_target();
    return item;
  }

  StmtPtr with_stmt(Pos b) {
    auto s = stmt_node(StmtKind::With, b);
    s->is_async = accept_kw("async");
    expect_kw("with");
    if (at_op("(")) {
      auto save = p_;
      try {
        advance();
        std::vector<WithItem> items;
        do {
          if (at_op(")")) break;
          items.push_back(with_item());
        } while (accept_op(","));
        expect_op(")");
        if (!at_op(":")) fail("expected ':'");
        s->items = std::move(items);
      } catch (const Error&) {
        p_ = save;
      }
    }
    if (s->items.empty()) {
      do {
        s->items.push_back(with_item());
      } while (accept_op(","));
    }
    s->body = block();
    return finish(std::move(s));
  }

  void skip_type_params() {
    if (!at_op("[")) return;
    int depth = 0;
    do {
      if (at_op("[") || at_op("(") || at_op("{")) ++depth;
      if (at_op("]") || at_op(")") || at_op("}")) --depth;
      if (peek().kind == TokKind::End) fail("unterminated type parameters");
      advance();
    } while (depth > 0);
  }

  StmtPtr decorated() {
    Pos b = here();
    std::vector<ExprPtr> decorators;
    while (accept_op("@")) {
      decorators.push_back(named_expression());
      expect(TokKind::Newline, "end of decorator");
    }
    if (at_kw("class")) return classdef(b, std::move(decorators));
    if (at_kw("def") || (at_kw("async") && at_kw("def", 1))) {
      return funcdef(b, std::move(decorators));
    }
    fail("expected a definition after decorators");
  }

  StmtPtr funcdef(Pos b, std::vector<ExprPtr> decorators) {
    auto s = stmt_node(StmtKind::FunctionDef, b);
    s->decorators = std::move(decorators);
    s->keyword = here();
    s->is_async = accept_kw("async");
    expect_kw("def");
    s->name = expect_name();
    skip_type_params();
    expect_op("(");
    s->params = parameters(")", true);
    expect_op(")");
    if (accept_op("->")) s->annotation = expression();
    s->body = block();
    return finish(std::move(s));
  }

  StmtPtr classdef(Pos b, std::vector<ExprPtr> decorators) {
    auto s = stmt_node(StmtKind::ClassDef, b);
    s->decorators = std::move(decorators);
    s->keyword = here();
    expect_kw("class");
    s->name = expect_name();
    skip_type_params();
    if (accept_op("(")) s->bases = call_arguments();
    s->body = block();
    return finish(std::move(s));
  }

  // Soft keyword: only a match statement when the header and the first case
  // parse; otherwise the caller falls back to an expression statement.
  StmtPtr try_match() {
    auto save = p_;
    Pos b = here();
    try {
      advance();
      auto s = stmt_node(StmtKind::Match, b);
      s->value = star_expressions();
      expect_op(":");
      expect(TokKind::Newline, "newline");
      expect(TokKind::Indent, "an indented block");
      if (!at_kw("case")) fail("expected 'case'");
      while (at_kw("case")) s->cases.push_back(match_case());
      expect(TokKind::Dedent, "dedent");
      return finish(std::move(s));
    } catch (const Error&) {
      // A genuine syntax error inside case bodies is reported again by the
      // fallback path, which fails on the header.
      p_ = save;
      return nullptr;
    }
  }

  MatchCase match_case() {
    expect_kw("case");
    MatchCase c;
    int depth = 0;
    while (true) {
      const auto& t = peek();
      if (t.kind == TokKind::End || t.kind == TokKind::Newline) fail("unterminated case pattern");
      if (depth == 0 && (at_op(":") || at_kw("if"))) break;
      if (at_op("(") || at_op("[") || at_op("{")) ++depth;
      if (at_op(")") || at_op("]") || at_op("}")) --depth;
      if (t.kind == TokKind::Name && !is_keyword(t.text) && t.text != "_") {
        bool after_dot = p_ > 0 && toks_[p_ - 1].kind == TokKind::Op && toks_[p_ - 1].text == ".";
        bool before = at_op(".", 1) || at_op("(", 1) || at_op("=", 1);
        if (!after_dot && !before) c.captures.emplace_back(t.text);
      }
      advance();
    }
    if (accept_kw("if")) c.guard = named_expression();
    c.body = block();
    return c;
  }

  // Parameters up to (not including) `closing`.
  std::vector<ParamDecl> parameters(std::string_view closing, bool annotations) {
    std::vector<ParamDecl> out;
    bool keyword_only = false;
    while (!at_op(closing)) {
      Pos b = here();
      if (accept_op("/")) {
        for (auto& p : out) p.kind = ParamKind::PositionalOnly;
      } else if (accept_op("**")) {
        ParamDecl p;
        p.name = expect_name();
        p.kind = ParamKind::VarKeyword;
        if (annotations && accept_op(":")) p.annotation = expression();
        p.span = {b, last_end()};
        out.push_back(std::move(p));
      } else if (accept_op("*")) {
        keyword_only = true;
        if (peek().kind == TokKind::Name) {
          ParamDecl p;
          p.name = expect_name();
          p.kind = ParamKind::VarPositional;
          if (annotations && accept_op(":")) p.annotation = star_expression();
          p.span = {b, last_end()};
          out.push_back(std::move(p));
        }
      } else {
        ParamDecl p;
        p.name = expect_name();
        p.kind = keyword_only ? ParamKind::KeywordOnly : ParamKind::PositionalOrKeyword;
        if (annotations && accept_op(":")) p.annotation = expression();
        if (accept_op("=")) p.default_value = expression();
        p.span = {b, last_end()};
        out.push_back(std::move(p));
      }
      if (!accept_op(",")) break;
    }
    return out;
  }

  // -------------------------------------------------------------------------
  // Expressions

  struct DepthGuard {
    explicit DepthGuard(Parser& p) : p(p) {
      if (++p.depth_ > kMaxNesting) p.fail("expression nested too deeply");
    }
    ~DepthGuard() { --p.depth_; }
    Parser& p;
  };

  ExprPtr star_expressions() {
    Pos b = here();
    auto first = star_expression();
    if (!at_op(",")) return first;
    auto t = compound("Tuple", b);
    t->children.push_back(std::move(first));
    while (accept_op(",")) {
      if (!starts_expression()) break;
      t->children.push_back(star_expression());
    }
    return finish(std::move(t));
  }

  ExprPtr star_expression() {
    Pos b = here();
    if (accept_op("*")) {
      auto e = node(ExprKind::Starred, b);
      e->value = bitwise_or();
      return finish(std::move(e));
    }
    return named_expression();
  }

  ExprPtr named_expression() {
    if (peek().kind == TokKind::Name && at_op(":=", 1) && !is_keyword(peek().text)) {
      Pos b = here();
      auto e = node(ExprKind::NamedExpr, b);
      e->name = expect_name();
      advance();
      e->value = expression();
      return finish(std::move(e));
    }
    return expression();
  }

  ExprPtr yield_expression() {
    Pos b = here();
    expect_kw("yield");
    if (accept_kw("from")) {
      auto e = compound("YieldFrom", b);
      e->children.push_back(expression());
      return finish(std::move(e));
    }
    auto e = compound("Yield", b);
    if (starts_expression()) e->children.push_back(star_expressions());
    return finish(std::move(e));
  }

  ExprPtr expression() {
    DepthGuard guard(*this);
    if (at_kw("lambda")) return lambda();
    Pos b = here();
    auto e = disjunction();
    if (!at_kw("if")) return e;
    advance();
    auto c = compound("IfExp", b);
    c->children.push_back(std::move(e));
    c->children.push_back(disjunction());
    expect_kw("else");
    c->children.push_back(expression());
    return finish(std::move(c));
  }

  ExprPtr lambda() {
    Pos b = here();
    expect_kw("lambda");
    auto e = node(ExprKind::Lambda, b);
    e->params = parameters(":", false);
    expect_op(":");
    e->value = expression();
    return finish(std::move(e));
  }

  ExprPtr bool_chain(std::string_view op, ExprPtr (Parser::*next)()) {
    Pos b = here();
    auto first = (this->*next)();
    if (!at_kw(op)) return first;
    auto e = compound("BoolOp", b);
    e->name = std::string(op);
    e->children.push_back(std::move(first));
    while (accept_kw(op)) e->children.push_back((this->*next)());
    return finish(std::move(e));
  }

  ExprPtr disjunction() { return bool_chain("or", &Parser::conjunction); }
  ExprPtr conjunction() { return bool_chain("and", &Parser::inversion); }

  ExprPtr inversion() {
    Pos b = here();
    if (accept_kw("not")) {
      DepthGuard guard(*this);
      auto e = compound("UnaryOp", b);
      e->name = "not";
      e->children.push_back(inversion());
      return finish(std::move(e));
    }
    return comparison();
  }

  // Returns the operator text when the next tokens form a comparison
  // operator, consuming them.
  std::optional<std::string> comparison_operator() {
    static constexpr std::array<std::string_view, 6> ops = {"==", "!=", "<", ">", "<=", ">="};
    for (auto op : ops) {
      if (accept_op(op)) return std::string(op);
    }
    if (accept_kw("in")) return "in";
    if (at_kw("not") && at_kw("in", 1)) {
      advance();
      advance();
      return "not in";
    }
    if (accept_kw("is")) return accept_kw("not") ? "is not" : "is";
    return std::nullopt;
  }

  ExprPtr comparison() {
    Pos b = here();
    auto first = bitwise_or();
    auto op = comparison_operator();
    if (!op) return first;
    auto e = compound("Compare", b);
    e->name = *op;
    e->children.push_back(std::move(first));
    e->children.push_back(bitwise_or());
    while (comparison_operator()) e->children.push_back(bitwise_or());
    return finish(std::move(e));
  }

  ExprPtr binary(std::initializer_list<std::string_view> ops, ExprPtr (Parser::*next)()) {
    Pos b = here();
    auto left = (this->*next)();
    while (true) {
      std::string_view found;
      for (auto op : ops) {
        if (at_op(op)) found = op;
      }
      if (found.empty()) return left;
      advance();
      auto e = compound("BinOp", b);
      e->name = std::string(found);
      e->children.push_back(std::move(left));
      e->children.push_back((this->*next)());
      left = finish(std::move(e));
    }
  }

  ExprPtr bitwise_or() { return binary({"|"}, &Parser::bitwise_xor); }
  ExprPtr bitwise_xor() { return binary({"^"}, &Parser::bitwise_and); }
  ExprPtr bitwise_and() { return binary({"&"}, &Parser::shift_expr); }
  ExprPtr shift_expr() { return binary({"<<", ">>"}, &Parser::sum); }
  ExprPtr sum() { return binary({"+", "-"}, &Parser::term); }
  ExprPtr term() { return binary({"*", "/", "//", "%", "@"}, &Parser::factor); }

  ExprPtr factor() {
    Pos b = here();
    for (std::string_view op : {"+", "-", "~"}) {
      if (accept_op(op)) {
        DepthGuard guard(*this);
        auto e = compound("UnaryOp", b);
        e->name = std::string(op);
        e->children.push_back(factor());
        return finish(std::move(e));
      }
    }
    return power();
  }

  ExprPtr power() {
    Pos b = here();
    ExprPtr base;
    if (accept_kw("await")) {
      base = compound("Await", b);
      base->children.push_back(primary());
      base = finish(std::move(base));
    } else {
      base = primary();
    }
    if (!accept_op("**")) return base;
    auto e = compound("BinOp", b);
    e->name = "**";
    e->children.push_back(std::move(base));
    e->children.push_back(factor());
    return finish(std::move(e));
  }

  ExprPtr primary() {
    Pos b = here();
    auto e = atom();
    while (true) {
      if (accept_op(".")) {
        auto a = node(ExprKind::Attribute, b);
        a->value = std::move(e);
        a->name = expect_name();
        e = finish(std::move(a));
      } else if (at_op("(")) {
        auto c = node(ExprKind::Call, b);
        c->lparen = here();
        advance();
        c->value = std::move(e);
        c->args = call_arguments();
        c->rparen = toks_[p_ - 1].span.begin;
        e = finish(std::move(c));
      } else if (accept_op("[")) {
        auto s = node(ExprKind::Subscript, b);
        s->value = std::move(e);
        s->children.push_back(subscript_items());
        expect_op("]");
        e = finish(std::move(s));
      } else {
        return e;
      }
    }
  }

  // After "("; consumes through the matching ")".
  std::vector<Arg> call_arguments() {
    std::vector<Arg> args;
    while (!at_op(")")) {
      Arg a;
      Pos b = here();
      if (accept_op("*")) {
        a.kind = Arg::Kind::Star;
        a.value = expression();
      } else if (accept_op("**")) {
        a.kind = Arg::Kind::DoubleStar;
        a.value = expression();
      } else if (peek().kind == TokKind::Name && at_op("=", 1) && !is_keyword(peek().text)) {
        a.kind = Arg::Kind::Keyword;
        a.keyword = expect_name();
        advance();
        a.value = expression();
      } else {
        a.value = named_expression();
        if (at_comprehension()) {
          auto g = node(ExprKind::Comprehension, b);
          g->tag = "GeneratorExp";
          g->value = std::move(a.value);
          g->generators = comprehension_clauses();
          a.value = finish(std::move(g));
        }
      }
      a.span = {b, last_end()};
      args.push_back(std::move(a));
      if (!accept_op(",")) break;
    }
    expect_op(")");
    return args;
  }

  ExprPtr slice_item() {
    Pos b = here();
    ExprPtr lower;
    if (!at_op(":")) {
      lower = star_expression();
      if (!at_op(":")) return lower;
    }
    auto s = compound("Slice", b);
    if (lower) s->children.push_back(std::move(lower));
    expect_op(":");
    if (!at_op(":") && !at_op("]") && !at_op(",")) s->children.push_back(expression());
    if (accept_op(":")) {
      if (!at_op("]") && !at_op(",")) s->children.push_back(expression());
    }
    return finish(std::move(s));
  }

  ExprPtr subscript_items() {
    Pos b = here();
    auto first = slice_item();
    if (!at_op(",")) return first;
    auto t = compound("Tuple", b);
    t->children.push_back(std::move(first));
    while (accept_op(",")) {
      if (at_op("]")) break;
      t->children.push_back(slice_item());
    }
    return finish(std::move(t));
  }

  std::vector<ComprehensionFor> comprehension_clauses() {
    std::vector<ComprehensionFor> out;
    while (at_comprehension()) {
      accept_kw("async");
      expect_kw("for");
      ComprehensionFor c;
      c.target = target_list();
      expect_kw("in");
      c.iter = disjunction();
      while (accept_kw("if")) c.conditions.push_back(disjunction());
      out.push_back(std::move(c));
    }
    return out;
  }

  ExprPtr star_target() {
    Pos b = here();
    if (accept_op("*")) {
      auto e = node(ExprKind::Starred, b);
      e->value = star_target();
      return finish(std::move(e));
    }
    return bitwise_or();
  }

  ExprPtr target_list() {
    Pos b = here();
    auto first = star_target();
    if (!at_op(",")) return first;
    auto t = compound("Tuple", b);
    t->children.push_back(std::move(first));
    while (accept_op(",")) {
      if (!starts_expression() || at_kw("in")) break;
      t->children.push_back(star_target());
    }
    return finish(std::move(t));
  }

  ExprPtr atom() {
    DepthGuard guard(*this);
    Pos b = here();
    const auto& t = peek();
    switch (t.kind) {
      case TokKind::Name: {
        if (t.text == "None" || t.text == "True" || t.text == "False") {
          auto e = node(ExprKind::Constant, b);
          e->literal = std::string(t.text);
          advance();
          return finish(std::move(e));
        }
        if (is_keyword(t.text)) fail("invalid syntax");
        auto e = node(ExprKind::Name, b);
        e->name = std::string(t.text);
        advance();
        return finish(std::move(e));
      }
      case TokKind::Number: {
        auto e = node(ExprKind::Constant, b);
        e->literal = std::string(t.text);
        advance();
        return finish(std::move(e));
      }
      case TokKind::String: {
        auto e = node(ExprKind::Constant, b);
        e->is_string = true;
        while (peek().kind == TokKind::String) {
          if (!e->literal.empty()) e->literal += ' ';
          e->literal += peek().text;
          advance();
        }
        return finish(std::move(e));
      }
      case TokKind::Op:
        if (t.text == "...") {
          auto e = node(ExprKind::Constant, b);
          e->literal = "...";
          advance();
          return finish(std::move(e));
        }
        if (t.text == "(") return parenthesized();
        if (t.text == "[") return list_display();
        if (t.text == "{") return brace_display();
        break;
      default:
        break;
    }
    fail("invalid syntax");
  }

  ExprPtr parenthesized() {
    Pos b = here();
    expect_op("(");
    if (accept_op(")")) return finish(compound("Tuple", b));
    if (at_kw("yield")) {
      auto y = yield_expression();
      expect_op(")");
      return y;
    }
    auto first = star_expression();
    if (at_comprehension()) {
      auto g = node(ExprKind::Comprehension, b);
      g->tag = "GeneratorExp";
      g->value = std::move(first);
      g->generators = comprehension_clauses();
      expect_op(")");
      return finish(std::move(g));
    }
    if (!at_op(",")) {
      expect_op(")");
      return first;
    }
    auto t = compound("Tuple", b);
    t->children.push_back(std::move(first));
    while (accept_op(",")) {
      if (at_op(")")) break;
      t->children.push_back(star_expression());
    }
    expect_op(")");
    return finish(std::move(t));
  }

  ExprPtr list_display() {
    Pos b = here();
    expect_op("[");
    if (accept_op("]")) return finish(compound("List", b));
    auto first = star_expression();
    if (at_comprehension()) {
      auto g = node(ExprKind::Comprehension, b);
      g->tag = "ListComp";
      g->value = std::move(first);
      g->generators = comprehension_clauses();
      expect_op("]");
      return finish(std::move(g));
    }
    auto l = compound("List", b);
    l->children.push_back(std::move(first));
    while (accept_op(",")) {
      if (at_op("]")) break;
      l->children.push_back(star_expression());
    }
    expect_op("]");
    return finish(std::move(l));
  }

  ExprPtr dict_rest(Pos b, ExprPtr key) {
    auto d = compound("Dict", b);
    auto entry = [&](ExprPtr k) {
      if (k) {
        d->children.push_back(std::move(k));
        expect_op(":");
        d->children.push_back(expression());
      } else {
        expect_op("**");
        d->children.push_back(bitwise_or());
      }
    };
    entry(std::move(key));
    while (accept_op(",")) {
      if (at_op("}")) break;
      entry(at_op("**") ? nullptr : expression());
    }
    expect_op("}");
    return finish(std::move(d));
  }

  ExprPtr brace_display() {
    Pos b = here();
    expect_op("{");
    if (accept_op("}")) return finish(compound("Dict", b));
    if (at_op("**")) return dict_rest(b, nullptr);
    auto first = star_expression();
    if (at_op(":")) {
      auto save = p_;
      advance();
      auto value = expression();
      if (at_comprehension()) {
        auto g = node(ExprKind::Comprehension, b);
        g->tag = "DictComp";
        g->value = std::move(first);
        g->value2 = std::move(value);
        g->generators = comprehension_clauses();
        expect_op("}");
        return finish(std::move(g));
      }
      p_ = save;
      return dict_rest(b, std::move(first));
    }
    if (at_comprehension()) {
      auto g = node(ExprKind::Comprehension, b);
      g->tag = "SetComp";
      g->value = std::move(first);
      g->generators = comprehension_clauses();
      expect_op("}");
      return finish(std::move(g));
    }
    auto s = compound("Set", b);
    s->children.push_back(std::move(first));
    while (accept_op(",")) {
      if (at_op("}")) break;
      s->children.push_back(star_expression());
    }
    expect_op("}");
    return finish(std::move(s));
  }

  std::vector<Token> toks_;
  std::size_t p_ = 0;
  int depth_ = 0;
};

}  // namespace

Module parse_module(std::string_view source) {
  return Parser(tokenize(source)).module();
}

std::optional<ArgumentList> parse_argument_list(std::string_view text) {
  auto trimmed = detail::trim(text);
  if (trimmed.empty() || trimmed.front() != '(' || trimmed.back() != ')') return std::nullopt;
  try {
    return Parser(tokenize(trimmed)).argument_list();
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace apisync::pysrc
