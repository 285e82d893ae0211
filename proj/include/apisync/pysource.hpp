// Copyright 2026 The apisync Authors
// SPDX-License-Identifier: Apache-2.0

// Tokenizer and syntax tree for the analyzed ecosystem's source language
// (Python 3 through 3.12 syntax). The tree keeps only what call-site analysis
// needs; everything else is folded into generic compound nodes.

#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "apisync/core_model.hpp"

namespace apisync::pysrc {

struct Pos {
  std::size_t offset = 0;
  int line = 1;  // 1-based
  int col = 0;   // 0-based, in bytes

  auto operator<=>(const Pos& o) const noexcept { return offset <=> o.offset; }
  bool operator==(const Pos& o) const noexcept { return offset == o.offset; }
};

struct Span {
  Pos begin;
  Pos end;  // one past the last byte
};

enum class TokKind { Name, Number, String, Op, Newline, Indent, Dedent, End };

struct Token {
  TokKind kind;
  std::string_view text;
  Span span;
};

/// Throws Error(ParseError) on lexical errors and inconsistent indentation.
std::vector<Token> tokenize(std::string_view source);

struct Expr;
struct Stmt;
using ExprPtr = std::unique_ptr<Expr>;
using StmtPtr = std::unique_ptr<Stmt>;
using Block = std::vector<StmtPtr>;

enum class ExprKind {
  Name,
  Attribute,
  Call,
  Constant,
  Subscript,
  Starred,
  Lambda,
  Comprehension,
  NamedExpr,
  Compound,  // operators, displays, conditionals, slices, await, yield
};

struct Arg {
  enum class Kind { Positional, Keyword, Star, DoubleStar };
  Kind kind = Kind::Positional;
  std::string keyword;
  ExprPtr value;
  Span span;
};

struct ParamDecl {
  std::string name;
  ParamKind kind = ParamKind::PositionalOrKeyword;
  ExprPtr annotation;
  ExprPtr default_value;
  Span span;
};

struct ComprehensionFor {
  ExprPtr target;
  ExprPtr iter;
  std::vector<ExprPtr> conditions;
};

struct Expr {
  ExprKind kind = ExprKind::Compound;
  Span span;
  // Compound node label such as "Tuple", "BinOp", "Compare", "Dict".
  std::string tag;
  // Name id, Attribute attribute, NamedExpr target.
  std::string name;
  // Constant source text.
  std::string literal;
  bool is_string = false;
  // Attribute / Subscript / Starred base, Call callee, NamedExpr value,
  // Lambda body, Comprehension element.
  ExprPtr value;
  // Dict comprehension value.
  ExprPtr value2;
  std::vector<Arg> args;  // Call
  Pos lparen;             // Call: the "(" token
  Pos rparen;             // Call: the ")" token
  std::vector<ExprPtr> children;
  std::vector<ParamDecl> params;  // Lambda
  std::vector<ComprehensionFor> generators;
};

enum class StmtKind {
  Expr,
  Assign,
  AugAssign,
  AnnAssign,
  Import,
  ImportFrom,
  FunctionDef,
  ClassDef,
  Return,
  Delete,
  Global,
  Nonlocal,
  If,
  For,
  While,
  Try,
  With,
  Match,
  TypeAlias,
  Pass,
  Break,
  Continue,
  Raise,
  Assert,
};

struct ImportName {
  std::string module;  // dotted name as written, or the imported member
  std::optional<std::string> asname;
};

struct ExceptHandler {
  ExprPtr type;
  std::optional<std::string> name;
  Block body;
};

struct WithItem {
  ExprPtr context;
  ExprPtr target;
};

struct MatchCase {
  std::vector<std::string> captures;
  ExprPtr guard;
  Block body;
};

struct Stmt {
  StmtKind kind = StmtKind::Pass;
  Span span;
  // Assign: one entry per "=" target. AugAssign / AnnAssign / For / Delete
  // targets also live here.
  std::vector<ExprPtr> targets;
  // Assigned value, expression statement, return value, test, iterable,
  // match subject or raised exception.
  ExprPtr value;
  // AnnAssign annotation, FunctionDef return annotation.
  ExprPtr annotation;
  // Raise cause, assert message.
  ExprPtr extra;
  std::vector<ImportName> names;
  std::string module;  // ImportFrom
  int level = 0;       // ImportFrom relative level
  bool star = false;   // ImportFrom "*"
  std::string name;    // FunctionDef / ClassDef / TypeAlias
  std::vector<ParamDecl> params;
  std::vector<ExprPtr> decorators;
  std::vector<Arg> bases;
  Block body;
  Block orelse;
  Block finalbody;
  std::vector<ExceptHandler> handlers;
  std::vector<WithItem> items;
  std::vector<MatchCase> cases;
  std::vector<std::string> identifiers;  // Global / Nonlocal
  bool is_async = false;
  // First token of the definition proper ("def", "async" or "class"),
  // after any decorators.
  Pos keyword;
};

struct Module {
  Block body;
};

/// Throws Error(ParseError) with the offending line.
Module parse_module(std::string_view source);

/// A parenthesized call argument list such as "(a, b=1, *rest)".
struct ArgumentList {
  std::vector<Arg> args;
};

/// Parses text that is exactly one parenthesized argument list, or returns
/// nullopt.
std::optional<ArgumentList> parse_argument_list(std::string_view text);

/// Token texts joined by single spaces, ignoring comments and layout. Two
/// snippets that differ only in whitespace normalize identically. Falls
/// back to whitespace collapsing when the text does not tokenize.
std::string normalize_code(std::string_view text);

/// Source text of a span.
inline std::string_view slice(std::string_view source, const Span& span) {
  return source.substr(span.begin.offset, span.end.offset - span.begin.offset);
}

bool is_keyword(std::string_view name) noexcept;

}  // namespace apisync::pysrc
