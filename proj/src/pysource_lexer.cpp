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

constexpr std::array<std::string_view, 35> kKeywords = {
    "False", "None",   "True",    "and",      "as",     "assert", "async",
    "await", "break",  "class",   "continue", "def",    "del",    "elif",
    "else",  "except", "finally", "for",      "from",   "global", "if",
    "import", "in",    "is",      "lambda",   "nonlocal", "not",  "or",
    "pass",  "raise",  "return",  "try",      "while",  "with",   "yield"};

// Multi-character operators, longest first.
constexpr std::array<std::string_view, 24> kMultiOps = {
    "**=", "//=", ">>=", "<<=", "...", "**", "//", "<<", ">>", "<=", ">=", "==", "!=",
    "->", ":=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "@="};
constexpr std::string_view kOps1 = "+-*/%@&|^~<>()[]{},:.;=";

bool name_start(unsigned char c) {
  return std::isalpha(c) || c == '_' || c >= 0x80;
}
bool name_char(unsigned char c) {
  return std::isalnum(c) || c == '_' || c >= 0x80;
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    indents_.push_back(0);
    at_line_start_ = true;
    while (true) {
      if (at_line_start_ && depth_ == 0) {
        if (!handle_indentation()) break;
      }
      skip_inline_space();
      if (i_ >= src_.size()) break;
      char c = src_[i_];
      if (c == '#') {
        while (i_ < src_.size() && src_[i_] != '\n' && src_[i_] != '\r') ++i_;
        continue;
      }
      if (c == '\\') {
        std::size_t j = i_ + 1;
        if (j < src_.size() && src_[j] == '\r') ++j;
        if (j < src_.size() && src_[j] == '\n') {
          while (i_ <= j) advance();
          continue;
        }
        fail("unexpected backslash");
      }
      if (c == '\n' || c == '\r') {
        consume_newline();
        if (depth_ == 0 && line_has_tokens_) {
          emit_at(TokKind::Newline, last_end_, last_end_);
        }
        line_has_tokens_ = depth_ > 0 && line_has_tokens_;
        if (depth_ == 0) at_line_start_ = true;
        continue;
      }
      lex_token();
    }
    if (depth_ > 0) fail("unexpected end of file inside brackets");
    Pos end = here();
    if (line_has_tokens_) emit_at(TokKind::Newline, last_end_, last_end_);
    while (indents_.size() > 1) {
      indents_.pop_back();
      emit_at(TokKind::Dedent, end, end);
    }
    emit_at(TokKind::End, end, end);
    return std::move(out_);
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(Errc::ParseError, "line " + std::to_string(line_) + ": " + what);
  }

  Pos here() const { return Pos{i_, line_, static_cast<int>(i_ - line_start_)}; }

  void advance() {
    if (src_[i_] == '\n') {
      ++i_;
      ++line_;
      line_start_ = i_;
    } else {
      ++i_;
    }
  }

  void consume_newline() {
    if (src_[i_] == '\r') {
      ++i_;
      if (i_ < src_.size() && src_[i_] == '\n') {
        advance();
      } else {
        ++line_;
        line_start_ = i_;
      }
    } else {
      advance();
    }
  }

  void skip_inline_space() {
    while (i_ < src_.size() && (src_[i_] == ' ' || src_[i_] == '\t' || src_[i_] == '\f')) ++i_;
  }

  // Returns false at end of input.
  bool handle_indentation() {
    while (i_ < src_.size()) {
      std::size_t width = 0;
      while (i_ < src_.size()) {
        char c = src_[i_];
        if (c == ' ') {
          ++width;
        } else if (c == '\t') {
          width = (width / 8 + 1) * 8;
        } else if (c == '\f') {
          width = 0;
        } else {
          break;
        }
        ++i_;
      }
      if (i_ >= src_.size()) return false;
      char c = src_[i_];
      if (c == '#') {
        while (i_ < src_.size() && src_[i_] != '\n' && src_[i_] != '\r') ++i_;
        continue;
      }
      if (c == '\n' || c == '\r') {
        consume_newline();
        continue;
      }
      if (c == '\\') {
        // A continuation line at the start of a logical line; treat the
        // indentation as that of this physical line.
        at_line_start_ = false;
        apply_indent(width);
        return true;
      }
      at_line_start_ = false;
      apply_indent(width);
      return true;
    }
    return false;
  }

  void apply_indent(std::size_t width) {
    Pos p = here();
    if (width > indents_.back()) {
      indents_.push_back(width);
      emit_at(TokKind::Indent, p, p);
      return;
    }
    while (width < indents_.back()) {
      indents_.pop_back();
      emit_at(TokKind::Dedent, p, p);
    }
    if (width != indents_.back()) fail("unindent does not match any outer indentation level");
  }

  void emit_at(TokKind kind, Pos b, Pos e) {
    out_.push_back(Token{kind, src_.substr(b.offset, e.offset - b.offset), Span{b, e}});
  }

  void emit(TokKind kind, Pos b) {
    Pos e = here();
    emit_at(kind, b, e);
    last_end_ = e;
    line_has_tokens_ = true;
  }

  static bool is_string_prefix(std::string_view p) {
    if (p.size() > 2) return false;
    std::string lower;
    for (char c : p) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    static constexpr std::array<std::string_view, 11> ok = {"r",  "u",  "b",  "f",  "t", "br",
                                                           "rb", "fr", "rf", "tr", "rt"};
    return std::find(ok.begin(), ok.end(), lower) != ok.end();
  }

  // Scans a string body starting at the opening quote. `fmt` enables
  // replacement-field scanning so nested quotes inside braces are allowed.
  void scan_string(bool fmt) {
    char q = src_[i_];
    bool triple = i_ + 2 < src_.size() && src_[i_ + 1] == q && src_[i_ + 2] == q;
    std::size_t qlen = triple ? 3 : 1;
    for (std::size_t k = 0; k < qlen; ++k) advance();
    while (true) {
      if (i_ >= src_.size()) fail("unterminated string literal");
      char c = src_[i_];
      if (c == '\\') {
        advance();
        // Braces keep their meaning after a backslash in formatted strings.
        bool brace = i_ < src_.size() && (src_[i_] == '{' || src_[i_] == '}');
        if (i_ < src_.size() && !(fmt && brace)) advance();
        continue;
      }
      if (!triple && (c == '\n' || c == '\r')) fail("unterminated string literal");
      if (c == q) {
        if (!triple) {
          advance();
          return;
        }
        if (i_ + 2 < src_.size() && src_[i_ + 1] == q && src_[i_ + 2] == q) {
          advance();
          advance();
          advance();
          return;
        }
      }
      if (fmt && c == '{') {
        if (i_ + 1 < src_.size() && src_[i_ + 1] == '{') {
          advance();
          advance();
          continue;
        }
        scan_replacement_field();
        continue;
      }
      advance();
    }
  }

  // At "{" inside a formatted string; consumes through the matching "}".
  void scan_replacement_field() {
    int depth = 0;
    advance();
    while (true) {
      if (i_ >= src_.size()) fail("unterminated replacement field");
      char c = src_[i_];
      if (c == '(' || c == '[' || c == '{') {
        ++depth;
      } else if (c == ')' || c == ']') {
        --depth;
      } else if (c == '}') {
        if (depth == 0) {
          advance();
          return;
        }
        --depth;
      } else if (c == '\'' || c == '"') {
        bool nested_fmt = false;
        std::size_t k = i_;
        while (k > 0 && name_char(static_cast<unsigned char>(src_[k - 1]))) --k;
        auto prefix = src_.substr(k, i_ - k);
        for (char p : prefix) {
          if (p == 'f' || p == 'F' || p == 't' || p == 'T') nested_fmt = true;
        }
        scan_string(nested_fmt);
        continue;
      }
      advance();
    }
  }

  void lex_token() {
    Pos b = here();
    auto c = static_cast<unsigned char>(src_[i_]);
    if (name_start(c)) {
      std::size_t j = i_;
      while (j < src_.size() && name_char(static_cast<unsigned char>(src_[j]))) ++j;
      auto word = src_.substr(i_, j - i_);
      if (j < src_.size() && (src_[j] == '\'' || src_[j] == '"') && is_string_prefix(word)) {
        bool fmt = word.find_first_of("fFtT") != std::string_view::npos;
        i_ = j;
        scan_string(fmt);
        emit(TokKind::String, b);
        return;
      }
      i_ = j;
      emit(TokKind::Name, b);
      return;
    }
    if (c == '\'' || c == '"') {
      scan_string(false);
      emit(TokKind::String, b);
      return;
    }
    if (std::isdigit(c) ||
        (c == '.' && i_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i_ + 1])))) {
      lex_number();
      emit(TokKind::Number, b);
      return;
    }
    auto rest = src_.substr(i_);
    for (auto op : kMultiOps) {
      if (rest.starts_with(op)) return lex_op(b, op.size());
    }
    if (kOps1.find(static_cast<char>(c)) != std::string_view::npos) return lex_op(b, 1);
    fail(std::string("unexpected character '") + static_cast<char>(c) + "'");
  }

  void lex_op(Pos b, std::size_t n) {
    char c = src_[i_];
    if (n == 1) {
      if (c == '(' || c == '[' || c == '{') ++depth_;
      if (c == ')' || c == ']' || c == '}') {
        if (depth_ == 0) fail(std::string("unmatched '") + c + "'");
        --depth_;
      }
    }
    i_ += n;
    emit(TokKind::Op, b);
  }

  void lex_number() {
    bool radix = src_[i_] == '0' && i_ + 1 < src_.size() &&
                 std::string_view("xXoObB").find(src_[i_ + 1]) != std::string_view::npos;
    while (i_ < src_.size()) {
      auto ch = static_cast<unsigned char>(src_[i_]);
      if (std::isalnum(ch) || ch == '_' || ch == '.') {
        ++i_;
        if (!radix && (ch == 'e' || ch == 'E') && i_ < src_.size() &&
            (src_[i_] == '+' || src_[i_] == '-')) {
          ++i_;
        }
        continue;
      }
      break;
    }
  }

  std::string_view src_;
  std::size_t i_ = 0;
  int line_ = 1;
  std::size_t line_start_ = 0;
  int depth_ = 0;
  bool at_line_start_ = true;
  bool line_has_tokens_ = false;
  Pos last_end_;
  std::vector<std::size_t> indents_;
  std::vector<Token> out_;
};

}  // namespace

bool is_keyword(std::string_view name) noexcept {
  return std::find(kKeywords.begin(), kKeywords.end(), name) != kKeywords.end();
}

std::vector<Token> tokenize(std::string_view source) {
  return Lexer(source).run();
}

std::string normalize_code(std::string_view text) {
  std::string out;
  try {
    for (const auto& t : tokenize(text)) {
      if (t.kind != TokKind::Name && t.kind != TokKind::Number && t.kind != TokKind::String &&
          t.kind != TokKind::Op) {
        continue;
      }
      if (!out.empty()) out += ' ';
      out += t.text;
    }
    return out;
  } catch (const Error&) {
  }
  out.clear();
  bool pending = false;
  for (char c : text) {
    if (detail::is_space(c)) {
      pending = !out.empty();
      continue;
    }
    if (pending) out += ' ';
    pending = false;
    out += c;
  }
  return out;
}

}  // namespace apisync::pysrc
