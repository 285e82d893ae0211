// Copyright 2026 The apisync Authors
// SPDX-License-Identifier: Apache-2.0

#include "text_util.hpp"

#include "apisync/error.hpp"

namespace apisync::detail {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::size_t skip_string_literal(std::string_view s, std::size_t i) noexcept {
  const char q = s[i];
  const bool triple = i + 2 < s.size() && s[i + 1] == q && s[i + 2] == q;
  std::size_t j = i + (triple ? 3 : 1);
  while (j < s.size()) {
    char c = s[j];
    if (c == '\\') {
      j += 2;
      continue;
    }
    if (c == q) {
      if (!triple) return j + 1;
      if (j + 2 < s.size() && s[j + 1] == q && s[j + 2] == q) return j + 3;
    }
    if (c == '\n' && !triple) return std::string_view::npos;
    ++j;
  }
  return std::string_view::npos;
}

namespace {

bool is_open(char c) { return c == '(' || c == '[' || c == '{'; }
bool is_close(char c) { return c == ')' || c == ']' || c == '}'; }
char closer_of(char c) { return c == '(' ? ')' : c == '[' ? ']' : '}'; }

// Walks `s` and calls visit(index) for every character at depth zero that is
// outside string literals. Returns false on imbalance.
template <typename Visit>
bool walk_top_level(std::string_view s, Visit&& visit) {
  std::string stack;
  for (std::size_t i = 0; i < s.size();) {
    char c = s[i];
    if (c == '"' || c == '\'') {
      auto end = skip_string_literal(s, i);
      if (end == std::string_view::npos) return false;
      i = end;
      continue;
    }
    if (is_open(c)) {
      stack.push_back(closer_of(c));
    } else if (is_close(c)) {
      if (stack.empty() || stack.back() != c) return false;
      stack.pop_back();
    } else if (stack.empty()) {
      if (!visit(i)) return true;
    }
    ++i;
  }
  return stack.empty();
}

}  // namespace

std::size_t find_matching_close(std::string_view s, std::size_t open) noexcept {
  if (open >= s.size() || !is_open(s[open])) return std::string_view::npos;
  std::string stack;
  for (std::size_t i = open; i < s.size();) {
    char c = s[i];
    if (c == '"' || c == '\'') {
      auto end = skip_string_literal(s, i);
      if (end == std::string_view::npos) return std::string_view::npos;
      i = end;
      continue;
    }
    if (is_open(c)) {
      stack.push_back(closer_of(c));
    } else if (is_close(c)) {
      if (stack.empty() || stack.back() != c) return std::string_view::npos;
      stack.pop_back();
      if (stack.empty()) return i;
    }
    ++i;
  }
  return std::string_view::npos;
}

std::size_t find_top_level(std::string_view s, char c) noexcept {
  std::size_t found = std::string_view::npos;
  walk_top_level(s, [&](std::size_t i) {
    if (s[i] == c) {
      found = i;
      return false;
    }
    return true;
  });
  return found;
}

std::size_t find_assignment(std::string_view s) noexcept {
  std::size_t found = std::string_view::npos;
  walk_top_level(s, [&](std::size_t i) {
    if (s[i] != '=') return true;
    bool next_eq = i + 1 < s.size() && s[i + 1] == '=';
    bool prev_op = i > 0 && (s[i - 1] == '=' || s[i - 1] == '!' ||
                             s[i - 1] == '<' || s[i - 1] == '>');
    if (!next_eq && !prev_op) {
      found = i;
      return false;
    }
    return true;
  });
  return found;
}

std::vector<std::string_view> split_top_level(std::string_view s, char sep) {
  std::vector<std::size_t> cuts;
  bool ok = walk_top_level(s, [&](std::size_t i) {
    if (s[i] == sep) cuts.push_back(i);
    return true;
  });
  if (!ok) {
    throw Error(Errc::SyntaxError,
                "unbalanced brackets or quotes in '" + std::string(s) + "'");
  }
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (auto cut : cuts) {
    out.push_back(s.substr(start, cut - start));
    start = cut + 1;
  }
  out.push_back(s.substr(start));
  return out;
}

std::u32string utf8_to_u32(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    auto b = static_cast<unsigned char>(s[i]);
    std::size_t len = b < 0x80 ? 1 : (b >> 5) == 0x6 ? 2 : (b >> 4) == 0xE ? 3
                                   : (b >> 3) == 0x1E ? 4 : 1;
    if (i + len > s.size()) len = 1;
    char32_t cp = len == 1 ? b : len == 2 ? (b & 0x1F) : len == 3 ? (b & 0x0F) : (b & 0x07);
    bool valid = len > 1 || b < 0x80;
    for (std::size_t k = 1; k < len; ++k) {
      auto cont = static_cast<unsigned char>(s[i + k]);
      if ((cont >> 6) != 0x2) {
        valid = false;
        break;
      }
      cp = (cp << 6) | (cont & 0x3F);
    }
    if (!valid) {
      // Undecodable bytes count as one character each.
      out.push_back(b);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace apisync::detail
