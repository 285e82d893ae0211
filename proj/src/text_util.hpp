// Copyright 2026 The apisync Authors
// SPDX-License-Identifier: Apache-2.0

// Internal string helpers shared by the library sources.

#pragma once

#include <cctype>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace apisync::detail {

inline bool is_space(char c) noexcept {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

inline std::string_view trim(std::string_view s) noexcept {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Index just past the string literal whose opening quote is at `i`, or npos
/// when unterminated. Handles triple quotes and backslash escapes.
std::size_t skip_string_literal(std::string_view s, std::size_t i) noexcept;

/// Index of the bracket closing the one opened at `open`, honoring nesting
/// and string literals; npos when unbalanced.
std::size_t find_matching_close(std::string_view s, std::size_t open) noexcept;

/// First occurrence of `c` outside brackets and string literals.
std::size_t find_top_level(std::string_view s, char c) noexcept;

/// First top-level "=" that is an assignment rather than part of a
/// comparison operator.
std::size_t find_assignment(std::string_view s) noexcept;

/// Splits on `sep` at bracket depth zero, outside string literals. Throws
/// Error(SyntaxError) on unbalanced brackets or unterminated strings.
std::vector<std::string_view> split_top_level(std::string_view s, char sep);

std::u32string utf8_to_u32(std::string_view s);

/// Unit-cost Levenshtein distance.
template <typename Seq>
std::size_t edit_distance(const Seq& a, const Seq& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t up = row[j];
      std::size_t best = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
      if (up + 1 < best) best = up + 1;
      if (row[j - 1] + 1 < best) best = row[j - 1] + 1;
      row[j] = best;
      diag = up;
    }
  }
  return row[b.size()];
}

std::uint64_t fnv1a64(std::string_view s) noexcept;

}  // namespace apisync::detail
