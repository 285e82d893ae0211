// Copyright 2026 The apisync Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <filesystem>
#include <optional>
#include <random>
#include <string>

#include <doctest.h>

#include "apisync/core_model.hpp"
#include "apisync/error.hpp"

namespace testing {

/// Code of the apisync::Error thrown by `fn`; fails the test if none is.
template <typename Fn>
apisync::Errc code_of(Fn&& fn) {
  try {
    fn();
  } catch (const apisync::Error& e) {
    return e.code();
  }
  FAIL("expected an apisync::Error");
  return apisync::Errc::Io;
}

inline std::filesystem::path fixture(const std::string& rel) {
  return std::filesystem::path(APISYNC_FIXTURE_DIR) / rel;
}

/// Fresh empty directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::path(APISYNC_SCRATCH_DIR) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Random valid parameter list; names are drawn from a small pool so that
/// collisions with renames and reorderings are frequent.
inline apisync::ParameterList random_parameter_list(std::mt19937_64& rng) {
  using apisync::Parameter;
  static const char* pool[] = {"a",    "b",     "x",     "y",    "size",  "dtype", "axis",
                               "keep", "out",   "order", "like", "fill",  "color", "colour",
                               "mode", "token", "path",  "args", "kwargs"};
  auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<unsigned>(n)); };
  std::vector<Parameter> params;
  std::vector<std::string> used;
  auto fresh = [&]() {
    for (;;) {
      std::string n = pool[pick(19)];
      if (std::find(used.begin(), used.end(), n) == used.end()) {
        used.push_back(n);
        return n;
      }
    }
  };
  auto maybe_default = [&](bool allow_required) -> std::optional<std::string> {
    static const char* defaults[] = {"None", "1", "'C'", "True", "(1, 2)", "-1.5"};
    if (allow_required && pick(2) == 0) return std::nullopt;
    return std::string(defaults[pick(6)]);
  };
  // Required parameters may not follow optional ones in the positional
  // regions, so track whether a default has been seen.
  bool seen_default = false;
  auto positional = [&](auto factory) {
    auto d = maybe_default(!seen_default);
    if (d) seen_default = true;
    auto p = factory(fresh(), d);
    if (pick(4) == 0) p.annotation_repr = pick(2) ? "int" : "Optional[str]";
    params.push_back(std::move(p));
  };
  for (int i = pick(3); i > 0; --i) positional(&Parameter::positional_only);
  for (int i = pick(4); i > 0; --i) positional(&Parameter::positional_or_keyword);
  bool var_pos = pick(3) == 0;
  if (var_pos) params.push_back(Parameter::var_positional(fresh()));
  for (int i = pick(3); i > 0; --i) {
    auto p = Parameter::keyword_only(fresh(), maybe_default(true));
    params.push_back(std::move(p));
  }
  if (pick(3) == 0) params.push_back(Parameter::var_keyword(fresh()));
  return apisync::ParameterList(std::move(params));
}

}  // namespace testing
