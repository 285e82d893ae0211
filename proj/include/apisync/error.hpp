// Copyright 2026 The apisync Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace apisync {

enum class Errc {
  SyntaxError,
  InvalidValue,
  ParseError,
  PathMismatch,
  LibraryMismatch,
  ThresholdOutOfRange,
  PathTooShort,
  BackendUnavailable,
  RateLimited,
  ResponseUnparseable,
  DistractorExhausted,
  EmptyReference,
  InvalidCounts,
  MissingItem,
  MissingPrerequisite,
  ConfigInvalid,
  ExternalService,
  Io,
};

std::string_view errc_name(Errc code) noexcept;

/// Single exception type for the library; the code tells callers which
/// contract was violated.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace apisync
