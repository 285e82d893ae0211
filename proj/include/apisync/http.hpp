// Copyright 2026 The apisync Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <string>

namespace apisync::http {

struct Response {
  int status = 0;  // 0 when no response was received
  std::string body;
  std::map<std::string, std::string> headers;
  std::string transport_error;
};

struct Request {
  std::string method = "GET";
  std::string url;  // absolute http:// or https:// URL
  std::map<std::string, std::string> headers;
  std::string body;
  std::string content_type = "application/json";
  std::chrono::milliseconds timeout{30000};
};

/// Performs one request; transport failures are reported in the response,
/// never thrown. Throws Error(InvalidValue) for malformed URLs.
Response send(const Request& request);

/// Resolves `ref` against `base` when it is not already absolute.
std::string resolve_url(const std::string& base, const std::string& ref);

/// Value of an environment variable, or nullopt when unset or empty.
std::optional<std::string> env(const std::string& name);

}  // namespace apisync::http
