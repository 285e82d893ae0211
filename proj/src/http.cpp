// Copyright 2026 The apisync Authors
// SPDX-License-Identifier: Apache-2.0

#include "apisync/http.hpp"

#include <cstdlib>

#include <httplib.h>

#include "apisync/error.hpp"

namespace apisync::http {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string target;  // path and query, starting with "/"
};

SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(Errc::InvalidValue, "not an absolute URL: " + url);
  }
  auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw Error(Errc::InvalidValue, "unsupported URL scheme: " + url);
  }
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

Response send(const Request& request) {
  auto [origin, target] = split_url(request.url);
  httplib::Client client(origin);
  auto secs = request.timeout.count() / 1000;
  auto usecs = (request.timeout.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  httplib::Headers headers;
  for (const auto& [k, v] : request.headers) headers.emplace(k, v);

  httplib::Result result = [&] {
    if (request.method == "POST") {
      return client.Post(target, headers, request.body, request.content_type);
    }
    return client.Get(target, headers);
  }();

  Response response;
  if (!result) {
    response.transport_error = httplib::to_string(result.error());
    return response;
  }
  response.status = result->status;
  response.body = result->body;
  for (const auto& [k, v] : result->headers) response.headers[k] = v;
  return response;
}

std::string resolve_url(const std::string& base, const std::string& ref) {
  if (ref.find("://") != std::string::npos) return ref;
  std::string b = base;
  while (!b.empty() && b.back() == '/') b.pop_back();
  return ref.starts_with("/") ? b + ref : b + "/" + ref;
}

std::optional<std::string> env(const std::string& name) {
  if (name.empty()) return std::nullopt;
  const char* v = std::getenv(name.c_str());
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

}  // namespace apisync::http
