// Copyright 2026 The apisync Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "apisync/core_model.hpp"
#include "apisync/error.hpp"
#include "apisync/update_detector.hpp"

namespace apisync {

inline constexpr std::size_t kDefaultTemplateCap = 500;

/// Literal segments that must all occur in a retrieved file.
struct SearchTemplate {
  std::vector<std::string> segments;

  bool operator==(const SearchTemplate&) const = default;
};

/// Import-aware query templates for an API. For a function or initializer
/// path f0...f(n-1) this is the full-path literal followed, for each split
/// point, by the `import <prefix> as` form and the `from <prefix> import
/// <field>` form, 2n-1 templates in total. Methods expand their class path the
/// same way and append ".<method>(" to every template.
std::vector<SearchTemplate> enumerate_templates(const DottedPath& path, ApiKind kind);

struct FileRef {
  std::string source_id;
  std::size_t template_index = 0;
  std::string url;

  bool operator==(const FileRef&) const = default;
};

class RateLimitedError : public Error {
 public:
  RateLimitedError(const std::string& what, std::chrono::milliseconds retry_after)
      : Error(Errc::RateLimited, what), retry_after_(retry_after) {}
  std::chrono::milliseconds retry_after() const noexcept { return retry_after_; }

 private:
  std::chrono::milliseconds retry_after_;
};

/// Code search contract: `search` returns at most `cap` files whose content
/// contains every segment of the template. Implementations throw
/// Error(BackendUnavailable) once their own retries are exhausted and
/// RateLimitedError when the service asks callers to pause.
class CodeSearchBackend {
 public:
  virtual ~CodeSearchBackend() = default;
  virtual std::vector<FileRef> search(const SearchTemplate& tmpl, std::size_t cap) = 0;
  virtual std::string fetch(const FileRef& ref) = 0;
};

/// Scans a directory tree of source files; used for tests and offline runs.
class LocalCorpusBackend final : public CodeSearchBackend {
 public:
  explicit LocalCorpusBackend(std::filesystem::path root, std::string extension = ".py");

  std::vector<FileRef> search(const SearchTemplate& tmpl, std::size_t cap) override;
  std::string fetch(const FileRef& ref) override;

  /// Relative paths with their contents, in sorted order.
  const std::vector<std::pair<std::string, std::string>>& files() const noexcept {
    return files_;
  }

 private:
  std::filesystem::path root_;
  std::vector<std::pair<std::string, std::string>> files_;
};

struct RemoteBackendConfig {
  std::string base_url;
  std::string token_env = "APISYNC_SEARCH_TOKEN";
  std::string language = "python";
  int max_retries = 3;
  std::chrono::milliseconds backoff{500};
  std::chrono::milliseconds timeout{30000};
};

/// HTTP code-search client.
///   POST <base>/search  {"terms": [...], "language": ..., "limit": cap}
///     -> {"items": [{"source_id": ..., "url": ...}, ...]}
///   GET <item url>      -> raw file content
/// A bearer token is read from `token_env` when set. 429 responses raise
/// RateLimitedError (honoring Retry-After); transport errors and 5xx are
/// retried with exponential backoff.
class RemoteSearchBackend final : public CodeSearchBackend {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit RemoteSearchBackend(RemoteBackendConfig config, Sleeper sleeper = {});

  std::vector<FileRef> search(const SearchTemplate& tmpl, std::size_t cap) override;
  std::string fetch(const FileRef& ref) override;

 private:
  std::string request(const std::string& method, const std::string& url,
                      const std::string& body);

  RemoteBackendConfig config_;
  Sleeper sleep_;
};

struct SearchPlan {
  std::map<DottedPath, std::vector<SearchTemplate>> templates;
  std::size_t cap = kDefaultTemplateCap;
};

SearchPlan make_search_plan(const std::vector<UpdateRecord>& updates,
                            std::size_t cap = kDefaultTemplateCap);

struct PlanFailure {
  DottedPath api_path;
  std::string reason;
};

struct PlanResult {
  std::map<DottedPath, std::vector<FileRef>> files;
  std::vector<PlanFailure> failures;
};

struct SchedulerOptions {
  // Total pauses tolerated for rate limiting before giving up on the run.
  int max_rate_limit_pauses = 8;
  std::function<void(std::chrono::milliseconds)> sleeper;
};

/// Runs every template of every API through the backend and merges results
/// per API, deduplicated by source id in first-seen order. A backend outage
/// fails only the affected API; rate limiting pauses the whole run and, past
/// the pause budget, throws Error(ExternalService).
PlanResult plan_search(const SearchPlan& plan, CodeSearchBackend& backend,
                       const SchedulerOptions& options = {});

PlanResult plan_search(const DiffReport& report, CodeSearchBackend& backend,
                       std::size_t cap = kDefaultTemplateCap);

}  // namespace apisync
