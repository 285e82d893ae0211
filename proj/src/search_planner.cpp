// Copyright 2026 The apisync Authors
// SPDX-License-Identifier: Apache-2.0

#include "apisync/search_planner.hpp"

#include <algorithm>
#include <set>
#include <thread>

#include "apisync/http.hpp"
#include "apisync/io.hpp"

namespace apisync {

namespace {

std::string joined(const std::vector<std::string>& f, std::size_t from, std::size_t to) {
  std::string out;
  for (std::size_t i = from; i < to; ++i) {
    if (i > from) out += '.';
    out += f[i];
  }
  return out;
}

std::vector<SearchTemplate> expand_path(const DottedPath& path) {
  const auto& f = path.fields();
  const auto n = f.size();
  if (n < 2) {
    throw Error(Errc::PathTooShort, path.str() + " has fewer than two fields");
  }
  std::vector<SearchTemplate> out;
  out.push_back({{path.str()}});
  for (std::size_t k = 1; k < n; ++k) {
    // Module prefix f0..f(k-1) imported under an alias.
    out.push_back({{"import " + joined(f, 0, k) + " as", "." + joined(f, k, n)}});
    // Field fk imported from its parent.
    SearchTemplate from{{"from " + joined(f, 0, k) + " import " + f[k]}};
    if (k + 1 < n) from.segments.push_back("." + joined(f, k + 1, n));
    out.push_back(std::move(from));
  }
  return out;
}

}  // namespace

std::vector<SearchTemplate> enumerate_templates(const DottedPath& path, ApiKind kind) {
  if (kind != ApiKind::Method) return expand_path(path);
  if (path.size() < 3) {
    throw Error(Errc::PathTooShort,
                path.str() + ": a method needs a class path of two or more fields");
  }
  auto out = expand_path(path.parent());
  for (auto& t : out) t.segments.push_back("." + path.back() + "(");
  return out;
}

// ---------------------------------------------------------------------------
// Local corpus

LocalCorpusBackend::LocalCorpusBackend(std::filesystem::path root, std::string extension)
    : root_(std::move(root)) {
  if (!std::filesystem::is_directory(root_)) {
    throw Error(Errc::BackendUnavailable, "corpus root " + root_.string() + " is not a directory");
  }
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root_)) {
    if (!entry.is_regular_file() || entry.path().extension() != extension) continue;
    files_.emplace_back(std::filesystem::relative(entry.path(), root_).generic_string(),
                        io::read_file(entry.path()));
  }
  std::sort(files_.begin(), files_.end());
}

std::vector<FileRef> LocalCorpusBackend::search(const SearchTemplate& tmpl, std::size_t cap) {
  std::vector<FileRef> out;
  for (const auto& [id, content] : files_) {
    if (out.size() >= cap) break;
    bool all = std::all_of(tmpl.segments.begin(), tmpl.segments.end(),
                           [&](const std::string& s) { return content.find(s) != std::string::npos; });
    // Relative to the corpus root so outputs do not depend on its location.
    if (all) out.push_back({id, 0, "local:" + id});
  }
  return out;
}

std::string LocalCorpusBackend::fetch(const FileRef& ref) {
  auto it = std::lower_bound(files_.begin(), files_.end(), ref.source_id,
                             [](const auto& e, const std::string& id) { return e.first < id; });
  if (it == files_.end() || it->first != ref.source_id) {
    throw Error(Errc::BackendUnavailable, "unknown corpus file " + ref.source_id);
  }
  return it->second;
}

// ---------------------------------------------------------------------------
// Remote search service

RemoteSearchBackend::RemoteSearchBackend(RemoteBackendConfig config, Sleeper sleeper)
    : config_(std::move(config)), sleep_(std::move(sleeper)) {
  if (config_.base_url.empty()) {
    throw Error(Errc::ConfigInvalid, "remote search backend needs a base_url");
  }
  if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::string RemoteSearchBackend::request(const std::string& method, const std::string& url,
                                         const std::string& body) {
  http::Request req;
  req.method = method;
  req.url = url;
  req.body = body;
  req.timeout = config_.timeout;
  if (auto token = http::env(config_.token_env)) {
    req.headers["Authorization"] = "Bearer " + *token;
  }
  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) sleep_(config_.backoff * (1 << (attempt - 1)));
    auto resp = http::send(req);
    if (resp.status == 429) {
      std::chrono::milliseconds wait{1000};
      if (auto it = resp.headers.find("Retry-After"); it != resp.headers.end()) {
        try {
          wait = std::chrono::milliseconds(std::stoll(it->second) * 1000);
        } catch (const std::exception&) {
        }
      }
      throw RateLimitedError(url + " rate limited", wait);
    }
    if (resp.status >= 200 && resp.status < 300) return resp.body;
    if (resp.status >= 400 && resp.status < 500) {
      throw Error(Errc::BackendUnavailable, url + " returned " + std::to_string(resp.status));
    }
    last_error = resp.status ? "HTTP " + std::to_string(resp.status) : resp.transport_error;
  }
  throw Error(Errc::BackendUnavailable, url + " failed after retries: " + last_error);
}

std::vector<FileRef> RemoteSearchBackend::search(const SearchTemplate& tmpl, std::size_t cap) {
  Json body{{"terms", tmpl.segments}, {"language", config_.language}, {"limit", cap}};
  auto text = request("POST", http::resolve_url(config_.base_url, "/search"), body.dump());
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(Errc::BackendUnavailable, std::string("malformed search response: ") + e.what());
  }
  std::vector<FileRef> out;
  if (!doc.contains("items") || !doc["items"].is_array()) {
    throw Error(Errc::BackendUnavailable, "search response without items");
  }
  for (const auto& item : doc["items"]) {
    if (out.size() >= cap) break;
    FileRef ref;
    ref.source_id = item.at("source_id").get<std::string>();
    ref.url = http::resolve_url(config_.base_url, item.value("url", "/files/" + ref.source_id));
    out.push_back(std::move(ref));
  }
  return out;
}

std::string RemoteSearchBackend::fetch(const FileRef& ref) {
  return request("GET", ref.url, "");
}

// ---------------------------------------------------------------------------
// Planning

SearchPlan make_search_plan(const std::vector<UpdateRecord>& updates, std::size_t cap) {
  if (cap < 1) throw Error(Errc::InvalidValue, "template cap must be at least 1");
  SearchPlan plan;
  plan.cap = cap;
  for (const auto& u : updates) {
    plan.templates.emplace(u.api_path, enumerate_templates(u.api_path, u.kind));
  }
  return plan;
}

PlanResult plan_search(const SearchPlan& plan, CodeSearchBackend& backend,
                       const SchedulerOptions& options) {
  auto sleeper = options.sleeper;
  if (!sleeper) sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  int pauses = 0;
  PlanResult result;
  for (const auto& [api, templates] : plan.templates) {
    std::vector<FileRef> merged;
    std::set<std::string> seen;
    try {
      for (std::size_t t = 0; t < templates.size(); ++t) {
        std::vector<FileRef> hits;
        for (;;) {
          try {
            hits = backend.search(templates[t], plan.cap);
            break;
          } catch (const RateLimitedError& e) {
            if (++pauses > options.max_rate_limit_pauses) {
              throw Error(Errc::ExternalService, "rate limit pause budget exhausted");
            }
            sleeper(e.retry_after());
          }
        }
        if (hits.size() > plan.cap) hits.resize(plan.cap);
        for (auto& h : hits) {
          if (!seen.insert(h.source_id).second) continue;
          h.template_index = t;
          merged.push_back(std::move(h));
        }
      }
    } catch (const Error& e) {
      if (e.code() != Errc::BackendUnavailable) throw;
      result.failures.push_back({api, e.what()});
      continue;
    }
    result.files.emplace(api, std::move(merged));
  }
  return result;
}

PlanResult plan_search(const DiffReport& report, CodeSearchBackend& backend, std::size_t cap) {
  return plan_search(make_search_plan(report.updates, cap), backend);
}

}  // namespace apisync
