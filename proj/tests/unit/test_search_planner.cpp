// Copyright 2026 The apisync Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <random>
#include <set>
#include <thread>

#include "apisync/error.hpp"
#include "apisync/io.hpp"
#include "apisync/search_planner.hpp"
#include "support.hpp"

using namespace apisync;

namespace {

std::vector<std::vector<std::string>> segments(const std::vector<SearchTemplate>& ts) {
  std::vector<std::vector<std::string>> out;
  for (const auto& t : ts) out.push_back(t.segments);
  return out;
}

UpdateRecord fake_update(const std::string& path, ApiKind kind) {
  return UpdateRecord{DottedPath::parse(path), kind, ParameterList{}, ParameterList{},
                      {{ChangeKind::ParameterAdded, std::nullopt, "x"}}, {}};
}

// Returns canned results and can be told to fail for chosen terms.
class ScriptedBackend : public CodeSearchBackend {
 public:
  std::map<std::string, std::vector<std::string>> hits;  // first segment -> ids
  std::set<std::string> unavailable;
  int rate_limits_left = 0;
  int calls = 0;

  std::vector<FileRef> search(const SearchTemplate& t, std::size_t cap) override {
    ++calls;
    if (rate_limits_left > 0) {
      --rate_limits_left;
      throw RateLimitedError("slow down", std::chrono::milliseconds(5));
    }
    if (unavailable.count(t.segments.front())) throw Error(Errc::BackendUnavailable, "down");
    std::vector<FileRef> out;
    for (const auto& id : hits[t.segments.front()]) {
      if (out.size() < cap) out.push_back({id, 0, "mem://" + id});
    }
    return out;
  }
  std::string fetch(const FileRef& ref) override { return ref.source_id; }
};

}  // namespace

TEST_CASE("softmax templates follow the documented list") {
  auto ts = enumerate_templates(DottedPath::parse("torch.nn.functional.softmax"),
                                ApiKind::Function);
  std::vector<std::vector<std::string>> expected = {
      {"torch.nn.functional.softmax"},
      {"import torch as", ".nn.functional.softmax"},
      {"from torch import nn", ".functional.softmax"},
      {"import torch.nn as", ".functional.softmax"},
      {"from torch.nn import functional", ".softmax"},
      {"import torch.nn.functional as", ".softmax"},
      {"from torch.nn.functional import softmax"},
  };
  CHECK(segments(ts) == expected);
}

TEST_CASE("method templates") {
  auto ts = enumerate_templates(DottedPath::parse("torch.Tensor.shape"), ApiKind::Method);
  REQUIRE(ts.size() == 3);
  for (const auto& t : ts) CHECK(t.segments.back() == ".shape(");
  CHECK(segments(ts)[0] == std::vector<std::string>{"torch.Tensor", ".shape("});
  CHECK(segments(ts)[1] == std::vector<std::string>{"import torch as", ".Tensor", ".shape("});
  CHECK(segments(ts)[2] == std::vector<std::string>{"from torch import Tensor", ".shape("});
}

TEST_CASE("two-field paths and short paths") {
  CHECK(enumerate_templates(DottedPath::parse("pkg.fn"), ApiKind::Function).size() == 3);
  CHECK(testing::code_of([] {
          enumerate_templates(DottedPath::parse("fn"), ApiKind::Function);
        }) == Errc::PathTooShort);
  CHECK(testing::code_of([] {
          enumerate_templates(DottedPath::parse("pkg.method"), ApiKind::Method);
        }) == Errc::PathTooShort);
}

TEST_CASE("template count is 2n-1 and method segments are well formed") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    std::vector<std::string> fields;
    auto n = 2 + rng() % 7;
    for (std::size_t k = 0; k < n; ++k) fields.push_back("f" + std::to_string(rng() % 5));
    DottedPath path(fields);
    auto fns = enumerate_templates(path, ApiKind::Function);
    CHECK(fns.size() == 2 * n - 1);
    auto inits = enumerate_templates(path, ApiKind::Initializer);
    CHECK(inits.size() == 2 * n - 1);
    for (const auto& t : fns) {
      REQUIRE_FALSE(t.segments.empty());
      for (const auto& s : t.segments) CHECK_FALSE(s.empty());
    }
    if (n >= 3) {
      auto methods = enumerate_templates(path, ApiKind::Method);
      CHECK(methods.size() == 2 * (n - 1) - 1);
      for (const auto& t : methods) {
        CHECK(t.segments.back().front() == '.');
        CHECK(t.segments.back().back() == '(');
      }
    }
  }
}

TEST_CASE("local corpus search agrees with an exhaustive substring scan") {
  auto root = testing::fixture("search_corpus");
  LocalCorpusBackend backend(root);
  REQUIRE(backend.files().size() == 5);
  auto api = DottedPath::parse("torch.nn.functional.softmax");
  auto plan = make_search_plan({fake_update(api.str(), ApiKind::Function)});
  auto result = plan_search(plan, backend);
  REQUIRE(result.failures.empty());

  // Oracle: read each file directly and test every template by substring.
  std::vector<std::string> expected;
  auto templates = enumerate_templates(api, ApiKind::Function);
  for (const auto& t : templates) {
    for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
      if (!entry.is_regular_file()) continue;
      auto text = io::read_file(entry.path());
      bool all = std::all_of(t.segments.begin(), t.segments.end(),
                             [&](const std::string& s) { return text.find(s) != std::string::npos; });
      auto id = std::filesystem::relative(entry.path(), root).generic_string();
      if (all && std::find(expected.begin(), expected.end(), id) == expected.end()) {
        expected.push_back(id);
      }
    }
  }
  std::vector<std::string> got;
  for (const auto& f : result.files.at(api)) got.push_back(f.source_id);
  CHECK(got.size() == 2);
  CHECK(std::set<std::string>(got.begin(), got.end()) ==
        std::set<std::string>(expected.begin(), expected.end()));
  CHECK(got == std::vector<std::string>{"pkg/from_import.py", "alias_module.py"});
  CHECK(result.files.at(api)[0].template_index == 4);
  CHECK(result.files.at(api)[1].template_index == 5);
  CHECK(backend.fetch(result.files.at(api)[1]).find("F.softmax") != std::string::npos);
}

TEST_CASE("no matches and deduplication") {
  LocalCorpusBackend backend(testing::fixture("search_corpus"));
  auto none = plan_search(make_search_plan({fake_update("scipy.linalg.qr", ApiKind::Function)}),
                          backend);
  CHECK(none.files.at(DottedPath::parse("scipy.linalg.qr")).empty());

  ScriptedBackend scripted;
  scripted.hits["lib.fn"] = {"x.py", "y.py"};
  scripted.hits["import lib as"] = {"y.py", "z.py"};
  auto r = plan_search(make_search_plan({fake_update("lib.fn", ApiKind::Function)}), scripted);
  std::vector<std::string> ids;
  for (const auto& f : r.files.at(DottedPath::parse("lib.fn"))) ids.push_back(f.source_id);
  CHECK(ids == std::vector<std::string>{"x.py", "y.py", "z.py"});
}

TEST_CASE("results are invariant under template reordering") {
  ScriptedBackend scripted;
  scripted.hits["a.b.c"] = {"1", "2"};
  scripted.hits["import a as"] = {"3"};
  scripted.hits["from a import b"] = {"2", "4"};
  scripted.hits["import a.b as"] = {"5", "1"};
  auto plan = make_search_plan({fake_update("a.b.c", ApiKind::Function)});
  auto ids_of = [&](const SearchPlan& p) {
    std::set<std::string> ids;
    auto result = plan_search(p, scripted);
    for (const auto& f : result.files.begin()->second) ids.insert(f.source_id);
    return ids;
  };
  auto baseline = ids_of(plan);
  auto& ts = plan.templates.begin()->second;
  std::reverse(ts.begin(), ts.end());
  CHECK(ids_of(plan) == baseline);
  CHECK(baseline.size() == 5);
}

TEST_CASE("per-template cap") {
  ScriptedBackend scripted;
  for (int i = 0; i < 10; ++i) scripted.hits["lib.fn"].push_back("f" + std::to_string(i));
  auto plan = make_search_plan({fake_update("lib.fn", ApiKind::Function)}, 4);
  CHECK(plan_search(plan, scripted).files.begin()->second.size() == 4);
  CHECK(testing::code_of([] { make_search_plan({}, 0); }) == Errc::InvalidValue);
}

TEST_CASE("an unavailable backend fails only the affected API") {
  ScriptedBackend scripted;
  scripted.hits["ok.fn"] = {"a.py"};
  scripted.unavailable.insert("bad.fn");
  auto r = plan_search(make_search_plan({fake_update("ok.fn", ApiKind::Function),
                                         fake_update("bad.fn", ApiKind::Function)}),
                       scripted);
  CHECK(r.files.count(DottedPath::parse("ok.fn")) == 1);
  REQUIRE(r.failures.size() == 1);
  CHECK(r.failures[0].api_path.str() == "bad.fn");
}

TEST_CASE("rate limiting pauses the scheduler, then gives up") {
  ScriptedBackend scripted;
  scripted.hits["lib.fn"] = {"a.py"};
  scripted.rate_limits_left = 2;
  std::vector<std::chrono::milliseconds> pauses;
  SchedulerOptions opts;
  opts.sleeper = [&](std::chrono::milliseconds d) { pauses.push_back(d); };
  auto plan = make_search_plan({fake_update("lib.fn", ApiKind::Function)});
  auto r = plan_search(plan, scripted, opts);
  CHECK(pauses.size() == 2);
  CHECK(r.files.begin()->second.size() == 1);

  scripted.rate_limits_left = 100;
  opts.max_rate_limit_pauses = 3;
  CHECK(testing::code_of([&] { plan_search(plan, scripted, opts); }) == Errc::ExternalService);
}

TEST_CASE("remote backend protocol") {
  httplib::Server server;
  std::atomic<int> failures_left{1};
  std::string seen_auth;
  Json seen_body;
  server.Post("/search", [&](const httplib::Request& req, httplib::Response& res) {
    if (failures_left-- > 0) {
      res.status = 503;
      return;
    }
    seen_auth = req.get_header_value("Authorization");
    seen_body = Json::parse(req.body);
    Json out = {{"items", Json::array({{{"source_id", "org/repo/a.py"}, {"url", "/files/a"}},
                                       {{"source_id", "org/repo/b.py"}, {"url", "/files/b"}}})}};
    res.set_content(out.dump(), "application/json");
  });
  server.Get("/files/a", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("import lib as L\nL.fn()\n", "text/plain");
  });
  server.Get("/files/limited", [](const httplib::Request&, httplib::Response& res) {
    res.status = 429;
    res.set_header("Retry-After", "2");
  });
  server.Get("/files/missing", [](const httplib::Request&, httplib::Response& res) {
    res.status = 404;
  });
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ::setenv("APISYNC_TEST_SEARCH_TOKEN", "s3cret", 1);
  RemoteBackendConfig cfg;
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
  cfg.token_env = "APISYNC_TEST_SEARCH_TOKEN";
  cfg.timeout = std::chrono::milliseconds(5000);
  std::vector<std::chrono::milliseconds> sleeps;
  RemoteSearchBackend backend(cfg, [&](std::chrono::milliseconds d) { sleeps.push_back(d); });

  auto refs = backend.search({{"import lib as", ".fn"}}, 1);
  REQUIRE(refs.size() == 1);
  CHECK(refs[0].source_id == "org/repo/a.py");
  CHECK(sleeps.size() == 1);  // one retry after the 503
  CHECK(seen_auth == "Bearer s3cret");
  CHECK(seen_body["terms"] == Json::array({"import lib as", ".fn"}));
  CHECK(seen_body["limit"] == 1);
  CHECK(backend.fetch(refs[0]) == "import lib as L\nL.fn()\n");

  try {
    backend.fetch({"x", 0, cfg.base_url + "/files/limited"});
    FAIL("expected RateLimitedError");
  } catch (const RateLimitedError& e) {
    CHECK(e.retry_after() == std::chrono::milliseconds(2000));
  }
  CHECK(testing::code_of([&] { backend.fetch({"x", 0, cfg.base_url + "/files/missing"}); }) ==
        Errc::BackendUnavailable);

  server.stop();
  thread.join();
  ::unsetenv("APISYNC_TEST_SEARCH_TOKEN");
}
