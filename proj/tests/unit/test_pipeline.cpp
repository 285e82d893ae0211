// Copyright 2026 The apisync Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <fstream>
#include <set>

#include <sys/wait.h>

#include "../common/mini_corpus.hpp"
#include "apisync/pipeline.hpp"
#include "support.hpp"

using namespace apisync;
namespace fs = std::filesystem;

namespace {

Json mini_config_json() {
  return Json::parse(io::read_file(testing::fixture("mini_corpus/config.json")));
}

fs::path write_config(const fs::path& dir, const Json& doc) {
  auto p = dir / "config.json";
  io::write_file_atomic(p, doc.dump(2));
  return p;
}

// Fails on the call after `budget` successful generations.
class FlakyClient final : public GenerationClient {
 public:
  FlakyClient(int budget, int* calls) : budget_(budget), calls_(calls) {}
  std::string generate(const std::string& prompt, std::uint64_t seed) override {
    if (++*calls_ > budget_) throw Error(Errc::ExternalService, "provider outage");
    return inner_.generate(prompt, seed);
  }
  std::string name() const override { return "flaky"; }

 private:
  MockGenerationClient inner_{0.25};
  int budget_;
  int* calls_;
};

std::vector<Json> read_rows(const fs::path& p) { return io::read_jsonl(p); }

}  // namespace

TEST_CASE("stage names and exit codes") {
  for (auto s : kAllStages) CHECK(stage_from_string(to_string(s)) == s);
  CHECK(testing::code_of([] { stage_from_string("bulid"); }) == Errc::ConfigInvalid);
  CHECK(exit_code_for(Errc::ConfigInvalid) == 2);
  CHECK(exit_code_for(Errc::MissingPrerequisite) == 3);
  CHECK(exit_code_for(Errc::ExternalService) == 4);
  CHECK(exit_code_for(Errc::BackendUnavailable) == 4);
  CHECK(exit_code_for(Errc::ParseError) == 1);
  CHECK(prerequisites(Stage::Extract).empty());
  CHECK(prerequisites(Stage::Build) == std::vector<Stage>{Stage::Extract, Stage::Synthesize});
}

TEST_CASE("config validation") {
  auto base = testing::fixture("mini_corpus");
  auto ok = PipelineConfig::from_json(mini_config_json(), base);
  CHECK(ok.seed == 7);
  CHECK(ok.counts.per_api == 15);
  CHECK(ok.libraries.size() == 1);
  CHECK(ok.libraries[0].updated.extractor == std::vector<std::string>{"python3", "fake_extract.py"});
  CHECK(ok.root() == base / "out");

  auto rejects = [&](auto mutate) {
    auto doc = mini_config_json();
    mutate(doc);
    return testing::code_of([&] { PipelineConfig::from_json(doc, base); }) == Errc::ConfigInvalid;
  };
  CHECK(rejects([](Json& d) { d["client"]["token"] = "sk-live-abc"; }));
  CHECK(rejects([](Json& d) { d["search"]["api_key"] = "abc"; }));
  CHECK(rejects([](Json& d) { d.erase("seed"); }));
  CHECK(rejects([](Json& d) { d["seed"] = -1; }));
  CHECK(rejects([](Json& d) { d["counts"]["train"] = 9; }));
  CHECK(rejects([](Json& d) { d["rename_threshold"] = 0.0; }));
  CHECK(rejects([](Json& d) { d["colour"] = 1; }));
  CHECK(rejects([](Json& d) { d["libraries"] = Json::array(); }));
  CHECK(rejects([](Json& d) { d["libraries"][0]["legacy"]["dump"] = "dumps/missing.json"; }));
  CHECK(rejects([](Json& d) { d["libraries"][0]["legacy"]["extractor"] = {"x"}; }));
  CHECK(rejects([](Json& d) { d["libraries"][0]["updated"]["version"] = "1.0"; }));
  CHECK(rejects([](Json& d) { d["search"]["root"] = "nowhere"; }));
  CHECK(rejects([](Json& d) { d["client"] = {{"kind", "live"}, {"model", "m"}}; }));
  CHECK(rejects([](Json& d) { d["evaluate"] = {{"ks", {0}}}; }));

  // Environment variable names are fine.
  auto doc = mini_config_json();
  doc["client"] = {{"kind", "live"}, {"base_url", "http://127.0.0.1:1/v1"}, {"model", "m"},
                   {"token_env", "SOME_TOKEN_VAR"}};
  CHECK(PipelineConfig::from_json(doc, base).live.token_env == "SOME_TOKEN_VAR");

  CHECK(testing::code_of([] { PipelineConfig::load("/nonexistent/config.json"); }) ==
        Errc::ConfigInvalid);
}

TEST_CASE("a stage refuses to run before its prerequisites") {
  auto dir = testing::scratch_dir("pipeline_prereq");
  auto cfg = PipelineConfig::load(testing::stage_mini_corpus(testing::fixture("mini_corpus"), dir));
  Pipeline p(cfg);
  CHECK(testing::code_of([&] { p.run_stage(Stage::Build); }) == Errc::MissingPrerequisite);
  CHECK(testing::code_of([&] { p.run_stage(Stage::Diff); }) == Errc::MissingPrerequisite);
  p.run_stage(Stage::Extract);
  CHECK(testing::code_of([&] { p.run_stage(Stage::Synthesize); }) == Errc::MissingPrerequisite);
  CHECK_FALSE(fs::exists(cfg.stage_dir(Stage::Build) / "manifest.json"));
}

TEST_CASE("full mini-corpus run is deterministic, matches goldens and reruns as a no-op") {
  auto fixture = testing::fixture("mini_corpus");
  auto dir_a = testing::scratch_dir("pipeline_e2e_a");
  auto dir_b = testing::scratch_dir("pipeline_e2e_b");
  auto cfg_a = PipelineConfig::load(testing::stage_mini_corpus(fixture, dir_a));
  auto cfg_b = PipelineConfig::load(testing::stage_mini_corpus(fixture, dir_b));

  std::vector<StageResult> first;
  {
    Pipeline p(cfg_a);
    first = p.run_all();
  }
  {
    Pipeline p(cfg_b);
    p.run_all();
  }
  for (const auto& r : first) CHECK_FALSE(r.up_to_date);

  auto snap_a = testing::snapshot_outputs(cfg_a.root());
  auto snap_b = testing::snapshot_outputs(cfg_b.root());
  CHECK(snap_a.size() == snap_b.size());
  CHECK(snap_a == snap_b);

  CHECK(testing::golden_manifest_mismatches(fixture / "golden_manifests", cfg_a.root()).empty());
  CHECK(testing::count_mismatches(cfg_a.root()).empty());

  auto build = *read_manifest(cfg_a, Stage::Build);
  CHECK(build.counts.at("train_sft.jsonl") == 30);
  CHECK(build.counts.at("train_pref.jsonl") == 30);
  CHECK(build.counts.at("cct.jsonl") == 15);
  CHECK(build.counts.at("ect.jsonl") == 15);
  CHECK(build.counts.at("mcq.jsonl") == 15);
  CHECK(build.counts.at("apis_kept") == 3);
  CHECK(build.counts.at("apis_dropped") == 1);

  // Every task item comes from a test pair and every test pair from a
  // distinct located site.
  auto split = Json::parse(io::read_file(cfg_a.stage_dir(Stage::Build) / "split.json"));
  std::set<std::string> keys;
  for (const auto& api : split["kept"]) {
    CHECK(api["train"].size() == 10);
    CHECK(api["test"].size() == 5);
    for (const auto& k : api["train"]) keys.insert(k.get<std::string>());
    for (const auto& k : api["test"]) keys.insert(k.get<std::string>());
  }
  CHECK(keys.size() == 45);
  CHECK(split["dropped"][0]["api_path"] == "minilib.ops.blend");

  // Notes record the deliberate skips.
  auto notes = read_rows(cfg_a.stage_dir(Stage::Locate) / "notes.jsonl");
  bool parse_note = false, star_note = false;
  for (const auto& n : notes) {
    auto reason = n["reason"].get<std::string>();
    parse_note |= n["file_id"] == "legacy_py2.py" && reason.find("ParseError") == 0;
    star_note |= n["file_id"] == "star_import.py" && reason.find("star import") == 0;
  }
  CHECK(parse_note);
  CHECK(star_note);

  // Rerun with nothing changed.
  {
    Pipeline p(cfg_a);
    for (const auto& r : p.run_all()) CHECK(r.up_to_date);
  }
  CHECK(testing::snapshot_outputs(cfg_a.root()) == snap_a);

  // A changed corpus file invalidates fetch, and everything downstream
  // reruns when asked.
  {
    std::ofstream(dir_a / "corpus" / "app_00.py", std::ios::app) << "\n# touched\n";
    Pipeline p(cfg_a);
    CHECK(p.run_stage(Stage::Extract).up_to_date);
    CHECK_FALSE(p.run_stage(Stage::Fetch).up_to_date);
  }

  // A different seed changes the sampled split.
  {
    auto dir_c = testing::scratch_dir("pipeline_e2e_seed");
    auto cfg_c = PipelineConfig::load(testing::stage_mini_corpus(fixture, dir_c));
    RunOptions opts;
    opts.seed = 8;
    Pipeline p(cfg_c, opts);
    p.run_all();
    CHECK(read_manifest(cfg_c, Stage::Build)->seed == 8);
    CHECK(io::read_file(cfg_c.stage_dir(Stage::Build) / "split.json") !=
          snap_a.at("build/split.json"));
    CHECK(read_manifest(cfg_c, Stage::Build)->counts.at("mcq.jsonl") == 15);
  }
}

TEST_CASE("an interrupted synthesize stage resumes to the same outputs") {
  auto fixture = testing::fixture("mini_corpus");
  auto dir = testing::scratch_dir("pipeline_resume");
  auto cfg = PipelineConfig::load(testing::stage_mini_corpus(fixture, dir));
  int calls = 0;
  {
    RunOptions opts;
    opts.make_client = [&](const PipelineConfig&) {
      return std::make_unique<FlakyClient>(20, &calls);
    };
    Pipeline p(cfg, opts);
    for (auto s : {Stage::Extract, Stage::Diff, Stage::Plan, Stage::Fetch, Stage::Locate}) {
      p.run_stage(s);
    }
    CHECK(testing::code_of([&] { p.run_stage(Stage::Synthesize); }) == Errc::ExternalService);
  }
  CHECK_FALSE(fs::exists(cfg.stage_dir(Stage::Synthesize) / "manifest.json"));
  CHECK_FALSE(fs::exists(cfg.stage_dir(Stage::Synthesize) / "pairs.jsonl"));
  auto progress = cfg.stage_dir(Stage::Synthesize) / "progress.jsonl";
  REQUIRE(fs::exists(progress));
  auto checkpointed = io::count_lines(io::read_file(progress));
  CHECK(checkpointed > 0);

  int resumed_calls = 0;
  {
    RunOptions opts;
    opts.resume = true;
    opts.make_client = [&](const PipelineConfig&) {
      return std::make_unique<FlakyClient>(1 << 20, &resumed_calls);
    };
    Pipeline p(cfg, opts);
    CHECK_FALSE(p.run_stage(Stage::Synthesize).up_to_date);
  }
  CHECK_FALSE(fs::exists(progress));
  // Log has 84 attempts in a clean run; the resumed run only issued the
  // ones that were not checkpointed.
  CHECK(resumed_calls < 84);
  auto golden = Json::parse(
      io::read_file(fixture / "golden_manifests" / "synthesize.json"));
  auto actual = read_manifest(cfg, Stage::Synthesize)->to_json();
  CHECK(actual["outputs"] == golden["outputs"]);
}

TEST_CASE("evaluate scores configured model outputs") {
  auto fixture = testing::fixture("mini_corpus");
  auto dir = testing::scratch_dir("pipeline_evaluate");
  auto config_path = testing::stage_mini_corpus(fixture, dir);
  {
    Pipeline p(PipelineConfig::load(config_path));
    p.run_all();
    CHECK(io::read_file(dir / "out" / "evaluate" / "summary.txt") ==
          "no model outputs configured\n");
  }
  // Echo the references back: CCT samples are the answers wrapped in prose,
  // MCQ samples alternate between the right letter and a wrong one.
  auto cct = read_rows(dir / "out" / "build" / "cct.jsonl");
  auto mcq = read_rows(dir / "out" / "build" / "mcq.jsonl");
  std::vector<Json> cct_out, mcq_out;
  for (std::size_t i = 0; i < cct.size(); ++i) {
    auto ans = cct[i]["answer"].get<std::string>();
    cct_out.push_back({{"item_id", i}, {"samples", {"Answer: " + ans, ans}}});
  }
  for (std::size_t i = 0; i < mcq.size(); ++i) {
    auto letter = mcq[i]["answer"].get<std::string>();
    std::string wrong = letter == "A" ? "B" : "A";
    mcq_out.push_back({{"item_id", i}, {"samples", {letter, wrong}}});
  }
  io::write_file_atomic(dir / "outputs" / "cct.jsonl", io::to_jsonl(cct_out));
  io::write_file_atomic(dir / "outputs" / "mcq.jsonl", io::to_jsonl(mcq_out));
  auto doc = Json::parse(io::read_file(config_path));
  doc["evaluate"] = {{"outputs", {{"cct", "outputs/cct.jsonl"}, {"mcq", "outputs/mcq.jsonl"}}},
                     {"ks", {1, 2}}};
  io::write_file_atomic(config_path, doc.dump(2));

  Pipeline p(PipelineConfig::load(config_path));
  CHECK(p.run_stage(Stage::Build).up_to_date);
  auto r = p.run_stage(Stage::Evaluate);
  CHECK_FALSE(r.up_to_date);
  CHECK(r.manifest.counts.at("cct.items") == 15);
  CHECK(r.manifest.counts.at("mcq.items") == 15);

  auto cct_report = Json::parse(io::read_file(dir / "out" / "evaluate" / "cct_report.json"));
  CHECK(cct_report["aggregate"]["BLEU"].get<double>() == doctest::Approx(1.0));
  CHECK(cct_report["aggregate"]["RED"].get<double>() == doctest::Approx(0.0));
  auto mcq_report = Json::parse(io::read_file(dir / "out" / "evaluate" / "mcq_report.json"));
  // n=2, c=1: P@1 = 1/2, P@2 = 1.
  CHECK(mcq_report["aggregate"]["P@1"].get<double>() == doctest::Approx(0.5));
  CHECK(mcq_report["aggregate"]["P@2"].get<double>() == doctest::Approx(1.0));

  // Misaligned outputs are rejected.
  mcq_out.pop_back();
  io::write_file_atomic(dir / "outputs" / "mcq.jsonl", io::to_jsonl(mcq_out));
  CHECK(testing::code_of([&] { p.run_stage(Stage::Evaluate); }) == Errc::MissingItem);
}

TEST_CASE("extractor subprocess contract") {
  auto fixture = testing::fixture("mini_corpus");
  auto dir = testing::scratch_dir("pipeline_extractor");
  auto config_path = testing::stage_mini_corpus(fixture, dir);
  auto doc = Json::parse(io::read_file(config_path));

  SUBCASE("side file is carried into the stage output") {
    Pipeline p(PipelineConfig::load(config_path));
    auto r = p.run_stage(Stage::Extract);
    CHECK(r.manifest.counts.at("minilib.updated.skipped") == 1);
    auto skipped = Json::parse(
        io::read_file(dir / "out" / "extract" / "minilib.updated.json.skipped.json"));
    CHECK(skipped[0]["api_path"] == "minilib._native.kernel");
    // The raw extractor output is not left behind.
    CHECK_FALSE(fs::exists(dir / "out" / "extract" / "minilib.updated.json.raw"));
  }
  SUBCASE("a failing extractor is an external-service failure") {
    doc["libraries"][0]["updated"]["version"] = "9.9";
    Pipeline p(PipelineConfig::load(write_config(dir, doc)));
    CHECK(testing::code_of([&] { p.run_stage(Stage::Extract); }) == Errc::ExternalService);
    CHECK_FALSE(fs::exists(dir / "out" / "extract" / "manifest.json"));
  }
  SUBCASE("a missing program is reported") {
    doc["libraries"][0]["updated"]["extractor"] = {"definitely-not-a-program-apisync"};
    Pipeline p(PipelineConfig::load(write_config(dir, doc)));
    CHECK(testing::code_of([&] { p.run_stage(Stage::Extract); }) == Errc::ExternalService);
  }
  SUBCASE("a dump whose version disagrees with the config") {
    doc["libraries"][0]["legacy"]["version"] = "0.9";
    Pipeline p(PipelineConfig::load(write_config(dir, doc)));
    CHECK(testing::code_of([&] { p.run_stage(Stage::Extract); }) == Errc::ConfigInvalid);
  }
}

TEST_CASE("run_process reports exit status") {
  CHECK(run_process({"sh", "-c", "exit 0"}, "/") == 0);
  CHECK(run_process({"sh", "-c", "exit 5"}, "/") == 5);
  CHECK(run_process({"sh", "-c", "test \"$(pwd)\" = /tmp"}, "/tmp") == 0);
  CHECK(testing::code_of([] { run_process({"no-such-binary-apisync"}, "/"); }) ==
        Errc::ExternalService);
}

TEST_CASE("one pipeline per output root") {
  auto dir = testing::scratch_dir("pipeline_lock");
  auto cfg = PipelineConfig::load(testing::stage_mini_corpus(testing::fixture("mini_corpus"), dir));
  {
    Pipeline first(cfg);
    CHECK(testing::code_of([&] { Pipeline second(cfg); }) == Errc::Io);
  }
  // Released on destruction.
  Pipeline again(cfg);
  // A lock naming a dead process is taken over.
}

TEST_CASE("stale lock from a dead process is taken over") {
  auto dir = testing::scratch_dir("pipeline_stale_lock");
  auto cfg = PipelineConfig::load(testing::stage_mini_corpus(testing::fixture("mini_corpus"), dir));
  fs::create_directories(cfg.root());
  // PIDs near the maximum are practically never in use.
  io::write_file_atomic(cfg.root() / ".apisync.lock", "4194000\n");
  Pipeline p(cfg);
  CHECK(p.run_stage(Stage::Extract).manifest.stage == "extract");
}

#ifdef APISYNC_CLI_PATH
TEST_CASE("cli exit codes") {
  auto dir = testing::scratch_dir("pipeline_cli");
  auto config_path = testing::stage_mini_corpus(testing::fixture("mini_corpus"), dir);
  auto run = [&](const std::string& args) {
    std::string cmd = std::string(APISYNC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
  };
  CHECK(run("build --config " + config_path.string()) == 3);
  CHECK(run("bogus --config " + config_path.string()) == 2);
  CHECK(run("all --config " + (dir / "missing.json").string()) == 2);
  CHECK(run("all") == 2);
  CHECK(run("all --config " + config_path.string() + " --seed 7") == 0);
  CHECK(run("evaluate --config " + config_path.string()) == 0);

  auto doc = Json::parse(io::read_file(config_path));
  doc["libraries"][0]["updated"]["version"] = "9.9";
  write_config(dir, doc);
  CHECK(run("extract --config " + config_path.string()) == 4);
}
#endif
