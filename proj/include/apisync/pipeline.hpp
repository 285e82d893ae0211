// Copyright 2026 The apisync Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "apisync/bench_builder.hpp"
#include "apisync/eval_metrics.hpp"
#include "apisync/io.hpp"
#include "apisync/pair_synthesizer.hpp"
#include "apisync/search_planner.hpp"

namespace apisync {

enum class Stage { Extract, Diff, Plan, Fetch, Locate, Synthesize, Build, Evaluate };

inline constexpr std::array<Stage, 8> kAllStages = {
    Stage::Extract, Stage::Diff,       Stage::Plan,  Stage::Fetch,
    Stage::Locate,  Stage::Synthesize, Stage::Build, Stage::Evaluate};

std::string_view to_string(Stage s) noexcept;
/// Throws Error(ConfigInvalid) for unknown names.
Stage stage_from_string(std::string_view name);
/// Stages whose manifests must exist before `s` runs.
std::vector<Stage> prerequisites(Stage s);

/// One side of a library entry: either a committed dump or an extractor
/// command run as `<argv...> <package> --version-label <v> --out <path>`.
struct DumpSource {
  std::string version;
  std::optional<std::filesystem::path> dump;  // relative to the config file
  std::vector<std::string> extractor;
};

struct LibraryConfig {
  std::string name;
  DumpSource legacy;
  DumpSource updated;
};

struct PipelineConfig {
  std::filesystem::path base_dir;  // directory of the config file
  std::filesystem::path output_root;
  std::uint64_t seed = 0;
  std::vector<LibraryConfig> libraries;
  double rename_threshold = 0.6;
  std::size_t template_cap = kDefaultTemplateCap;
  SplitCounts counts;
  int synthesis_retries = kDefaultSynthesisRetries;

  std::string search_backend = "local";  // local | remote
  std::filesystem::path search_root;     // local
  RemoteBackendConfig remote;

  std::string client_kind = "mock";  // mock | live
  double mock_degenerate_rate = 0.0;
  LiveClientConfig live;

  std::map<std::string, std::filesystem::path> eval_outputs;  // task -> outputs file
  ScoreConfig scoring;

  Json raw;  // the parsed document, for per-stage digests

  /// Parses and validates; relative paths resolve against the file's
  /// directory. Throws Error(ConfigInvalid), including for any literal
  /// credential field.
  static PipelineConfig load(const std::filesystem::path& file);
  static PipelineConfig from_json(const Json& doc, const std::filesystem::path& base_dir);

  std::filesystem::path root() const { return base_dir / output_root; }
  std::filesystem::path stage_dir(Stage s) const;
};

struct StageManifest {
  std::string stage;
  std::map<std::string, std::string> inputs;   // label -> sha256
  std::map<std::string, std::string> outputs;  // path relative to the root -> sha256
  std::map<std::string, std::int64_t> counts;
  std::uint64_t seed = 0;
  std::string timestamp;

  Json to_json() const;
  static StageManifest from_json(const Json& j);
};

struct StageResult {
  Stage stage;
  StageManifest manifest;
  bool up_to_date = false;  // nothing ran
};

struct RunOptions {
  bool resume = false;
  std::optional<std::uint64_t> seed;
  // Test seams; defaults build clients from the config.
  std::function<std::unique_ptr<GenerationClient>(const PipelineConfig&)> make_client;
  std::function<std::unique_ptr<CodeSearchBackend>(const PipelineConfig&)> make_backend;
};

/// Runs stages under `<root>/<stage>/`. One instance per output root is
/// enforced with a lock file held for the object's lifetime.
class Pipeline {
 public:
  Pipeline(PipelineConfig cfg, RunOptions opts = {});
  ~Pipeline();
  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  /// Throws Error(MissingPrerequisite) when a prerequisite manifest is absent.
  StageResult run_stage(Stage s);
  std::vector<StageResult> run_all();

  const PipelineConfig& config() const noexcept { return cfg_; }

 private:
  struct Impl;
  PipelineConfig cfg_;
  RunOptions opts_;
  std::unique_ptr<Impl> impl_;
};

std::optional<StageManifest> read_manifest(const PipelineConfig& cfg, Stage s);
/// Same, for an output root given directly.
std::optional<StageManifest> read_manifest_at(const std::filesystem::path& root, Stage s);

/// Exit status for an error code: 2 config, 3 missing prerequisite, 4
/// external service, 1 anything else.
int exit_code_for(Errc code) noexcept;

/// Runs argv with `cwd` as working directory and returns its exit status.
/// Throws Error(ExternalService) when the program cannot be started.
int run_process(const std::vector<std::string>& argv, const std::filesystem::path& cwd);

}  // namespace apisync
