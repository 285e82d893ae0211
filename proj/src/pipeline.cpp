// Copyright 2026 The apisync Authors
// SPDX-License-Identifier: Apache-2.0

#include "apisync/pipeline.hpp"

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include "apisync/dump_io.hpp"
#include "apisync/invocation_locator.hpp"
#include "apisync/rng.hpp"
#include "apisync/update_detector.hpp"

namespace apisync {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::string_view, 8> kStageNames = {
    "extract", "diff", "plan", "fetch", "locate", "synthesize", "build", "evaluate"};

[[noreturn]] void bad_config(const std::string& what) { throw Error(Errc::ConfigInvalid, what); }

// Literal credentials are refused outright; only the names of environment
// variables may appear.
void reject_secrets(const Json& node, const std::string& where) {
  if (node.is_object()) {
    for (const auto& [key, value] : node.items()) {
      std::string lower = key;
      std::transform(lower.begin(), lower.end(), lower.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      bool named_env = lower.size() > 4 && lower.ends_with("_env");
      for (std::string_view bad : {"token", "secret", "password", "api_key", "apikey",
                                   "authorization", "credential"}) {
        if (!named_env && lower.find(bad) != std::string::npos) {
          bad_config(where + key +
                     ": credentials must come from environment variables "
                     "(name the variable with a *_env key)");
        }
      }
      reject_secrets(value, where + key + ".");
    }
  } else if (node.is_array()) {
    for (const auto& v : node) reject_secrets(v, where);
  }
}

void check_keys(const Json& obj, std::initializer_list<std::string_view> allowed,
                const std::string& where) {
  if (!obj.is_object()) bad_config(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      bad_config(where + ": unknown key \"" + key + "\"");
    }
  }
}

template <typename T>
T get_or(const Json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const Json::exception&) {
    bad_config(where + "." + key + ": wrong type");
  }
}

DumpSource parse_source(const Json& j, const fs::path& base, const std::string& where) {
  check_keys(j, {"version", "dump", "extractor"}, where);
  DumpSource s;
  s.version = get_or<std::string>(j, "version", "", where);
  if (s.version.empty()) bad_config(where + ".version: required");
  bool has_dump = j.contains("dump");
  bool has_extractor = j.contains("extractor");
  if (has_dump == has_extractor) bad_config(where + ": set exactly one of dump or extractor");
  if (has_dump) {
    fs::path p = get_or<std::string>(j, "dump", "", where);
    if (p.empty()) bad_config(where + ".dump: empty path");
    if (!fs::is_regular_file(base / p)) bad_config(where + ".dump: no such file " + p.string());
    s.dump = p;
  } else {
    s.extractor = get_or<std::vector<std::string>>(j, "extractor", {}, where);
    if (s.extractor.empty()) bad_config(where + ".extractor: empty command");
  }
  return s;
}

Json source_to_json(const DumpSource& s) {
  Json j{{"version", s.version}};
  if (s.dump) j["dump"] = s.dump->generic_string();
  if (!s.extractor.empty()) j["extractor"] = s.extractor;
  return j;
}

std::string utc_timestamp() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string short_hash(std::string_view text) { return io::sha256_hex(text).substr(0, 16); }

std::string pair_key(const std::string& api, const std::string& file_id, int line) {
  return api + "|" + file_id + ":" + std::to_string(line);
}

std::string dump_name(const std::string& lib, const char* side) {
  return lib + "." + side + ".json";
}

// Digest of every file under `root` with the given extension, by relative
// path.
std::string tree_digest(const fs::path& root, std::string_view ext) {
  std::vector<std::pair<std::string, std::string>> rows;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file() || entry.path().extension() != ext) continue;
    rows.emplace_back(fs::relative(entry.path(), root).generic_string(),
                      io::sha256_file(entry.path()));
  }
  std::sort(rows.begin(), rows.end());
  std::string material;
  for (const auto& [rel, digest] : rows) material += rel + '\0' + digest + '\n';
  return io::sha256_hex(material);
}

}  // namespace

std::string_view to_string(Stage s) noexcept { return kStageNames[static_cast<std::size_t>(s)]; }

Stage stage_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kStageNames.size(); ++i) {
    if (kStageNames[i] == name) return kAllStages[i];
  }
  throw Error(Errc::ConfigInvalid, "unknown stage \"" + std::string(name) + "\"");
}

std::vector<Stage> prerequisites(Stage s) {
  switch (s) {
    case Stage::Extract: return {};
    case Stage::Diff: return {Stage::Extract};
    case Stage::Plan: return {Stage::Diff};
    case Stage::Fetch: return {Stage::Plan};
    case Stage::Locate: return {Stage::Extract, Stage::Fetch};
    case Stage::Synthesize: return {Stage::Extract, Stage::Diff, Stage::Locate};
    case Stage::Build: return {Stage::Extract, Stage::Synthesize};
    case Stage::Evaluate: return {Stage::Build};
  }
  return {};
}

int exit_code_for(Errc code) noexcept {
  switch (code) {
    case Errc::ConfigInvalid: return 2;
    case Errc::MissingPrerequisite: return 3;
    case Errc::ExternalService:
    case Errc::BackendUnavailable:
    case Errc::RateLimited: return 4;
    default: return 1;
  }
}

// ---------------------------------------------------------------------------
// Config

PipelineConfig PipelineConfig::load(const fs::path& file) {
  std::string text;
  try {
    text = io::read_file(file);
  } catch (const Error&) {
    bad_config("cannot read config " + file.string());
  }
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    bad_config(file.string() + ": " + e.what());
  }
  auto base = fs::absolute(file).parent_path();
  return from_json(doc, base);
}

PipelineConfig PipelineConfig::from_json(const Json& doc, const fs::path& base_dir) {
  reject_secrets(doc, "");
  check_keys(doc,
             {"output_root", "seed", "libraries", "rename_threshold", "template_cap", "counts",
              "search", "client", "synthesis", "evaluate"},
             "config");
  PipelineConfig c;
  c.base_dir = base_dir;
  c.raw = doc;

  c.output_root = get_or<std::string>(doc, "output_root", "", "config");
  if (c.output_root.empty()) bad_config("config.output_root: required");
  if (!doc.contains("seed") || !doc["seed"].is_number_unsigned()) {
    bad_config("config.seed: required non-negative integer");
  }
  c.seed = doc["seed"].get<std::uint64_t>();

  if (!doc.contains("libraries") || !doc["libraries"].is_array() || doc["libraries"].empty()) {
    bad_config("config.libraries: at least one library required");
  }
  std::set<std::string> names;
  for (std::size_t i = 0; i < doc["libraries"].size(); ++i) {
    const auto& lj = doc["libraries"][i];
    std::string where = "config.libraries[" + std::to_string(i) + "]";
    check_keys(lj, {"name", "legacy", "updated"}, where);
    LibraryConfig lib;
    lib.name = get_or<std::string>(lj, "name", "", where);
    if (!is_identifier(lib.name)) bad_config(where + ".name: not a package name");
    if (!names.insert(lib.name).second) bad_config(where + ".name: duplicate " + lib.name);
    if (!lj.contains("legacy") || !lj.contains("updated")) {
      bad_config(where + ": legacy and updated are required");
    }
    lib.legacy = parse_source(lj["legacy"], base_dir, where + ".legacy");
    lib.updated = parse_source(lj["updated"], base_dir, where + ".updated");
    if (lib.legacy.version == lib.updated.version) {
      bad_config(where + ": legacy and updated versions are equal");
    }
    c.libraries.push_back(std::move(lib));
  }

  c.rename_threshold = get_or<double>(doc, "rename_threshold", kDefaultRenameThreshold, "config");
  if (!(c.rename_threshold > 0.0 && c.rename_threshold <= 1.0)) {
    bad_config("config.rename_threshold: must lie in (0, 1]");
  }
  auto cap = get_or<std::int64_t>(doc, "template_cap",
                                  static_cast<std::int64_t>(kDefaultTemplateCap), "config");
  if (cap <= 0) bad_config("config.template_cap: must be positive");
  c.template_cap = static_cast<std::size_t>(cap);

  if (doc.contains("counts")) {
    const auto& cj = doc["counts"];
    check_keys(cj, {"per_api", "train", "test"}, "config.counts");
    c.counts.per_api = get_or<std::size_t>(cj, "per_api", c.counts.per_api, "config.counts");
    c.counts.train = get_or<std::size_t>(cj, "train", c.counts.train, "config.counts");
    c.counts.test = get_or<std::size_t>(cj, "test", c.counts.test, "config.counts");
  }
  try {
    c.counts.validate();
  } catch (const Error& e) {
    bad_config(std::string("config.counts: ") + e.what());
  }

  const Json search = doc.value("search", Json::object());
  check_keys(search, {"backend", "root", "base_url", "token_env", "language", "max_retries"},
             "config.search");
  c.search_backend = get_or<std::string>(search, "backend", "local", "config.search");
  if (c.search_backend == "local") {
    c.search_root = get_or<std::string>(search, "root", "", "config.search");
    if (c.search_root.empty() || !fs::is_directory(base_dir / c.search_root)) {
      bad_config("config.search.root: not a directory");
    }
  } else if (c.search_backend == "remote") {
    c.remote.base_url = get_or<std::string>(search, "base_url", "", "config.search");
    if (c.remote.base_url.empty()) bad_config("config.search.base_url: required");
    c.remote.token_env = get_or<std::string>(search, "token_env", c.remote.token_env,
                                             "config.search");
    c.remote.language = get_or<std::string>(search, "language", c.remote.language,
                                            "config.search");
    c.remote.max_retries = get_or<int>(search, "max_retries", c.remote.max_retries,
                                       "config.search");
  } else {
    bad_config("config.search.backend: expected local or remote");
  }

  const Json client = doc.value("client", Json::object());
  check_keys(client,
             {"kind", "degenerate_rate", "base_url", "model", "token_env", "temperature",
              "max_retries"},
             "config.client");
  c.client_kind = get_or<std::string>(client, "kind", "mock", "config.client");
  if (c.client_kind == "mock") {
    c.mock_degenerate_rate = get_or<double>(client, "degenerate_rate", 0.0, "config.client");
    if (!(c.mock_degenerate_rate >= 0.0 && c.mock_degenerate_rate <= 1.0)) {
      bad_config("config.client.degenerate_rate: must lie in [0, 1]");
    }
  } else if (c.client_kind == "live") {
    c.live.base_url = get_or<std::string>(client, "base_url", "", "config.client");
    c.live.model = get_or<std::string>(client, "model", "", "config.client");
    if (c.live.base_url.empty() || c.live.model.empty()) {
      bad_config("config.client: live clients need base_url and model");
    }
    c.live.token_env = get_or<std::string>(client, "token_env", c.live.token_env,
                                           "config.client");
    c.live.temperature = get_or<double>(client, "temperature", 0.0, "config.client");
    c.live.max_retries = get_or<int>(client, "max_retries", c.live.max_retries,
                                     "config.client");
  } else {
    bad_config("config.client.kind: expected mock or live");
  }

  const Json synth = doc.value("synthesis", Json::object());
  check_keys(synth, {"retries"}, "config.synthesis");
  c.synthesis_retries = get_or<int>(synth, "retries", kDefaultSynthesisRetries,
                                    "config.synthesis");
  if (c.synthesis_retries < 0) bad_config("config.synthesis.retries: must be >= 0");

  const Json eval = doc.value("evaluate", Json::object());
  check_keys(eval, {"outputs", "aggregation", "ks", "smoothing", "epsilon"}, "config.evaluate");
  if (eval.contains("outputs")) {
    check_keys(eval["outputs"], {"cct", "ect", "mcq"}, "config.evaluate.outputs");
    for (const auto& [task, path] : eval["outputs"].items()) {
      if (!path.is_string()) bad_config("config.evaluate.outputs." + task + ": expected a path");
      c.eval_outputs[task] = path.get<std::string>();
    }
  }
  auto agg = get_or<std::string>(eval, "aggregation", "mean", "config.evaluate");
  if (agg == "mean") {
    c.scoring.aggregation = ScoreConfig::Aggregation::MeanOverSamples;
  } else if (agg == "best_of_n") {
    c.scoring.aggregation = ScoreConfig::Aggregation::BestOfN;
  } else {
    bad_config("config.evaluate.aggregation: expected mean or best_of_n");
  }
  c.scoring.ks = get_or<std::vector<int>>(eval, "ks", c.scoring.ks, "config.evaluate");
  if (c.scoring.ks.empty() ||
      std::any_of(c.scoring.ks.begin(), c.scoring.ks.end(), [](int k) { return k < 1; })) {
    bad_config("config.evaluate.ks: positive integers required");
  }
  auto smoothing = get_or<std::string>(eval, "smoothing", "none", "config.evaluate");
  if (smoothing == "none") {
    c.scoring.bleu.smoothing = BleuConfig::Smoothing::None;
  } else if (smoothing == "epsilon") {
    c.scoring.bleu.smoothing = BleuConfig::Smoothing::Epsilon;
  } else {
    bad_config("config.evaluate.smoothing: expected none or epsilon");
  }
  c.scoring.bleu.epsilon = get_or<double>(eval, "epsilon", c.scoring.bleu.epsilon,
                                          "config.evaluate");
  c.scoring.codebleu.bleu = c.scoring.bleu;
  try {
    c.scoring.bleu.validate();
  } catch (const Error& e) {
    bad_config(std::string("config.evaluate: ") + e.what());
  }
  return c;
}

fs::path PipelineConfig::stage_dir(Stage s) const { return root() / std::string(to_string(s)); }

// ---------------------------------------------------------------------------
// Manifests

Json StageManifest::to_json() const {
  Json j{{"stage", stage}, {"seed", seed}};
  j["inputs"] = Json::object();
  for (const auto& [k, v] : inputs) j["inputs"][k] = v;
  j["outputs"] = Json::object();
  for (const auto& [k, v] : outputs) j["outputs"][k] = v;
  j["counts"] = Json::object();
  for (const auto& [k, v] : counts) j["counts"][k] = v;
  j["timestamp"] = timestamp;
  return j;
}

StageManifest StageManifest::from_json(const Json& j) {
  try {
    StageManifest m;
    m.stage = j.at("stage").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& [k, v] : j.at("inputs").items()) m.inputs[k] = v.get<std::string>();
    for (const auto& [k, v] : j.at("outputs").items()) m.outputs[k] = v.get<std::string>();
    for (const auto& [k, v] : j.at("counts").items()) m.counts[k] = v.get<std::int64_t>();
    m.timestamp = j.value("timestamp", "");
    return m;
  } catch (const Json::exception& e) {
    throw Error(Errc::InvalidValue, std::string("manifest: ") + e.what());
  }
}

std::optional<StageManifest> read_manifest(const PipelineConfig& cfg, Stage s) {
  return read_manifest_at(cfg.root(), s);
}

std::optional<StageManifest> read_manifest_at(const fs::path& root, Stage s) {
  auto path = root / std::string(to_string(s)) / "manifest.json";
  if (!fs::is_regular_file(path)) return std::nullopt;
  try {
    return StageManifest::from_json(Json::parse(io::read_file(path)));
  } catch (const Json::parse_error&) {
    return std::nullopt;
  }
}

// ---------------------------------------------------------------------------
// Subprocess

int run_process(const std::vector<std::string>& argv, const fs::path& cwd) {
  if (argv.empty()) throw Error(Errc::ExternalService, "empty command");
  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0) {
    throw Error(Errc::ExternalService, std::string("pipe: ") + std::strerror(errno));
  }
  std::vector<char*> cargv;
  for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);

  pid_t pid = ::fork();
  if (pid < 0) {
    ::close(fds[0]);
    ::close(fds[1]);
    throw Error(Errc::ExternalService, std::string("fork: ") + std::strerror(errno));
  }
  if (pid == 0) {
    ::close(fds[0]);
    int err = 0;
    if (::chdir(cwd.c_str()) != 0) {
      err = errno;
    } else {
      ::execvp(cargv[0], cargv.data());
      err = errno;
    }
    [[maybe_unused]] auto n = ::write(fds[1], &err, sizeof err);
    ::_exit(127);
  }
  ::close(fds[1]);
  int child_errno = 0;
  ssize_t got;
  do {
    got = ::read(fds[0], &child_errno, sizeof child_errno);
  } while (got < 0 && errno == EINTR);
  ::close(fds[0]);
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) throw Error(Errc::ExternalService, "waitpid failed");
  }
  if (got > 0) {
    throw Error(Errc::ExternalService,
                "cannot start " + argv[0] + ": " + std::strerror(child_errno));
  }
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
  return 1;
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

/// Files a stage produces, keyed by path relative to the stage directory.
struct StageOutputs {
  std::map<std::string, std::string> files;
  std::map<std::string, std::int64_t> counts;

  void jsonl(const std::string& name, const std::vector<Json>& rows) {
    files[name] = io::to_jsonl(rows);
    counts[name] = static_cast<std::int64_t>(rows.size());
  }
};

std::map<std::string, SignatureDump> load_extracted(const PipelineConfig& cfg, const char* side) {
  std::map<std::string, SignatureDump> out;
  for (const auto& lib : cfg.libraries) {
    out.emplace(lib.name, load_dump(cfg.stage_dir(Stage::Extract) / dump_name(lib.name, side)));
  }
  return out;
}

std::map<std::string, ApiSignature> all_signatures(const std::map<std::string, SignatureDump>& d) {
  std::map<std::string, ApiSignature> out;
  for (const auto& [_, dump] : d) {
    for (const auto& [path, sig] : dump.apis) out.emplace(path.str(), sig);
  }
  return out;
}

Json skipped_to_json(const std::vector<std::pair<std::string, std::string>>& entries) {
  Json arr = Json::array();
  for (const auto& [api, reason] : entries) arr.push_back({{"api_path", api}, {"reason", reason}});
  return arr;
}

}  // namespace

struct Pipeline::Impl {
  fs::path lock_path;
  int lock_fd = -1;

  ~Impl() {
    if (lock_fd >= 0) {
      ::close(lock_fd);
      std::error_code ec;
      fs::remove(lock_path, ec);
    }
  }

  void acquire(const fs::path& root) {
    fs::create_directories(root);
    lock_path = root / ".apisync.lock";
    for (int attempt = 0; attempt < 2; ++attempt) {
      lock_fd = ::open(lock_path.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0644);
      if (lock_fd >= 0) {
        auto pid = std::to_string(::getpid()) + "\n";
        [[maybe_unused]] auto n = ::write(lock_fd, pid.data(), pid.size());
        return;
      }
      if (errno != EEXIST) break;
      // A lock left by a process that no longer exists is stale.
      long holder = 0;
      try {
        holder = std::stol(io::read_file(lock_path));
      } catch (...) {
        holder = 0;
      }
      if (holder > 0 && ::kill(static_cast<pid_t>(holder), 0) != 0 && errno == ESRCH) {
        fs::remove(lock_path);
        continue;
      }
      throw Error(Errc::Io, "output root is locked by another run: " + lock_path.string());
    }
    throw Error(Errc::Io, "cannot create lock " + lock_path.string());
  }
};

Pipeline::Pipeline(PipelineConfig cfg, RunOptions opts)
    : cfg_(std::move(cfg)), opts_(std::move(opts)), impl_(std::make_unique<Impl>()) {
  impl_->acquire(cfg_.root());
}

Pipeline::~Pipeline() = default;

std::vector<StageResult> Pipeline::run_all() {
  std::vector<StageResult> results;
  for (Stage s : kAllStages) results.push_back(run_stage(s));
  return results;
}

namespace {

class StageRunner {
 public:
  StageRunner(const PipelineConfig& cfg, const RunOptions& opts, Stage stage)
      : cfg_(cfg), opts_(opts), stage_(stage), seed_(opts.seed.value_or(cfg.seed)),
        dir_(cfg.stage_dir(stage)) {}

  StageResult run() {
    auto inputs = collect_inputs();
    if (auto old = read_manifest(cfg_, stage_); old && up_to_date(*old, inputs)) {
      return {stage_, *old, true};
    }

    // Drop the manifest first so outputs are never registered until the
    // stage completes.
    fs::create_directories(dir_);
    for (const auto& entry : fs::directory_iterator(dir_)) {
      if (entry.path().filename() == "progress.jsonl" && opts_.resume) continue;
      fs::remove_all(entry.path());
    }

    StageOutputs out;
    switch (stage_) {
      case Stage::Extract: extract(out); break;
      case Stage::Diff: diff(out); break;
      case Stage::Plan: plan(out); break;
      case Stage::Fetch: fetch(out); break;
      case Stage::Locate: locate(out); break;
      case Stage::Synthesize: synthesize(out); break;
      case Stage::Build: build(out); break;
      case Stage::Evaluate: evaluate(out); break;
    }

    StageManifest m;
    m.stage = std::string(to_string(stage_));
    m.inputs = std::move(inputs);
    m.seed = seed_;
    m.counts = std::move(out.counts);
    for (const auto& [name, content] : out.files) {
      io::write_file_atomic(dir_ / name, content);
      m.outputs[(fs::path(m.stage) / name).generic_string()] = io::sha256_hex(content);
    }
    m.timestamp = utc_timestamp();
    io::write_file_atomic(dir_ / "manifest.json", m.to_json().dump(2) + "\n");
    return {stage_, std::move(m), false};
  }

 private:
  fs::path in(Stage s, const std::string& name) const { return cfg_.stage_dir(s) / name; }

  Json config_material() const {
    switch (stage_) {
      case Stage::Extract: {
        Json libs = Json::array();
        for (const auto& lib : cfg_.libraries) {
          libs.push_back({{"name", lib.name},
                          {"legacy", source_to_json(lib.legacy)},
                          {"updated", source_to_json(lib.updated)}});
        }
        return libs;
      }
      case Stage::Diff: return {{"rename_threshold", cfg_.rename_threshold}};
      case Stage::Plan: return {{"template_cap", cfg_.template_cap}};
      case Stage::Fetch:
        if (cfg_.search_backend == "local") {
          return {{"backend", "local"}, {"root", cfg_.search_root.generic_string()}};
        }
        return {{"backend", "remote"},
                {"base_url", cfg_.remote.base_url},
                {"language", cfg_.remote.language}};
      case Stage::Locate: return Json::object();
      case Stage::Synthesize:
        if (cfg_.client_kind == "mock") {
          return {{"kind", "mock"},
                  {"degenerate_rate", cfg_.mock_degenerate_rate},
                  {"retries", cfg_.synthesis_retries}};
        }
        return {{"kind", "live"},
                {"base_url", cfg_.live.base_url},
                {"model", cfg_.live.model},
                {"temperature", cfg_.live.temperature},
                {"retries", cfg_.synthesis_retries}};
      case Stage::Build:
        return {{"per_api", cfg_.counts.per_api},
                {"train", cfg_.counts.train},
                {"test", cfg_.counts.test}};
      case Stage::Evaluate: {
        Json outputs = Json::object();
        for (const auto& [task, path] : cfg_.eval_outputs) outputs[task] = path.generic_string();
        return {{"outputs", outputs},
                {"aggregation", cfg_.scoring.aggregation == ScoreConfig::Aggregation::BestOfN
                                    ? "best_of_n"
                                    : "mean"},
                {"ks", cfg_.scoring.ks},
                {"smoothing",
                 cfg_.scoring.bleu.smoothing == BleuConfig::Smoothing::Epsilon ? "epsilon"
                                                                               : "none"},
                {"epsilon", cfg_.scoring.bleu.epsilon}};
      }
    }
    return {};
  }

  std::map<std::string, std::string> collect_inputs() const {
    std::map<std::string, std::string> inputs;
    for (Stage p : prerequisites(stage_)) {
      auto m = read_manifest(cfg_, p);
      if (!m) {
        throw Error(Errc::MissingPrerequisite, "stage " + std::string(to_string(stage_)) +
                                                   " needs " + std::string(to_string(p)) +
                                                   " to have run");
      }
      for (const auto& [rel, _] : m->outputs) {
        auto path = cfg_.root() / rel;
        if (!fs::is_regular_file(path)) {
          throw Error(Errc::MissingPrerequisite, "missing output " + rel);
        }
        inputs[rel] = io::sha256_file(path);
      }
    }
    inputs["config"] = io::sha256_hex(config_material().dump());
    if (stage_ == Stage::Extract) {
      for (const auto& lib : cfg_.libraries) {
        for (const DumpSource* s : {&lib.legacy, &lib.updated}) {
          if (!s->dump) continue;
          auto p = cfg_.base_dir / *s->dump;
          inputs["file:" + s->dump->generic_string()] = io::sha256_file(p);
          auto side = p;
          side += ".skipped.json";
          if (fs::is_regular_file(side)) {
            inputs["file:" + s->dump->generic_string() + ".skipped.json"] =
                io::sha256_file(side);
          }
        }
      }
    }
    if (stage_ == Stage::Fetch && cfg_.search_backend == "local") {
      inputs["corpus:" + cfg_.search_root.generic_string()] =
          tree_digest(cfg_.base_dir / cfg_.search_root, ".py");
    }
    if (stage_ == Stage::Evaluate) {
      for (const auto& [task, path] : cfg_.eval_outputs) {
        auto p = cfg_.base_dir / path;
        if (!fs::is_regular_file(p)) {
          throw Error(Errc::MissingPrerequisite, "model outputs for " + task + " not found: " +
                                                     path.string());
        }
        inputs["file:" + path.generic_string()] = io::sha256_file(p);
      }
    }
    return inputs;
  }

  bool up_to_date(const StageManifest& m, const std::map<std::string, std::string>& inputs) const {
    if (m.inputs != inputs || m.seed != seed_) return false;
    if (opts_.resume && fs::exists(dir_ / "progress.jsonl")) return false;
    for (const auto& [rel, digest] : m.outputs) {
      auto p = cfg_.root() / rel;
      if (!fs::is_regular_file(p) || io::sha256_file(p) != digest) return false;
    }
    return true;
  }

  // -- extract --------------------------------------------------------------

  void extract(StageOutputs& out) {
    for (const auto& lib : cfg_.libraries) {
      for (auto [side, src] : {std::pair{"legacy", &lib.legacy}, std::pair{"updated", &lib.updated}}) {
        auto name = dump_name(lib.name, side);
        fs::path dump_path;
        fs::path raw;
        if (src->dump) {
          dump_path = cfg_.base_dir / *src->dump;
        } else {
          raw = dir_ / (name + ".raw");
          auto argv = src->extractor;
          argv.insert(argv.end(), {lib.name, "--version-label", src->version, "--out",
                                   fs::absolute(raw).string()});
          int status = run_process(argv, cfg_.base_dir);
          if (status != 0) {
            throw Error(Errc::ExternalService, "extractor for " + lib.name + " " +
                                                   src->version + " exited with status " +
                                                   std::to_string(status));
          }
          if (!fs::is_regular_file(raw)) {
            throw Error(Errc::ExternalService, "extractor produced no dump for " + lib.name);
          }
          dump_path = raw;
        }
        SignatureDump dump = load_dump(dump_path);
        if (dump.library != lib.name) {
          throw Error(Errc::ConfigInvalid, "dump for " + lib.name + " describes library " +
                                               dump.library);
        }
        if (dump.version != src->version) {
          throw Error(Errc::ConfigInvalid, "dump for " + lib.name + " has version " +
                                               dump.version + ", config says " + src->version);
        }
        auto side_file = dump_path;
        side_file += ".skipped.json";
        std::vector<std::pair<std::string, std::string>> skipped;
        if (fs::is_regular_file(side_file)) skipped = load_skipped(side_file);
        if (!raw.empty()) {
          fs::remove(raw);
          fs::remove(side_file);
        }
        out.files[name] = serialize_dump(dump);
        out.files[name + ".skipped.json"] = skipped_to_json(skipped).dump(2) + "\n";
        out.counts[lib.name + "." + side + ".apis"] = static_cast<std::int64_t>(dump.apis.size());
        out.counts[lib.name + "." + side + ".skipped"] = static_cast<std::int64_t>(skipped.size());
      }
    }
  }

  // -- diff -----------------------------------------------------------------

  void diff(StageOutputs& out) {
    auto legacy = load_extracted(cfg_, "legacy");
    auto updated = load_extracted(cfg_, "updated");
    std::vector<Json> rows;
    Json summary = Json::object();
    std::int64_t unchanged = 0;
    for (const auto& lib : cfg_.libraries) {
      auto report = diff_dumps(legacy.at(lib.name), updated.at(lib.name), cfg_.rename_threshold);
      for (const auto& u : report.updates) rows.push_back(update_record_to_json(u));
      Json only_legacy = Json::array();
      for (const auto& p : report.apis_only_in_legacy) only_legacy.push_back(p.str());
      Json only_updated = Json::array();
      for (const auto& p : report.apis_only_in_updated) only_updated.push_back(p.str());
      summary[lib.name] = {{"updates", report.updates.size()},
                           {"unchanged", report.unchanged_count},
                           {"only_in_legacy", only_legacy},
                           {"only_in_updated", only_updated}};
      unchanged += static_cast<std::int64_t>(report.unchanged_count);
    }
    out.jsonl("updates.jsonl", rows);
    out.files["summary.json"] = summary.dump(2) + "\n";
    out.counts["unchanged"] = unchanged;
  }

  std::vector<UpdateRecord> read_updates() const {
    std::vector<UpdateRecord> updates;
    for (const auto& row : io::read_jsonl(in(Stage::Diff, "updates.jsonl"))) {
      updates.push_back(update_record_from_json(row));
    }
    return updates;
  }

  // -- plan -----------------------------------------------------------------

  void plan(StageOutputs& out) {
    auto updates = read_updates();
    auto sp = make_search_plan(updates, cfg_.template_cap);
    std::map<DottedPath, ApiKind> kinds;
    for (const auto& u : updates) kinds.emplace(u.api_path, u.kind);
    std::vector<Json> rows;
    std::int64_t total = 0;
    for (const auto& [api, templates] : sp.templates) {
      Json tj = Json::array();
      for (const auto& t : templates) tj.push_back(t.segments);
      total += static_cast<std::int64_t>(templates.size());
      rows.push_back({{"api_path", api.str()},
                      {"kind", to_string(kinds.at(api))},
                      {"cap", sp.cap},
                      {"templates", tj}});
    }
    out.jsonl("templates.jsonl", rows);
    out.counts["templates"] = total;
  }

  // -- fetch ----------------------------------------------------------------

  std::unique_ptr<CodeSearchBackend> make_backend() const {
    if (opts_.make_backend) return opts_.make_backend(cfg_);
    if (cfg_.search_backend == "local") {
      return std::make_unique<LocalCorpusBackend>(cfg_.base_dir / cfg_.search_root);
    }
    return std::make_unique<RemoteSearchBackend>(cfg_.remote);
  }

  void fetch(StageOutputs& out) {
    SearchPlan sp;
    sp.cap = cfg_.template_cap;
    for (const auto& row : io::read_jsonl(in(Stage::Plan, "templates.jsonl"))) {
      auto& templates = sp.templates[DottedPath::parse(row.at("api_path").get<std::string>())];
      for (const auto& t : row.at("templates")) {
        templates.push_back(SearchTemplate{t.get<std::vector<std::string>>()});
      }
    }
    auto backend = make_backend();
    auto result = plan_search(sp, *backend);

    std::vector<Json> files;
    std::vector<Json> failures;
    for (const auto& f : result.failures) {
      failures.push_back({{"api_path", f.api_path.str()}, {"source_id", nullptr},
                          {"reason", f.reason}});
    }
    for (const auto& [api, refs] : result.files) {
      for (const auto& ref : refs) {
        std::string content;
        try {
          content = backend->fetch(ref);
        } catch (const Error& e) {
          if (e.code() != Errc::BackendUnavailable) throw;
          failures.push_back({{"api_path", api.str()}, {"source_id", ref.source_id},
                              {"reason", e.what()}});
          continue;
        }
        auto rel = "corpus/" + short_hash(api.str()) + "/" + short_hash(ref.source_id) + ".src";
        out.files[rel] = content;
        files.push_back({{"api_path", api.str()},
                         {"source_id", ref.source_id},
                         {"url", ref.url},
                         {"template_index", ref.template_index},
                         {"path", rel},
                         {"sha256", io::sha256_hex(content)}});
      }
    }
    out.jsonl("files.jsonl", files);
    out.jsonl("failures.jsonl", failures);
  }

  // -- locate ---------------------------------------------------------------

  void locate(StageOutputs& out) {
    auto updated = all_signatures(load_extracted(cfg_, "updated"));
    auto legacy = all_signatures(load_extracted(cfg_, "legacy"));

    struct Analyzed {
      std::unique_ptr<SourceAnalysis> analysis;
      std::string error;
    };
    std::map<std::string, Analyzed> cache;  // by source id
    std::vector<Json> items;
    std::vector<Json> notes;
    std::set<std::string> seen_items;
    std::int64_t sites_total = 0;

    for (const auto& row : io::read_jsonl(in(Stage::Fetch, "files.jsonl"))) {
      auto api = row.at("api_path").get<std::string>();
      auto source_id = row.at("source_id").get<std::string>();
      auto it = cache.find(source_id);
      if (it == cache.end()) {
        Analyzed a;
        try {
          a.analysis = analyze_source(
              source_id, io::read_file(cfg_.stage_dir(Stage::Fetch) /
                                       row.at("path").get<std::string>()));
          for (const auto& n : a.analysis->notes) {
            notes.push_back({{"file_id", n.file_id}, {"api_path", nullptr}, {"line", n.line},
                             {"reason", n.reason}});
          }
        } catch (const Error& e) {
          if (e.code() != Errc::ParseError && e.code() != Errc::SyntaxError) throw;
          a.error = e.what();
          notes.push_back({{"file_id", source_id}, {"api_path", nullptr}, {"line", 0},
                           {"reason", a.error}});
        }
        it = cache.emplace(source_id, std::move(a)).first;
      }
      if (!it->second.analysis) continue;

      const ApiSignature* sig = nullptr;
      if (auto u = updated.find(api); u != updated.end()) {
        sig = &u->second;
      } else if (auto l = legacy.find(api); l != legacy.end()) {
        sig = &l->second;
      } else {
        throw Error(Errc::InvalidValue, "no signature for " + api);
      }
      auto sites = locate_invocations(*it->second.analysis, *sig);
      sites_total += static_cast<std::int64_t>(sites.size());
      auto seg = segment_and_metadata(*it->second.analysis, sites);
      for (const auto& item : seg.items) {
        if (!seen_items.insert(pair_key(api, item.file_id, item.start_line)).second) continue;
        items.push_back(metadata_to_json(item));
      }
      for (const auto& n : seg.skipped) {
        notes.push_back({{"file_id", n.file_id}, {"api_path", api}, {"line", n.line},
                         {"reason", n.reason}});
      }
    }
    out.jsonl("metadata.jsonl", items);
    out.jsonl("notes.jsonl", notes);
    out.counts["sites"] = sites_total;
  }

  // -- synthesize -------------------------------------------------------------

  std::unique_ptr<GenerationClient> make_client() const {
    if (opts_.make_client) return opts_.make_client(cfg_);
    if (cfg_.client_kind == "mock") {
      return std::make_unique<MockGenerationClient>(cfg_.mock_degenerate_rate);
    }
    return std::make_unique<LiveGenerationClient>(cfg_.live);
  }

  void synthesize(StageOutputs& out) {
    std::map<std::string, UpdateRecord> updates;
    for (auto& u : read_updates()) updates.emplace(u.api_path.str(), std::move(u));
    auto legacy = all_signatures(load_extracted(cfg_, "legacy"));
    auto updated = all_signatures(load_extracted(cfg_, "updated"));

    auto progress_path = dir_ / "progress.jsonl";
    std::map<std::string, Json> done;
    if (opts_.resume && fs::is_regular_file(progress_path)) {
      std::istringstream lines(io::read_file(progress_path));
      std::string line;
      while (std::getline(lines, line)) {
        try {
          auto row = Json::parse(line);
          done[row.at("key").get<std::string>()] = row;
        } catch (const Json::exception&) {
          break;  // torn final line from an interrupted run
        }
      }
    }
    std::ofstream progress(progress_path, std::ios::binary | std::ios::app);
    if (!progress) throw Error(Errc::Io, "cannot open " + progress_path.string());

    std::unique_ptr<GenerationClient> client;
    std::vector<Json> pairs, log, review;
    for (const auto& row : io::read_jsonl(in(Stage::Locate, "metadata.jsonl"))) {
      auto item = metadata_from_json(row);
      auto api = item.api_path.str();
      auto key = pair_key(api, item.file_id, item.start_line);
      auto upd = updates.find(api);
      if (upd == updates.end()) throw Error(Errc::InvalidValue, "no update record for " + api);

      auto prior = done.find(key);
      Json record;
      if (prior != done.end()) {
        record = prior->second;
      } else {
        SynthesisRequest req{item.api_path,
                             render_signature_text(upd->second.updated),
                             render_signature_text(upd->second.legacy),
                             item.code_context,
                             item.target_seq,
                             item.suffix};
        if (!client) client = make_client();
        auto outcome = synthesize_pair(*client, req, legacy.at(api), updated.at(api),
                                       derive_seed(seed_, "synth|" + key),
                                       cfg_.synthesis_retries);
        record = {{"key", key}, {"verdict", to_string(outcome.verdict)}};
        if (outcome.result) {
          record["updated_code"] = outcome.result->updated_code;
          record["outdated_code"] = outcome.result->outdated_code;
        }
        Json attempts = Json::array();
        for (const auto& a : outcome.attempts) attempts.push_back(attempt_to_json(item.api_path, a));
        record["attempts"] = attempts;
        progress << record.dump(-1, ' ', false, Json::error_handler_t::replace) << '\n';
        progress.flush();
      }

      for (const auto& a : record.at("attempts")) log.push_back(a);
      if (record.contains("updated_code")) {
        PairRecord p{item.api_path, item, record["updated_code"].get<std::string>(),
                     record["outdated_code"].get<std::string>()};
        pairs.push_back(pair_record_to_json(p));
      } else {
        review.push_back({{"api_path", api},
                          {"file_id", item.file_id},
                          {"start_line", item.start_line},
                          {"verdict", record.at("verdict")},
                          {"attempts", record.at("attempts").size()}});
      }
    }
    progress.close();
    out.jsonl("pairs.jsonl", pairs);
    out.jsonl("log.jsonl", log);
    out.jsonl("review.jsonl", review);
    fs::remove(progress_path);
  }

  // -- build ----------------------------------------------------------------

  void build(StageOutputs& out) {
    std::map<std::string, std::vector<PairRecord>> by_api;
    for (const auto& row : io::read_jsonl(in(Stage::Synthesize, "pairs.jsonl"))) {
      auto p = pair_record_from_json(row);
      by_api[p.api_path.str()].push_back(std::move(p));
    }
    auto split = sample_and_split(by_api, cfg_.counts, seed_);
    auto legacy = all_signatures(load_extracted(cfg_, "legacy"));
    auto updated = all_signatures(load_extracted(cfg_, "updated"));
    std::map<std::string, std::pair<ApiSignature, ApiSignature>> sigs;
    for (const auto& s : split.kept) {
      auto api = s.api_path.str();
      sigs.emplace(api, std::pair{legacy.at(api), updated.at(api)});
    }
    auto bench = build_benchmark(split, sigs, seed_);

    out.jsonl("cct.jsonl", bench.cct);
    out.jsonl("ect.jsonl", bench.ect);
    out.jsonl("mcq.jsonl", bench.mcq);
    out.jsonl("train_sft.jsonl", bench.train_sft);
    out.jsonl("train_pref.jsonl", bench.train_pref);
    std::vector<Json> flagged;
    for (const auto& f : bench.flagged) {
      flagged.push_back({{"api_path", f.api_path},
                         {"file_id", f.file_id},
                         {"start_line", f.start_line},
                         {"reason", f.reason}});
    }
    out.jsonl("flagged.jsonl", flagged);

    auto keys = [](const std::vector<PairRecord>& v) {
      Json arr = Json::array();
      for (const auto& p : v) {
        arr.push_back(pair_key(p.api_path.str(), p.metadata.file_id, p.metadata.start_line));
      }
      return arr;
    };
    Json kept = Json::array();
    for (const auto& s : split.kept) {
      kept.push_back({{"api_path", s.api_path.str()}, {"train", keys(s.train)},
                      {"test", keys(s.test)}});
    }
    Json dropped = Json::array();
    for (const auto& d : split.dropped) {
      dropped.push_back({{"api_path", d.api_path}, {"available", d.available}});
    }
    out.files["split.json"] = Json{{"kept", kept}, {"dropped", dropped}}.dump(2) + "\n";
    out.counts["apis_kept"] = static_cast<std::int64_t>(split.kept.size());
    out.counts["apis_dropped"] = static_cast<std::int64_t>(split.dropped.size());
  }

  // -- evaluate ---------------------------------------------------------------

  void evaluate(StageOutputs& out) {
    std::string summary;
    for (const auto& [task_name, path] : cfg_.eval_outputs) {
      auto task = bench_task_from_string(task_name);
      std::vector<std::string> answers;
      for (const auto& row : io::read_jsonl(in(Stage::Build, task_name + ".jsonl"))) {
        answers.push_back(row.at("answer").get<std::string>());
      }
      std::vector<ModelOutputRecord> outputs;
      for (const auto& row : io::read_jsonl(cfg_.base_dir / path)) {
        outputs.push_back(output_record_from_json(row));
      }
      auto report = score_run(task, answers, outputs, cfg_.scoring);
      out.files[task_name + "_report.json"] = report.to_json().dump(2) + "\n";
      out.counts[task_name + ".items"] = static_cast<std::int64_t>(report.items.size());
      out.counts[task_name + ".unextractable"] = static_cast<std::int64_t>(report.unextractable);
      summary += "== " + task_name + " ==\n" + report.table();
    }
    if (summary.empty()) summary = "no model outputs configured\n";
    out.files["summary.txt"] = summary;
  }

  const PipelineConfig& cfg_;
  const RunOptions& opts_;
  Stage stage_;
  std::uint64_t seed_;
  fs::path dir_;
};

}  // namespace

StageResult Pipeline::run_stage(Stage s) { return StageRunner(cfg_, opts_, s).run(); }

}  // namespace apisync
