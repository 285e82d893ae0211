// Copyright 2026 The apisync Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "apisync/core_model.hpp"
#include "apisync/io.hpp"

namespace apisync {

struct SynthesisRequest {
  DottedPath api_path;
  std::string latest_signature;    // canonical "(...)" text
  std::string outdated_signature;
  std::string context;             // code up to and including the callee
  std::string statement;           // the original argument list
  std::string suffix;

  /// Throws Error(SyntaxError) when either signature does not parse.
  void validate() const;
};

struct SynthesisResult {
  std::string updated_code;
  std::string outdated_code;

  bool operator==(const SynthesisResult&) const = default;
};

/// Text generation behind a provider-neutral interface.
class GenerationClient {
 public:
  virtual ~GenerationClient() = default;
  virtual std::string generate(const std::string& prompt, std::uint64_t seed) = 0;
  virtual std::string name() const = 0;
};

/// Deterministic stand-in. Reads both signature lines from the prompt and
/// answers with the required parameters of each signature plus the optional
/// parameters that differ between them. With `degenerate_rate` > 0 a
/// (prompt, seed)-determined share of responses repeats the latest answer
/// for both, which exercises the retry path.
class MockGenerationClient final : public GenerationClient {
 public:
  explicit MockGenerationClient(double degenerate_rate = 0.0) : degenerate_rate_(degenerate_rate) {}
  std::string generate(const std::string& prompt, std::uint64_t seed) override;
  std::string name() const override { return "mock"; }

 private:
  double degenerate_rate_;
};

struct LiveClientConfig {
  std::string base_url;  // e.g. https://host/v1
  std::string model;
  std::string token_env = "APISYNC_LLM_TOKEN";
  double temperature = 0.0;
  int max_retries = 3;
  std::chrono::milliseconds timeout{60000};
  std::chrono::milliseconds backoff{1000};
};

/// OpenAI-style chat completion endpoint (POST <base>/chat/completions).
/// Throws Error(ConfigInvalid) when the token variable is unset and
/// Error(ExternalService) when the service keeps failing.
class LiveGenerationClient final : public GenerationClient {
 public:
  explicit LiveGenerationClient(LiveClientConfig cfg);
  std::string generate(const std::string& prompt, std::uint64_t seed) override;
  std::string name() const override { return "live:" + cfg_.model; }

 private:
  LiveClientConfig cfg_;
  std::string token_;
};

/// The update prompt with placeholders substituted, followed by the output
/// format instruction.
std::string build_synthesis_prompt(const SynthesisRequest& req);

/// Extracts the "latest answer:" and "outdated answer:" argument lists.
/// Code fences and surrounding backticks are ignored. Throws
/// Error(ResponseUnparseable).
SynthesisResult parse_synthesis_response(std::string_view text);

enum class PairVerdict {
  Ok,
  InsufficientDivergence,
  KeywordViolation,
  ArityViolation,
  MalformedArguments,
  ResponseUnparseable,
};

std::string_view to_string(PairVerdict v) noexcept;

/// Checks, in order: both codes are argument lists; they differ after
/// whitespace normalization; every keyword names a keyword-capable parameter
/// of some overload (or lands in its **kwargs); the positional count fits
/// some overload's positional capacity.
PairVerdict validate_pair(const SynthesisResult& res, const ApiSignature& legacy,
                          const ApiSignature& updated);

struct SynthesisAttempt {
  int attempt = 0;
  std::uint64_t seed = 0;
  std::string prompt;
  std::string response;
  PairVerdict verdict = PairVerdict::Ok;
};

struct SynthesisOutcome {
  PairVerdict verdict = PairVerdict::Ok;
  std::optional<SynthesisResult> result;  // set when verdict is Ok
  std::vector<SynthesisAttempt> attempts;
};

inline constexpr int kDefaultSynthesisRetries = 3;

/// Seed used for attempt `attempt` of a request with base seed `seed`.
std::uint64_t attempt_seed(std::uint64_t seed, int attempt) noexcept;

/// First attempt plus up to `retries` re-prompts, stopping at the first Ok
/// pair. Client errors propagate.
SynthesisOutcome synthesize_pair(GenerationClient& client, const SynthesisRequest& req,
                                 const ApiSignature& legacy, const ApiSignature& updated,
                                 std::uint64_t seed, int retries = kDefaultSynthesisRetries);

Json attempt_to_json(const DottedPath& api, const SynthesisAttempt& a);

}  // namespace apisync
