// Copyright 2026 The apisync Authors
// SPDX-License-Identifier: Apache-2.0

#include "apisync/pair_synthesizer.hpp"

#include <algorithm>
#include <thread>

#include "apisync/error.hpp"
#include "apisync/http.hpp"
#include "apisync/pysource.hpp"
#include "text_util.hpp"

namespace apisync {

namespace {

// Update prompt, placeholders in {[...]}.
constexpr std::string_view kPromptTemplate =
    "I will provide a code snippet as the context, followed by a calling statement that contains "
    "a target API call and a suffix. Additionally, the latest and outdated function signatures of "
    "the API are accessible(referred to as latest_signature and outdated_signature). Your task is "
    "to update the calling statement according to both the latest and outdated API function "
    "signatures, producing two distinct answers: the \"latest answer\" and the \"outdated "
    "answer\". \n"
    "---\n"
    "You must adhere to the following guidelines: \n"
    "1. Calling Statement Updates: Only update the calling statement based on the given "
    "signatures, ensuring the functionality and correctness of the calls.\n"
    "2. Include Required Parameters: The updated calling statements should include only the "
    "required parameters from the API signatures. Optional parameters should only be included if "
    "they are explicitly used or necessary based on the provided code context.\n"
    "3. Avoid Unnecessary Defaults: Do not include default values for optional parameters unless "
    "they are explicitly mentioned in the code or are necessary for functionality.\n"
    "4. Reflect API Updates: Clearly showcase the differences between the latest and outdated API "
    "signatures through your modifications.\n"
    "---\n"
    "Latest API Signature: {[updated_signature]}\n"
    "Outdated API Signature: {[outdated_signature]}\n"
    "Context: {[context]}\n"
    "Statement: {[target_seq]}\n"
    "suffix: {[suffix]}\n";

constexpr std::string_view kFormatInstruction =
    "\nReply with exactly these two lines and nothing else, each holding a parenthesized "
    "argument list:\n"
    "latest answer: (...)\n"
    "outdated answer: (...)\n";

constexpr std::string_view kLatestLine = "Latest API Signature: ";
constexpr std::string_view kOutdatedLine = "Outdated API Signature: ";

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::string line_after(std::string_view prompt, std::string_view label) {
  auto pos = prompt.find(label);
  if (pos == std::string_view::npos) {
    throw Error(Errc::InvalidValue, "prompt lacks '" + std::string(label) + "'");
  }
  pos += label.size();
  auto end = prompt.find('\n', pos);
  return std::string(prompt.substr(pos, end == std::string_view::npos ? end : end - pos));
}

// Required parameters plus the optional ones that differ from `other`.
std::string mock_answer(const ParameterList& own, const ParameterList& other) {
  std::vector<std::string> parts;
  bool skipped_positional = false;
  for (const auto& p : own) {
    if (is_star_kind(p.kind)) continue;
    const Parameter* q = other.find(p.name);
    if (p.required) {
      parts.push_back(p.kind == ParamKind::KeywordOnly ? p.name + "=" + p.name : p.name);
      continue;
    }
    bool kind_moved = q && q->kind != p.kind;
    bool changed = !q || q->required || q->default_repr != p.default_repr || kind_moved;
    if (!changed) {
      if (accepts_position(p.kind)) skipped_positional = true;
      continue;
    }
    std::string value = p.default_repr.value_or("None");
    if (p.kind == ParamKind::PositionalOnly) {
      if (skipped_positional) continue;
      parts.push_back(value);
    } else if (p.kind == ParamKind::PositionalOrKeyword && kind_moved && !skipped_positional) {
      parts.push_back(value);
    } else {
      if (accepts_position(p.kind)) skipped_positional = true;
      parts.push_back(p.name + "=" + value);
    }
  }
  return "(" + detail::join(parts, ", ") + ")";
}

// Position of the argument list following `label`, tolerating markdown
// emphasis and inline-code backticks around it.
std::optional<std::string> labeled_answer(std::string_view text, std::string_view label) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  auto pos = lower.find(label);
  if (pos == std::string::npos) return std::nullopt;
  pos += label.size();
  auto skip = [&](std::string_view chars) {
    while (pos < text.size() && chars.find(text[pos]) != std::string_view::npos) ++pos;
  };
  skip("* \t");
  if (pos >= text.size() || text[pos] != ':') return std::nullopt;
  ++pos;
  skip("*` \t\r\n");
  if (pos >= text.size() || text[pos] != '(') return std::nullopt;
  auto close = detail::find_matching_close(text, pos);
  if (close == std::string_view::npos) return std::nullopt;
  return std::string(text.substr(pos, close - pos + 1));
}

std::string strip_fences(std::string_view text) {
  std::string out;
  for (auto line : detail::split(text, '\n')) {
    if (detail::trim(line).substr(0, 3) == "```") continue;
    out.append(line);
    out.push_back('\n');
  }
  return out;
}

bool keywords_fit(const ParameterList& params, const pysrc::ArgumentList& args) {
  bool has_var_kw = params.has_kind(ParamKind::VarKeyword);
  for (const auto& a : args.args) {
    switch (a.kind) {
      case pysrc::Arg::Kind::Positional:
      case pysrc::Arg::Kind::Star:
      case pysrc::Arg::Kind::DoubleStar: break;
      case pysrc::Arg::Kind::Keyword: {
        const Parameter* p = params.find(a.keyword);
        if (!(p && accepts_keyword(p->kind)) && !has_var_kw) return false;
        break;
      }
    }
  }
  return true;
}

bool arity_fits(const ParameterList& params, const pysrc::ArgumentList& args) {
  std::size_t positional = 0;
  for (const auto& a : args.args) {
    if (a.kind == pysrc::Arg::Kind::Star) return true;
    if (a.kind == pysrc::Arg::Kind::Positional) ++positional;
  }
  if (params.has_kind(ParamKind::VarPositional)) return true;
  return positional <= params.count_kind(ParamKind::PositionalOnly) +
                           params.count_kind(ParamKind::PositionalOrKeyword);
}

PairVerdict check_against(const pysrc::ArgumentList& args, const ApiSignature& api) {
  bool keywords_ok = false;
  for (const auto& ol : api.overloads) {
    if (!keywords_fit(ol, args)) continue;
    keywords_ok = true;
    if (arity_fits(ol, args)) return PairVerdict::Ok;
  }
  return keywords_ok ? PairVerdict::ArityViolation : PairVerdict::KeywordViolation;
}

}  // namespace

void SynthesisRequest::validate() const {
  parse_signature_text(latest_signature);
  parse_signature_text(outdated_signature);
}

std::string build_synthesis_prompt(const SynthesisRequest& req) {
  // Single left-to-right pass, so values that happen to contain a
  // placeholder spelling are copied verbatim.
  const std::pair<std::string_view, const std::string*> slots[] = {
      {"{[updated_signature]}", &req.latest_signature},
      {"{[outdated_signature]}", &req.outdated_signature},
      {"{[context]}", &req.context},
      {"{[target_seq]}", &req.statement},
      {"{[suffix]}", &req.suffix},
  };
  std::string out;
  std::size_t pos = 0;
  for (const auto& [key, value] : slots) {
    auto at = kPromptTemplate.find(key, pos);
    out.append(kPromptTemplate.substr(pos, at - pos));
    out.append(*value);
    pos = at + key.size();
  }
  out.append(kPromptTemplate.substr(pos));
  out.append(kFormatInstruction);
  return out;
}

std::string MockGenerationClient::generate(const std::string& prompt, std::uint64_t seed) {
  auto latest = parse_signature_text(line_after(prompt, kLatestLine));
  auto outdated = parse_signature_text(line_after(prompt, kOutdatedLine));
  std::string updated_code = mock_answer(latest, outdated);
  std::string outdated_code = mock_answer(outdated, latest);
  if (degenerate_rate_ > 0.0) {
    auto h = detail::fnv1a64(prompt + "#" + std::to_string(seed));
    if (static_cast<double>(h % 10000) / 10000.0 < degenerate_rate_) outdated_code = updated_code;
  }
  return "latest answer: " + updated_code + "\noutdated answer: " + outdated_code + "\n";
}

LiveGenerationClient::LiveGenerationClient(LiveClientConfig cfg) : cfg_(std::move(cfg)) {
  auto token = http::env(cfg_.token_env);
  if (!token) {
    throw Error(Errc::ConfigInvalid, "environment variable " + cfg_.token_env + " is not set");
  }
  token_ = *token;
  if (cfg_.base_url.empty() || cfg_.model.empty()) {
    throw Error(Errc::ConfigInvalid, "live client needs base_url and model");
  }
}

std::string LiveGenerationClient::generate(const std::string& prompt, std::uint64_t seed) {
  Json body = {{"model", cfg_.model},
               {"messages", Json::array({Json{{"role", "user"}, {"content", prompt}}})},
               {"temperature", cfg_.temperature},
               {"seed", static_cast<std::int64_t>(seed & 0x7fffffff)}};
  http::Request req;
  req.method = "POST";
  req.url = http::resolve_url(cfg_.base_url + "/", "chat/completions");
  req.headers["Authorization"] = "Bearer " + token_;
  req.body = body.dump();
  req.timeout = cfg_.timeout;
  std::string last;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(cfg_.backoff * (1 << (attempt - 1)));
    auto resp = http::send(req);
    if (resp.status == 200) {
      try {
        auto j = Json::parse(resp.body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const Json::exception& e) {
        throw Error(Errc::ExternalService, std::string("unexpected completion body: ") + e.what());
      }
    }
    last = resp.status == 0 ? resp.transport_error : "HTTP " + std::to_string(resp.status);
    bool retryable = resp.status == 0 || resp.status == 429 || resp.status >= 500;
    if (!retryable) break;
  }
  throw Error(Errc::ExternalService, "generation request failed: " + last);
}

SynthesisResult parse_synthesis_response(std::string_view text) {
  std::string clean = strip_fences(text);
  auto updated = labeled_answer(clean, "latest answer");
  auto outdated = labeled_answer(clean, "outdated answer");
  if (!updated || !outdated) {
    throw Error(Errc::ResponseUnparseable,
                std::string("missing ") + (!updated ? "latest" : "outdated") + " answer");
  }
  return {*updated, *outdated};
}

std::string_view to_string(PairVerdict v) noexcept {
  switch (v) {
    case PairVerdict::Ok: return "Ok";
    case PairVerdict::InsufficientDivergence: return "InsufficientDivergence";
    case PairVerdict::KeywordViolation: return "KeywordViolation";
    case PairVerdict::ArityViolation: return "ArityViolation";
    case PairVerdict::MalformedArguments: return "MalformedArguments";
    case PairVerdict::ResponseUnparseable: return "ResponseUnparseable";
  }
  return "?";
}

PairVerdict validate_pair(const SynthesisResult& res, const ApiSignature& legacy,
                          const ApiSignature& updated) {
  auto up = pysrc::parse_argument_list(res.updated_code);
  auto out = pysrc::parse_argument_list(res.outdated_code);
  if (!up || !out) return PairVerdict::MalformedArguments;
  if (pysrc::normalize_code(res.updated_code) == pysrc::normalize_code(res.outdated_code)) {
    return PairVerdict::InsufficientDivergence;
  }
  if (auto v = check_against(*up, updated); v != PairVerdict::Ok) return v;
  return check_against(*out, legacy);
}

std::uint64_t attempt_seed(std::uint64_t seed, int attempt) noexcept {
  return splitmix64(seed ^ (0xA0761D6478BD642FULL * static_cast<std::uint64_t>(attempt + 1)));
}

SynthesisOutcome synthesize_pair(GenerationClient& client, const SynthesisRequest& req,
                                 const ApiSignature& legacy, const ApiSignature& updated,
                                 std::uint64_t seed, int retries) {
  req.validate();
  SynthesisOutcome outcome;
  std::string prompt = build_synthesis_prompt(req);
  for (int attempt = 0; attempt <= std::max(0, retries); ++attempt) {
    SynthesisAttempt a;
    a.attempt = attempt;
    a.seed = attempt_seed(seed, attempt);
    a.prompt = prompt;
    a.response = client.generate(prompt, a.seed);
    std::optional<SynthesisResult> parsed;
    try {
      parsed = parse_synthesis_response(a.response);
      a.verdict = validate_pair(*parsed, legacy, updated);
    } catch (const Error& e) {
      if (e.code() != Errc::ResponseUnparseable) throw;
      a.verdict = PairVerdict::ResponseUnparseable;
    }
    outcome.verdict = a.verdict;
    outcome.attempts.push_back(std::move(a));
    if (outcome.verdict == PairVerdict::Ok) {
      outcome.result = std::move(parsed);
      break;
    }
  }
  return outcome;
}

Json attempt_to_json(const DottedPath& api, const SynthesisAttempt& a) {
  return Json{{"api_path", api.str()},        {"attempt", a.attempt},
              {"seed", a.seed},               {"prompt", a.prompt},
              {"response", a.response},       {"verdict", std::string(to_string(a.verdict))}};
}

}  // namespace apisync
