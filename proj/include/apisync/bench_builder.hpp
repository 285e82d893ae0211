// Copyright 2026 The apisync Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "apisync/core_model.hpp"
#include "apisync/invocation_locator.hpp"
#include "apisync/io.hpp"

namespace apisync {

struct PairRecord {
  DottedPath api_path;
  MetadataItem metadata;
  std::string updated_code;
  std::string outdated_code;
};

Json pair_record_to_json(const PairRecord& p);
/// Throws Error(InvalidValue) on missing fields or equal codes.
PairRecord pair_record_from_json(const Json& row);

struct SplitCounts {
  std::size_t per_api = 15;
  std::size_t train = 10;
  std::size_t test = 5;

  /// Throws Error(InvalidCounts) unless per_api == train + test and test > 0.
  void validate() const;
};

struct ApiSplit {
  DottedPath api_path;
  std::vector<PairRecord> train;
  std::vector<PairRecord> test;
};

struct DroppedApi {
  std::string api_path;
  std::size_t available = 0;
};

struct SplitSpec {
  std::vector<ApiSplit> kept;  // api_path order
  std::vector<DroppedApi> dropped;
};

/// Drops APIs with fewer than `per_api` pairs, samples `per_api` of the rest
/// uniformly (seeded per API path) and cuts them into train then test.
SplitSpec sample_and_split(const std::map<std::string, std::vector<PairRecord>>& pairs,
                           const SplitCounts& counts, std::uint64_t seed);

/// CCT and ECT items share a layout.
struct BenchItemQA {
  DottedPath api_path;
  std::string question;
  std::string answer;
};

struct BenchItemMCQ {
  DottedPath api_path;
  std::string question;
  std::array<std::string, 4> options;
  char answer = 'A';
};

BenchItemQA make_cct(const PairRecord& pair);
BenchItemQA make_ect(const PairRecord& pair);

enum class DistractorApproach { RemoveOptional, AddKeyword, PermutePositional, RenameKeyword };
std::string_view to_string(DistractorApproach a) noexcept;

struct DistractorCandidate {
  DistractorApproach approach;
  std::string text;
};

/// Every perturbation of `updated_code` the four approaches produce, in a
/// fixed order, already filtered against updated_code, outdated_code and
/// each other.
std::vector<DistractorCandidate> distractor_candidates(const PairRecord& pair,
                                                       const ApiSignature& legacy,
                                                       const ApiSignature& updated);

/// Two distinct distractors, preferring different approaches. Throws
/// Error(DistractorExhausted).
std::array<std::string, 2> gen_distractors(const PairRecord& pair, const ApiSignature& legacy,
                                           const ApiSignature& updated, std::uint64_t seed);

/// `order[i]` picks option i from {updated, outdated, d1, d2}.
BenchItemMCQ make_mcq_ordered(const PairRecord& pair, const std::array<std::string, 2>& d,
                              const std::array<int, 4>& order);
BenchItemMCQ make_mcq(const PairRecord& pair, const std::array<std::string, 2>& d,
                      std::uint64_t seed);

struct TrainItemSFT {
  std::string instruction;
  std::string input;
  std::string output;
};

struct TrainItemPref {
  std::string system;
  std::string human;
  std::string chosen;
  std::string rejected;
};

inline constexpr std::string_view kPrefSystemTurn =
    "Please complete subsequent API calling statement.";

TrainItemSFT make_sft(const PairRecord& pair);
TrainItemPref make_pref(const PairRecord& pair);

Json qa_to_json(const BenchItemQA& item);
Json mcq_to_json(const BenchItemMCQ& item);
Json sft_to_json(const TrainItemSFT& item);
Json pref_to_json(const TrainItemPref& item);

struct FlaggedPair {
  std::string api_path;
  std::string file_id;
  int start_line = 0;
  std::string reason;
};

struct BenchOutputs {
  std::vector<Json> cct, ect, mcq, train_sft, train_pref;
  std::vector<FlaggedPair> flagged;
};

/// Test pairs become one CCT, ECT and MCQ item each; train pairs become one
/// SFT and one preference record each. A test pair whose distractors run out
/// is flagged and contributes no item to any task, keeping the three tasks
/// aligned. `signatures` maps api_path to its (legacy, updated) signatures.
BenchOutputs build_benchmark(
    const SplitSpec& split,
    const std::map<std::string, std::pair<ApiSignature, ApiSignature>>& signatures,
    std::uint64_t seed);

}  // namespace apisync
