// Copyright 2026 The apisync Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "apisync/core_model.hpp"
#include "apisync/io.hpp"

namespace apisync {

inline constexpr double kDefaultRenameThreshold = 0.6;

/// 1 - editDistance(a, b) / max(|a|, |b|), over characters.
double name_similarity(std::string_view a, std::string_view b);

/// Correspondence between parameters of one region. Indices refer to
/// positions in the full legacy / updated ParameterList.
struct ParamMapping {
  ParamKind category;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
};

struct ParameterMappings {
  ParamMapping positional_only{ParamKind::PositionalOnly, {}};
  ParamMapping positional_or_keyword{ParamKind::PositionalOrKeyword, {}};
  ParamMapping keyword_only{ParamKind::KeywordOnly, {}};
};

/// Region-wise mapping: positional-only by position, the keyword-capable
/// regions by exact name and then by a mutually unique best similarity of at
/// least `threshold`. Returns nullopt (unmappable) when any region differs in
/// size or leaves a parameter unmatched. Star parameters are not part of any
/// region.
std::optional<ParameterMappings> build_parameter_mapping(
    const ParameterList& legacy, const ParameterList& updated, double threshold);

/// Direct check of the three no-modification rules: a name-exact mapping
/// exists with the same star parameters, region order is preserved where
/// callers pass by position, and every mapped pair keeps its requiredness.
bool satisfies_no_modification_rules(const ParameterList& legacy,
                                     const ParameterList& updated);

enum class ChangeKind {
  ParameterAdded,
  ParameterRemoved,
  KindChanged,
  RequirednessChanged,
  PositionChanged,
  Renamed,
};

std::string_view to_string(ChangeKind kind) noexcept;
ChangeKind change_kind_from_string(std::string_view text);

struct Change {
  ChangeKind kind;
  std::optional<std::string> legacy_name;
  std::optional<std::string> updated_name;

  bool operator==(const Change&) const = default;
};

/// A parameter pair that stayed unmatched because its similarity fell below
/// the rename threshold. Reported for human review only.
struct NearMatch {
  std::string legacy_name;
  std::string updated_name;
  double score = 0.0;
};

struct OverloadComparison {
  std::vector<Change> changes;
  std::vector<NearMatch> near_matches;
};

/// Every detected change between two overloads; empty iff the rules hold.
OverloadComparison compare_overloads(const ParameterList& legacy,
                                     const ParameterList& updated,
                                     double threshold = kDefaultRenameThreshold);

struct UpdateRecord {
  DottedPath api_path;
  ApiKind kind;
  ParameterList legacy;
  ParameterList updated;
  std::vector<Change> changes;
  std::vector<NearMatch> near_matches;
};

/// nullopt means no modification: some overload pair satisfies every rule.
/// Otherwise the overload pair with the fewest changes is reported (ties go
/// to the earlier legacy, then updated, overload).
std::optional<UpdateRecord> classify_update(
    const ApiSignature& legacy, const ApiSignature& updated,
    double threshold = kDefaultRenameThreshold);

struct DiffReport {
  std::vector<UpdateRecord> updates;
  std::vector<DottedPath> apis_only_in_legacy;
  std::vector<DottedPath> apis_only_in_updated;
  std::size_t unchanged_count = 0;
};

DiffReport diff_dumps(const SignatureDump& legacy, const SignatureDump& updated,
                      double threshold = kDefaultRenameThreshold);

Json update_record_to_json(const UpdateRecord& record);
UpdateRecord update_record_from_json(const Json& row);

/// One UpdateRecord per line.
std::string updates_to_jsonl(const std::vector<UpdateRecord>& updates);

}  // namespace apisync
