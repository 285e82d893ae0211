// Copyright 2026 The apisync Authors
// SPDX-License-Identifier: Apache-2.0

#include "apisync/update_detector.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "apisync/error.hpp"
#include "text_util.hpp"

namespace apisync {

double name_similarity(std::string_view a, std::string_view b) {
  auto ua = detail::utf8_to_u32(a);
  auto ub = detail::utf8_to_u32(b);
  auto longest = std::max(ua.size(), ub.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(detail::edit_distance(ua, ub)) /
                   static_cast<double>(longest);
}

namespace {

void check_threshold(double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(Errc::ThresholdOutOfRange,
                "rename threshold " + std::to_string(threshold) + " not in [0, 1]");
  }
}

using Pairs = std::vector<std::pair<std::size_t, std::size_t>>;

struct NameMatch {
  Pairs exact;
  Pairs similar;
  std::vector<std::size_t> rest_legacy;
  std::vector<std::size_t> rest_updated;
};

// Exact names first, then pairs that are each other's unique best candidate
// with similarity >= threshold. Symmetric in its two sides.
NameMatch match_names(const ParameterList& legacy,
                      const std::vector<std::size_t>& legacy_idx,
                      const ParameterList& updated,
                      const std::vector<std::size_t>& updated_idx,
                      double threshold) {
  NameMatch m;
  std::vector<bool> used_u(updated_idx.size(), false);
  std::vector<std::size_t> left;
  for (auto li : legacy_idx) {
    bool found = false;
    for (std::size_t k = 0; k < updated_idx.size(); ++k) {
      if (!used_u[k] && updated[updated_idx[k]].name == legacy[li].name) {
        m.exact.emplace_back(li, updated_idx[k]);
        used_u[k] = true;
        found = true;
        break;
      }
    }
    if (!found) left.push_back(li);
  }
  std::vector<std::size_t> right;
  for (std::size_t k = 0; k < updated_idx.size(); ++k) {
    if (!used_u[k]) right.push_back(updated_idx[k]);
  }

  const auto nl = left.size();
  const auto nr = right.size();
  std::vector<double> score(nl * nr);
  for (std::size_t i = 0; i < nl; ++i) {
    for (std::size_t j = 0; j < nr; ++j) {
      score[i * nr + j] = name_similarity(legacy[left[i]].name, updated[right[j]].name);
    }
  }
  // Unique argmax per row / column, or npos on ties or empty.
  auto unique_best = [&](std::size_t count, auto get) {
    std::size_t best = std::string_view::npos;
    double best_score = -1.0;
    bool tie = false;
    for (std::size_t k = 0; k < count; ++k) {
      double s = get(k);
      if (s > best_score) {
        best_score = s;
        best = k;
        tie = false;
      } else if (s == best_score) {
        tie = true;
      }
    }
    return tie ? std::string_view::npos : best;
  };
  std::vector<bool> matched_l(nl, false), matched_r(nr, false);
  for (std::size_t i = 0; i < nl; ++i) {
    auto j = unique_best(nr, [&](std::size_t k) { return score[i * nr + k]; });
    if (j == std::string_view::npos || score[i * nr + j] < threshold) continue;
    auto back = unique_best(nl, [&](std::size_t k) { return score[k * nr + j]; });
    if (back != i) continue;
    m.similar.emplace_back(left[i], right[j]);
    matched_l[i] = matched_r[j] = true;
  }
  for (std::size_t i = 0; i < nl; ++i) {
    if (!matched_l[i]) m.rest_legacy.push_back(left[i]);
  }
  for (std::size_t j = 0; j < nr; ++j) {
    if (!matched_r[j]) m.rest_updated.push_back(right[j]);
  }
  return m;
}

std::vector<std::size_t> indices_of(const ParameterList& list, ParamKind kind) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (list[i].kind == kind) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> named_indices(const ParameterList& list) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < list.size(); ++i) {
    if (!is_star_kind(list[i].kind)) out.push_back(i);
  }
  return out;
}

const Parameter* star_param(const ParameterList& list, ParamKind kind) {
  for (const auto& p : list) {
    if (p.kind == kind) return &p;
  }
  return nullptr;
}

}  // namespace

std::optional<ParameterMappings> build_parameter_mapping(
    const ParameterList& legacy, const ParameterList& updated, double threshold) {
  check_threshold(threshold);
  ParameterMappings out;

  auto pos_l = indices_of(legacy, ParamKind::PositionalOnly);
  auto pos_u = indices_of(updated, ParamKind::PositionalOnly);
  if (pos_l.size() != pos_u.size()) return std::nullopt;
  for (std::size_t k = 0; k < pos_l.size(); ++k) {
    out.positional_only.pairs.emplace_back(pos_l[k], pos_u[k]);
  }

  auto by_name = [&](ParamKind kind, ParamMapping& into) {
    auto l = indices_of(legacy, kind);
    auto u = indices_of(updated, kind);
    if (l.size() != u.size()) return false;
    auto m = match_names(legacy, l, updated, u, threshold);
    if (!m.rest_legacy.empty() || !m.rest_updated.empty()) return false;
    into.pairs = m.exact;
    into.pairs.insert(into.pairs.end(), m.similar.begin(), m.similar.end());
    std::sort(into.pairs.begin(), into.pairs.end());
    return true;
  };
  if (!by_name(ParamKind::PositionalOrKeyword, out.positional_or_keyword)) {
    return std::nullopt;
  }
  if (!by_name(ParamKind::KeywordOnly, out.keyword_only)) return std::nullopt;
  return out;
}

bool satisfies_no_modification_rules(const ParameterList& legacy,
                                     const ParameterList& updated) {
  // Rule 1: same parameter count, including star parameters, and a mapping
  // that only pairs identical keywords.
  for (auto star : {ParamKind::VarPositional, ParamKind::VarKeyword}) {
    if (legacy.has_kind(star) != updated.has_kind(star)) return false;
  }
  auto mapping = build_parameter_mapping(legacy, updated, 1.0);
  if (!mapping) return false;

  // Rule 2: positional-only pairs are positional by construction; the
  // positional-or-keyword region must also keep its order. Keyword-only
  // names already match exactly under threshold 1.
  const auto& pk = mapping->positional_or_keyword.pairs;
  auto first_l = legacy.count_kind(ParamKind::PositionalOnly);
  auto first_u = updated.count_kind(ParamKind::PositionalOnly);
  for (const auto& [l, u] : pk) {
    if (l - first_l != u - first_u) return false;
  }

  // Rule 3: requiredness is preserved; default text itself is irrelevant.
  for (const auto* m : {&mapping->positional_only, &mapping->positional_or_keyword,
                        &mapping->keyword_only}) {
    for (const auto& [l, u] : m->pairs) {
      if (legacy[l].required != updated[u].required) return false;
    }
  }
  return true;
}

std::string_view to_string(ChangeKind kind) noexcept {
  switch (kind) {
    case ChangeKind::ParameterAdded: return "ParameterAdded";
    case ChangeKind::ParameterRemoved: return "ParameterRemoved";
    case ChangeKind::KindChanged: return "KindChanged";
    case ChangeKind::RequirednessChanged: return "RequirednessChanged";
    case ChangeKind::PositionChanged: return "PositionChanged";
    case ChangeKind::Renamed: return "Renamed";
  }
  return "Unknown";
}

ChangeKind change_kind_from_string(std::string_view text) {
  for (auto k : {ChangeKind::ParameterAdded, ChangeKind::ParameterRemoved,
                 ChangeKind::KindChanged, ChangeKind::RequirednessChanged,
                 ChangeKind::PositionChanged, ChangeKind::Renamed}) {
    if (to_string(k) == text) return k;
  }
  throw Error(Errc::InvalidValue, "unknown change kind '" + std::string(text) + "'");
}

OverloadComparison compare_overloads(const ParameterList& legacy,
                                     const ParameterList& updated,
                                     double threshold) {
  check_threshold(threshold);
  OverloadComparison out;

  // Positional-only slots correspond by position; their names are not part
  // of any call site.
  auto pos_l = indices_of(legacy, ParamKind::PositionalOnly);
  auto pos_u = indices_of(updated, ParamKind::PositionalOnly);
  const auto shared_pos = std::min(pos_l.size(), pos_u.size());
  Pairs pairs;
  std::set<std::size_t> taken_l, taken_u;
  for (std::size_t k = 0; k < shared_pos; ++k) {
    pairs.emplace_back(pos_l[k], pos_u[k]);
    taken_l.insert(pos_l[k]);
    taken_u.insert(pos_u[k]);
  }
  std::vector<std::size_t> rest_l, rest_u;
  for (auto i : named_indices(legacy)) {
    if (!taken_l.count(i)) rest_l.push_back(i);
  }
  for (auto i : named_indices(updated)) {
    if (!taken_u.count(i)) rest_u.push_back(i);
  }
  auto m = match_names(legacy, rest_l, updated, rest_u, threshold);
  pairs.insert(pairs.end(), m.exact.begin(), m.exact.end());
  std::set<std::pair<std::size_t, std::size_t>> renamed(m.similar.begin(),
                                                         m.similar.end());
  pairs.insert(pairs.end(), m.similar.begin(), m.similar.end());
  std::sort(pairs.begin(), pairs.end());

  Pairs positional;
  for (const auto& [l, u] : pairs) {
    if (accepts_position(legacy[l].kind) && accepts_position(updated[u].kind)) {
      positional.emplace_back(l, u);
    }
  }

  for (const auto& [l, u] : pairs) {
    const auto& lp = legacy[l];
    const auto& up = updated[u];
    if (renamed.count({l, u})) {
      out.changes.push_back({ChangeKind::Renamed, lp.name, up.name});
    }
    if (lp.kind != up.kind) {
      out.changes.push_back({ChangeKind::KindChanged, lp.name, up.name});
    }
    if (lp.required != up.required) {
      out.changes.push_back({ChangeKind::RequirednessChanged, lp.name, up.name});
    }
    if (accepts_position(lp.kind) && accepts_position(up.kind)) {
      bool inverted = std::any_of(positional.begin(), positional.end(),
                                  [&](const auto& q) {
                                    return (l < q.first) != (u < q.second);
                                  });
      if (inverted) {
        out.changes.push_back({ChangeKind::PositionChanged, lp.name, up.name});
      }
    }
  }
  for (auto l : m.rest_legacy) {
    out.changes.push_back({ChangeKind::ParameterRemoved, legacy[l].name, std::nullopt});
  }
  // Positional-only slots present on one side only.
  for (std::size_t k = shared_pos; k < pos_l.size(); ++k) {
    out.changes.push_back(
        {ChangeKind::ParameterRemoved, legacy[pos_l[k]].name, std::nullopt});
  }
  for (auto star : {ParamKind::VarPositional, ParamKind::VarKeyword}) {
    const auto* lp = star_param(legacy, star);
    if (lp && !star_param(updated, star)) {
      out.changes.push_back({ChangeKind::ParameterRemoved, lp->name, std::nullopt});
    }
  }
  for (auto u : m.rest_updated) {
    out.changes.push_back({ChangeKind::ParameterAdded, std::nullopt, updated[u].name});
  }
  for (std::size_t k = shared_pos; k < pos_u.size(); ++k) {
    out.changes.push_back(
        {ChangeKind::ParameterAdded, std::nullopt, updated[pos_u[k]].name});
  }
  for (auto star : {ParamKind::VarPositional, ParamKind::VarKeyword}) {
    const auto* up = star_param(updated, star);
    if (up && !star_param(legacy, star)) {
      out.changes.push_back({ChangeKind::ParameterAdded, std::nullopt, up->name});
    }
  }

  for (auto l : m.rest_legacy) {
    double best = 0.0;
    const Parameter* best_u = nullptr;
    for (auto u : m.rest_updated) {
      double s = name_similarity(legacy[l].name, updated[u].name);
      if (s > best) {
        best = s;
        best_u = &updated[u];
      }
    }
    if (best_u) out.near_matches.push_back({legacy[l].name, best_u->name, best});
  }
  return out;
}

namespace {

std::optional<UpdateRecord> classify_overloads(const ApiSignature& legacy,
                                               const ApiSignature& updated,
                                               double threshold) {
  std::optional<UpdateRecord> best;
  for (const auto& lo : legacy.overloads) {
    for (const auto& uo : updated.overloads) {
      auto cmp = compare_overloads(lo, uo, threshold);
      if (cmp.changes.empty()) return std::nullopt;
      if (!best || cmp.changes.size() < best->changes.size()) {
        best = UpdateRecord{updated.api_path, updated.kind, lo, uo,
                            std::move(cmp.changes), std::move(cmp.near_matches)};
      }
    }
  }
  return best;
}

}  // namespace

std::optional<UpdateRecord> classify_update(const ApiSignature& legacy,
                                            const ApiSignature& updated,
                                            double threshold) {
  check_threshold(threshold);
  if (legacy.api_path != updated.api_path || legacy.kind != updated.kind) {
    throw Error(Errc::PathMismatch,
                legacy.api_path.str() + " (" + std::string(to_string(legacy.kind)) +
                    ") vs " + updated.api_path.str() + " (" +
                    std::string(to_string(updated.kind)) + ")");
  }
  return classify_overloads(legacy, updated, threshold);
}

DiffReport diff_dumps(const SignatureDump& legacy, const SignatureDump& updated,
                      double threshold) {
  check_threshold(threshold);
  if (legacy.library != updated.library) {
    throw Error(Errc::LibraryMismatch, legacy.library + " vs " + updated.library);
  }
  DiffReport report;
  auto li = legacy.apis.begin();
  auto ui = updated.apis.begin();
  std::size_t union_size = 0;
  while (li != legacy.apis.end() || ui != updated.apis.end()) {
    ++union_size;
    if (ui == updated.apis.end() || (li != legacy.apis.end() && li->first < ui->first)) {
      report.apis_only_in_legacy.push_back(li->first);
      ++li;
    } else if (li == legacy.apis.end() || ui->first < li->first) {
      report.apis_only_in_updated.push_back(ui->first);
      ++ui;
    } else {
      // A path whose kind changed (say a function turned into a class) is
      // still the same name to callers; compare its overloads regardless.
      auto rec = classify_overloads(li->second, ui->second, threshold);
      if (rec) {
        report.updates.push_back(std::move(*rec));
      } else {
        ++report.unchanged_count;
      }
      ++li;
      ++ui;
    }
  }
  if (report.updates.size() + report.apis_only_in_legacy.size() +
          report.apis_only_in_updated.size() + report.unchanged_count !=
      union_size) {
    throw Error(Errc::InvalidValue, "diff categories do not partition the API union");
  }
  return report;
}

Json update_record_to_json(const UpdateRecord& record) {
  Json changes = Json::array();
  for (const auto& c : record.changes) {
    changes.push_back(Json{{"kind", std::string(to_string(c.kind))},
                           {"legacy_name", c.legacy_name ? Json(*c.legacy_name) : Json()},
                           {"updated_name", c.updated_name ? Json(*c.updated_name) : Json()}});
  }
  return Json{{"api_path", record.api_path.str()},
              {"kind", std::string(to_string(record.kind))},
              {"legacy_sig", render_signature_text(record.legacy)},
              {"updated_sig", render_signature_text(record.updated)},
              {"changes", std::move(changes)}};
}

UpdateRecord update_record_from_json(const Json& row) {
  UpdateRecord rec{DottedPath::parse(row.at("api_path").get<std::string>()),
                   api_kind_from_string(row.at("kind").get<std::string>()),
                   parse_signature_text(row.at("legacy_sig").get<std::string>()),
                   parse_signature_text(row.at("updated_sig").get<std::string>()),
                   {},
                   {}};
  for (const auto& c : row.at("changes")) {
    Change ch{change_kind_from_string(c.at("kind").get<std::string>()), {}, {}};
    if (c.contains("legacy_name") && c["legacy_name"].is_string()) {
      ch.legacy_name = c["legacy_name"].get<std::string>();
    }
    if (c.contains("updated_name") && c["updated_name"].is_string()) {
      ch.updated_name = c["updated_name"].get<std::string>();
    }
    rec.changes.push_back(std::move(ch));
  }
  if (rec.changes.empty()) {
    throw Error(Errc::InvalidValue, rec.api_path.str() + ": update without changes");
  }
  return rec;
}

std::string updates_to_jsonl(const std::vector<UpdateRecord>& updates) {
  std::vector<Json> rows;
  rows.reserve(updates.size());
  for (const auto& u : updates) rows.push_back(update_record_to_json(u));
  return io::to_jsonl(rows);
}

}  // namespace apisync
