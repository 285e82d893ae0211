// Copyright 2026 The apisync Authors
// SPDX-License-Identifier: Apache-2.0

#include "apisync/bench_builder.hpp"

#include <algorithm>
#include <set>

#include "apisync/error.hpp"
#include "apisync/pysource.hpp"
#include "apisync/rng.hpp"
#include "text_util.hpp"

namespace apisync {

namespace {

struct ArgText {
  enum class Kind { Positional, Keyword, Star, DoubleStar } kind = Kind::Positional;
  std::string name;   // keyword name
  std::string value;  // full text for non-keywords
};

std::vector<ArgText> split_args(std::string_view code) {
  auto t = detail::trim(code);
  if (t.size() < 2 || t.front() != '(' || detail::find_matching_close(t, 0) != t.size() - 1) {
    throw Error(Errc::InvalidValue, "not an argument list: " + std::string(code));
  }
  std::vector<ArgText> out;
  auto inner = t.substr(1, t.size() - 2);
  if (detail::trim(inner).empty()) return out;
  for (auto piece : detail::split_top_level(inner, ',')) {
    piece = detail::trim(piece);
    if (piece.empty()) continue;
    ArgText a;
    if (piece.substr(0, 2) == "**") {
      a.kind = ArgText::Kind::DoubleStar;
      a.value = std::string(piece);
    } else if (piece.front() == '*') {
      a.kind = ArgText::Kind::Star;
      a.value = std::string(piece);
    } else if (auto eq = detail::find_assignment(piece); eq != std::string_view::npos) {
      a.kind = ArgText::Kind::Keyword;
      a.name = std::string(detail::trim(piece.substr(0, eq)));
      a.value = std::string(detail::trim(piece.substr(eq + 1)));
    } else {
      a.value = std::string(piece);
    }
    out.push_back(std::move(a));
  }
  return out;
}

std::string render_args(const std::vector<ArgText>& args) {
  std::vector<std::string> parts;
  for (const auto& a : args) {
    parts.push_back(a.kind == ArgText::Kind::Keyword ? a.name + "=" + a.value : a.value);
  }
  return "(" + detail::join(parts, ", ") + ")";
}

ArgText keyword(std::string name, std::string value) {
  ArgText a;
  a.kind = ArgText::Kind::Keyword;
  a.name = std::move(name);
  a.value = std::move(value);
  return a;
}

// Fabricated keywords keyed by the names already present. Rows are tried in
// order; the last row applies to anything.
struct FabricatedRow {
  std::vector<std::string_view> triggers;
  std::vector<std::pair<std::string_view, std::string_view>> keywords;
};

const std::vector<FabricatedRow>& fabricated_table() {
  static const std::vector<FabricatedRow> table = {
      {{"fp", "file", "path", "stream", "buf", "filename", "f"},
       {{"indent", "4"}, {"encoding", "'utf-8'"}}},
      {{"dtype", "shape", "size", "tensor", "array", "arr", "input", "x", "data"},
       {{"device", "'cpu'"}, {"copy", "False"}}},
      {{"axis", "dim", "dims"}, {{"keepdims", "True"}, {"out", "None"}}},
      {{"model", "module", "state", "dict", "params", "parameters"},
       {{"recurse", "True"}, {"strict", "False"}}},
      {{"url", "host", "request", "session", "headers"}, {{"timeout", "30"}, {"verify", "True"}}},
      {{}, {{"verbose", "True"}, {"inplace", "False"}}},
  };
  return table;
}

bool name_matches(std::string_view name, std::string_view trigger) {
  if (name == trigger) return true;
  for (auto part : detail::split(name, '_')) {
    if (part == trigger) return true;
  }
  return false;
}

bool mentions(std::string_view text, std::string_view ident) {
  auto is_ident = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
  };
  for (auto pos = text.find(ident); pos != std::string_view::npos;
       pos = text.find(ident, pos + 1)) {
    bool left = pos == 0 || !is_ident(text[pos - 1]);
    bool right = pos + ident.size() >= text.size() || !is_ident(text[pos + ident.size()]);
    if (left && right) return true;
  }
  return false;
}

const ParameterList& best_overload(const ApiSignature& api, const std::vector<ArgText>& args) {
  for (const auto& ol : api.overloads) {
    bool ok = true;
    for (const auto& a : args) {
      if (a.kind != ArgText::Kind::Keyword) continue;
      const Parameter* p = ol.find(a.name);
      if (!(p && accepts_keyword(p->kind)) && !ol.has_kind(ParamKind::VarKeyword)) ok = false;
    }
    if (ok) return ol;
  }
  return api.overloads.front();
}

// Parameter receiving positional argument `index`, or nullptr.
const Parameter* positional_param(const ParameterList& ol, std::size_t index) {
  std::size_t seen = 0;
  for (const auto& p : ol) {
    if (accepts_position(p.kind)) {
      if (seen == index) return &p;
      ++seen;
    } else if (p.kind == ParamKind::VarPositional) {
      return &p;
    }
  }
  return nullptr;
}

std::string pair_key(const PairRecord& pair) {
  return pair.api_path.str() + "|" + pair.metadata.file_id + ":" +
         std::to_string(pair.metadata.start_line);
}

constexpr std::string_view kRenameNames[] = {"z", "y", "w", "u", "q", "n", "m", "k"};

}  // namespace

Json pair_record_to_json(const PairRecord& p) {
  return Json{{"api_path", p.api_path.str()},
              {"updated_code", p.updated_code},
              {"outdated_code", p.outdated_code},
              {"metadata", metadata_to_json(p.metadata)}};
}

PairRecord pair_record_from_json(const Json& row) {
  try {
    PairRecord p{DottedPath::parse(row.at("api_path").get<std::string>()),
                 metadata_from_json(row.at("metadata")), row.at("updated_code").get<std::string>(),
                 row.at("outdated_code").get<std::string>()};
    if (p.updated_code == p.outdated_code) {
      throw Error(Errc::InvalidValue, "pair with identical codes for " + p.api_path.str());
    }
    return p;
  } catch (const Json::exception& e) {
    throw Error(Errc::InvalidValue, std::string("pair row: ") + e.what());
  }
}

void SplitCounts::validate() const {
  if (per_api != train + test || test == 0) {
    throw Error(Errc::InvalidCounts, "per_api must equal train + test with test > 0 (got " +
                                         std::to_string(per_api) + " = " + std::to_string(train) +
                                         " + " + std::to_string(test) + ")");
  }
}

SplitSpec sample_and_split(const std::map<std::string, std::vector<PairRecord>>& pairs,
                           const SplitCounts& counts, std::uint64_t seed) {
  counts.validate();
  SplitSpec spec;
  for (const auto& [api, list] : pairs) {
    if (list.size() < counts.per_api) {
      spec.dropped.push_back({api, list.size()});
      continue;
    }
    std::vector<std::size_t> idx(list.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(derive_seed(seed, "split|" + api));
    for (std::size_t i = 0; i < counts.per_api; ++i) {
      std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
    }
    ApiSplit s{DottedPath::parse(api), {}, {}};
    for (std::size_t i = 0; i < counts.per_api; ++i) {
      (i < counts.train ? s.train : s.test).push_back(list[idx[i]]);
    }
    spec.kept.push_back(std::move(s));
  }
  return spec;
}

BenchItemQA make_cct(const PairRecord& pair) {
  return {pair.api_path, pair.metadata.code_context, pair.updated_code};
}

BenchItemQA make_ect(const PairRecord& pair) {
  return {pair.api_path, pair.metadata.code_context + pair.outdated_code, pair.updated_code};
}

std::string_view to_string(DistractorApproach a) noexcept {
  switch (a) {
    case DistractorApproach::RemoveOptional: return "RemoveOptional";
    case DistractorApproach::AddKeyword: return "AddKeyword";
    case DistractorApproach::PermutePositional: return "PermutePositional";
    case DistractorApproach::RenameKeyword: return "RenameKeyword";
  }
  return "?";
}

std::vector<DistractorCandidate> distractor_candidates(const PairRecord& pair,
                                                       const ApiSignature& legacy,
                                                       const ApiSignature& updated) {
  const auto args = split_args(pair.updated_code);
  const ParameterList& ol = best_overload(updated, args);

  std::set<std::string> used;  // every name a wrong keyword must avoid
  std::set<std::string> updated_names;
  for (const auto& o : updated.overloads) {
    for (const auto& p : o) {
      used.insert(p.name);
      updated_names.insert(p.name);
    }
  }
  bool optional_api = false;
  for (const auto* sig : {&legacy, &updated}) {
    for (const auto& o : sig->overloads) {
      for (const auto& p : o) {
        used.insert(p.name);
        if (!p.required || p.kind == ParamKind::VarKeyword) optional_api = true;
      }
    }
  }
  std::size_t positional = 0;
  bool has_star = false;
  for (const auto& a : args) {
    if (a.kind == ArgText::Kind::Keyword) used.insert(a.name);
    if (a.kind == ArgText::Kind::Positional) ++positional;
    if (a.kind == ArgText::Kind::Star || a.kind == ArgText::Kind::DoubleStar) has_star = true;
  }

  std::vector<DistractorCandidate> out;
  std::vector<std::string> seen = {pysrc::normalize_code(pair.updated_code),
                                   pysrc::normalize_code(pair.outdated_code)};
  auto add = [&](DistractorApproach how, const std::vector<ArgText>& v) {
    auto text = render_args(v);
    auto norm = pysrc::normalize_code(text);
    if (std::find(seen.begin(), seen.end(), norm) != seen.end()) return;
    seen.push_back(norm);
    out.push_back({how, std::move(text)});
  };

  // 1: drop an optional argument.
  std::size_t pos_index = 0;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const auto& a = args[i];
    bool optional = false;
    if (a.kind == ArgText::Kind::Keyword) {
      const Parameter* p = ol.find(a.name);
      optional = !p || !p->required;
    } else if (a.kind == ArgText::Kind::Positional) {
      const Parameter* p = positional_param(ol, pos_index++);
      optional = pos_index == positional && p && !p->required;
    }
    if (!optional) continue;
    auto v = args;
    v.erase(v.begin() + static_cast<std::ptrdiff_t>(i));
    add(DistractorApproach::RemoveOptional, v);
  }

  // 2: add a keyword the updated signature lacks, legacy-only first.
  std::vector<ArgText> extras;
  std::set<std::string> extra_names;
  for (const auto& o : legacy.overloads) {
    for (const auto& p : o) {
      if (!accepts_keyword(p.kind) || updated_names.count(p.name) || extra_names.count(p.name)) {
        continue;
      }
      bool already = std::any_of(args.begin(), args.end(), [&](const ArgText& a) {
        return a.kind == ArgText::Kind::Keyword && a.name == p.name;
      });
      if (already) continue;
      std::string value = mentions(pair.metadata.code_context, p.name)
                              ? p.name
                              : p.default_repr.value_or(p.name);
      extras.push_back(keyword(p.name, value));
      extra_names.insert(p.name);
    }
  }
  std::vector<ArgText> fabricated;
  if (optional_api) {
    for (const auto& row : fabricated_table()) {
      bool hit = row.triggers.empty();
      for (const auto& name : used) {
        for (auto t : row.triggers) hit = hit || name_matches(name, t);
      }
      if (!hit) continue;
      for (const auto& [name, value] : row.keywords) {
        if (!used.count(std::string(name))) {
          fabricated.push_back(keyword(std::string(name), std::string(value)));
        }
      }
      if (!fabricated.empty()) break;
    }
  }
  for (const auto& group : {extras, fabricated}) {
    for (const auto& e : group) {
      auto v = args;
      v.push_back(e);
      add(DistractorApproach::AddKeyword, v);
    }
  }
  if (!extras.empty() && !fabricated.empty()) {
    auto v = args;
    v.push_back(extras.front());
    v.push_back(fabricated.front());
    add(DistractorApproach::AddKeyword, v);
  }

  // 3: swap neighboring positional arguments.
  if (!has_star) {
    for (std::size_t i = 0; i + 1 < positional; ++i) {
      if (args[i].value == args[i + 1].value) continue;
      auto v = args;
      std::swap(v[i], v[i + 1]);
      add(DistractorApproach::PermutePositional, v);
    }
  }

  // 4: pass a value under a wrong name.
  std::vector<std::string> alt;
  for (auto n : kRenameNames) {
    if (!used.count(std::string(n))) alt.emplace_back(n);
    if (alt.size() == 2) break;
  }
  for (std::size_t i = 0; i < args.size(); ++i) {
    const auto& a = args[i];
    bool last_positional = a.kind == ArgText::Kind::Positional && i + 1 == positional && !has_star;
    if (a.kind != ArgText::Kind::Keyword && !last_positional) continue;
    for (const auto& name : alt) {
      auto v = args;
      v[i] = keyword(name, a.value);
      add(DistractorApproach::RenameKeyword, v);
    }
  }
  return out;
}

std::array<std::string, 2> gen_distractors(const PairRecord& pair, const ApiSignature& legacy,
                                           const ApiSignature& updated, std::uint64_t seed) {
  auto all = distractor_candidates(pair, legacy, updated);
  Rng rng(derive_seed(seed, "distractor|" + pair_key(pair)));
  std::vector<int> approaches = {0, 1, 2, 3};
  rng.shuffle(approaches);
  std::vector<std::size_t> picked;
  for (int a : approaches) {
    std::vector<std::size_t> group;
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (static_cast<int>(all[i].approach) == a) group.push_back(i);
    }
    if (group.empty()) continue;
    picked.push_back(group[rng.below(group.size())]);
    if (picked.size() == 2) break;
  }
  if (picked.size() < 2) {
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (std::find(picked.begin(), picked.end(), i) == picked.end()) rest.push_back(i);
    }
    rng.shuffle(rest);
    for (auto i : rest) {
      if (picked.size() == 2) break;
      picked.push_back(i);
    }
  }
  if (picked.size() < 2) {
    throw Error(Errc::DistractorExhausted,
                "only " + std::to_string(all.size()) + " distinct distractor(s) for " +
                    pair_key(pair));
  }
  return {all[picked[0]].text, all[picked[1]].text};
}

BenchItemMCQ make_mcq_ordered(const PairRecord& pair, const std::array<std::string, 2>& d,
                              const std::array<int, 4>& order) {
  const std::array<const std::string*, 4> pool = {&pair.updated_code, &pair.outdated_code, &d[0],
                                                  &d[1]};
  BenchItemMCQ item{pair.api_path, pair.metadata.code_context, {}, 'A'};
  std::array<bool, 4> used{};
  for (std::size_t i = 0; i < 4; ++i) {
    int k = order[i];
    if (k < 0 || k > 3 || used[static_cast<std::size_t>(k)]) {
      throw Error(Errc::InvalidValue, "option order is not a permutation");
    }
    used[static_cast<std::size_t>(k)] = true;
    item.options[i] = *pool[static_cast<std::size_t>(k)];
    if (k == 0) item.answer = static_cast<char>('A' + i);
  }
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = i + 1; j < 4; ++j) {
      if (pysrc::normalize_code(item.options[i]) == pysrc::normalize_code(item.options[j])) {
        throw Error(Errc::InvalidValue, "MCQ options are not distinct for " + pair_key(pair));
      }
    }
  }
  return item;
}

BenchItemMCQ make_mcq(const PairRecord& pair, const std::array<std::string, 2>& d,
                      std::uint64_t seed) {
  std::vector<int> order = {0, 1, 2, 3};
  Rng rng(derive_seed(seed, "mcq|" + pair_key(pair)));
  rng.shuffle(order);
  return make_mcq_ordered(pair, d, {order[0], order[1], order[2], order[3]});
}

TrainItemSFT make_sft(const PairRecord& pair) {
  return {"Please fill the parameter list of api \"" + pair.api_path.str() +
              "\" according to the given context.",
          pair.metadata.code_context, pair.updated_code};
}

TrainItemPref make_pref(const PairRecord& pair) {
  return {std::string(kPrefSystemTurn), pair.metadata.code_context, pair.updated_code,
          pair.outdated_code};
}

Json qa_to_json(const BenchItemQA& item) {
  return Json{{"API_path", item.api_path.str()},
              {"question", item.question},
              {"answer", item.answer}};
}

Json mcq_to_json(const BenchItemMCQ& item) {
  return Json{{"API_path", item.api_path.str()},
              {"question", item.question},
              {"A", item.options[0]},
              {"B", item.options[1]},
              {"C", item.options[2]},
              {"D", item.options[3]},
              {"answer", std::string(1, item.answer)}};
}

Json sft_to_json(const TrainItemSFT& item) {
  return Json{{"instruction", item.instruction}, {"input", item.input}, {"output", item.output}};
}

Json pref_to_json(const TrainItemPref& item) {
  return Json{{"conversations", Json::array({Json{{"from", "system"}, {"value", item.system}},
                                             Json{{"from", "human"}, {"value", item.human}}})},
              {"chosen", Json{{"from", "gpt"}, {"value", item.chosen}}},
              {"rejected", Json{{"from", "gpt"}, {"value", item.rejected}}}};
}

BenchOutputs build_benchmark(
    const SplitSpec& split,
    const std::map<std::string, std::pair<ApiSignature, ApiSignature>>& signatures,
    std::uint64_t seed) {
  BenchOutputs out;
  for (const auto& api : split.kept) {
    auto it = signatures.find(api.api_path.str());
    if (it == signatures.end()) {
      throw Error(Errc::InvalidValue, "no signatures for " + api.api_path.str());
    }
    const auto& [legacy, updated] = it->second;
    for (const auto& pair : api.test) {
      std::array<std::string, 2> d;
      try {
        d = gen_distractors(pair, legacy, updated, seed);
      } catch (const Error& e) {
        if (e.code() != Errc::DistractorExhausted) throw;
        out.flagged.push_back(
            {pair.api_path.str(), pair.metadata.file_id, pair.metadata.start_line, e.what()});
        continue;
      }
      out.cct.push_back(qa_to_json(make_cct(pair)));
      out.ect.push_back(qa_to_json(make_ect(pair)));
      out.mcq.push_back(mcq_to_json(make_mcq(pair, d, seed)));
    }
    for (const auto& pair : api.train) {
      out.train_sft.push_back(sft_to_json(make_sft(pair)));
      out.train_pref.push_back(pref_to_json(make_pref(pair)));
    }
  }
  return out;
}

}  // namespace apisync
