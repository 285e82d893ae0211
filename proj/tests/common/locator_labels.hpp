// Copyright 2026 The apisync Authors
// SPDX-License-Identifier: Apache-2.0

// Reader and scorer for the hand-labeled locator corpus, shared by the unit
// and acceptance tests.

#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "apisync/invocation_locator.hpp"
#include "apisync/io.hpp"

namespace testing {

struct LabeledSite {
  std::string api;
  int start_line = 0;
  int end_line = 0;
  std::string evidence;  // empty when not verifiable
  int situation = 0;
  bool verifiable = false;
};

struct LocatorLabels {
  std::map<std::string, apisync::ApiSignature> apis;
  std::map<std::string, std::vector<LabeledSite>> files;
};

inline LocatorLabels load_locator_labels(const std::filesystem::path& dir) {
  using apisync::Json;
  auto doc = Json::parse(apisync::io::read_file(dir / "labels.json"));
  LocatorLabels out;
  for (const auto& [path, spec] : doc.at("apis").items()) {
    out.apis.emplace(path, apisync::ApiSignature(
                               apisync::DottedPath::parse(path),
                               apisync::api_kind_from_string(spec.at("kind").get<std::string>()),
                               {apisync::parse_signature_text(spec.at("signature").get<std::string>())}));
  }
  for (const auto& [file, sites] : doc.at("files").items()) {
    auto& list = out.files[file];
    for (const auto& s : sites) {
      LabeledSite l;
      l.api = s.at("api").get<std::string>();
      l.start_line = s.at("lines")[0].get<int>();
      l.end_line = s.at("lines")[1].get<int>();
      l.evidence = s.value("evidence", std::string());
      l.situation = s.value("situation", 0);
      l.verifiable = s.at("verifiable").get<bool>();
      list.push_back(l);
    }
  }
  return out;
}

struct LocatorScore {
  int emitted = 0;
  int true_positives = 0;   // emitted and labeled as a true invocation
  int required = 0;         // labeled verifiable
  int required_found = 0;
  int evidence_mismatches = 0;
  int unexpected = 0;       // emitted sites labeled unverifiable
  int metadata_items = 0;
  int roundtrip_failures = 0;
  std::vector<std::string> problems;

  double precision() const { return emitted == 0 ? 1.0 : double(true_positives) / emitted; }
  bool exact() const {
    return true_positives == emitted && required_found == required && unexpected == 0 &&
           evidence_mismatches == 0;
  }
};

/// Source lines [first, last] with the first line's indentation removed from
/// each, joined by newlines. Independent of the locator's own slicing.
inline std::string expected_segment(const std::string& source, int first, int last) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos <= source.size()) {
    auto nl = source.find('\n', pos);
    if (nl == std::string::npos) {
      lines.push_back(source.substr(pos));
      break;
    }
    lines.push_back(source.substr(pos, nl - pos));
    pos = nl + 1;
  }
  const std::string& head = lines[first - 1];
  std::string indent = head.substr(0, head.find_first_not_of(" \t"));
  std::string out;
  for (int i = first; i <= last; ++i) {
    std::string l = lines[i - 1];
    if (l.compare(0, indent.size(), indent) == 0) l.erase(0, indent.size());
    if (i > first) out += '\n';
    out += l;
  }
  return out;
}

inline LocatorScore score_locator_corpus(const std::filesystem::path& dir,
                                         const LocatorLabels& labels) {
  LocatorScore score;
  for (const auto& [file, truth] : labels.files) {
    auto analysis = apisync::analyze_source(file, apisync::io::read_file(dir / file));
    for (const auto& [path, api] : labels.apis) {
      auto sites = apisync::locate_invocations(*analysis, api);
      std::set<std::pair<int, int>> emitted_lines;
      for (const auto& s : sites) {
        ++score.emitted;
        emitted_lines.emplace(s.start_line, s.end_line);
        const LabeledSite* match = nullptr;
        for (const auto& t : truth) {
          if (t.api == path && t.start_line == s.start_line && t.end_line == s.end_line) match = &t;
        }
        if (!match) {
          score.problems.push_back(file + ":" + std::to_string(s.start_line) + " false site for " +
                                   path);
          continue;
        }
        ++score.true_positives;
        if (!match->verifiable) {
          ++score.unexpected;
          score.problems.push_back(file + ":" + std::to_string(s.start_line) +
                                   " emitted a site labeled unverifiable");
          continue;
        }
        bool ev_ok = apisync::to_string(s.evidence.kind) == match->evidence &&
                     (s.evidence.kind != apisync::EvidenceKind::TypedReceiver ||
                      s.evidence.situation == match->situation);
        if (!ev_ok) {
          ++score.evidence_mismatches;
          score.problems.push_back(file + ":" + std::to_string(s.start_line) + " evidence " +
                                   std::string(apisync::to_string(s.evidence.kind)));
        }
      }
      for (const auto& t : truth) {
        if (t.api != path || !t.verifiable) continue;
        ++score.required;
        if (emitted_lines.count({t.start_line, t.end_line})) {
          ++score.required_found;
        } else {
          score.problems.push_back(file + ":" + std::to_string(t.start_line) + " missed " + path);
        }
      }
      auto meta = apisync::segment_and_metadata(*analysis, sites);
      for (const auto& item : meta.items) {
        ++score.metadata_items;
        const apisync::pysrc::Stmt* def = nullptr;
        for (const auto& s : sites) {
          if (s.start_line == item.start_line) def = s.enclosing_def;
        }
        std::string want = def ? expected_segment(analysis->source, def->keyword.line,
                                                  def->span.end.line)
                               : std::string();
        if (item.segment_text() != want) {
          ++score.roundtrip_failures;
          score.problems.push_back(file + ":" + std::to_string(item.start_line) +
                                   " segment text differs");
        }
      }
    }
  }
  return score;
}

}  // namespace testing
