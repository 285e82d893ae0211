// Copyright 2026 The apisync Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <random>
#include <tuple>

#include "apisync/dump_io.hpp"
#include "apisync/error.hpp"
#include "apisync/update_detector.hpp"
#include "support.hpp"

using namespace apisync;

namespace {

// Full-matrix Levenshtein, written independently of the library's
// rolling-row version.
std::size_t levenshtein_oracle(const std::string& a, const std::string& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1,
                          d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u)});
    }
  }
  return d[a.size()][b.size()];
}

ApiSignature fn(const std::string& path, std::initializer_list<const char*> overloads,
                ApiKind kind = ApiKind::Function) {
  std::vector<ParameterList> lists;
  for (auto o : overloads) lists.push_back(parse_signature_text(o));
  return ApiSignature(DottedPath::parse(path), kind, std::move(lists));
}

using ChangeTuple = std::tuple<std::string, std::string, std::string>;

std::vector<ChangeTuple> tuples(const std::vector<Change>& changes) {
  std::vector<ChangeTuple> out;
  for (const auto& c : changes) {
    out.emplace_back(std::string(to_string(c.kind)), c.legacy_name.value_or("-"),
                     c.updated_name.value_or("-"));
  }
  std::sort(out.begin(), out.end());
  return out;
}

// The same change set seen from the other side.
std::vector<ChangeTuple> mirrored(const std::vector<Change>& changes) {
  std::vector<Change> flipped;
  for (const auto& c : changes) {
    Change f = c;
    std::swap(f.legacy_name, f.updated_name);
    if (c.kind == ChangeKind::ParameterAdded) f.kind = ChangeKind::ParameterRemoved;
    if (c.kind == ChangeKind::ParameterRemoved) f.kind = ChangeKind::ParameterAdded;
    flipped.push_back(f);
  }
  return tuples(flipped);
}

// A random edit of `base`: defaults, names, kinds, order, additions and
// removals. Retries until the edit yields a valid list.
ParameterList mutate(const ParameterList& base, std::mt19937_64& rng) {
  auto pick = [&](std::size_t n) { return n == 0 ? 0 : rng() % n; };
  for (int attempt = 0; attempt < 100; ++attempt) {
    auto params = base.params();
    int edits = 1 + static_cast<int>(pick(3));
    for (int e = 0; e < edits; ++e) {
      switch (pick(7)) {
        case 0:
          if (!params.empty()) {
            auto& p = params[pick(params.size())];
            if (p.default_repr) p.default_repr = "'changed'";
          }
          break;
        case 1:
          if (!params.empty()) params[pick(params.size())].name += "s";
          break;
        case 2:
          if (!params.empty()) params.erase(params.begin() + static_cast<long>(pick(params.size())));
          break;
        case 3:
          params.insert(params.begin() + static_cast<long>(pick(params.size() + 1)),
                        Parameter::positional_or_keyword("extra", "None"));
          break;
        case 4:
          if (params.size() >= 2) {
            auto i = pick(params.size() - 1);
            std::swap(params[i], params[i + 1]);
          }
          break;
        case 5:
          if (!params.empty()) {
            auto& p = params[pick(params.size())];
            if (!is_star_kind(p.kind)) {
              p.kind = p.kind == ParamKind::KeywordOnly ? ParamKind::PositionalOrKeyword
                                                        : ParamKind::KeywordOnly;
            }
          }
          break;
        default:
          if (!params.empty()) {
            auto& p = params[pick(params.size())];
            if (!is_star_kind(p.kind)) {
              p.required = !p.required;
              p.default_repr = p.required ? std::nullopt : std::optional<std::string>("0");
            }
          }
      }
    }
    try {
      return ParameterList(std::move(params));
    } catch (const Error&) {
    }
  }
  return base;
}

}  // namespace

TEST_CASE("name similarity") {
  CHECK(name_similarity("token", "token") == 1.0);
  CHECK(name_similarity("use_auth_token", "token") == doctest::Approx(1.0 - 9.0 / 14.0));
  CHECK(name_similarity("ab", "cd") == 0.0);
  CHECK(name_similarity("colour", "color") == doctest::Approx(5.0 / 6.0));

  std::mt19937_64 rng(7);
  const std::string alphabet = "abc_";
  for (int i = 0; i < 300; ++i) {
    std::string a, b;
    for (auto n = 1 + rng() % 8; n > 0; --n) a += alphabet[rng() % alphabet.size()];
    for (auto n = 1 + rng() % 8; n > 0; --n) b += alphabet[rng() % alphabet.size()];
    double expect = 1.0 - static_cast<double>(levenshtein_oracle(a, b)) /
                              static_cast<double>(std::max(a.size(), b.size()));
    CAPTURE(a);
    CAPTURE(b);
    CHECK(name_similarity(a, b) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(name_similarity(a, b) == name_similarity(b, a));
    CHECK((name_similarity(a, b) == 1.0) == (a == b));
  }
}

TEST_CASE("parameter mapping") {
  auto xy = parse_signature_text("(x, y)");
  auto id = build_parameter_mapping(xy, xy, 0.6);
  REQUIRE(id);
  CHECK(id->positional_or_keyword.pairs ==
        std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {1, 1}});

  CHECK_FALSE(build_parameter_mapping(parse_signature_text("(use_auth_token)"),
                                      parse_signature_text("(token)"), 0.6));
  auto renamed = build_parameter_mapping(parse_signature_text("(colour)"),
                                         parse_signature_text("(color)"), 0.6);
  REQUIRE(renamed);
  CHECK(renamed->positional_or_keyword.pairs.size() == 1);

  auto kw = build_parameter_mapping(parse_signature_text("(*, a, b)"),
                                    parse_signature_text("(*, b, a)"), 1.0);
  REQUIRE(kw);
  CHECK(kw->keyword_only.pairs == std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}, {1, 0}});

  CHECK_FALSE(build_parameter_mapping(parse_signature_text("(a, /)"),
                                      parse_signature_text("(a, b, /)"), 0.6));
  for (double bad : {-0.1, 1.5}) {
    CHECK(testing::code_of([&] { build_parameter_mapping(xy, xy, bad); }) ==
          Errc::ThresholdOutOfRange);
  }
}

TEST_CASE("classify_update examples") {
  auto legacy_full = fn("numpy.full", {"(shape, fill_value, dtype=None, order='C', *, device=None, like=None)"});
  auto updated_full = fn("numpy.full", {"(shape, fill_value, dtype=None, order='C', *, like=None)"});
  auto rec = classify_update(legacy_full, updated_full);
  REQUIRE(rec);
  CHECK(tuples(rec->changes) == std::vector<ChangeTuple>{{"ParameterRemoved", "device", "-"}});

  CHECK_FALSE(classify_update(legacy_full, legacy_full));

  auto kind = classify_update(fn("p.f", {"(a, b=1)"}), fn("p.f", {"(a, *, b=1)"}));
  REQUIRE(kind);
  CHECK(tuples(kind->changes) == std::vector<ChangeTuple>{{"KindChanged", "b", "b"}});

  CHECK_THROWS_AS(classify_update(fn("p.f", {"(a)"}), fn("p.g", {"(a)"})), Error);
  CHECK(testing::code_of([] {
          classify_update(fn("p.C", {"(a)"}, ApiKind::Initializer), fn("p.C", {"(a)"}));
        }) == Errc::PathMismatch);
}

TEST_CASE("overload pairing prefers an exact match, then the fewest changes") {
  auto legacy = fn("p.f", {"(a)", "(a, b)"});
  CHECK_FALSE(classify_update(legacy, fn("p.f", {"(a, b)", "(c, d, e)"})));
  auto rec = classify_update(legacy, fn("p.f", {"(a, b, c)", "(q, r, s, t)"}));
  REQUIRE(rec);
  CHECK(render_signature_text(rec->legacy) == "(a, b)");
  CHECK(tuples(rec->changes) == std::vector<ChangeTuple>{{"ParameterAdded", "-", "c"}});
}

TEST_CASE("sub-threshold renames are reported as near matches") {
  auto cmp = compare_overloads(parse_signature_text("(path, *, use_auth_token=None)"),
                               parse_signature_text("(path, *, token=None)"));
  REQUIRE(cmp.near_matches.size() == 1);
  CHECK(cmp.near_matches[0].legacy_name == "use_auth_token");
  CHECK(cmp.near_matches[0].updated_name == "token");
  CHECK(cmp.near_matches[0].score == doctest::Approx(1.0 - 9.0 / 14.0));
}

TEST_CASE("fixture dump pair matches the hand-derived table") {
  auto legacy = load_dump(testing::fixture("dumps/toylib-1.0.json"));
  auto updated = load_dump(testing::fixture("dumps/toylib-2.0.json"));
  auto expected = Json::parse(io::read_file(testing::fixture("dumps/expected_classification.json")));
  auto report = diff_dumps(legacy, updated);

  std::map<std::string, std::vector<ChangeTuple>> got;
  for (const auto& u : report.updates) got[u.api_path.str()] = tuples(u.changes);

  std::size_t expected_updates = 0;
  for (const auto& [api, verdict] : expected.items()) {
    if (api.starts_with("_")) continue;
    CAPTURE(api);
    if (verdict.is_null()) {
      CHECK(got.count(api) == 0);
      continue;
    }
    ++expected_updates;
    std::vector<ChangeTuple> want;
    for (const auto& c : verdict) {
      want.emplace_back(c[0].get<std::string>(), c[1].is_null() ? "-" : c[1].get<std::string>(),
                        c[2].is_null() ? "-" : c[2].get<std::string>());
    }
    std::sort(want.begin(), want.end());
    REQUIRE(got.count(api) == 1);
    CHECK(got[api] == want);
  }
  CHECK(report.updates.size() == expected_updates);
  CHECK(report.unchanged_count == 12 - expected_updates);
  CHECK(report.apis_only_in_legacy.empty());
  CHECK(report.apis_only_in_updated.empty());
}

TEST_CASE("diff_dumps partitions the path union") {
  auto legacy = load_dump(testing::fixture("dumps/toylib-1.0.json"));
  auto updated = load_dump(testing::fixture("dumps/toylib-2.0.json"));
  auto gone = DottedPath::parse("toylib.io.save");
  updated.apis.erase(gone);
  auto added = DottedPath::parse("toylib.io.stream");
  updated.apis.emplace(added, fn("toylib.io.stream", {"(path)"}));
  auto report = diff_dumps(legacy, updated);
  CHECK(report.apis_only_in_legacy == std::vector<DottedPath>{gone});
  CHECK(report.apis_only_in_updated == std::vector<DottedPath>{added});
  CHECK(report.updates.size() + report.unchanged_count + 2 == 13);

  auto same = diff_dumps(legacy, legacy);
  CHECK(same.updates.empty());
  CHECK(same.unchanged_count == legacy.apis.size());

  SignatureDump other = legacy;
  other.library = "otherlib";
  CHECK(testing::code_of([&] { diff_dumps(legacy, other); }) == Errc::LibraryMismatch);
}

TEST_CASE("update records round trip through JSON") {
  auto legacy = load_dump(testing::fixture("dumps/toylib-1.0.json"));
  auto updated = load_dump(testing::fixture("dumps/toylib-2.0.json"));
  for (const auto& u : diff_dumps(legacy, updated).updates) {
    auto row = update_record_to_json(u);
    auto back = update_record_from_json(row);
    CHECK(back.api_path == u.api_path);
    CHECK(back.legacy == u.legacy);
    CHECK(back.updated == u.updated);
    CHECK(back.changes == u.changes);
    CHECK(update_record_to_json(back).dump() == row.dump());
  }
}

TEST_CASE("rules hold exactly when no change is detected") {
  std::mt19937_64 rng(11);
  int no_change = 0;
  for (int i = 0; i < 2000; ++i) {
    auto a = testing::random_parameter_list(rng);
    auto b = (i % 5 == 0) ? testing::random_parameter_list(rng) : mutate(a, rng);
    auto cmp = compare_overloads(a, b);
    bool rules = satisfies_no_modification_rules(a, b);
    CAPTURE(render_signature_text(a));
    CAPTURE(render_signature_text(b));
    CHECK(cmp.changes.empty() == rules);
    no_change += rules ? 1 : 0;
  }
  // Both verdicts must be exercised for the property to mean anything.
  CHECK(no_change > 50);
  CHECK(no_change < 1900);
}

TEST_CASE("detection is symmetric") {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 1000; ++i) {
    auto a = testing::random_parameter_list(rng);
    auto b = mutate(a, rng);
    auto sa = ApiSignature(DottedPath::parse("p.f"), ApiKind::Function, {a});
    auto sb = ApiSignature(DottedPath::parse("p.f"), ApiKind::Function, {b});
    auto forward = classify_update(sa, sb);
    auto backward = classify_update(sb, sa);
    CAPTURE(render_signature_text(a));
    CAPTURE(render_signature_text(b));
    REQUIRE(forward.has_value() == backward.has_value());
    if (forward) CHECK(mirrored(forward->changes) == tuples(backward->changes));
  }
}

TEST_CASE("default-only revisions are never updates") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 500; ++i) {
    auto a = testing::random_parameter_list(rng);
    auto params = a.params();
    for (auto& p : params) {
      if (p.default_repr) p.default_repr = "revised_" + std::to_string(i);
    }
    ParameterList b(std::move(params));
    auto sa = ApiSignature(DottedPath::parse("p.f"), ApiKind::Function, {a});
    auto sb = ApiSignature(DottedPath::parse("p.f"), ApiKind::Function, {b});
    CHECK_FALSE(classify_update(sa, sb));
  }
}

TEST_CASE("threshold one never yields renames") {
  std::mt19937_64 rng(14);
  for (int i = 0; i < 1000; ++i) {
    auto a = testing::random_parameter_list(rng);
    auto b = mutate(a, rng);
    for (const auto& c : compare_overloads(a, b, 1.0).changes) {
      CHECK(c.kind != ChangeKind::Renamed);
    }
  }
}

TEST_CASE("annotation-only changes are ignored") {
  CHECK_FALSE(classify_update(fn("p.f", {"(x: int, y: str='a')"}),
                              fn("p.f", {"(x: float, y: bytes='a')"})));
}
