// Copyright 2026 The apisync Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include <doctest.h>

#include "apisync/error.hpp"
#include "apisync/eval_metrics.hpp"
#include "support.hpp"

using namespace apisync;

namespace {

using Tokens = std::vector<std::string>;

// Pass@k by counting k-subsets of n samples (the first c correct) that hold
// at least one correct sample.
double pass_by_enumeration(int n, int c, int k) {
  long hit = 0, all = 0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (__builtin_popcount(mask) != k) continue;
    ++all;
    if (mask & ((1u << c) - 1)) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(all);
}

// Full-table Levenshtein over bytes (inputs below are ASCII).
std::size_t levenshtein(const std::string& a, const std::string& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1,
                          d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
  }
  return d[a.size()][b.size()];
}

std::size_t lcs(const Tokens& a, const Tokens& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      d[i][j] = a[i - 1] == b[j - 1] ? d[i - 1][j - 1] + 1 : std::max(d[i - 1][j], d[i][j - 1]);
    }
  }
  return d[a.size()][b.size()];
}

std::string random_text(std::mt19937_64& rng) {
  static const std::string alphabet = "ab(), =xy1";
  std::string s;
  for (auto n = rng() % 12; n > 0; --n) s.push_back(alphabet[rng() % alphabet.size()]);
  return s;
}

}  // namespace

TEST_CASE("tokenizer splits punctuation") {
  CHECK(tokenize_code("(a, b=1)") == Tokens{"(", "a", ",", "b", "=", "1", ")"});
  CHECK(tokenize_code("  f(x_y,'s')") == Tokens{"f", "(", "x_y", ",", "'", "s", "'", ")"});
  CHECK(tokenize_code("").empty());
}

TEST_CASE("bleu") {
  Tokens x = {"(", "a", ",", "b", ")"};
  CHECK(bleu(x, x) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(bleu({"p", "q", "r", "s"}, x) == 0.0);
  CHECK(bleu({}, x) == 0.0);
  CHECK(testing::code_of([&] { bleu(x, {}); }) == Errc::EmptyReference);

  // Hand evaluation: clipped precisions 6/7, 4/6, 3/5, 2/4 and equal lengths.
  auto c = tokenize_code("(a , b = 1 )");
  auto r = tokenize_code("(a , b = 2 )");
  double want = std::pow((6.0 / 7) * (4.0 / 6) * (3.0 / 5) * (2.0 / 4), 0.25);
  CHECK(std::abs(bleu(c, r) - want) < 1e-12);

  // Brevity penalty: candidate is a 3-token prefix of a 5-token reference.
  BleuConfig uni;
  uni.max_order = 1;
  CHECK(std::abs(bleu({"(", "a", ","}, x, uni) - std::exp(1.0 - 5.0 / 3)) < 1e-12);

  // Clipping: repeated tokens count at most as often as in the reference.
  CHECK(std::abs(bleu({"a", "a", "a"}, {"a", "b", "c"}, uni) - 1.0 / 3) < 1e-12);

  BleuConfig eps;
  eps.smoothing = BleuConfig::Smoothing::Epsilon;
  CHECK(bleu({"(", "a", ")"}, x, eps) > 0.0);
  CHECK(bleu({"(", "a", ")"}, x) == 0.0);

  BleuConfig bad;
  bad.weights = {0.5, 0.5};
  CHECK(testing::code_of([&] { bleu(x, x, bad); }) == Errc::ConfigInvalid);
}

TEST_CASE("rouge-l") {
  CHECK(rouge_l(tokenize_code("( x , y )"), tokenize_code("( x , z )")) ==
        doctest::Approx(0.8).epsilon(1e-15));
  CHECK(rouge_l({"a", "b"}, {"a", "b"}) == 1.0);
  CHECK(rouge_l({"a", "b"}, {"c", "d"}) == 0.0);
  CHECK(testing::code_of([] { rouge_l({"a"}, {}); }) == Errc::EmptyReference);
}

TEST_CASE("red") {
  CHECK(red("(a, b)", "(a, b)") == 0.0);
  CHECK(red("abc", "") == 1.0);
  CHECK(red("", "") == 0.0);
  CHECK(std::abs(red("(a, b)", "(a, c)") - 1.0 / 6) < 1e-15);
  // Code points, not bytes.
  CHECK(std::abs(red("(é)", "(e)") - 1.0 / 3) < 1e-15);
}

TEST_CASE("red and rouge-l against table oracles on random pairs") {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 100; ++i) {
    auto a = random_text(rng);
    auto b = random_text(rng);
    auto longest = std::max(a.size(), b.size());
    double want = longest ? static_cast<double>(levenshtein(a, b)) / longest : 0.0;
    CHECK(std::abs(red(a, b) - want) < 1e-12);
    CHECK(red(a, b) == red(b, a));
    CHECK(red(a, b) >= 0.0);
    CHECK(red(a, b) <= 1.0);
    auto c = random_text(rng);
    CHECK(std::abs(red(a, c) - red(a, b)) <= 1.0);

    auto ta = tokenize_code(a);
    auto tb = tokenize_code(b);
    if (tb.empty()) continue;
    double rl = static_cast<double>(lcs(ta, tb)) / tb.size();
    CHECK(std::abs(rouge_l(ta, tb) - rl) < 1e-12);
    CHECK(rouge_l(tb, tb) == 1.0);
    if (tb.size() >= 4) CHECK(std::abs(bleu(tb, tb) - 1.0) < 1e-12);
    double bl = bleu(ta, tb);
    CHECK(bl >= 0.0);
    CHECK(bl <= 1.0 + 1e-12);
  }
}

TEST_CASE("pass@k") {
  CHECK(pass_at_k(10, 10, 1) == 1.0);
  CHECK(pass_at_k(10, 0, 5) == 0.0);
  CHECK(std::abs(pass_at_k(10, 3, 5) - (1.0 - 21.0 / 252)) < 1e-15);
  CHECK(std::abs(pass_at_k(10, 5, 1) - 0.5) < 1e-15);
  CHECK(testing::code_of([] { pass_at_k(10, 11, 1); }) == Errc::InvalidCounts);
  CHECK(testing::code_of([] { pass_at_k(10, 1, 0); }) == Errc::InvalidCounts);
  CHECK(testing::code_of([] { pass_at_k(3, 1, 4); }) == Errc::InvalidCounts);
}

TEST_CASE("pass@k matches subset enumeration for every n up to 10") {
  for (int n = 1; n <= 10; ++n) {
    for (int c = 0; c <= n; ++c) {
      for (int k = 1; k <= n; ++k) {
        double v = pass_at_k(n, c, k);
        CHECK(std::abs(v - pass_by_enumeration(n, c, k)) < 1e-15);
        if (c > 0) CHECK(v >= pass_at_k(n, c - 1, k));
        if (k > 1) CHECK(v >= pass_at_k(n, c, k - 1));
      }
    }
  }
}

TEST_CASE("codebleu") {
  CHECK(codebleu("(a, b=1)", "(a, b=1)") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(codebleu("(a)", "(a)") == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(codebleu("foo", "bar") == 0.0);

  // Reference tree of "(a, b=2)": the list, the positional a, the name a, the
  // keyword b=2 and the constant 2. The candidate shares the middle two.
  auto ref = argument_subtrees("(a, b=2)");
  REQUIRE(ref);
  CHECK(ref->size() == 5);
  CHECK(syntax_match("(a, b=1)", "(a, b=2)") == doctest::Approx(2.0 / 5).epsilon(1e-15));
  CHECK(syntax_match("(a, b=2)", "(a, b=2)") == 1.0);
  CHECK(syntax_match("(a, b c)", "(a, b=2)") == 0.0);  // not an argument list

  double v = codebleu("(a, b=1)", "(a, b=2)");
  CHECK(v > 0.0);
  CHECK(v < 1.0);

  // Keyword names weigh more in the second component.
  BleuConfig uni;
  uni.max_order = 1;
  auto r = tokenize_code("(x, key=1)");
  double plain = bleu(tokenize_code("(y, key=2)"), r, uni);
  double keyed = weighted_bleu(tokenize_code("(y, key=2)"), r, uni, 5.0);
  CHECK(std::abs(plain - 5.0 / 7) < 1e-12);
  CHECK(std::abs(keyed - 9.0 / 11) < 1e-12);

  // Unparseable input: lexical terms only, renormalized.
  CodeBleuConfig cfg;
  auto c = tokenize_code("(a, b c)");
  auto rr = tokenize_code("(a, b=2)");
  auto bc = cfg.bleu;
  double lexical = (bleu(c, rr, bc) + weighted_bleu(c, rr, bc, 5.0)) / 2;
  CHECK(std::abs(codebleu("(a, b c)", "(a, b=2)") - lexical) < 1e-12);

  cfg.syntax_weight = 0.5;
  CHECK(testing::code_of([&] { codebleu("(a)", "(a)", cfg); }) == Errc::ConfigInvalid);
}

TEST_CASE("answer normalization and letters") {
  CHECK(normalize_answer("The call is flask.json.dump(test_data, out) here") ==
        "(test_data, out)");
  CHECK(normalize_answer("  (a, f(b))\n") == "(a, f(b))");
  CHECK(normalize_answer("  no parens ") == "no parens");
  CHECK(extract_choice("B") == 'B');
  CHECK(extract_choice("b") == 'B');
  CHECK(extract_choice("Answer: B") == 'B');
  CHECK(extract_choice("(C)") == 'C');
  CHECK(extract_choice("D.") == 'D');
  CHECK_FALSE(extract_choice("none of them").has_value());
  CHECK_FALSE(extract_choice("E").has_value());
}

TEST_CASE("score_run") {
  std::vector<std::string> answers = {"(a, b)", "(x, y=1)", "(q)"};
  std::vector<ModelOutputRecord> outs = {
      {2, {"(q)", "(z)"}},
      {0, {"answer: (a, b)"}},
      {1, {"(x, y=1)", "(x)"}},
  };
  auto rep = score_run(BenchTask::CCT, answers, outs);
  REQUIRE(rep.items.size() == 3);
  // Per-item means over samples, then means over items.
  double red0 = 0.0;
  double red1 = (0.0 + red("(x)", "(x, y=1)")) / 2;
  double red2 = (0.0 + 1.0 / 3) / 2;
  CHECK(std::abs(rep.aggregate.at("RED") - (red0 + red1 + red2) / 3) < 1e-12);
  double rl1 = (1.0 + 3.0 / 7) / 2;  // "( x )" vs "( x , y = 1 )"
  double rl2 = (1.0 + 2.0 / 3) / 2;
  CHECK(std::abs(rep.aggregate.at("ROUGE-L") - (1.0 + rl1 + rl2) / 3) < 1e-12);
  CHECK(rep.items[0].values.at("BLEU") == doctest::Approx(1.0));
  CHECK(rep.sample_count == 5);

  ScoreConfig best;
  best.aggregation = ScoreConfig::Aggregation::BestOfN;
  auto b = score_run(BenchTask::CCT, answers, outs, best);
  CHECK(b.aggregate.at("RED") == 0.0);
  CHECK(b.aggregate.at("ROUGE-L") == 1.0);

  auto all_right = score_run(BenchTask::ECT, {"(a, b)"}, {{0, {"(a, b)", "(a,b)"}}});
  CHECK(all_right.aggregate.at("BLEU") == doctest::Approx(1.0));
  CHECK(all_right.aggregate.at("CodeBLEU") == doctest::Approx(1.0));
  CHECK(std::abs(all_right.aggregate.at("RED") - 1.0 / 12) < 1e-12);  // "(a,b)" drops a space

  CHECK(testing::code_of([&] { score_run(BenchTask::CCT, answers, {outs[0], outs[1]}); }) ==
        Errc::MissingItem);
  CHECK(testing::code_of([&] {
          score_run(BenchTask::CCT, answers, {outs[0], outs[1], outs[2], {7, {"x"}}});
        }) == Errc::MissingItem);
}

TEST_CASE("score_run for multiple choice") {
  std::vector<ModelOutputRecord> outs = {
      {0, {"B", "b", "Answer: B", "A", "A", "?", "C", "D", "A", "A"}},
      {1, {"A", "A", "A", "A", "A", "A", "A", "A", "A", "A"}},
  };
  auto rep = score_run(BenchTask::MCQ, {"B", "A"}, outs);
  CHECK(rep.items[0].correct == 3);
  CHECK(rep.items[1].correct == 10);
  CHECK(rep.unextractable == 1);
  CHECK(std::abs(rep.items[0].values.at("P@5") - (1.0 - 21.0 / 252)) < 1e-15);
  CHECK(std::abs(rep.aggregate.at("P@1") - (0.3 + 1.0) / 2) < 1e-12);
  auto j = rep.to_json();
  CHECK(j["task"] == "mcq");
  CHECK(j["counts"]["samples"] == 20);
  CHECK(rep.table().find("P@3") != std::string::npos);

  // With three samples P@5 is not defined and is left out.
  auto few = score_run(BenchTask::MCQ, {"A"}, {{0, {"A", "B", "C"}}});
  CHECK(few.aggregate.count("P@3"));
  CHECK_FALSE(few.aggregate.count("P@5"));
}
