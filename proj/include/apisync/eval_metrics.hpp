// Copyright 2026 The apisync Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "apisync/io.hpp"

namespace apisync {

/// Whitespace separates tokens; every punctuation character other than "_"
/// is a token of its own.
std::vector<std::string> tokenize_code(std::string_view text);

struct BleuConfig {
  enum class Smoothing { None, Epsilon };

  int max_order = 4;
  std::vector<double> weights;  // empty means uniform 1/max_order
  Smoothing smoothing = Smoothing::None;
  double epsilon = 0.1;

  /// Throws Error(ConfigInvalid).
  void validate() const;
  double weight(int n) const;  // n is 1-based
};

/// BP * exp(sum w_n log p_n). Throws Error(EmptyReference).
double bleu(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
            const BleuConfig& cfg = {});

/// LCS(C, R) / |R|. Throws Error(EmptyReference).
double rouge_l(const std::vector<std::string>& candidate,
               const std::vector<std::string>& reference);

/// Code point edit distance over the longer length; 0 when both are empty.
double red(std::string_view candidate, std::string_view reference);

struct CodeBleuConfig {
  double ngram_weight = 1.0 / 3;
  double keyword_weight = 1.0 / 3;
  double syntax_weight = 1.0 / 3;
  double keyword_factor = 5.0;  // weight of keyword-argument name tokens
  BleuConfig bleu;

  void validate() const;
};

/// Subtrees of an argument-list tree, serialized; nullopt when the text is
/// not an argument list.
std::optional<std::vector<std::string>> argument_subtrees(std::string_view code);

/// Matched reference subtrees (clipped multiset) over reference subtrees.
double syntax_match(std::string_view candidate, std::string_view reference);

/// Keyword-weighted BLEU: unigram precision counts keyword-argument names
/// `factor` times; higher orders are plain.
double weighted_bleu(const std::vector<std::string>& candidate,
                     const std::vector<std::string>& reference, const BleuConfig& cfg,
                     double factor);

/// Weighted sum of n-gram BLEU, keyword-weighted BLEU and syntax match. The
/// n-gram order is capped by the shorter token sequence so short argument
/// lists are not zeroed. Unparseable inputs drop the syntax term and
/// renormalize the other two.
double codebleu(std::string_view candidate, std::string_view reference,
                const CodeBleuConfig& cfg = {});

/// 1 - C(n-c, k) / C(n, k), evaluated in exact rationals. Throws
/// Error(InvalidCounts).
double pass_at_k(int n, int c, int k);

/// First standalone A-D letter (any case) once punctuation is blanked.
std::optional<char> extract_choice(std::string_view sample);

/// The outermost balanced "(...)" of a model output, or the trimmed text.
std::string normalize_answer(std::string_view text);

enum class BenchTask { CCT, ECT, MCQ };
std::string_view to_string(BenchTask t) noexcept;
BenchTask bench_task_from_string(std::string_view s);

struct ModelOutputRecord {
  std::size_t item_id = 0;
  std::vector<std::string> samples;
};

Json output_record_to_json(const ModelOutputRecord& r);
ModelOutputRecord output_record_from_json(const Json& row);

struct ScoreConfig {
  enum class Aggregation { MeanOverSamples, BestOfN };

  BleuConfig bleu;
  CodeBleuConfig codebleu;
  std::vector<int> ks = {1, 3, 5};
  Aggregation aggregation = Aggregation::MeanOverSamples;
};

struct ItemScore {
  std::size_t item_id = 0;
  std::map<std::string, double> values;
  int samples = 0;
  int correct = 0;  // MCQ only
};

struct MetricReport {
  BenchTask task = BenchTask::CCT;
  std::vector<ItemScore> items;
  std::map<std::string, double> aggregate;
  std::size_t sample_count = 0;
  std::size_t unextractable = 0;  // MCQ samples without a letter

  Json to_json() const;
  /// Fixed-width summary, one metric per line.
  std::string table() const;
};

/// `answers[i]` is the reference for item id i: an argument list for CCT and
/// ECT, a letter for MCQ. Every item needs exactly one output record.
/// Throws Error(MissingItem) when ids do not align.
MetricReport score_run(BenchTask task, const std::vector<std::string>& answers,
                       const std::vector<ModelOutputRecord>& outputs,
                       const ScoreConfig& cfg = {});

}  // namespace apisync
