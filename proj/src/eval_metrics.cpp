// Copyright 2026 The apisync Authors
// SPDX-License-Identifier: Apache-2.0

#include "apisync/eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <boost/multiprecision/cpp_int.hpp>

#include "apisync/error.hpp"
#include "apisync/pysource.hpp"
#include "text_util.hpp"

namespace apisync {

namespace {

using Tokens = std::vector<std::string>;

bool is_punct(char c) {
  return c != '_' && std::ispunct(static_cast<unsigned char>(c)) != 0;
}

std::map<std::vector<std::string>, int> ngram_counts(const Tokens& t, int n) {
  std::map<std::vector<std::string>, int> out;
  if (static_cast<int>(t.size()) < n) return out;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= t.size(); ++i) {
    ++out[Tokens(t.begin() + static_cast<std::ptrdiff_t>(i),
                 t.begin() + static_cast<std::ptrdiff_t>(i) + n)];
  }
  return out;
}

// Clipped matches and candidate total for order n.
std::pair<double, double> clipped(const Tokens& cand, const Tokens& ref, int n) {
  auto cc = ngram_counts(cand, n);
  auto rc = ngram_counts(ref, n);
  double match = 0, total = 0;
  for (const auto& [g, c] : cc) {
    total += c;
    auto it = rc.find(g);
    if (it != rc.end()) match += std::min(c, it->second);
  }
  return {match, total};
}

double smoothed(double match, double total, const BleuConfig& cfg) {
  if (match > 0) return match / total;
  if (cfg.smoothing == BleuConfig::Smoothing::Epsilon) return cfg.epsilon / std::max(total, 1.0);
  return 0.0;
}

double brevity(std::size_t c, std::size_t r) {
  if (c > r) return 1.0;
  return std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
}

// Combines per-order precisions; p[0] is the unigram precision.
double combine(const std::vector<double>& p, const BleuConfig& cfg, std::size_t c,
               std::size_t r) {
  double log_sum = 0;
  for (int n = 1; n <= cfg.max_order; ++n) {
    double pn = p[static_cast<std::size_t>(n - 1)];
    if (pn <= 0) return 0.0;
    log_sum += cfg.weight(n) * std::log(pn);
  }
  return brevity(c, r) * std::exp(log_sum);
}

void require_reference(const Tokens& ref) {
  if (ref.empty()) throw Error(Errc::EmptyReference, "empty reference");
}

// Names written as `name=` directly inside an argument list.
std::vector<std::string> keyword_names(const Tokens& t) {
  std::vector<std::string> out;
  for (std::size_t i = 1; i + 1 < t.size(); ++i) {
    bool ident = !t[i].empty() && !is_punct(t[i][0]) &&
                 !std::isdigit(static_cast<unsigned char>(t[i][0]));
    bool after_sep = t[i - 1] == "(" || t[i - 1] == ",";
    bool assign = t[i + 1] == "=" && (i + 2 >= t.size() || t[i + 2] != "=");
    if (ident && after_sep && assign) out.push_back(t[i]);
  }
  return out;
}

BleuConfig capped(const BleuConfig& cfg, std::size_t c, std::size_t r) {
  int order = static_cast<int>(std::min<std::size_t>({static_cast<std::size_t>(cfg.max_order),
                                                      c, r}));
  BleuConfig out = cfg;
  if (order < cfg.max_order) {
    out.max_order = std::max(order, 1);
    out.weights.clear();
  }
  return out;
}

void collect(std::string_view text, const pysrc::Expr* e, std::vector<std::string>& out) {
  if (!e) return;
  static const char* names[] = {"Name",     "Attribute",     "Call",      "Constant", "Subscript",
                                "Starred",  "Lambda",        "Comprehension", "NamedExpr",
                                "Compound"};
  std::string label = names[static_cast<int>(e->kind)];
  if (!e->tag.empty()) label += "." + e->tag;
  out.push_back(label + ":" + pysrc::normalize_code(pysrc::slice(text, e->span)));
  collect(text, e->value.get(), out);
  collect(text, e->value2.get(), out);
  for (const auto& a : e->args) collect(text, a.value.get(), out);
  for (const auto& c : e->children) collect(text, c.get(), out);
  for (const auto& g : e->generators) {
    collect(text, g.target.get(), out);
    collect(text, g.iter.get(), out);
    for (const auto& c : g.conditions) collect(text, c.get(), out);
  }
}

}  // namespace

std::vector<std::string> tokenize_code(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (detail::is_space(c) || is_punct(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
      if (is_punct(c)) out.emplace_back(1, c);
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

void BleuConfig::validate() const {
  if (max_order < 1) throw Error(Errc::ConfigInvalid, "BLEU order must be at least 1");
  if (!weights.empty()) {
    if (static_cast<int>(weights.size()) != max_order) {
      throw Error(Errc::ConfigInvalid, "BLEU weights must have one entry per order");
    }
    double s = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (std::abs(s - 1.0) > 1e-9) throw Error(Errc::ConfigInvalid, "BLEU weights must sum to 1");
  }
  if (smoothing == Smoothing::Epsilon && !(epsilon > 0)) {
    throw Error(Errc::ConfigInvalid, "BLEU epsilon must be positive");
  }
}

double BleuConfig::weight(int n) const {
  return weights.empty() ? 1.0 / max_order : weights[static_cast<std::size_t>(n - 1)];
}

double bleu(const Tokens& candidate, const Tokens& reference, const BleuConfig& cfg) {
  cfg.validate();
  require_reference(reference);
  if (candidate.empty()) return 0.0;
  std::vector<double> p;
  for (int n = 1; n <= cfg.max_order; ++n) {
    auto [m, t] = clipped(candidate, reference, n);
    p.push_back(smoothed(m, t, cfg));
  }
  return combine(p, cfg, candidate.size(), reference.size());
}

double rouge_l(const Tokens& candidate, const Tokens& reference) {
  require_reference(reference);
  std::vector<std::size_t> row(reference.size() + 1, 0);
  for (const auto& c : candidate) {
    std::size_t diag = 0;
    for (std::size_t j = 1; j <= reference.size(); ++j) {
      std::size_t up = row[j];
      row[j] = c == reference[j - 1] ? diag + 1 : std::max(row[j], row[j - 1]);
      diag = up;
    }
  }
  return static_cast<double>(row.back()) / static_cast<double>(reference.size());
}

double red(std::string_view candidate, std::string_view reference) {
  auto a = detail::utf8_to_u32(candidate);
  auto b = detail::utf8_to_u32(reference);
  auto longest = std::max(a.size(), b.size());
  if (longest == 0) return 0.0;
  return static_cast<double>(detail::edit_distance(a, b)) / static_cast<double>(longest);
}

void CodeBleuConfig::validate() const {
  bleu.validate();
  for (double w : {ngram_weight, keyword_weight, syntax_weight}) {
    if (!(w >= 0)) throw Error(Errc::ConfigInvalid, "CodeBLEU weights must be non-negative");
  }
  if (std::abs(ngram_weight + keyword_weight + syntax_weight - 1.0) > 1e-9) {
    throw Error(Errc::ConfigInvalid, "CodeBLEU weights must sum to 1");
  }
  if (!(keyword_factor > 0)) throw Error(Errc::ConfigInvalid, "keyword factor must be positive");
}

std::optional<std::vector<std::string>> argument_subtrees(std::string_view code) {
  auto text = detail::trim(code);
  auto args = pysrc::parse_argument_list(text);
  if (!args) return std::nullopt;
  std::vector<std::string> out = {"Args:" + pysrc::normalize_code(text)};
  for (const auto& a : args->args) {
    std::string value =
        a.value ? pysrc::normalize_code(pysrc::slice(text, a.value->span)) : std::string();
    switch (a.kind) {
      case pysrc::Arg::Kind::Positional: out.push_back("Pos:" + value); break;
      case pysrc::Arg::Kind::Keyword: out.push_back("Kw:" + a.keyword + "=" + value); break;
      case pysrc::Arg::Kind::Star: out.push_back("Star:" + value); break;
      case pysrc::Arg::Kind::DoubleStar: out.push_back("DoubleStar:" + value); break;
    }
    collect(text, a.value.get(), out);
  }
  return out;
}

double syntax_match(std::string_view candidate, std::string_view reference) {
  auto ref = argument_subtrees(reference);
  auto cand = argument_subtrees(candidate);
  if (!ref || !cand) return 0.0;
  std::map<std::string, int> pool;
  for (const auto& s : *cand) ++pool[s];
  int matched = 0;
  for (const auto& s : *ref) {
    auto it = pool.find(s);
    if (it != pool.end() && it->second > 0) {
      --it->second;
      ++matched;
    }
  }
  return static_cast<double>(matched) / static_cast<double>(ref->size());
}

double weighted_bleu(const Tokens& candidate, const Tokens& reference, const BleuConfig& cfg,
                     double factor) {
  cfg.validate();
  require_reference(reference);
  if (candidate.empty()) return 0.0;
  auto kw = keyword_names(reference);
  auto kc = keyword_names(candidate);
  kw.insert(kw.end(), kc.begin(), kc.end());
  auto weight = [&](const std::string& t) {
    return std::find(kw.begin(), kw.end(), t) != kw.end() ? factor : 1.0;
  };
  std::map<std::string, int> cc, rc;
  for (const auto& t : candidate) ++cc[t];
  for (const auto& t : reference) ++rc[t];
  double match = 0, total = 0;
  for (const auto& [t, c] : cc) {
    total += weight(t) * c;
    auto it = rc.find(t);
    if (it != rc.end()) match += weight(t) * std::min(c, it->second);
  }
  std::vector<double> p = {smoothed(match, total, cfg)};
  for (int n = 2; n <= cfg.max_order; ++n) {
    auto [m, t] = clipped(candidate, reference, n);
    p.push_back(smoothed(m, t, cfg));
  }
  return combine(p, cfg, candidate.size(), reference.size());
}

double codebleu(std::string_view candidate, std::string_view reference,
                const CodeBleuConfig& cfg) {
  cfg.validate();
  auto c = tokenize_code(candidate);
  auto r = tokenize_code(reference);
  require_reference(r);
  if (c.empty()) return 0.0;
  auto bc = capped(cfg.bleu, c.size(), r.size());
  double ngram = bleu(c, r, bc);
  double keyed = weighted_bleu(c, r, bc, cfg.keyword_factor);
  bool parsed = argument_subtrees(candidate) && argument_subtrees(reference);
  if (!parsed) {
    double w = cfg.ngram_weight + cfg.keyword_weight;
    if (w <= 0) return 0.0;
    return (cfg.ngram_weight * ngram + cfg.keyword_weight * keyed) / w;
  }
  return cfg.ngram_weight * ngram + cfg.keyword_weight * keyed +
         cfg.syntax_weight * syntax_match(candidate, reference);
}

double pass_at_k(int n, int c, int k) {
  if (n < 1 || c < 0 || c > n || k < 1 || k > n) {
    throw Error(Errc::InvalidCounts, "pass@k needs 0 <= c <= n and 1 <= k <= n (n=" +
                                         std::to_string(n) + ", c=" + std::to_string(c) +
                                         ", k=" + std::to_string(k) + ")");
  }
  if (n - c < k) return 1.0;
  using boost::multiprecision::cpp_int;
  using boost::multiprecision::cpp_rational;
  auto choose = [](int a, int b) {
    cpp_int r = 1;
    for (int i = 1; i <= b; ++i) r = r * (a - b + i) / i;
    return r;
  };
  cpp_rational v = 1 - cpp_rational(choose(n - c, k), choose(n, k));
  return v.convert_to<double>();
}

std::optional<char> extract_choice(std::string_view sample) {
  std::string s(sample);
  for (auto& ch : s) {
    if (is_punct(ch)) ch = ' ';
  }
  for (auto tok : detail::split(s, ' ')) {
    tok = detail::trim(tok);
    if (tok.size() != 1) continue;
    char up = static_cast<char>(std::toupper(static_cast<unsigned char>(tok[0])));
    if (up >= 'A' && up <= 'D') return up;
  }
  return std::nullopt;
}

std::string normalize_answer(std::string_view text) {
  auto open = text.find('(');
  if (open != std::string_view::npos) {
    auto close = detail::find_matching_close(text, open);
    if (close != std::string_view::npos) return std::string(text.substr(open, close - open + 1));
  }
  return std::string(detail::trim(text));
}

std::string_view to_string(BenchTask t) noexcept {
  switch (t) {
    case BenchTask::CCT: return "cct";
    case BenchTask::ECT: return "ect";
    case BenchTask::MCQ: return "mcq";
  }
  return "?";
}

BenchTask bench_task_from_string(std::string_view s) {
  for (auto t : {BenchTask::CCT, BenchTask::ECT, BenchTask::MCQ}) {
    if (to_string(t) == s) return t;
  }
  throw Error(Errc::InvalidValue, "unknown task '" + std::string(s) + "'");
}

Json output_record_to_json(const ModelOutputRecord& r) {
  return Json{{"item_id", r.item_id}, {"samples", r.samples}};
}

ModelOutputRecord output_record_from_json(const Json& row) {
  try {
    ModelOutputRecord r{row.at("item_id").get<std::size_t>(),
                        row.at("samples").get<std::vector<std::string>>()};
    if (r.samples.empty()) {
      throw Error(Errc::InvalidValue, "output record " + std::to_string(r.item_id) +
                                          " has no samples");
    }
    return r;
  } catch (const Json::exception& e) {
    throw Error(Errc::InvalidValue, std::string("output row: ") + e.what());
  }
}

MetricReport score_run(BenchTask task, const std::vector<std::string>& answers,
                       const std::vector<ModelOutputRecord>& outputs, const ScoreConfig& cfg) {
  cfg.bleu.validate();
  cfg.codebleu.validate();
  std::vector<const ModelOutputRecord*> by_id(answers.size(), nullptr);
  for (const auto& o : outputs) {
    if (o.item_id >= answers.size()) {
      throw Error(Errc::MissingItem, "output for unknown item " + std::to_string(o.item_id));
    }
    if (by_id[o.item_id]) {
      throw Error(Errc::MissingItem, "duplicate output for item " + std::to_string(o.item_id));
    }
    if (o.samples.empty()) {
      throw Error(Errc::InvalidValue, "no samples for item " + std::to_string(o.item_id));
    }
    by_id[o.item_id] = &o;
  }
  MetricReport rep;
  rep.task = task;
  int min_n = INT32_MAX;
  for (std::size_t id = 0; id < answers.size(); ++id) {
    if (!by_id[id]) throw Error(Errc::MissingItem, "no output for item " + std::to_string(id));
    const auto& samples = by_id[id]->samples;
    ItemScore row;
    row.item_id = id;
    row.samples = static_cast<int>(samples.size());
    rep.sample_count += samples.size();
    min_n = std::min(min_n, row.samples);
    if (task == BenchTask::MCQ) {
      auto want = extract_choice(answers[id]);
      for (const auto& s : samples) {
        auto got = extract_choice(s);
        if (!got) ++rep.unextractable;
        if (got && want && *got == *want) ++row.correct;
      }
      for (int k : cfg.ks) {
        if (k <= row.samples) {
          row.values["P@" + std::to_string(k)] = pass_at_k(row.samples, row.correct, k);
        }
      }
    } else {
      auto ref_text = normalize_answer(answers[id]);
      auto ref = tokenize_code(ref_text);
      std::map<std::string, std::vector<double>> per;
      for (const auto& s : samples) {
        auto cand_text = normalize_answer(s);
        auto cand = tokenize_code(cand_text);
        per["BLEU"].push_back(bleu(cand, ref, cfg.bleu));
        per["ROUGE-L"].push_back(rouge_l(cand, ref));
        per["RED"].push_back(red(cand_text, ref_text));
        per["CodeBLEU"].push_back(codebleu(cand_text, ref_text, cfg.codebleu));
      }
      for (const auto& [name, v] : per) {
        double value;
        if (cfg.aggregation == ScoreConfig::Aggregation::BestOfN) {
          value = name == "RED" ? *std::min_element(v.begin(), v.end())
                                : *std::max_element(v.begin(), v.end());
        } else {
          value = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        }
        row.values[name] = value;
      }
    }
    rep.items.push_back(std::move(row));
  }
  // Means over items; a P@k enters only when every item has k samples.
  std::map<std::string, double> sums;
  for (const auto& row : rep.items) {
    for (const auto& [name, v] : row.values) sums[name] += v;
  }
  for (const auto& [name, s] : sums) {
    if (name.rfind("P@", 0) == 0 && std::stoi(name.substr(2)) > min_n) continue;
    rep.aggregate[name] = s / static_cast<double>(rep.items.size());
  }
  return rep;
}

Json MetricReport::to_json() const {
  Json rows = Json::array();
  for (const auto& r : items) {
    Json row = {{"item_id", r.item_id}, {"samples", r.samples}};
    if (task == BenchTask::MCQ) row["correct"] = r.correct;
    for (const auto& [k, v] : r.values) row[k] = v;
    rows.push_back(std::move(row));
  }
  Json agg = Json::object();
  for (const auto& [k, v] : aggregate) agg[k] = v;
  return Json{{"task", std::string(apisync::to_string(task))},
              {"counts",
               {{"items", items.size()},
                {"samples", sample_count},
                {"unextractable", unextractable}}},
              {"aggregate", agg},
              {"items", rows}};
}

std::string MetricReport::table() const {
  std::string out;
  char line[128];
  std::snprintf(line, sizeof line, "%-10s %10s\n", std::string(apisync::to_string(task)).c_str(),
                "value");
  out += line;
  for (const auto& [k, v] : aggregate) {
    std::snprintf(line, sizeof line, "%-10s %10.4f\n", k.c_str(), v);
    out += line;
  }
  std::snprintf(line, sizeof line, "%-10s %10zu\n", "items", items.size());
  out += line;
  std::snprintf(line, sizeof line, "%-10s %10zu\n", "samples", sample_count);
  out += line;
  if (task == BenchTask::MCQ) {
    std::snprintf(line, sizeof line, "%-10s %10zu\n", "no-letter", unextractable);
    out += line;
  }
  return out;
}

}  // namespace apisync
