// SPDX-License-Identifier: Apache-2.0
#include "vkg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <unordered_map>

#include "vkg/errors.hpp"
#include "vkg/text.hpp"

namespace vkg {

namespace {

struct NgramStats {
  std::vector<std::size_t> clipped;  // per order
  std::vector<std::size_t> total;
  std::size_t cand_len = 0;
  std::size_t ref_len = 0;
};

std::string join_ngram(const TokenSeq& s, std::size_t start, std::size_t n) {
  std::string key;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) key += '\x1f';
    key += s[start + i];
  }
  return key;
}

std::unordered_map<std::string, std::size_t> count_ngrams(const TokenSeq& s, std::size_t n) {
  std::unordered_map<std::string, std::size_t> counts;
  if (s.size() < n) return counts;
  for (std::size_t i = 0; i + n <= s.size(); ++i) ++counts[join_ngram(s, i, n)];
  return counts;
}

NgramStats pair_stats(const TokenSeq& cand, const TokenSeq& ref, std::size_t max_order) {
  NgramStats st;
  st.clipped.assign(max_order, 0);
  st.total.assign(max_order, 0);
  st.cand_len = cand.size();
  st.ref_len = ref.size();
  for (std::size_t n = 1; n <= max_order; ++n) {
    const auto c = count_ngrams(cand, n);
    const auto r = count_ngrams(ref, n);
    for (const auto& [g, cnt] : c) {
      auto it = r.find(g);
      st.clipped[n - 1] += std::min(cnt, it == r.end() ? std::size_t{0} : it->second);
      st.total[n - 1] += cnt;
    }
  }
  return st;
}

BleuResult finish(const NgramStats& st, std::size_t max_order, bool floor_smoothing) {
  BleuResult res;
  res.max_order = max_order;
  res.candidate_len = st.cand_len;
  res.reference_len = st.ref_len;
  res.precisions.assign(max_order, 0.0);
  bool any_zero = false;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < max_order; ++n) {
    double p = st.total[n] ? static_cast<double>(st.clipped[n]) / static_cast<double>(st.total[n]) : 0.0;
    res.precisions[n] = p;
    if (floor_smoothing) p = std::max(p, 1e-9);
    if (p <= 0.0) any_zero = true;
    else log_sum += std::log(p);
  }
  if (st.cand_len == 0) {
    res.brevity_penalty = 0.0;
    res.bleu = 0.0;
    return res;
  }
  res.brevity_penalty = st.cand_len < st.ref_len
                            ? std::exp(1.0 - static_cast<double>(st.ref_len) / static_cast<double>(st.cand_len))
                            : 1.0;
  res.bleu = any_zero ? 0.0 : res.brevity_penalty * std::exp(log_sum / static_cast<double>(max_order));
  return res;
}

}  // namespace

BleuResult sentence_bleu(const TokenSeq& candidate, const TokenSeq& reference, std::size_t max_order,
                         bool floor_smoothing) {
  if (max_order == 0) throw ConfigError("BLEU max order must be >= 1");
  return finish(pair_stats(candidate, reference, max_order), max_order, floor_smoothing);
}

BleuResult bleu(std::span<const TokenSeq> candidates, std::span<const TokenSeq> references, std::size_t max_order,
                BleuMode mode, bool floor_smoothing) {
  if (max_order == 0) throw ConfigError("BLEU max order must be >= 1");
  if (candidates.size() != references.size() || candidates.empty()) {
    throw AlignmentError("BLEU needs equally many candidates and references (got " +
                         std::to_string(candidates.size()) + " and " + std::to_string(references.size()) + ")");
  }
  if (mode == BleuMode::corpus) {
    NgramStats agg;
    agg.clipped.assign(max_order, 0);
    agg.total.assign(max_order, 0);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const auto st = pair_stats(candidates[i], references[i], max_order);
      for (std::size_t n = 0; n < max_order; ++n) {
        agg.clipped[n] += st.clipped[n];
        agg.total[n] += st.total[n];
      }
      agg.cand_len += st.cand_len;
      agg.ref_len += st.ref_len;
    }
    return finish(agg, max_order, false);
  }
  BleuResult mean;
  mean.max_order = max_order;
  mean.precisions.assign(max_order, 0.0);
  mean.brevity_penalty = 0.0;
  const double inv = 1.0 / static_cast<double>(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto r = sentence_bleu(candidates[i], references[i], max_order, floor_smoothing);
    mean.bleu += r.bleu * inv;
    mean.brevity_penalty += r.brevity_penalty * inv;
    for (std::size_t n = 0; n < max_order; ++n) mean.precisions[n] += r.precisions[n] * inv;
    mean.candidate_len += r.candidate_len;
    mean.reference_len += r.reference_len;
  }
  return mean;
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

RougeResult rouge_l(const TokenSeq& candidate, const TokenSeq& reference, double beta) {
  if (!(beta > 0.0)) throw ConfigError("ROUGE-L beta must be > 0");
  RougeResult r;
  r.beta = beta;
  if (candidate.empty() || reference.empty()) return r;
  r.lcs = lcs_length(candidate, reference);
  if (r.lcs == 0) return r;
  r.recall = static_cast<double>(r.lcs) / static_cast<double>(reference.size());
  r.precision = static_cast<double>(r.lcs) / static_cast<double>(candidate.size());
  const double b2 = beta * beta;
  r.rouge_l = (1.0 + b2) * r.recall * r.precision / (r.recall + b2 * r.precision);
  return r;
}

TokenSeq metric_tokens(const KnowledgeGraph& kg) { return split_whitespace(to_metric_string(kg)); }

EvalReport evaluate_corpus(std::span<const KnowledgeGraph> pred, std::span<const KnowledgeGraph> gold,
                           const MetricConfig& cfg) {
  if (pred.size() != gold.size()) {
    throw AlignmentError("prediction count " + std::to_string(pred.size()) + " differs from gold count " +
                         std::to_string(gold.size()));
  }
  if (gold.empty()) throw AlignmentError("nothing to evaluate");
  std::map<std::string, const KnowledgeGraph*> by_id;
  for (const auto& p : pred) {
    if (!by_id.emplace(p.source_id, &p).second) throw AlignmentError("duplicate prediction id '" + p.source_id + "'");
  }
  std::vector<TokenSeq> cands, refs;
  EvalReport rep;
  std::size_t exact = 0;
  for (const auto& g : gold) {
    auto it = by_id.find(g.source_id);
    if (it == by_id.end()) throw AlignmentError("no prediction for id '" + g.source_id + "'");
    const KnowledgeGraph& p = *it->second;
    cands.push_back(metric_tokens(p));
    refs.push_back(metric_tokens(g));

    SampleScore s;
    s.id = g.source_id;
    for (std::size_t n = 1; n <= 4; ++n) s.bleu[n - 1] = sentence_bleu(cands.back(), refs.back(), n, cfg.sentence_smoothing).bleu;
    s.rouge_l = rouge_l(cands.back(), refs.back(), cfg.beta).rouge_l;
    const auto d = kg_diff(p, g);
    s.correct = d.correct.size();
    s.hallucinated = d.hallucinated.size();
    s.missed = d.missed.size();
    s.exact = s.hallucinated == 0 && s.missed == 0;
    rep.correct += s.correct;
    rep.hallucinated += s.hallucinated;
    rep.missed += s.missed;
    exact += s.exact ? 1 : 0;
    rep.rouge_l += s.rouge_l;
    rep.rows.push_back(std::move(s));
  }
  const double n = static_cast<double>(gold.size());
  for (std::size_t order = 1; order <= 4; ++order) {
    rep.bleu[order - 1] = 100.0 * bleu(cands, refs, order, BleuMode::corpus).bleu;
  }
  rep.rouge_l = 100.0 * rep.rouge_l / n;
  rep.exact_match = 100.0 * static_cast<double>(exact) / n;
  const std::size_t uni = rep.correct + rep.hallucinated + rep.missed;
  rep.triplet_match = uni ? 100.0 * static_cast<double>(rep.correct) / static_cast<double>(uni) : 100.0;
  return rep;
}

// ---------------------------------------------------------------- tables

std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

void ResultTable::add(std::vector<std::string> keys, const EvalReport& report, std::vector<std::string> extras) {
  rows.push_back({std::move(keys), report.bleu, report.rouge_l, std::move(extras)});
}

std::vector<std::string> ResultTable::header() const {
  std::vector<std::string> h = key_columns;
  for (const char* c : {"B1", "B2", "B3", "B4", "RL"}) h.emplace_back(c);
  h.insert(h.end(), extra_columns.begin(), extra_columns.end());
  return h;
}

namespace {

std::vector<std::vector<std::string>> cells(const ResultTable& t) {
  std::vector<std::vector<std::string>> out{t.header()};
  for (const auto& r : t.rows) {
    std::vector<std::string> line = r.keys;
    for (double b : r.bleu) line.push_back(format_fixed(b));
    line.push_back(format_fixed(r.rouge_l));
    line.insert(line.end(), r.extras.begin(), r.extras.end());
    out.push_back(std::move(line));
  }
  return out;
}

}  // namespace

std::string ResultTable::to_csv() const {
  std::ostringstream os;
  for (const auto& line : cells(*this)) {
    for (std::size_t i = 0; i < line.size(); ++i) os << (i ? "," : "") << line[i];
    os << '\n';
  }
  return os.str();
}

std::string ResultTable::to_text() const {
  const auto all = cells(*this);
  std::vector<std::size_t> width;
  for (const auto& line : all) {
    width.resize(std::max(width.size(), line.size()), 0);
    for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
  }
  std::ostringstream os;
  for (std::size_t r = 0; r < all.size(); ++r) {
    std::string text;
    for (std::size_t i = 0; i < all[r].size(); ++i) {
      const auto& c = all[r][i];
      if (i) text += "  ";
      // Keys left-aligned, numbers right-aligned.
      if (i < key_columns.size()) text += c + std::string(width[i] - c.size(), ' ');
      else text += std::string(width[i] - c.size(), ' ') + c;
    }
    while (!text.empty() && text.back() == ' ') text.pop_back();
    os << text << '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t i = 0; i < width.size(); ++i) total += width[i] + (i ? 2 : 0);
      os << std::string(total, '-') << '\n';
    }
  }
  return os.str();
}

}  // namespace vkg
