// SPDX-License-Identifier: Apache-2.0
//
// BLEU-n and ROUGE-L over whitespace tokens of KG metric strings, corpus
// evaluation, and Table-style report emission (B1, B2, B3, B4, RL).
#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "vkg/kg_schema.hpp"

namespace vkg {

using TokenSeq = std::vector<std::string>;

enum class BleuMode { corpus, sentence };

struct BleuResult {
  double bleu = 0.0;
  std::vector<double> precisions;  // p_1 .. p_N
  double brevity_penalty = 1.0;
  std::size_t max_order = 4;
  std::size_t candidate_len = 0;
  std::size_t reference_len = 0;
};

// Modified n-gram precision with clipping against the single reference.
//   BLEU = BP * exp(mean_n log p_n),  BP = exp(1 - r/c) if c < r else 1.
// Corpus mode sums clipped counts and lengths over all pairs before the
// formula and returns 0 if any p_n is 0. Sentence mode averages per-pair
// scores; floor_smoothing replaces p_n by max(p_n, 1e-9) there. An empty
// candidate scores 0 with BP reported as 0. Throws AlignmentError for
// mismatched or empty lists and ConfigError for N == 0.
BleuResult bleu(std::span<const TokenSeq> candidates, std::span<const TokenSeq> references, std::size_t max_order,
                BleuMode mode = BleuMode::corpus, bool floor_smoothing = false);

BleuResult sentence_bleu(const TokenSeq& candidate, const TokenSeq& reference, std::size_t max_order,
                         bool floor_smoothing = false);

struct RougeResult {
  double rouge_l = 0.0;
  std::size_t lcs = 0;
  double recall = 0.0;
  double precision = 0.0;
  double beta = 1.2;
};

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

// F = (1 + beta^2) R P / (R + beta^2 P) with R = LCS/|reference| and
// P = LCS/|candidate|; 0 when either side is empty or LCS is 0.
RougeResult rouge_l(const TokenSeq& candidate, const TokenSeq& reference, double beta = 1.2);

struct MetricConfig {
  double beta = 1.2;
  bool sentence_smoothing = false;
};

struct SampleScore {
  std::string id;
  std::array<double, 4> bleu{};  // sentence BLEU-1..4
  double rouge_l = 0.0;
  std::size_t correct = 0;
  std::size_t hallucinated = 0;
  std::size_t missed = 0;
  bool exact = false;  // deduplicated prediction set equals gold set
};

struct EvalReport {
  // Percentages in [0, 100].
  std::array<double, 4> bleu{};
  double rouge_l = 0.0;
  std::vector<SampleScore> rows;
  std::size_t correct = 0;
  std::size_t hallucinated = 0;
  std::size_t missed = 0;
  // Percent of samples whose triplet set matches gold exactly.
  double exact_match = 0.0;
  // Percent of distinct triplets (prediction union gold) matched exactly:
  // correct / (correct + hallucinated + missed).
  double triplet_match = 0.0;
};

TokenSeq metric_tokens(const KnowledgeGraph& kg);

// Pairs predictions with gold by source id, following gold order. Throws
// AlignmentError unless both sides hold the same set of ids.
EvalReport evaluate_corpus(std::span<const KnowledgeGraph> pred, std::span<const KnowledgeGraph> gold,
                           const MetricConfig& cfg = {});

// Rows of B1..B4/RL scores with leading key columns and trailing extras.
struct ResultTable {
  std::vector<std::string> key_columns;
  std::vector<std::string> extra_columns;
  struct Row {
    std::vector<std::string> keys;
    std::array<double, 4> bleu{};
    double rouge_l = 0.0;
    std::vector<std::string> extras;
  };
  std::vector<Row> rows;

  void add(std::vector<std::string> keys, const EvalReport& report, std::vector<std::string> extras = {});
  std::vector<std::string> header() const;
  std::string to_csv() const;
  // Column-aligned plain text.
  std::string to_text() const;
};

std::string format_fixed(double v, int decimals = 2);

}  // namespace vkg
