// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "vkg/corpus.hpp"
#include "vkg/lm.hpp"
#include "vkg/projector.hpp"

namespace vkg {

enum class Strategy { greedy, beam, top_k, top_p };

std::string_view strategy_name(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view s);

struct DecodeConfig {
  Strategy strategy = Strategy::beam;
  std::size_t beam_width = 4;
  std::size_t k = 10;
  double p = 0.9;
  std::size_t max_new_tokens = 256;
  std::uint64_t seed = 0;  // sampling strategies only
  // Rank finished beams by mean per-token log-prob instead of the raw sum.
  bool length_normalization = false;
};

// Throws ConfigError.
void validate(const DecodeConfig& cfg);

enum class StopReason { eos, length };

struct Generation {
  std::vector<std::int32_t> tokens;  // includes the final eos when stop == eos
  double log_prob = 0.0;             // sum of chosen-token log-softmax values
  StopReason stop = StopReason::length;
};

// Log-probabilities of the next token given the tokens generated so far.
using NextTokenLogProbs = std::function<std::vector<double>(std::span<const std::int32_t> generated)>;

// Decoding over an abstract next-token distribution. Ties break toward the
// lowest token id.
Generation decode_with(const NextTokenLogProbs& next, const DecodeConfig& cfg, std::int32_t eos = Vocab::kEos);

// Conditions the LM on the projector output for `features` when projector
// is non-null. Throws LengthError unless k + |prompt| + max_new_tokens fits
// in max_seq_len.
Generation generate(const LmParams& lm, const ProjectorParams* projector, std::span<const double> features,
                    std::span<const std::int32_t> prompt, const DecodeConfig& cfg,
                    std::int32_t eos = Vocab::kEos);

// Teacher-forced log-probability of continuation after prompt.
double score_sequence(const LmParams& lm, const ProjectorParams* projector, std::span<const double> features,
                      std::span<const std::int32_t> prompt, std::span<const std::int32_t> continuation);

// Indices kept by top-k / nucleus truncation of a probability vector, in
// descending probability order.
std::vector<std::int32_t> top_k_support(std::span<const double> probs, std::size_t k);
std::vector<std::int32_t> top_p_support(std::span<const double> probs, double p);

}  // namespace vkg
