// SPDX-License-Identifier: Apache-2.0
//
// Tiny decoder-only language model. Optional prefix embeddings (from the
// projector) occupy positions 0..k-1 ahead of the token embeddings and
// share the learned positional table with them.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "vkg/transformer.hpp"

namespace vkg {

struct LmConfig {
  std::size_t vocab_size = 0;
  std::size_t d_model = 128;
  std::size_t n_layers = 4;
  std::size_t n_heads = 4;
  std::size_t d_ff = 512;
  std::size_t max_seq_len = 512;
  std::uint64_t seed = 0;
  double ln_eps = 1e-5;

  std::size_t head_dim() const { return d_model / n_heads; }
  friend bool operator==(const LmConfig&, const LmConfig&) = default;
};

// Throws ConfigError.
void validate(const LmConfig& cfg);

struct LmParams {
  LmConfig config;
  Tensor tok_emb;  // [vocab, d]
  Tensor pos_emb;  // [max_seq_len, d]
  std::vector<BlockParams> blocks;
  Tensor lnf_gain, lnf_bias;
  Tensor w_out, b_out;  // [d, vocab], [vocab]

  ParamList parameters() const;
  LmParams clone() const;
  void set_trainable(bool on) const;
};

struct PrefixedBatch {
  std::optional<Tensor> prefix;  // [k, d_model]
  std::vector<std::int32_t> token_ids;
  // One entry per token; prefix positions never contribute to the loss.
  std::vector<std::uint8_t> loss_mask;
};

LmParams init_lm(const LmConfig& cfg);

std::vector<std::pair<std::string, Shape>> lm_param_shapes(const LmConfig& cfg);

// Logits for every position of [prefix ; tokens]: shape [k + len, vocab].
// Throws LengthError when k + len exceeds max_seq_len.
Tensor lm_forward(const LmParams& params, const PrefixedBatch& batch);

// Mean next-token cross-entropy: row k+t-1 predicts token t, counted where
// loss_mask[t] is set. Throws EmptyMask when no target is selected.
Tensor lm_loss(const Tensor& logits, const PrefixedBatch& batch);

// log-softmax of the final row of logits.
std::vector<double> last_log_probs(const Tensor& logits);

}  // namespace vkg
