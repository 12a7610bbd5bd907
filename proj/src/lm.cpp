// SPDX-License-Identifier: Apache-2.0
#include "vkg/lm.hpp"

#include <algorithm>
#include <cmath>

#include "vkg/errors.hpp"

namespace vkg {

void validate(const LmConfig& cfg) {
  if (cfg.vocab_size == 0) throw ConfigError("lm.vocab_size must be positive");
  if (cfg.d_model == 0 || cfg.n_heads == 0 || cfg.n_layers == 0 || cfg.d_ff == 0 || cfg.max_seq_len == 0) {
    throw ConfigError("lm dimensions must be positive");
  }
  if (cfg.d_model % cfg.n_heads != 0) {
    throw ConfigError("lm.d_model (" + std::to_string(cfg.d_model) + ") is not divisible by lm.n_heads (" +
                      std::to_string(cfg.n_heads) + ")");
  }
  if (!(cfg.ln_eps >= 0.0)) throw ConfigError("lm.ln_eps must be >= 0");
}

LmParams init_lm(const LmConfig& cfg) {
  validate(cfg);
  Rng rng(mix_seed(cfg.seed, 0x4c4d));
  LmParams p;
  p.config = cfg;
  p.tok_emb = init_normal({cfg.vocab_size, cfg.d_model}, 0.02, rng);
  p.pos_emb = init_normal({cfg.max_seq_len, cfg.d_model}, 0.02, rng);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    p.blocks.push_back(init_block(cfg.d_model, cfg.n_heads, cfg.d_ff, rng));
  }
  p.lnf_gain = Tensor::parameter({cfg.d_model}, std::vector<double>(cfg.d_model, 1.0));
  p.lnf_bias = Tensor::parameter({cfg.d_model}, std::vector<double>(cfg.d_model, 0.0));
  p.w_out = init_normal({cfg.d_model, cfg.vocab_size}, 0.02, rng);
  p.b_out = Tensor::parameter({cfg.vocab_size}, std::vector<double>(cfg.vocab_size, 0.0));
  return p;
}

std::vector<std::pair<std::string, Shape>> lm_param_shapes(const LmConfig& cfg) {
  std::vector<std::pair<std::string, Shape>> out;
  out.push_back({"lm.tok_emb", {cfg.vocab_size, cfg.d_model}});
  out.push_back({"lm.pos_emb", {cfg.max_seq_len, cfg.d_model}});
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    block_param_shapes(cfg.d_model, cfg.n_heads, cfg.d_ff, "lm.blocks." + std::to_string(l) + ".", out);
  }
  out.push_back({"lm.lnf.gain", {cfg.d_model}});
  out.push_back({"lm.lnf.bias", {cfg.d_model}});
  out.push_back({"lm.w_out", {cfg.d_model, cfg.vocab_size}});
  out.push_back({"lm.b_out", {cfg.vocab_size}});
  return out;
}

ParamList LmParams::parameters() const {
  ParamList out;
  out.push_back({"lm.tok_emb", tok_emb, true});
  out.push_back({"lm.pos_emb", pos_emb, true});
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    collect_block(blocks[l], "lm.blocks." + std::to_string(l) + ".", out);
  }
  out.push_back({"lm.lnf.gain", lnf_gain, false});
  out.push_back({"lm.lnf.bias", lnf_bias, false});
  out.push_back({"lm.w_out", w_out, true});
  out.push_back({"lm.b_out", b_out, false});
  return out;
}

LmParams LmParams::clone() const {
  LmParams c;
  c.config = config;
  c.tok_emb = clone_param(tok_emb);
  c.pos_emb = clone_param(pos_emb);
  for (const auto& b : blocks) c.blocks.push_back(clone_block(b));
  c.lnf_gain = clone_param(lnf_gain);
  c.lnf_bias = clone_param(lnf_bias);
  c.w_out = clone_param(w_out);
  c.b_out = clone_param(b_out);
  return c;
}

void LmParams::set_trainable(bool on) const {
  for (auto& p : parameters()) {
    Tensor t = p.tensor;
    t.set_requires_grad(on);
    if (!on) t.zero_grad();
  }
}

Tensor lm_forward(const LmParams& params, const PrefixedBatch& batch) {
  const auto& cfg = params.config;
  const std::size_t k = batch.prefix ? batch.prefix->rows() : 0;
  const std::size_t total = k + batch.token_ids.size();
  if (total > cfg.max_seq_len) {
    throw LengthError("sequence of " + std::to_string(total) + " positions exceeds max_seq_len " +
                      std::to_string(cfg.max_seq_len));
  }
  if (total == 0) throw LengthError("empty sequence");
  if (batch.prefix && (batch.prefix->rank() != 2 || batch.prefix->cols() != cfg.d_model)) {
    throw ShapeError("prefix embeddings " + shape_str(batch.prefix->shape()) + " do not match d_model " +
                     std::to_string(cfg.d_model));
  }
  Tensor x = embedding_lookup(params.tok_emb, batch.token_ids);
  if (k > 0) {
    const Tensor parts[] = {*batch.prefix, x};
    x = concat_rows(parts);
  }
  x = add(x, slice_rows(params.pos_emb, 0, total));
  for (const auto& b : params.blocks) x = block_forward(b, x, /*causal=*/true, cfg.ln_eps);
  x = layer_norm(x, params.lnf_gain, params.lnf_bias, cfg.ln_eps);
  return linear(x, params.w_out, params.b_out);
}

Tensor lm_loss(const Tensor& logits, const PrefixedBatch& batch) {
  const std::size_t len = batch.token_ids.size();
  if (batch.loss_mask.size() != len) {
    throw ShapeError("loss_mask has " + std::to_string(batch.loss_mask.size()) + " entries for " +
                     std::to_string(len) + " tokens");
  }
  if (logits.rank() != 2 || logits.rows() < len) {
    throw ShapeError("logits " + shape_str(logits.shape()) + " cannot cover " + std::to_string(len) +
                     " tokens");
  }
  if (len < 2) throw EmptyMask("a single token has no next-token target");
  const std::size_t k = logits.rows() - len;
  Tensor rows = slice_rows(logits, k, k + len - 1);
  return cross_entropy_masked(rows, std::span(batch.token_ids).subspan(1),
                              std::span(batch.loss_mask).subspan(1));
}

std::vector<double> last_log_probs(const Tensor& logits) {
  const std::size_t v = logits.cols();
  const auto row = logits.data().subspan((logits.rows() - 1) * v, v);
  const double mx = *std::max_element(row.begin(), row.end());
  double sum = 0.0;
  for (double x : row) sum += std::exp(x - mx);
  const double lse = mx + std::log(sum);
  std::vector<double> out(v);
  for (std::size_t i = 0; i < v; ++i) out[i] = row[i] - lse;
  return out;
}

}  // namespace vkg
