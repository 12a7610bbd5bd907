// SPDX-License-Identifier: Apache-2.0
//
// Pre-layer-norm transformer block shared by the language model (causal)
// and the projector (bidirectional).
#pragma once

#include <string>
#include <vector>

#include "vkg/rng.hpp"
#include "vkg/tensor.hpp"

namespace vkg {

struct NamedParam {
  std::string name;
  Tensor tensor;
  // Decoupled weight decay applies to weight matrices only.
  bool decay = false;
};

using ParamList = std::vector<NamedParam>;

struct AttentionHeadParams {
  // No key bias: it shifts every score of a query row by the same amount,
  // which softmax cancels.
  Tensor wq, bq, wk, wv, bv;  // [d, d_head] / [d_head]
};

struct BlockParams {
  Tensor ln1_gain, ln1_bias;
  std::vector<AttentionHeadParams> heads;
  Tensor wo, bo;  // [d, d]; rows h*d_head.. belong to head h
  Tensor ln2_gain, ln2_bias;
  Tensor w1, b1;  // [d, d_ff]
  Tensor w2, b2;  // [d_ff, d]
};

// Deep copy of a leaf, keeping its requires_grad flag.
Tensor clone_param(const Tensor& t);

Tensor init_normal(Shape shape, double stddev, Rng& rng);

BlockParams init_block(std::size_t d, std::size_t n_heads, std::size_t d_ff, Rng& rng,
                       double stddev = 0.02);

// Parameter names and shapes of one block, in collection order.
void block_param_shapes(std::size_t d, std::size_t n_heads, std::size_t d_ff, const std::string& prefix,
                        std::vector<std::pair<std::string, Shape>>& out);

void collect_block(const BlockParams& b, const std::string& prefix, ParamList& out);

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor multi_head_attention(const BlockParams& b, const Tensor& x, bool causal);

// x + attn(ln1(x)), then h + mlp(ln2(h)).
Tensor block_forward(const BlockParams& b, const Tensor& x, bool causal, double ln_eps);

BlockParams clone_block(const BlockParams& b);

}  // namespace vkg
