// SPDX-License-Identifier: Apache-2.0
#include "vkg/transformer.hpp"

#include <cmath>

namespace vkg {

Tensor clone_param(const Tensor& t) {
  Tensor c = Tensor::from(t.shape(), std::vector<double>(t.data().begin(), t.data().end()));
  c.set_requires_grad(t.requires_grad());
  return c;
}

namespace {

Tensor zeros_param(Shape shape) {
  const auto n = shape_numel(shape);
  return Tensor::parameter(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor ones_param(Shape shape) {
  const auto n = shape_numel(shape);
  return Tensor::parameter(std::move(shape), std::vector<double>(n, 1.0));
}

}  // namespace

Tensor init_normal(Shape shape, double stddev, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = stddev * rng.normal();
  return Tensor::parameter(std::move(shape), std::move(v));
}

BlockParams init_block(std::size_t d, std::size_t n_heads, std::size_t d_ff, Rng& rng, double stddev) {
  const std::size_t dh = d / n_heads;
  BlockParams b;
  b.ln1_gain = ones_param({d});
  b.ln1_bias = zeros_param({d});
  for (std::size_t h = 0; h < n_heads; ++h) {
    AttentionHeadParams head;
    head.wq = init_normal({d, dh}, stddev, rng);
    head.bq = zeros_param({dh});
    head.wk = init_normal({d, dh}, stddev, rng);
    head.wv = init_normal({d, dh}, stddev, rng);
    head.bv = zeros_param({dh});
    b.heads.push_back(std::move(head));
  }
  b.wo = init_normal({d, d}, stddev, rng);
  b.bo = zeros_param({d});
  b.ln2_gain = ones_param({d});
  b.ln2_bias = zeros_param({d});
  b.w1 = init_normal({d, d_ff}, stddev, rng);
  b.b1 = zeros_param({d_ff});
  b.w2 = init_normal({d_ff, d}, stddev, rng);
  b.b2 = zeros_param({d});
  return b;
}

void block_param_shapes(std::size_t d, std::size_t n_heads, std::size_t d_ff, const std::string& prefix,
                        std::vector<std::pair<std::string, Shape>>& out) {
  const std::size_t dh = d / n_heads;
  out.push_back({prefix + "ln1.gain", {d}});
  out.push_back({prefix + "ln1.bias", {d}});
  for (std::size_t h = 0; h < n_heads; ++h) {
    const std::string hp = prefix + "attn.head" + std::to_string(h) + ".";
    out.push_back({hp + "wq", {d, dh}});
    out.push_back({hp + "bq", {dh}});
    out.push_back({hp + "wk", {d, dh}});
    out.push_back({hp + "wv", {d, dh}});
    out.push_back({hp + "bv", {dh}});
  }
  out.push_back({prefix + "attn.wo", {d, d}});
  out.push_back({prefix + "attn.bo", {d}});
  out.push_back({prefix + "ln2.gain", {d}});
  out.push_back({prefix + "ln2.bias", {d}});
  out.push_back({prefix + "mlp.w1", {d, d_ff}});
  out.push_back({prefix + "mlp.b1", {d_ff}});
  out.push_back({prefix + "mlp.w2", {d_ff, d}});
  out.push_back({prefix + "mlp.b2", {d}});
}

void collect_block(const BlockParams& b, const std::string& prefix, ParamList& out) {
  out.push_back({prefix + "ln1.gain", b.ln1_gain, false});
  out.push_back({prefix + "ln1.bias", b.ln1_bias, false});
  for (std::size_t h = 0; h < b.heads.size(); ++h) {
    const std::string hp = prefix + "attn.head" + std::to_string(h) + ".";
    const auto& head = b.heads[h];
    out.push_back({hp + "wq", head.wq, true});
    out.push_back({hp + "bq", head.bq, false});
    out.push_back({hp + "wk", head.wk, true});
    out.push_back({hp + "wv", head.wv, true});
    out.push_back({hp + "bv", head.bv, false});
  }
  out.push_back({prefix + "attn.wo", b.wo, true});
  out.push_back({prefix + "attn.bo", b.bo, false});
  out.push_back({prefix + "ln2.gain", b.ln2_gain, false});
  out.push_back({prefix + "ln2.bias", b.ln2_bias, false});
  out.push_back({prefix + "mlp.w1", b.w1, true});
  out.push_back({prefix + "mlp.b1", b.b1, false});
  out.push_back({prefix + "mlp.w2", b.w2, true});
  out.push_back({prefix + "mlp.b2", b.b2, false});
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) { return add(matmul(x, w), b); }

Tensor multi_head_attention(const BlockParams& b, const Tensor& x, bool causal) {
  const std::size_t dh = b.heads.front().wq.shape()[1];
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  Tensor out;
  for (std::size_t h = 0; h < b.heads.size(); ++h) {
    const auto& head = b.heads[h];
    Tensor q = linear(x, head.wq, head.bq);
    Tensor k = matmul(x, head.wk);
    Tensor v = linear(x, head.wv, head.bv);
    Tensor scores = scale(matmul(q, transpose_2d(k)), inv_sqrt);
    if (causal) scores = causal_masked_fill(scores);
    Tensor ctx = matmul(softmax_lastdim(scores), v);
    Tensor part = matmul(ctx, slice_rows(b.wo, h * dh, (h + 1) * dh));
    out = out.defined() ? add(out, part) : part;
  }
  return add(out, b.bo);
}

Tensor block_forward(const BlockParams& b, const Tensor& x, bool causal, double ln_eps) {
  Tensor h = add(x, multi_head_attention(b, layer_norm(x, b.ln1_gain, b.ln1_bias, ln_eps), causal));
  Tensor m = layer_norm(h, b.ln2_gain, b.ln2_bias, ln_eps);
  m = linear(gelu(linear(m, b.w1, b.b1)), b.w2, b.b2);
  return add(h, m);
}

BlockParams clone_block(const BlockParams& b) {
  BlockParams c;
  c.ln1_gain = clone_param(b.ln1_gain);
  c.ln1_bias = clone_param(b.ln1_bias);
  for (const auto& h : b.heads) {
    c.heads.push_back({clone_param(h.wq), clone_param(h.bq), clone_param(h.wk),
                       clone_param(h.wv), clone_param(h.bv)});
  }
  c.wo = clone_param(b.wo);
  c.bo = clone_param(b.bo);
  c.ln2_gain = clone_param(b.ln2_gain);
  c.ln2_bias = clone_param(b.ln2_bias);
  c.w1 = clone_param(b.w1);
  c.b1 = clone_param(b.b1);
  c.w2 = clone_param(b.w2);
  c.b2 = clone_param(b.b2);
  return c;
}

}  // namespace vkg
