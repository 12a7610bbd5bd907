// SPDX-License-Identifier: Apache-2.0
#include <vector>

#include "vkg/gradcheck.hpp"
#include "vkg/lm.hpp"
#include "vkg/projector.hpp"
#include "vkg/rng.hpp"

namespace vkg {

namespace {

Tensor random_param(Shape shape, Rng& rng, double stddev = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = stddev * rng.normal();
  return Tensor::parameter(std::move(shape), std::move(v));
}

Tensor random_const(Shape shape, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.normal();
  return Tensor::from(std::move(shape), std::move(v));
}

// Weighted sum so that no output coordinate has a structurally zero gradient.
Tensor probe(const Tensor& out, const Tensor& w) { return sum_all(mul(out, w)); }

GradCheckReport check_op(OpKind op, Rng& rng, const GradCheckOptions& opts) {
  switch (op) {
    case OpKind::matmul: {
      auto a = random_param({3, 4}, rng), b = random_param({4, 5}, rng);
      auto w = random_const({3, 5}, rng);
      return grad_check([=] { return probe(matmul(a, b), w); }, {a, b}, opts);
    }
    case OpKind::add: {
      auto a = random_param({3, 4}, rng), b = random_param({3, 4}, rng), bias = random_param({4}, rng);
      auto w = random_const({3, 4}, rng);
      return grad_check([=] { return probe(add(add(a, b), bias), w); }, {a, b, bias}, opts);
    }
    case OpKind::mul: {
      auto a = random_param({3, 4}, rng), b = random_param({3, 4}, rng);
      auto w = random_const({3, 4}, rng);
      return grad_check([=] { return probe(mul(a, b), w); }, {a, b}, opts);
    }
    case OpKind::scale: {
      auto a = random_param({3, 4}, rng);
      auto w = random_const({3, 4}, rng);
      return grad_check([=] { return probe(scale(a, -1.7), w); }, {a}, opts);
    }
    case OpKind::softmax_lastdim: {
      auto a = random_param({3, 5}, rng);
      auto w = random_const({3, 5}, rng);
      return grad_check([=] { return probe(softmax_lastdim(a), w); }, {a}, opts);
    }
    case OpKind::layer_norm: {
      auto x = random_param({3, 6}, rng), g = random_param({6}, rng), b = random_param({6}, rng);
      auto w = random_const({3, 6}, rng);
      return grad_check([=] { return probe(layer_norm(x, g, b), w); }, {x, g, b}, opts);
    }
    case OpKind::gelu: {
      auto a = random_param({3, 4}, rng);
      auto w = random_const({3, 4}, rng);
      return grad_check([=] { return probe(gelu(a), w); }, {a}, opts);
    }
    case OpKind::embedding_lookup: {
      auto table = random_param({6, 4}, rng);
      auto w = random_const({4, 4}, rng);
      const std::vector<std::int32_t> ids{0, 3, 3, 5};
      return grad_check([=] { return probe(embedding_lookup(table, ids), w); }, {table}, opts);
    }
    case OpKind::concat_rows: {
      auto a = random_param({2, 3}, rng), b = random_param({3, 3}, rng);
      auto w = random_const({5, 3}, rng);
      return grad_check(
          [=] {
            const Tensor parts[] = {a, b};
            return probe(concat_rows(parts), w);
          },
          {a, b}, opts);
    }
    case OpKind::slice_rows: {
      auto a = random_param({5, 3}, rng);
      auto w = random_const({3, 3}, rng);
      return grad_check([=] { return probe(slice_rows(a, 1, 4), w); }, {a}, opts);
    }
    case OpKind::cross_entropy_masked: {
      auto logits = random_param({4, 6}, rng);
      const std::vector<std::int32_t> labels{2, 0, 5, 5};
      const std::vector<std::uint8_t> mask{1, 0, 1, 1};
      return grad_check([=] { return cross_entropy_masked(logits, labels, mask); }, {logits}, opts);
    }
    case OpKind::transpose_2d: {
      auto a = random_param({3, 4}, rng);
      auto w = random_const({4, 3}, rng);
      return grad_check([=] { return probe(transpose_2d(a), w); }, {a}, opts);
    }
    case OpKind::reshape: {
      auto a = random_param({3, 4}, rng);
      auto w = random_const({2, 6}, rng);
      return grad_check([=] { return probe(reshape(a, {2, 6}), w); }, {a}, opts);
    }
    case OpKind::causal_masked_fill: {
      // -inf entries only make sense ahead of a softmax.
      auto a = random_param({4, 4}, rng);
      auto w = random_const({4, 4}, rng);
      return grad_check([=] { return probe(softmax_lastdim(causal_masked_fill(a)), w); }, {a}, opts);
    }
  }
  return {};
}

std::vector<Tensor> tensors_of(const ParamList& list) {
  std::vector<Tensor> out;
  for (const auto& p : list) out.push_back(p.tensor);
  return out;
}

}  // namespace

std::vector<NamedGradCheck> standard_grad_checks(const GradCheckOptions& opts) {
  Rng rng(mix_seed(opts.seed, 0x4752414443));
  std::vector<NamedGradCheck> out;
  for (OpKind op : kAllOpKinds) out.push_back({op_name(op), check_op(op, rng, opts)});

  LmConfig lm_cfg;
  lm_cfg.vocab_size = 11;
  lm_cfg.d_model = 8;
  lm_cfg.n_layers = 2;
  lm_cfg.n_heads = 2;
  lm_cfg.d_ff = 16;
  lm_cfg.max_seq_len = 16;
  lm_cfg.seed = opts.seed;
  // 4x the training init keeps sampled gradients well above the ~1e-11
  // round-off of central differences.
  auto scale_up = [](const ParamList& params, double factor) {
    for (const auto& p : params) {
      auto t = p.tensor;
      for (auto& x : t.mutable_data()) x *= factor;
    }
  };
  const LmParams lm = init_lm(lm_cfg);
  scale_up(lm.parameters(), 4.0);

  PrefixedBatch batch;
  for (int i = 0; i < 6; ++i) batch.token_ids.push_back(static_cast<std::int32_t>(rng.below(lm_cfg.vocab_size)));
  batch.loss_mask = {0, 0, 1, 1, 1, 1};
  out.push_back({"lm", grad_check([=] { return lm_loss(lm_forward(lm, batch), batch); },
                                  tensors_of(lm.parameters()), opts)});

  ProjectorConfig pc;
  pc.d_vis = 5;
  pc.d_lm = lm_cfg.d_model;
  pc.clip_length = 2;
  pc.prefix_length = 3;
  pc.n_layers = 2;
  pc.n_heads = 2;
  pc.ff_mult = 2;
  pc.seed = opts.seed;
  const ProjectorParams proj = init_projector(pc);
  scale_up(proj.parameters(), 4.0);
  std::vector<double> features(pc.d_vis);
  for (auto& x : features) x = rng.normal();
  auto params = tensors_of(proj.parameters());
  for (auto& t : tensors_of(lm.parameters())) params.push_back(t);
  out.push_back({"projector+lm", grad_check(
                                     [=] {
                                       PrefixedBatch b = batch;
                                       b.prefix = project(proj, features);
                                       return lm_loss(lm_forward(lm, b), b);
                                     },
                                     params, opts)});
  return out;
}

}  // namespace vkg
