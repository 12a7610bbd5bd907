// SPDX-License-Identifier: Apache-2.0
#include "vkg/projector.hpp"

#include "vkg/errors.hpp"

namespace vkg {

void validate(const ProjectorConfig& cfg) {
  if (cfg.d_vis == 0 || cfg.d_lm == 0) throw ConfigError("projector dimensions must be positive");
  if (cfg.clip_length == 0) throw ConfigError("projector.clip_length must be >= 1");
  if (cfg.n_heads == 0 || cfg.d_lm % cfg.n_heads != 0) {
    throw ConfigError("projector.d_lm (" + std::to_string(cfg.d_lm) +
                      ") is not divisible by projector.n_heads (" + std::to_string(cfg.n_heads) + ")");
  }
  if (cfg.ff_mult == 0) throw ConfigError("projector.ff_mult must be positive");
}

ProjectorParams init_projector(const ProjectorConfig& cfg) {
  validate(cfg);
  Rng rng(mix_seed(cfg.seed, 0x50524f4a));
  ProjectorParams p;
  p.config = cfg;
  const std::size_t width = cfg.clip_length * cfg.d_lm;
  p.expand_w = init_normal({cfg.d_vis, width}, 0.02, rng);
  p.expand_b = Tensor::parameter({width}, std::vector<double>(width, 0.0));
  if (cfg.prefix_length > 0) p.prefix = init_normal({cfg.prefix_length, cfg.d_lm}, 0.02, rng);
  if (cfg.positional) p.pos = init_normal({cfg.prefix_length + cfg.clip_length, cfg.d_lm}, 0.02, rng);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    p.blocks.push_back(init_block(cfg.d_lm, cfg.n_heads, cfg.d_ff(), rng));
  }
  return p;
}

std::vector<std::pair<std::string, Shape>> projector_param_shapes(const ProjectorConfig& cfg) {
  std::vector<std::pair<std::string, Shape>> out;
  out.push_back({"proj.expand_w", {cfg.d_vis, cfg.clip_length * cfg.d_lm}});
  out.push_back({"proj.expand_b", {cfg.clip_length * cfg.d_lm}});
  if (cfg.prefix_length > 0) out.push_back({"proj.prefix", {cfg.prefix_length, cfg.d_lm}});
  if (cfg.positional) out.push_back({"proj.pos", {cfg.prefix_length + cfg.clip_length, cfg.d_lm}});
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    block_param_shapes(cfg.d_lm, cfg.n_heads, cfg.d_ff(), "proj.blocks." + std::to_string(l) + ".", out);
  }
  return out;
}

std::size_t count_params(const ProjectorConfig& cfg) {
  const std::size_t d = cfg.d_lm, f = cfg.d_ff(), k = cfg.clip_length, n = cfg.prefix_length;
  const std::size_t expansion = cfg.d_vis * k * d + k * d;
  const std::size_t prefix = n * d;
  const std::size_t pos = cfg.positional ? (n + k) * d : 0;
  // q/k/v over all heads: 3 (d*d + d); output d*d + d; two layer norms 4d; MLP 2 d f + f + d.
  const std::size_t block = (3 * d * d + 2 * d) + (d * d + d) + 4 * d + (2 * d * f + f + d);
  return expansion + prefix + pos + cfg.n_layers * block;
}

ParamList ProjectorParams::parameters() const {
  ParamList out;
  out.push_back({"proj.expand_w", expand_w, true});
  out.push_back({"proj.expand_b", expand_b, false});
  if (prefix.defined()) out.push_back({"proj.prefix", prefix, false});
  if (pos.defined()) out.push_back({"proj.pos", pos, true});
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    collect_block(blocks[l], "proj.blocks." + std::to_string(l) + ".", out);
  }
  return out;
}

ProjectorParams ProjectorParams::clone() const {
  ProjectorParams c;
  c.config = config;
  c.expand_w = clone_param(expand_w);
  c.expand_b = clone_param(expand_b);
  if (prefix.defined()) c.prefix = clone_param(prefix);
  if (pos.defined()) c.pos = clone_param(pos);
  for (const auto& b : blocks) c.blocks.push_back(clone_block(b));
  return c;
}

Tensor project(const ProjectorParams& params, std::span<const double> features) {
  const auto& cfg = params.config;
  if (features.size() != cfg.d_vis) {
    throw ShapeError("projector expects " + std::to_string(cfg.d_vis) + " image features, got " +
                     std::to_string(features.size()));
  }
  const std::size_t k = cfg.clip_length, n = cfg.prefix_length;
  Tensor feat = Tensor::from({1, cfg.d_vis}, std::vector<double>(features.begin(), features.end()));
  Tensor image = reshape(linear(feat, params.expand_w, params.expand_b), {k, cfg.d_lm});

  Tensor x = image;
  if (n > 0) {
    const Tensor parts_prefix_first[] = {params.prefix, image};
    const Tensor parts_image_first[] = {image, params.prefix};
    x = concat_rows(cfg.prefix_first ? std::span<const Tensor>(parts_prefix_first)
                                     : std::span<const Tensor>(parts_image_first));
  }
  if (params.pos.defined()) x = add(x, params.pos);
  for (const auto& b : params.blocks) x = block_forward(b, x, /*causal=*/false, cfg.ln_eps);

  if (n == 0) return x;
  const std::size_t image_begin = cfg.prefix_first ? n : 0;
  const std::size_t prefix_begin = cfg.prefix_first ? 0 : k;
  if (cfg.output_slice == OutputSlice::image_positions) return slice_rows(x, image_begin, image_begin + k);
  return slice_rows(x, prefix_begin, prefix_begin + n);
}

}  // namespace vkg
