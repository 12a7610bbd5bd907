// SPDX-License-Identifier: Apache-2.0
//
// Mapping network from an image feature vector to LM prefix embeddings:
//   features --linear--> k rows of width d_lm (the image sequence)
//   [learned prefix constant (n rows) ; image rows] --bidirectional transformer-->
//   output slice (image rows by default, or the prefix rows).
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vkg/transformer.hpp"

namespace vkg {

enum class OutputSlice { image_positions, prefix_positions };

struct ProjectorConfig {
  std::size_t d_vis = 512;
  std::size_t d_lm = 1024;
  std::size_t clip_length = 64;    // k
  std::size_t prefix_length = 64;  // n
  std::size_t n_layers = 8;
  std::size_t n_heads = 8;
  std::size_t ff_mult = 4;
  OutputSlice output_slice = OutputSlice::image_positions;
  // Prefix rows precede the image rows when set.
  bool prefix_first = true;
  // Learned positional table over the n + k positions; off by default.
  bool positional = false;
  std::uint64_t seed = 0;
  double ln_eps = 1e-5;

  std::size_t d_ff() const { return ff_mult * d_lm; }
  friend bool operator==(const ProjectorConfig&, const ProjectorConfig&) = default;
};

// Throws ConfigError.
void validate(const ProjectorConfig& cfg);

struct ProjectorParams {
  ProjectorConfig config;
  Tensor expand_w;  // [d_vis, k * d_lm]
  Tensor expand_b;  // [k * d_lm]
  Tensor prefix;    // [n, d_lm]; undefined when n == 0
  Tensor pos;       // [n + k, d_lm]; undefined unless positional
  std::vector<BlockParams> blocks;

  ParamList parameters() const;
  ProjectorParams clone() const;
};

ProjectorParams init_projector(const ProjectorConfig& cfg);

// Names and shapes of every trainable tensor, without allocating them.
std::vector<std::pair<std::string, Shape>> projector_param_shapes(const ProjectorConfig& cfg);

// Closed-form trainable scalar count.
std::size_t count_params(const ProjectorConfig& cfg);

// Returns [k, d_lm] for image_positions, [n, d_lm] for prefix_positions
// (image rows when n == 0). Throws ShapeError for a wrong feature length.
Tensor project(const ProjectorParams& params, std::span<const double> features);

}  // namespace vkg
