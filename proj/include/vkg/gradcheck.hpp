// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vkg/tensor.hpp"

namespace vkg {

struct GradCheckEntry {
  std::size_t tensor = 0;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  bool passed = true;
};

struct GradCheckOptions {
  double h = 1e-5;
  double tol = 1e-4;
  // Coordinates sampled per tensor; tensors with fewer elements are checked exhaustively.
  std::size_t samples_per_tensor = 50;
  std::uint64_t seed = 0;
  // Denominator floor of the relative error.
  double floor = 1e-8;
};

// Compares the analytic gradient of f with central differences
// (f(x+h) - f(x-h)) / 2h. Relative error uses max(|a|, |n|, floor) as the
// denominator. f must rebuild its graph from params on every call.
GradCheckReport grad_check(const std::function<Tensor()>& f, std::vector<Tensor> params,
                           const GradCheckOptions& opts = {});

double grad_rel_error(double analytic, double numeric, double floor = 1e-8);

struct NamedGradCheck {
  std::string name;
  GradCheckReport report;
};

// One randomized check per OpKind (named after the op), plus a 2-layer LM
// ("lm") and a 2-layer projector feeding a 2-layer LM ("projector+lm").
std::vector<NamedGradCheck> standard_grad_checks(const GradCheckOptions& opts = {});

}  // namespace vkg
