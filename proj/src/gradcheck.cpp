// SPDX-License-Identifier: Apache-2.0
#include "vkg/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace vkg {

double grad_rel_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const std::function<Tensor()>& f, std::vector<Tensor> params,
                           const GradCheckOptions& opts) {
  for (auto& p : params) p.zero_grad();
  backward(f());

  std::mt19937_64 rng(opts.seed);
  GradCheckReport report;
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& p = params[t];
    std::vector<std::size_t> coords(p.numel());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > opts.samples_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(opts.samples_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    const bool has = p.has_grad();
    for (std::size_t i : coords) {
      const double analytic = has ? p.grad()[i] : 0.0;
      auto x = p.mutable_data();
      const double orig = x[i];
      double plus = 0.0, minus = 0.0;
      {
        NoGradGuard guard;
        x[i] = orig + opts.h;
        plus = f().item();
        x[i] = orig - opts.h;
        minus = f().item();
        x[i] = orig;
      }
      const double numeric = (plus - minus) / (2.0 * opts.h);
      const double err = grad_rel_error(analytic, numeric, opts.floor);
      report.entries.push_back({t, i, analytic, numeric, err});
      report.max_rel_error = std::max(report.max_rel_error, err);
    }
  }
  report.passed = report.max_rel_error <= opts.tol;
  return report;
}

}  // namespace vkg
