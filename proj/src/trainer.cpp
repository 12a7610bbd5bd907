// SPDX-License-Identifier: Apache-2.0
#include "vkg/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "vkg/checkpoint.hpp"
#include "vkg/config.hpp"
#include "vkg/errors.hpp"
#include "vkg/rng.hpp"

namespace vkg {

void validate(const OptimHyper& h) {
  if (!(h.lr_peak > 0.0) || !std::isfinite(h.lr_peak)) throw ConfigError("trainer.lr_peak must be > 0");
  if (!(h.beta1 >= 0.0 && h.beta1 < 1.0) || !(h.beta2 >= 0.0 && h.beta2 < 1.0)) {
    throw ConfigError("trainer.beta1 and trainer.beta2 must lie in [0, 1)");
  }
  if (!(h.eps > 0.0)) throw ConfigError("trainer.eps must be > 0");
  if (!(h.weight_decay >= 0.0)) throw ConfigError("trainer.weight_decay must be >= 0");
  if (h.grad_accum_steps < 1) throw ConfigError("trainer.grad_accum_steps must be >= 1");
  if (h.batch_size < 1) throw ConfigError("trainer.batch_size must be >= 1");
  if (!(h.clip_norm >= 0.0)) throw ConfigError("trainer.clip_norm must be >= 0");
}

std::string_view regime_name(Regime r) {
  switch (r) {
    case Regime::llm_kg: return "llm-kg";
    case Regime::vlm_kg: return "vlm-kg";
    case Regime::vlm_kg_frozen: return "vlm-kg-frozen";
  }
  return "";
}

std::optional<Regime> parse_regime(std::string_view s) {
  std::string norm(s);
  for (auto& c : norm) {
    if (c == '_') c = '-';
  }
  for (auto r : {Regime::llm_kg, Regime::vlm_kg, Regime::vlm_kg_frozen}) {
    if (norm == regime_name(r)) return r;
  }
  return std::nullopt;
}

bool regime_uses_projector(Regime r) { return r != Regime::llm_kg; }

double lr_at(std::size_t step, const OptimHyper& h) {
  if (h.warmup_steps == 0 || step >= h.warmup_steps) return h.lr_peak;
  return h.lr_peak * static_cast<double>(step) / static_cast<double>(h.warmup_steps);
}

void adamw_step(std::span<double> param, std::span<const double> grad, AdamMoments& state, const OptimHyper& h,
                double lr, std::size_t step, bool decay) {
  if (param.size() != grad.size()) {
    throw ShapeError("adamw_step: " + std::to_string(param.size()) + " parameters vs " +
                     std::to_string(grad.size()) + " gradients");
  }
  if (step < 1) throw ConfigError("adamw_step: step is 1-based");
  for (double g : grad) {
    if (!std::isfinite(g)) throw NonFiniteGradient("non-finite gradient entry");
  }
  if (state.m.size() != param.size()) {
    state.m.assign(param.size(), 0.0);
    state.v.assign(param.size(), 0.0);
  }
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(step));
  const double wd = decay ? h.weight_decay : 0.0;
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    state.m[i] = h.beta1 * state.m[i] + (1.0 - h.beta1) * g;
    state.v[i] = h.beta2 * state.v[i] + (1.0 - h.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    param[i] -= lr * (m_hat / (std::sqrt(v_hat) + h.eps) + wd * param[i]);
  }
}

AdamW::AdamW(ParamList params, OptimHyper hyper) : params_(std::move(params)), hyper_(hyper) {
  validate(hyper_);
  state_.resize(params_.size());
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

double AdamW::step(double lr) {
  double sq = 0.0;
  for (const auto& p : params_) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad()) {
      if (!std::isfinite(g)) throw NonFiniteGradient("non-finite gradient in '" + p.name + "'");
      sq += g * g;
    }
  }
  const double norm = std::sqrt(sq);
  const double factor = hyper_.clip_norm > 0.0 && norm > hyper_.clip_norm ? hyper_.clip_norm / norm : 1.0;
  ++step_;
  std::vector<double> scaled;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    scaled.assign(p.tensor.numel(), 0.0);
    if (p.tensor.has_grad()) {
      const auto g = p.tensor.grad();
      for (std::size_t j = 0; j < g.size(); ++j) scaled[j] = g[j] * factor;
    }
    adamw_step(p.tensor.mutable_data(), scaled, state_[i], hyper_, lr, step_, p.decay);
    p.tensor.zero_grad();
  }
  return norm;
}

Tensor sample_loss(const LmParams& lm, const ProjectorParams* projector, const EncodedSample& sample) {
  PrefixedBatch batch;
  if (projector) {
    if (!sample.image_features) throw MissingFeatures("sample '" + sample.id + "' has no image features");
    batch.prefix = project(*projector, *sample.image_features);
  }
  batch.token_ids = sample.token_ids;
  batch.loss_mask = sample.loss_mask;
  return lm_loss(lm_forward(lm, batch), batch);
}

double mean_loss(const LmParams& lm, const ProjectorParams* projector, std::span<const EncodedSample> samples) {
  if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
  NoGradGuard no_grad;
  double total = 0.0;
  for (const auto& s : samples) total += sample_loss(lm, projector, s).item();
  return total / static_cast<double>(samples.size());
}

namespace {

void check_data(const TrainRun& run, const LmParams& lm, const ProjectorParams* projector) {
  const std::size_t k =
      projector ? (projector->config.output_slice == OutputSlice::prefix_positions && projector->config.prefix_length
                       ? projector->config.prefix_length
                       : projector->config.clip_length)
                : 0;
  for (auto set : {run.train, run.val}) {
    for (const auto& s : set) {
      for (auto id : s.token_ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= lm.config.vocab_size) {
          throw ConfigError("sample '" + s.id + "' has token id " + std::to_string(id) +
                            " outside lm.vocab_size " + std::to_string(lm.config.vocab_size));
        }
      }
      if (s.loss_mask.size() != s.token_ids.size()) {
        throw ConfigError("sample '" + s.id + "' has a loss mask of the wrong length");
      }
      if (k + s.token_ids.size() > lm.config.max_seq_len) {
        throw ConfigError("sample '" + s.id + "' needs " + std::to_string(k + s.token_ids.size()) +
                          " positions; lm.max_seq_len is " + std::to_string(lm.config.max_seq_len));
      }
      if (projector) {
        if (!s.image_features) throw ConfigError("sample '" + s.id + "' has no image features");
        if (s.image_features->size() != projector->config.d_vis) {
          throw ConfigError("sample '" + s.id + "' has " + std::to_string(s.image_features->size()) +
                            " image features; projector.d_vis is " + std::to_string(projector->config.d_vis));
        }
      }
    }
  }
}

}  // namespace

TrainResult train(const TrainRun& run) {
  validate(run.hyper);
  if (run.train.empty()) throw EmptyCorpus("no training samples");
  const auto t0 = std::chrono::steady_clock::now();

  TrainResult result{{}, run.init_lm ? run.init_lm->clone() : init_lm(run.lm), std::nullopt, {}};
  LmParams& lm = result.lm;
  const bool with_projector = regime_uses_projector(run.regime);
  if (with_projector) {
    result.projector = run.init_projector ? run.init_projector->clone() : init_projector(run.projector);
    if (result.projector->config.d_lm != lm.config.d_model) {
      throw ConfigError("projector.d_lm (" + std::to_string(result.projector->config.d_lm) +
                        ") must equal lm.d_model (" + std::to_string(lm.config.d_model) + ")");
    }
  }
  const ProjectorParams* proj = with_projector ? &*result.projector : nullptr;
  check_data(run, lm, proj);

  ParamList trainable;
  if (with_projector) trainable = proj->parameters();
  if (run.regime == Regime::vlm_kg_frozen) {
    lm.set_trainable(false);
  } else {
    lm.set_trainable(true);
    for (auto& p : lm.parameters()) trainable.push_back(p);
  }
  AdamW opt(trainable, run.hyper);

  Rng rng(mix_seed(run.seed, 0x5348554646));
  std::vector<std::size_t> order(run.train.size());
  const std::size_t bs = run.hyper.batch_size;
  const std::size_t n_micro = (order.size() + bs - 1) / bs;

  for (std::size_t epoch = 1; epoch <= run.hyper.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order.begin(), order.end());
    double epoch_sum = 0.0;
    for (std::size_t g0 = 0; g0 < n_micro; g0 += run.hyper.grad_accum_steps) {
      const std::size_t g1 = std::min(n_micro, g0 + run.hyper.grad_accum_steps);
      const double n_group = static_cast<double>(g1 - g0);
      double group_sum = 0.0;
      std::size_t group_count = 0;
      for (std::size_t mb = g0; mb < g1; ++mb) {
        const std::size_t b0 = mb * bs;
        const std::size_t b1 = std::min(order.size(), b0 + bs);
        const double weight = 1.0 / (static_cast<double>(b1 - b0) * n_group);
        for (std::size_t i = b0; i < b1; ++i) {
          Tensor loss = sample_loss(lm, proj, run.train[order[i]]);
          const double value = loss.item();
          backward(scale(loss, weight));
          group_sum += value;
          ++group_count;
        }
      }
      const std::size_t step = opt.steps_taken() + 1;
      const double lr = lr_at(step, run.hyper);
      opt.step(lr);
      epoch_sum += group_sum;
      TrainLogRow row{step, epoch, lr, group_sum / static_cast<double>(group_count)};
      result.log.push_back(row);
      if (run.on_step) run.on_step(row);
    }
    const double train_loss = epoch_sum / static_cast<double>(order.size());
    const double val_loss = mean_loss(lm, proj, run.val);
    result.report.epoch_train_loss.push_back(train_loss);
    result.report.epoch_val_loss.push_back(val_loss);
    if (run.on_epoch) run.on_epoch(epoch, train_loss, val_loss);
  }
  lm.set_trainable(true);
  result.report.steps = opt.steps_taken();
  result.report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

// ---------------------------------------------------------------- persistence

void save_model(const std::string& path, Regime regime, const LmParams& lm, const ProjectorParams* projector,
                const nlohmann::json& extra) {
  nlohmann::json meta = extra.is_object() ? extra : nlohmann::json::object();
  meta["regime"] = std::string(regime_name(regime));
  meta["lm"] = lm.config;
  meta["projector"] = projector ? nlohmann::json(projector->config) : nlohmann::json(nullptr);
  ParamList all = lm.parameters();
  if (projector) {
    for (auto& p : projector->parameters()) all.push_back(p);
  }
  save_checkpoint(path, meta, all);
}

LoadedModel load_model(const std::string& path) {
  const CheckpointData data = load_checkpoint(path);
  LoadedModel out{};
  try {
    const auto regime = parse_regime(data.meta.at("regime").get<std::string>());
    if (!regime) throw FormatError("checkpoint " + path + " names an unknown regime");
    out.regime = *regime;
    LmConfig lm_cfg;
    from_json(data.meta.at("lm"), lm_cfg);
    out.lm = init_lm(lm_cfg);
    if (!data.meta.at("projector").is_null()) {
      ProjectorConfig pc;
      from_json(data.meta.at("projector"), pc);
      out.projector = init_projector(pc);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint " + path + " has a malformed header: " + e.what());
  } catch (const ConfigError& e) {
    throw FormatError("checkpoint " + path + " has an invalid config: " + e.what());
  }
  ParamList all = out.lm.parameters();
  if (out.projector) {
    for (auto& p : out.projector->parameters()) all.push_back(p);
  }
  restore_params(data, all);
  out.meta = data.meta;
  return out;
}

void write_train_log_csv(const std::string& path, std::span<const TrainLogRow> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "step,epoch,lr,loss\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.9g,%.9g\n", r.step, r.epoch, r.lr, r.loss);
    out << buf;
  }
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace vkg
