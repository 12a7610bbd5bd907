// SPDX-License-Identifier: Apache-2.0
//
// AdamW with linear warmup and gradient accumulation, and the three
// training regimes:
//   llm_kg         text-only instruction tuning of the LM
//   vlm_kg         projector and LM trained jointly on image + text
//   vlm_kg_frozen  LM frozen, projector only
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "vkg/corpus.hpp"
#include "vkg/lm.hpp"
#include "vkg/projector.hpp"

namespace vkg {

struct OptimHyper {
  double lr_peak = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  std::size_t warmup_steps = 0;
  std::size_t grad_accum_steps = 2;
  std::size_t batch_size = 2;
  std::size_t epochs = 5;
  // Global-norm clipping threshold; 0 disables clipping.
  double clip_norm = 1.0;
};

// Throws ConfigError.
void validate(const OptimHyper& h);

enum class Regime { llm_kg, vlm_kg, vlm_kg_frozen };

std::string_view regime_name(Regime r);
// Accepts both "vlm-kg-frozen" and "vlm_kg_frozen" spellings.
std::optional<Regime> parse_regime(std::string_view s);

// Linear ramp from 0 to lr_peak over warmup_steps, constant afterwards.
double lr_at(std::size_t step, const OptimHyper& h);

struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
};

// One decoupled-weight-decay update with bias correction; step is 1-based.
//   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p)
// weight_decay is ignored when decay is false. Throws NonFiniteGradient
// before touching anything if a gradient entry is not finite.
void adamw_step(std::span<double> param, std::span<const double> grad, AdamMoments& state,
                const OptimHyper& h, double lr, std::size_t step, bool decay);

class AdamW {
 public:
  AdamW(ParamList params, OptimHyper hyper);

  // Clips, updates every parameter, clears gradients. Returns the pre-clip
  // global gradient norm. Throws NonFiniteGradient and leaves parameters
  // untouched if any gradient is not finite.
  double step(double lr);
  void zero_grad();
  std::size_t steps_taken() const { return step_; }
  const ParamList& params() const { return params_; }

 private:
  ParamList params_;
  OptimHyper hyper_;
  std::vector<AdamMoments> state_;
  std::size_t step_ = 0;
};

struct TrainLogRow {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct TrainReport {
  std::vector<double> epoch_train_loss;
  std::vector<double> epoch_val_loss;
  std::size_t steps = 0;
  double wall_seconds = 0.0;
  std::string checkpoint_path;
};

struct TrainRun {
  Regime regime = Regime::llm_kg;
  OptimHyper hyper;
  LmConfig lm;
  ProjectorConfig projector;
  std::span<const EncodedSample> train;
  std::span<const EncodedSample> val;
  // Starting weights; fresh initialisation from the configs when absent.
  std::optional<LmParams> init_lm;
  std::optional<ProjectorParams> init_projector;
  std::uint64_t seed = 0;
  std::function<void(const TrainLogRow&)> on_step;
  std::function<void(std::size_t epoch, double train_loss, double val_loss)> on_epoch;
};

struct TrainResult {
  TrainReport report;
  LmParams lm;
  std::optional<ProjectorParams> projector;
  std::vector<TrainLogRow> log;
};

bool regime_uses_projector(Regime r);

// Throws ConfigError when data and model dimensions disagree.
TrainResult train(const TrainRun& run);

// Teacher-forced masked loss of one sample; projector may be null.
Tensor sample_loss(const LmParams& lm, const ProjectorParams* projector, const EncodedSample& sample);

// Mean per-sample loss without recording a graph.
double mean_loss(const LmParams& lm, const ProjectorParams* projector, std::span<const EncodedSample> samples);

// Checkpoint helpers: the header records the regime and model configs.
void save_model(const std::string& path, Regime regime, const LmParams& lm, const ProjectorParams* projector,
                const nlohmann::json& extra = nlohmann::json::object());

struct LoadedModel {
  Regime regime = Regime::llm_kg;
  LmParams lm;
  std::optional<ProjectorParams> projector;
  nlohmann::json meta;
};

LoadedModel load_model(const std::string& path);

void write_train_log_csv(const std::string& path, std::span<const TrainLogRow> rows);

}  // namespace vkg
