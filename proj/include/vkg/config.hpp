// SPDX-License-Identifier: Apache-2.0
//
// JSON run configuration. One document with a section per module:
//
//   {"seed": 0,
//    "corpus": {...SynthConfig, "n_val", "template", "loss_mask"},
//    "lm": {...}, "projector": {...},
//    "trainer": {...OptimHyper; lr_peak / warmup_steps may be null},
//    "decoder": {...}, "metrics": {...},
//    "paths": {"corpus", "vocab", "features", "checkpoint"}}
//
// Unknown keys are rejected. Overrides use dotted keys: trainer.lr_peak=1e-4.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "vkg/corpus.hpp"
#include "vkg/decoder.hpp"
#include "vkg/lm.hpp"
#include "vkg/metrics.hpp"
#include "vkg/projector.hpp"
#include "vkg/trainer.hpp"

namespace vkg {

void to_json(nlohmann::json& j, const SynthConfig& c);
void from_json(const nlohmann::json& j, SynthConfig& c);
void to_json(nlohmann::json& j, const LmConfig& c);
void from_json(const nlohmann::json& j, LmConfig& c);
void to_json(nlohmann::json& j, const ProjectorConfig& c);
void from_json(const nlohmann::json& j, ProjectorConfig& c);
void to_json(nlohmann::json& j, const OptimHyper& c);
void from_json(const nlohmann::json& j, OptimHyper& c);
void to_json(nlohmann::json& j, const DecodeConfig& c);
void from_json(const nlohmann::json& j, DecodeConfig& c);
void to_json(nlohmann::json& j, const MetricConfig& c);
void from_json(const nlohmann::json& j, MetricConfig& c);

struct CorpusSection {
  SynthConfig synth;
  std::size_t n_val = 32;
  std::string template_text{kDefaultTemplate};
  LossMaskMode loss_mask = LossMaskMode::output_only;
};

struct TrainerSection {
  OptimHyper hyper;
  // Regime defaults apply when unset.
  std::optional<double> lr_peak;
  std::optional<std::size_t> warmup_steps;
};

struct PathsSection {
  std::string corpus;
  std::string vocab;
  std::string features;
  std::string checkpoint;
};

struct RunConfig {
  std::uint64_t seed = 0;
  CorpusSection corpus;
  LmConfig lm;
  ProjectorConfig projector;
  TrainerSection trainer;
  DecodeConfig decoder;
  MetricConfig metrics;
  PathsSection paths;
};

// Desk-scale defaults: a small LM and projector, published optimiser settings.
RunConfig default_run_config();

nlohmann::json to_json(const RunConfig& cfg);
// Starts from default_run_config() and applies the document. Throws
// ConfigError for unknown keys, wrong types, or failed validation.
RunConfig run_config_from_json(const nlohmann::json& doc);

// Reads a JSON file (ConfigError on parse failure, IoError when unreadable).
nlohmann::json read_json_file(const std::filesystem::path& path);

// "a.b.c=value": value parsed as JSON when possible, else taken as a string.
void apply_override(nlohmann::json& doc, std::string_view assignment);

// Default learning-rate settings: llm_kg 1e-4 without warmup, the visual
// regimes 2e-5 with 5000 warmup steps; explicit trainer values win.
OptimHyper resolve_hyper(const RunConfig& cfg, Regime regime);

// Cross-section checks: d_lm == d_model, matching d_vis, and validation of
// every section.
void validate(const RunConfig& cfg);

}  // namespace vkg
