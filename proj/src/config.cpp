// SPDX-License-Identifier: Apache-2.0
#include "vkg/config.hpp"

#include <cstdint>
#include <fstream>
#include <set>
#include <type_traits>

#include "vkg/errors.hpp"

namespace vkg {

using nlohmann::json;

namespace {

// Reads known keys of one section into existing values and rejects the rest.
class FieldReader {
 public:
  FieldReader(const json& j, std::string section) : j_(j), section_(std::move(section)) {
    if (!j_.is_object()) throw ConfigError("config section '" + section_ + "' must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      const bool ok = it->is_number_unsigned() ||
                      (it->is_number_integer() && it->template get<std::int64_t>() >= 0);
      if (!ok) throw ConfigError(where(key) + " must be a non-negative integer");
    }
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where(key) + ": " + e.what());
    }
  }

  template <class T>
  void get_optional(const char* key, std::optional<T>& out) {
    auto it = j_.find(key);
    if (it != j_.end() && it->is_null()) {
      seen_.insert(key);
      out.reset();
      return;
    }
    if (it == j_.end()) {
      seen_.insert(key);
      return;
    }
    T v{};
    get(key, v);
    out = v;
  }

  // Enum stored as a string; parse returns nullopt for unknown names.
  template <class E, class Parse>
  void get_enum(const char* key, E& out, Parse parse) {
    std::string s;
    bool present = j_.contains(key);
    get(key, s);
    if (!present) return;
    auto v = parse(s);
    if (!v) throw ConfigError(where(key) + ": unknown value '" + s + "'");
    out = *v;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown config key '" + where(it.key().c_str()) + "'");
    }
  }

 private:
  std::string where(const char* key) const { return section_.empty() ? key : section_ + "." + key; }

  const json& j_;
  std::string section_;
  std::set<std::string> seen_;
};

std::optional<OutputSlice> parse_output_slice(std::string_view s) {
  if (s == "image_positions") return OutputSlice::image_positions;
  if (s == "prefix_positions") return OutputSlice::prefix_positions;
  return std::nullopt;
}

const char* output_slice_name(OutputSlice s) {
  return s == OutputSlice::image_positions ? "image_positions" : "prefix_positions";
}

std::optional<LossMaskMode> parse_loss_mask(std::string_view s) {
  if (s == "output_only") return LossMaskMode::output_only;
  if (s == "full_sequence") return LossMaskMode::full_sequence;
  return std::nullopt;
}

void read_synth(FieldReader& r, SynthConfig& c) {
  r.get("n_samples", c.n_samples);
  r.get("anatomy_lexicon", c.anatomy_lexicon);
  r.get("observation_lexicon", c.observation_lexicon);
  r.get("image_only_fraction", c.image_only_fraction);
  r.get("d_vis", c.d_vis);
  r.get("noise_sigma", c.noise_sigma);
  r.get("suggestive_probability", c.suggestive_probability);
  r.get("seed", c.seed);
}

void read_hyper(FieldReader& r, OptimHyper& c, bool schedule = true) {
  if (schedule) {
    r.get("lr_peak", c.lr_peak);
    r.get("warmup_steps", c.warmup_steps);
  }
  r.get("beta1", c.beta1);
  r.get("beta2", c.beta2);
  r.get("eps", c.eps);
  r.get("weight_decay", c.weight_decay);
  r.get("grad_accum_steps", c.grad_accum_steps);
  r.get("batch_size", c.batch_size);
  r.get("epochs", c.epochs);
  r.get("clip_norm", c.clip_norm);
}

}  // namespace

void to_json(json& j, const SynthConfig& c) {
  j = json{{"n_samples", c.n_samples},
           {"anatomy_lexicon", c.anatomy_lexicon},
           {"observation_lexicon", c.observation_lexicon},
           {"image_only_fraction", c.image_only_fraction},
           {"d_vis", c.d_vis},
           {"noise_sigma", c.noise_sigma},
           {"suggestive_probability", c.suggestive_probability},
           {"seed", c.seed}};
}

void from_json(const json& j, SynthConfig& c) {
  FieldReader r(j, "corpus");
  read_synth(r, c);
  r.finish();
}

void to_json(json& j, const LmConfig& c) {
  j = json{{"vocab_size", c.vocab_size}, {"d_model", c.d_model},         {"n_layers", c.n_layers},
           {"n_heads", c.n_heads},       {"d_ff", c.d_ff},               {"max_seq_len", c.max_seq_len},
           {"seed", c.seed},             {"ln_eps", c.ln_eps}};
}

void from_json(const json& j, LmConfig& c) {
  FieldReader r(j, "lm");
  r.get("vocab_size", c.vocab_size);
  r.get("d_model", c.d_model);
  r.get("n_layers", c.n_layers);
  r.get("n_heads", c.n_heads);
  r.get("d_ff", c.d_ff);
  r.get("max_seq_len", c.max_seq_len);
  r.get("seed", c.seed);
  r.get("ln_eps", c.ln_eps);
  r.finish();
}

void to_json(json& j, const ProjectorConfig& c) {
  j = json{{"d_vis", c.d_vis},
           {"d_lm", c.d_lm},
           {"clip_length", c.clip_length},
           {"prefix_length", c.prefix_length},
           {"n_layers", c.n_layers},
           {"n_heads", c.n_heads},
           {"ff_mult", c.ff_mult},
           {"output_slice", output_slice_name(c.output_slice)},
           {"prefix_first", c.prefix_first},
           {"positional", c.positional},
           {"seed", c.seed},
           {"ln_eps", c.ln_eps}};
}

void from_json(const json& j, ProjectorConfig& c) {
  FieldReader r(j, "projector");
  r.get("d_vis", c.d_vis);
  r.get("d_lm", c.d_lm);
  r.get("clip_length", c.clip_length);
  r.get("prefix_length", c.prefix_length);
  r.get("n_layers", c.n_layers);
  r.get("n_heads", c.n_heads);
  r.get("ff_mult", c.ff_mult);
  r.get_enum("output_slice", c.output_slice, parse_output_slice);
  r.get("prefix_first", c.prefix_first);
  r.get("positional", c.positional);
  r.get("seed", c.seed);
  r.get("ln_eps", c.ln_eps);
  r.finish();
}

void to_json(json& j, const OptimHyper& c) {
  j = json{{"lr_peak", c.lr_peak},
           {"beta1", c.beta1},
           {"beta2", c.beta2},
           {"eps", c.eps},
           {"weight_decay", c.weight_decay},
           {"warmup_steps", c.warmup_steps},
           {"grad_accum_steps", c.grad_accum_steps},
           {"batch_size", c.batch_size},
           {"epochs", c.epochs},
           {"clip_norm", c.clip_norm}};
}

void from_json(const json& j, OptimHyper& c) {
  FieldReader r(j, "trainer");
  read_hyper(r, c);
  r.finish();
}

void to_json(json& j, const DecodeConfig& c) {
  j = json{{"strategy", std::string(strategy_name(c.strategy))},
           {"beam_width", c.beam_width},
           {"k", c.k},
           {"p", c.p},
           {"max_new_tokens", c.max_new_tokens},
           {"seed", c.seed},
           {"length_normalization", c.length_normalization}};
}

void from_json(const json& j, DecodeConfig& c) {
  FieldReader r(j, "decoder");
  r.get_enum("strategy", c.strategy, parse_strategy);
  r.get("beam_width", c.beam_width);
  r.get("k", c.k);
  r.get("p", c.p);
  r.get("max_new_tokens", c.max_new_tokens);
  r.get("seed", c.seed);
  r.get("length_normalization", c.length_normalization);
  r.finish();
}

void to_json(json& j, const MetricConfig& c) {
  j = json{{"beta", c.beta}, {"sentence_smoothing", c.sentence_smoothing}};
}

void from_json(const json& j, MetricConfig& c) {
  FieldReader r(j, "metrics");
  r.get("beta", c.beta);
  r.get("sentence_smoothing", c.sentence_smoothing);
  r.finish();
}

RunConfig default_run_config() {
  RunConfig c;
  c.lm.d_model = 128;
  c.lm.n_layers = 4;
  c.lm.n_heads = 4;
  c.lm.d_ff = 512;
  // Room for a 64-row prefix, the prompt and a 512-token generation budget.
  c.lm.max_seq_len = 768;
  c.projector.d_vis = c.corpus.synth.d_vis;
  c.projector.d_lm = c.lm.d_model;
  c.projector.clip_length = 64;
  c.projector.prefix_length = 64;
  c.projector.n_layers = 8;
  c.projector.n_heads = 4;
  c.projector.ff_mult = 4;
  return c;
}

json to_json(const RunConfig& cfg) {
  json corpus = cfg.corpus.synth;
  corpus["n_val"] = cfg.corpus.n_val;
  corpus["template"] = cfg.corpus.template_text;
  corpus["loss_mask"] = cfg.corpus.loss_mask == LossMaskMode::output_only ? "output_only" : "full_sequence";
  json trainer = cfg.trainer.hyper;
  trainer["lr_peak"] = cfg.trainer.lr_peak ? json(*cfg.trainer.lr_peak) : json(nullptr);
  trainer["warmup_steps"] = cfg.trainer.warmup_steps ? json(*cfg.trainer.warmup_steps) : json(nullptr);
  return json{{"seed", cfg.seed},
              {"corpus", corpus},
              {"lm", cfg.lm},
              {"projector", cfg.projector},
              {"trainer", trainer},
              {"decoder", cfg.decoder},
              {"metrics", cfg.metrics},
              {"paths",
               {{"corpus", cfg.paths.corpus},
                {"vocab", cfg.paths.vocab},
                {"features", cfg.paths.features},
                {"checkpoint", cfg.paths.checkpoint}}}};
}

RunConfig run_config_from_json(const json& doc) {
  RunConfig cfg = default_run_config();
  FieldReader top(doc, "");
  top.get("seed", cfg.seed);
  for (const char* section : {"corpus", "lm", "projector", "trainer", "decoder", "metrics", "paths"}) {
    json dummy;
    top.get(section, dummy);
  }
  top.finish();

  if (auto it = doc.find("corpus"); it != doc.end()) {
    FieldReader r(*it, "corpus");
    read_synth(r, cfg.corpus.synth);
    r.get("n_val", cfg.corpus.n_val);
    r.get("template", cfg.corpus.template_text);
    r.get_enum("loss_mask", cfg.corpus.loss_mask, parse_loss_mask);
    r.finish();
  }
  if (auto it = doc.find("lm"); it != doc.end()) from_json(*it, cfg.lm);
  if (auto it = doc.find("projector"); it != doc.end()) from_json(*it, cfg.projector);
  if (auto it = doc.find("trainer"); it != doc.end()) {
    FieldReader r(*it, "trainer");
    read_hyper(r, cfg.trainer.hyper, false);
    // null means regime default.
    r.get_optional("lr_peak", cfg.trainer.lr_peak);
    r.get_optional("warmup_steps", cfg.trainer.warmup_steps);
    r.finish();
  }
  if (auto it = doc.find("decoder"); it != doc.end()) from_json(*it, cfg.decoder);
  if (auto it = doc.find("metrics"); it != doc.end()) from_json(*it, cfg.metrics);
  if (auto it = doc.find("paths"); it != doc.end()) {
    FieldReader r(*it, "paths");
    r.get("corpus", cfg.paths.corpus);
    r.get("vocab", cfg.paths.vocab);
    r.get("features", cfg.paths.features);
    r.get("checkpoint", cfg.paths.checkpoint);
    r.finish();
  }
  validate(cfg);
  return cfg;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
}

void apply_override(json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' is not of the form key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    if (!node->is_object()) {
      if (!node->is_null()) throw ConfigError("override key '" + key + "' descends into a non-object");
      *node = json::object();
    }
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

OptimHyper resolve_hyper(const RunConfig& cfg, Regime regime) {
  OptimHyper h = cfg.trainer.hyper;
  const bool text_only = regime == Regime::llm_kg;
  h.lr_peak = cfg.trainer.lr_peak.value_or(text_only ? 1e-4 : 2e-5);
  h.warmup_steps = cfg.trainer.warmup_steps.value_or(text_only ? 0 : 5000);
  return h;
}

void validate(const RunConfig& cfg) {
  validate(cfg.corpus.synth);
  LmConfig lm = cfg.lm;
  // vocab_size 0 means "taken from the vocabulary file".
  if (lm.vocab_size == 0) lm.vocab_size = Vocab::kNumSpecial;
  validate(lm);
  validate(cfg.projector);
  validate(resolve_hyper(cfg, Regime::llm_kg));
  validate(cfg.decoder);
  if (!(cfg.metrics.beta > 0.0)) throw ConfigError("metrics.beta must be > 0");
  if (cfg.projector.d_lm != cfg.lm.d_model) {
    throw ConfigError("projector.d_lm (" + std::to_string(cfg.projector.d_lm) + ") must equal lm.d_model (" +
                      std::to_string(cfg.lm.d_model) + ")");
  }
  if (cfg.paths.features.empty() && cfg.projector.d_vis != cfg.corpus.synth.d_vis) {
    throw ConfigError("projector.d_vis (" + std::to_string(cfg.projector.d_vis) + ") must equal corpus.d_vis (" +
                      std::to_string(cfg.corpus.synth.d_vis) + ")");
  }
}

}  // namespace vkg
