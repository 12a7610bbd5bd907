// SPDX-License-Identifier: Apache-2.0
#include "vkg/cli.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "vkg/config.hpp"
#include "vkg/corpus.hpp"
#include "vkg/decoder.hpp"
#include "vkg/errors.hpp"
#include "vkg/gradcheck.hpp"
#include "vkg/kg_schema.hpp"
#include "vkg/metrics.hpp"
#include "vkg/trainer.hpp"
#include "vkg/vision_features.hpp"

namespace vkg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string git_blob_sha1(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw Error("cannot allocate a digest context");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, md, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw Error("SHA-1 digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

namespace {

constexpr const char* kExitCodes =
    "Exit codes:\n"
    "  0  success\n"
    "  1  unknown command or invalid arguments\n"
    "  2  configuration error\n"
    "  3  I/O or file format error\n"
    "  4  data or model invariant violation (including a failed gradcheck)\n"
    "  5  internal error";

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string run_dir;
  std::string corpus;
  std::string features;
  std::string split = "val";
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

RunConfig resolve_config(const Common& c) {
  json doc = c.config.empty() ? json::object() : read_json_file(c.config);
  for (const auto& s : c.sets) apply_override(doc, s);
  return run_config_from_json(doc);
}

fs::path prepare_run_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create run directory " + dir + ": " + ec.message());
  return fs::path(dir);
}

void write_snapshot(const fs::path& dir, const RunConfig& cfg, json manifest) {
  write_file(dir / "config.json", to_json(cfg).dump(2) + "\n");
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

std::string corpus_path(const Common& c, const RunConfig& cfg) {
  std::string p = c.corpus.empty() ? cfg.paths.corpus : c.corpus;
  if (p.empty()) throw ConfigError("no corpus given (use --corpus or paths.corpus)");
  return p;
}

// Reads the corpus, swapping in file-backed features when configured.
std::vector<InstructionSample> load_samples(const std::string& path, const Common& c, const RunConfig& cfg) {
  auto samples = read_corpus_jsonl(path);
  if (samples.empty()) throw EmptyCorpus("corpus " + path + " holds no samples");
  const std::string feat = c.features.empty() ? cfg.paths.features : c.features;
  if (!feat.empty()) {
    const auto source = FeatureSource::load_file(feat);
    for (auto& s : samples) s.image_features = source.features_for(s.id);
  }
  return samples;
}

struct Split {
  std::vector<InstructionSample> train;
  std::vector<InstructionSample> val;
};

// The last n_val samples form the validation split.
Split split_corpus(const std::vector<InstructionSample>& samples, std::size_t n_val) {
  if (n_val >= samples.size()) {
    throw ConfigError("corpus.n_val (" + std::to_string(n_val) + ") leaves no training samples out of " +
                      std::to_string(samples.size()));
  }
  const auto cut = samples.begin() + static_cast<std::ptrdiff_t>(samples.size() - n_val);
  return {{samples.begin(), cut}, {cut, samples.end()}};
}

std::vector<InstructionSample> select_split(const std::vector<InstructionSample>& samples, const std::string& which,
                                            std::size_t n_val) {
  if (which == "all") return samples;
  auto s = split_corpus(samples, n_val);
  if (which == "train") return s.train;
  if (which == "val") return s.val;
  throw ConfigError("--split must be train, val or all (got '" + which + "')");
}

std::vector<KnowledgeGraph> gold_of(std::span<const InstructionSample> samples) {
  std::vector<KnowledgeGraph> out;
  for (const auto& s : samples) {
    KnowledgeGraph g = s.output_triplets;
    g.source_id = s.id;
    out.push_back(std::move(g));
  }
  return out;
}

json vocab_json(const Vocab& v) {
  json arr = json::array();
  for (std::size_t i = Vocab::kNumSpecial; i < v.size(); ++i) arr.push_back(v.tokens()[i]);
  return arr;
}

Vocab vocab_from_meta(const json& meta) {
  try {
    const auto tokens = meta.at("vocab").get<std::vector<std::string>>();
    return Vocab::from_tokens(tokens);
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint header lacks a vocabulary: ") + e.what());
  }
}

std::string template_from_meta(const json& meta) {
  auto it = meta.find("template");
  return it != meta.end() && it->is_string() ? it->get<std::string>() : std::string(kDefaultTemplate);
}

std::vector<EncodedSample> encode_all(std::span<const InstructionSample> samples, const Vocab& vocab,
                                      const RunConfig& cfg) {
  std::vector<EncodedSample> out;
  EncodeOptions opts;
  opts.mask = cfg.corpus.loss_mask;
  for (const auto& s : samples) out.push_back(encode(s, vocab, cfg.corpus.template_text, opts));
  return out;
}

struct Model {
  Regime regime = Regime::llm_kg;
  LmParams lm;
  std::optional<ProjectorParams> projector;
  Vocab vocab;
  std::string template_text;
};

Model load_model_file(const std::string& path) {
  auto loaded = load_model(path);
  Model m{loaded.regime, std::move(loaded.lm), std::move(loaded.projector), vocab_from_meta(loaded.meta),
          template_from_meta(loaded.meta)};
  return m;
}

void save_model_file(const fs::path& path, const Model& m, const RunConfig& cfg) {
  json extra{{"vocab", vocab_json(m.vocab)}, {"template", m.template_text}, {"seed", cfg.seed}};
  save_model(path.string(), m.regime, m.lm, m.projector ? &*m.projector : nullptr, extra);
}

struct Trained {
  Model model;
  TrainReport report;
  std::vector<TrainLogRow> log;
};

Trained train_model(const RunConfig& cfg, Regime regime, const ProjectorConfig& pc, const Vocab& vocab,
                    const Split& split, const Model* init) {
  if (init && !(init->vocab == vocab)) throw ConfigError("--init checkpoint was trained with a different vocabulary");
  const auto train_set = encode_all(split.train, vocab, cfg);
  const auto val_set = encode_all(split.val, vocab, cfg);
  TrainRun run;
  run.regime = regime;
  run.hyper = resolve_hyper(cfg, regime);
  run.lm = cfg.lm;
  if (run.lm.vocab_size != 0 && run.lm.vocab_size != vocab.size()) {
    throw ConfigError("lm.vocab_size (" + std::to_string(run.lm.vocab_size) + ") does not match the vocabulary (" +
                      std::to_string(vocab.size()) + ")");
  }
  run.lm.vocab_size = vocab.size();
  run.projector = pc;
  run.train = train_set;
  run.val = val_set;
  run.seed = cfg.seed;
  if (init) {
    run.init_lm = init->lm.clone();
    if (init->projector && regime_uses_projector(regime) && init->projector->config == pc) {
      run.init_projector = init->projector->clone();
    }
  }
  auto result = train(run);
  Trained t{Model{regime, std::move(result.lm), std::move(result.projector), vocab, cfg.corpus.template_text},
            std::move(result.report), std::move(result.log)};
  return t;
}

struct Predicted {
  std::vector<KnowledgeGraph> kgs;
  json generations = json::array();
};

Predicted predict(const Model& m, std::span<const InstructionSample> samples, const DecodeConfig& dc) {
  Predicted p;
  const ProjectorParams* proj = m.projector ? &*m.projector : nullptr;
  for (const auto& s : samples) {
    const auto prompt = encode_prompt(s, m.vocab, m.template_text);
    std::vector<double> feats;
    if (proj) {
      if (!s.image_features) throw MissingFeatures("sample '" + s.id + "' has no image features");
      feats = *s.image_features;
    }
    const auto gen = generate(m.lm, proj, feats, prompt, dc);
    const std::string text = decode(gen.tokens, m.vocab);
    auto parsed = parse_triplets(text, s.id);
    p.kgs.push_back(std::move(parsed.graph));
    p.generations.push_back({{"id", s.id},
                             {"text", text},
                             {"log_prob", gen.log_prob},
                             {"stop", gen.stop == StopReason::eos ? "eos" : "length"},
                             {"skipped", parsed.skipped}});
  }
  return p;
}

std::string jsonl(const json& arr) {
  std::string out;
  for (const auto& row : arr) out += row.dump() + "\n";
  return out;
}

std::vector<std::string> count_extras(const EvalReport& r) {
  return {std::to_string(r.correct), std::to_string(r.hallucinated), std::to_string(r.missed),
          format_fixed(r.exact_match), format_fixed(r.triplet_match)};
}

const std::vector<std::string> kCountColumns{"correct", "hallucinated", "missed", "exact_match", "triplet_match"};

std::string samples_csv(const EvalReport& r) {
  std::string out = "id,B1,B2,B3,B4,RL,correct,hallucinated,missed,exact\n";
  for (const auto& s : r.rows) {
    out += s.id;
    for (double b : s.bleu) out += "," + format_fixed(100.0 * b, 4);
    out += "," + format_fixed(100.0 * s.rouge_l, 4);
    out += "," + std::to_string(s.correct) + "," + std::to_string(s.hallucinated) + "," + std::to_string(s.missed);
    out += s.exact ? ",1\n" : ",0\n";
  }
  return out;
}

void emit_table(const fs::path& dir, const std::string& stem, const ResultTable& t, std::ostream& out) {
  write_file(dir / (stem + ".csv"), t.to_csv());
  const std::string text = t.to_text();
  write_file(dir / (stem + ".txt"), text);
  out << text;
}

std::string fmt9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

json base_manifest(const std::string& command, const std::string& corpus) {
  json m{{"command", command}};
  if (!corpus.empty()) {
    m["corpus"] = fs::path(corpus).filename().string();
    m["corpus_sha1"] = git_blob_sha1(read_file(corpus));
  }
  return m;
}

std::optional<Model> init_model(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return load_model_file(path);
}

// The LM the visual regimes start from: --init when given, else a fresh
// llm-kg run on the same split.
Model text_model(const RunConfig& cfg, const Vocab& vocab, const Split& split, const std::string& init_path,
                 std::ostream& out) {
  if (auto m = init_model(init_path)) return std::move(*m);
  out << "training llm-kg starting point\n";
  return train_model(cfg, Regime::llm_kg, cfg.projector, vocab, split, nullptr).model;
}

// ---------------------------------------------------------------- commands

int cmd_gen_corpus(const Common& c, std::ostream& out) {
  const RunConfig cfg = resolve_config(c);
  const fs::path dir = prepare_run_dir(c.run_dir);
  const auto samples = gen_synthetic(cfg.corpus.synth);
  write_corpus_jsonl(dir / "corpus.jsonl", samples);
  const Vocab vocab = build_vocab(samples, cfg.corpus.template_text);
  vocab.save(dir / "vocab.txt");
  std::map<std::string, std::vector<double>> vecs;
  for (const auto& s : samples) vecs.emplace(s.id, *s.image_features);
  FeatureSource::from_vectors(cfg.corpus.synth.d_vis, std::move(vecs)).save(dir / "features.txt");

  json manifest = base_manifest("gen-corpus", "");
  manifest["corpus_sha1"] = git_blob_sha1(read_file(dir / "corpus.jsonl"));
  manifest["n_samples"] = samples.size();
  manifest["vocab_size"] = vocab.size();
  write_snapshot(dir, cfg, manifest);
  out << "samples " << samples.size() << "\nvocab " << vocab.size() << "\n";
  return kOk;
}

int cmd_train(const Common& c, const std::string& regime_text, const std::string& init_path, std::ostream& out) {
  const auto regime = parse_regime(regime_text);
  if (!regime) throw ConfigError("unknown regime '" + regime_text + "' (llm-kg, vlm-kg, vlm-kg-frozen)");
  const RunConfig cfg = resolve_config(c);
  const std::string corpus = corpus_path(c, cfg);
  const auto samples = load_samples(corpus, c, cfg);
  const fs::path dir = prepare_run_dir(c.run_dir);
  const auto init = init_model(init_path);
  const Vocab vocab = init ? init->vocab
                      : cfg.paths.vocab.empty() ? build_vocab(samples, cfg.corpus.template_text)
                                                : Vocab::load(cfg.paths.vocab);
  const Split split = split_corpus(samples, cfg.corpus.n_val);
  const Trained t = train_model(cfg, *regime, cfg.projector, vocab, split, init ? &*init : nullptr);

  save_model_file(dir / "model.ckpt", t.model, cfg);
  write_train_log_csv((dir / "train_log.csv").string(), t.log);
  std::string epochs = "epoch,train_loss,val_loss\n";
  for (std::size_t e = 0; e < t.report.epoch_train_loss.size(); ++e) {
    epochs += std::to_string(e + 1) + "," + fmt9(t.report.epoch_train_loss[e]) + "," +
              fmt9(t.report.epoch_val_loss[e]) + "\n";
  }
  write_file(dir / "epochs.csv", epochs);
  json manifest = base_manifest("train", corpus);
  manifest["regime"] = std::string(regime_name(*regime));
  manifest["steps"] = t.report.steps;
  if (!init_path.empty()) manifest["init"] = fs::path(init_path).filename().string();
  write_snapshot(dir, cfg, manifest);
  out << epochs << "steps " << t.report.steps << "\ncheckpoint " << (dir / "model.ckpt").string() << "\n";
  return kOk;
}

int cmd_generate(const Common& c, const std::string& ckpt, std::ostream& out) {
  const RunConfig cfg = resolve_config(c);
  const std::string corpus = corpus_path(c, cfg);
  const auto samples = select_split(load_samples(corpus, c, cfg), c.split, cfg.corpus.n_val);
  const fs::path dir = prepare_run_dir(c.run_dir);
  const Model m = load_model_file(ckpt);
  const auto pred = predict(m, samples, cfg.decoder);
  write_kg_jsonl(dir / "predictions.jsonl", pred.kgs);
  write_file(dir / "generations.jsonl", jsonl(pred.generations));
  json manifest = base_manifest("generate", corpus);
  manifest["checkpoint"] = fs::path(ckpt).filename().string();
  manifest["split"] = c.split;
  write_snapshot(dir, cfg, manifest);
  std::size_t eos = 0;
  for (const auto& g : pred.generations) eos += g.at("stop") == "eos" ? 1 : 0;
  out << "generated " << pred.kgs.size() << "\nstopped_at_eos " << eos << "\n";
  return kOk;
}

int cmd_evaluate(const Common& c, const std::string& predictions, const std::string& label, std::ostream& out) {
  const RunConfig cfg = resolve_config(c);
  const std::string corpus = corpus_path(c, cfg);
  const auto gold_samples = select_split(load_samples(corpus, c, cfg), c.split, cfg.corpus.n_val);
  const auto pred = read_kg_jsonl(predictions);
  const auto gold = gold_of(gold_samples);
  const fs::path dir = prepare_run_dir(c.run_dir);
  const EvalReport rep = evaluate_corpus(pred, gold, cfg.metrics);
  ResultTable t;
  t.key_columns = {"Model"};
  t.extra_columns = kCountColumns;
  t.add({label}, rep, count_extras(rep));
  write_file(dir / "samples.csv", samples_csv(rep));
  json manifest = base_manifest("evaluate", corpus);
  manifest["predictions_sha1"] = git_blob_sha1(read_file(predictions));
  manifest["split"] = c.split;
  write_snapshot(dir, cfg, manifest);
  emit_table(dir, "report", t, out);
  return kOk;
}

int cmd_gradcheck(const Common& c, std::ostream& out) {
  const RunConfig cfg = resolve_config(c);
  const fs::path dir = prepare_run_dir(c.run_dir);
  GradCheckOptions opts;
  opts.seed = cfg.seed;
  const auto checks = standard_grad_checks(opts);
  std::string csv = "check,coordinates,max_rel_error,passed\n";
  bool all = true;
  for (const auto& ch : checks) {
    csv += ch.name + "," + std::to_string(ch.report.entries.size()) + "," + fmt9(ch.report.max_rel_error) + "," +
           (ch.report.passed ? "1" : "0") + "\n";
    all = all && ch.report.passed;
  }
  write_file(dir / "gradcheck.csv", csv);
  write_snapshot(dir, cfg, base_manifest("gradcheck", ""));
  out << csv;
  if (!all) throw Error("gradient check failed; see gradcheck.csv");
  return kOk;
}

int cmd_ablate_projector(const Common& c, const std::string& init_path, std::ostream& out) {
  const RunConfig cfg = resolve_config(c);
  const std::string corpus = corpus_path(c, cfg);
  const auto samples = load_samples(corpus, c, cfg);
  const fs::path dir = prepare_run_dir(c.run_dir);
  const Split split = split_corpus(samples, cfg.corpus.n_val);
  const Vocab vocab = build_vocab(samples, cfg.corpus.template_text);
  const Model base = text_model(cfg, vocab, split, init_path, out);
  const auto gold = gold_of(split.val);

  ResultTable t;
  t.key_columns = {"n", "k"};
  t.extra_columns = {"val_loss", "exact_match", "triplet_match"};
  for (const auto& [n, k] : kProjectorGrid) {
    ProjectorConfig pc = cfg.projector;
    pc.prefix_length = n;
    pc.clip_length = k;
    const Trained tr = train_model(cfg, Regime::vlm_kg, pc, vocab, split, &base);
    const auto rep = evaluate_corpus(predict(tr.model, split.val, cfg.decoder).kgs, gold, cfg.metrics);
    t.add({std::to_string(n), std::to_string(k)}, rep,
          {fmt9(tr.report.epoch_val_loss.back()), format_fixed(rep.exact_match), format_fixed(rep.triplet_match)});
  }
  write_snapshot(dir, cfg, base_manifest("ablate-projector", corpus));
  emit_table(dir, "ablate_projector", t, out);
  return kOk;
}

int cmd_ablate_length(const Common& c, const std::string& ckpt, std::ostream& out) {
  const RunConfig cfg = resolve_config(c);
  const std::string corpus = corpus_path(c, cfg);
  const auto samples = select_split(load_samples(corpus, c, cfg), c.split, cfg.corpus.n_val);
  const fs::path dir = prepare_run_dir(c.run_dir);
  const Model m = load_model_file(ckpt);
  const auto gold = gold_of(samples);
  ResultTable t;
  t.key_columns = {"Tokens"};
  t.extra_columns = kCountColumns;
  for (std::size_t budget : kLengthBudgets) {
    DecodeConfig dc = cfg.decoder;
    dc.max_new_tokens = budget;
    const auto rep = evaluate_corpus(predict(m, samples, dc).kgs, gold, cfg.metrics);
    t.add({std::to_string(budget)}, rep, count_extras(rep));
  }
  json manifest = base_manifest("ablate-length", corpus);
  manifest["checkpoint"] = fs::path(ckpt).filename().string();
  manifest["split"] = c.split;
  write_snapshot(dir, cfg, manifest);
  emit_table(dir, "ablate_length", t, out);
  return kOk;
}

int cmd_ablate_freeze(const Common& c, const std::string& init_path, std::ostream& out) {
  const RunConfig cfg = resolve_config(c);
  const std::string corpus = corpus_path(c, cfg);
  const auto samples = load_samples(corpus, c, cfg);
  const fs::path dir = prepare_run_dir(c.run_dir);
  const Split split = split_corpus(samples, cfg.corpus.n_val);
  const Vocab vocab = build_vocab(samples, cfg.corpus.template_text);
  const Model base = text_model(cfg, vocab, split, init_path, out);
  const auto gold = gold_of(split.val);

  ResultTable t;
  t.key_columns = {"Model"};
  t.extra_columns = {"val_loss", "exact_match", "triplet_match"};
  for (auto [label, regime] : {std::pair{"VLM-KG*", Regime::vlm_kg_frozen}, std::pair{"VLM-KG", Regime::vlm_kg}}) {
    const Trained tr = train_model(cfg, regime, cfg.projector, vocab, split, &base);
    const auto rep = evaluate_corpus(predict(tr.model, split.val, cfg.decoder).kgs, gold, cfg.metrics);
    t.add({label}, rep,
          {fmt9(tr.report.epoch_val_loss.back()), format_fixed(rep.exact_match), format_fixed(rep.triplet_match)});
  }
  write_snapshot(dir, cfg, base_manifest("ablate-freeze", corpus));
  emit_table(dir, "ablate_freeze", t, out);
  return kOk;
}

std::string one_line(std::string s) {
  for (auto& ch : s) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  return s;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Radiology report knowledge-graph extraction: corpus, training, generation, evaluation."};
  app.name("vkg");
  app.require_subcommand(1);
  app.footer(kExitCodes);

  Common common;
  auto add_common = [&](CLI::App* sub, bool corpus) {
    sub->add_option("--config", common.config, "JSON run config");
    sub->add_option("--set", common.sets, "Override a config value, e.g. --set trainer.lr_peak=1e-4");
    sub->add_option("--run-dir", common.run_dir, "Output directory")->required();
    if (corpus) {
      sub->add_option("--corpus", common.corpus, "Corpus JSONL (default: paths.corpus)");
      sub->add_option("--features", common.features, "Feature file replacing the corpus features");
    }
  };
  auto add_split = [&](CLI::App* sub) {
    sub->add_option("--split", common.split, "Samples to use: train, val or all")->capture_default_str();
  };

  auto* gen = app.add_subcommand("gen-corpus", "Generate the synthetic corpus, vocabulary and feature file");
  add_common(gen, false);

  std::string regime, init, checkpoint, predictions, label = "model";
  auto* tr = app.add_subcommand("train", "Train one regime");
  add_common(tr, true);
  tr->add_option("--regime", regime, "llm-kg | vlm-kg | vlm-kg-frozen")->required();
  tr->add_option("--init", init, "Checkpoint to start from (its vocabulary is reused)");

  auto* ge = app.add_subcommand("generate", "Decode triplets for a corpus split");
  add_common(ge, true);
  add_split(ge);
  ge->add_option("--checkpoint", checkpoint, "Trained model")->required();

  auto* ev = app.add_subcommand("evaluate", "Score predictions against the gold triplets");
  add_common(ev, true);
  add_split(ev);
  ev->add_option("--predictions", predictions, "Prediction JSONL from generate")->required();
  ev->add_option("--label", label, "Row label in the report")->capture_default_str();

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient check of every op and the full models");
  add_common(gc, false);

  auto* ap = app.add_subcommand("ablate-projector", "Train vlm-kg over the (n, k) projector grid");
  add_common(ap, true);
  ap->add_option("--init", init, "llm-kg checkpoint (trained first when absent)");

  auto* al = app.add_subcommand("ablate-length", "Evaluate one model at each generation budget");
  add_common(al, true);
  add_split(al);
  al->add_option("--checkpoint", checkpoint, "Trained model")->required();

  auto* af = app.add_subcommand("ablate-freeze", "Compare a frozen-LM projector run with joint training");
  add_common(af, true);
  af->add_option("--init", init, "llm-kg checkpoint (trained first when absent)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return cmd_gen_corpus(common, out);
    if (*tr) return cmd_train(common, regime, init, out);
    if (*ge) return cmd_generate(common, checkpoint, out);
    if (*ev) return cmd_evaluate(common, predictions, label, out);
    if (*gc) return cmd_gradcheck(common, out);
    if (*ap) return cmd_ablate_projector(common, init, out);
    if (*al) return cmd_ablate_length(common, checkpoint, out);
    if (*af) return cmd_ablate_freeze(common, init, out);
  } catch (const ConfigError& e) {
    err << "vkg: config error: " << one_line(e.what()) << "\n";
    return kConfig;
  } catch (const IoError& e) {
    err << "vkg: io error: " << one_line(e.what()) << "\n";
    return kIo;
  } catch (const FormatError& e) {
    err << "vkg: format error: " << one_line(e.what()) << "\n";
    return kIo;
  } catch (const Error& e) {
    err << "vkg: error: " << one_line(e.what()) << "\n";
    return kData;
  } catch (const std::exception& e) {
    err << "vkg: internal error: " << one_line(e.what()) << "\n";
    return kInternal;
  }
  return kUsage;
}

}  // namespace vkg::cli
