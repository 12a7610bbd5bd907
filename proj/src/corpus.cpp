// SPDX-License-Identifier: Apache-2.0
#include "vkg/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "vkg/errors.hpp"
#include "vkg/rng.hpp"
#include "vkg/text.hpp"

namespace vkg {

namespace {

constexpr std::string_view kSpecials[] = {"<bos>", "<eos>", "<pad>", "<img>", "<unk>"};

struct TemplateParts {
  std::string head;  // text before {triplets}, with {report}/{instruction} filled
  std::string tail;  // text after {triplets}
};

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

TemplateParts split_template(const InstructionSample& sample, std::string_view tmpl) {
  const auto at = tmpl.find("{triplets}");
  const auto rep = tmpl.find("{report}");
  if (at == std::string_view::npos || rep == std::string_view::npos || rep > at) {
    throw ConfigError("instruction template needs {report} followed by {triplets}");
  }
  TemplateParts parts{std::string(tmpl.substr(0, at)), std::string(tmpl.substr(at + 10))};
  for (auto* s : {&parts.head, &parts.tail}) {
    replace_all(*s, "{instruction}", sample.instruction);
  }
  replace_all(parts.head, "{report}", sample.input_report);
  return parts;
}

std::int32_t lookup(const Vocab& vocab, const std::string& tok, EncodeMode mode) {
  if (auto id = vocab.find(tok)) return *id;
  if (mode == EncodeMode::training) throw UnknownToken("token '" + tok + "' is not in the vocabulary");
  return Vocab::kUnk;
}

std::size_t concept_index(const std::string& text, const SynthConfig& cfg) {
  const auto& obs = cfg.observation_lexicon;
  const auto& anat = cfg.anatomy_lexicon;
  if (auto it = std::find(obs.begin(), obs.end(), text); it != obs.end()) {
    return static_cast<std::size_t>(it - obs.begin());
  }
  if (auto it = std::find(anat.begin(), anat.end(), text); it != anat.end()) {
    return obs.size() + static_cast<std::size_t>(it - anat.begin());
  }
  throw MissingFeatures("entity '" + text + "' has no synthetic image concept");
}

// Basis vectors depend only on the concept index and dimension.
std::vector<double> concept_basis(std::size_t index, std::size_t d_vis) {
  Rng rng(mix_seed(0x5eedba515ULL, index));
  std::vector<double> v(d_vis);
  const double s = 1.0 / std::sqrt(static_cast<double>(d_vis));
  for (auto& x : v) x = rng.normal() * s;
  return v;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char c : text) {
    if (is_ascii_space(c)) {
      flush();
    } else if (is_ascii_punct(c) && c != '_') {
      flush();
      out.emplace_back(1, c);
    } else {
      cur += ascii_lower(c);
    }
  }
  flush();
  return out;
}

// ---------------------------------------------------------------- Vocab

Vocab::Vocab() {
  for (auto s : kSpecials) {
    index_.emplace(std::string(s), static_cast<std::int32_t>(tokens_.size()));
    tokens_.emplace_back(s);
  }
}

Vocab Vocab::from_tokens(std::span<const std::string> tokens) {
  Vocab v;
  for (const auto& t : tokens) {
    if (t.empty() || t.find_first_of(" \t\r\n") != std::string::npos) {
      throw FormatError("vocabulary token '" + t + "' is empty or contains whitespace");
    }
    if (!v.index_.emplace(t, static_cast<std::int32_t>(v.tokens_.size())).second) {
      throw FormatError("duplicate vocabulary token '" + t + "'");
    }
    v.tokens_.push_back(t);
  }
  return v;
}

std::optional<std::int32_t> Vocab::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write vocab file " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open vocab file " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  if (lines.size() < static_cast<std::size_t>(kNumSpecial)) {
    throw FormatError("vocab file " + path.string() + " is missing special tokens");
  }
  for (std::size_t i = 0; i < static_cast<std::size_t>(kNumSpecial); ++i) {
    if (lines[i] != kSpecials[i]) {
      throw FormatError("vocab file " + path.string() + ": line " + std::to_string(i + 1) +
                        " must be " + std::string(kSpecials[i]));
    }
  }
  return from_tokens(std::span(lines).subspan(kNumSpecial));
}

// ---------------------------------------------------------------- formatting

std::string format_sample(const InstructionSample& sample, std::string_view tmpl) {
  auto parts = split_template(sample, tmpl);
  return parts.head + serialize_triplets(sample.output_triplets) + parts.tail;
}

Vocab build_vocab(std::span<const InstructionSample> samples, std::string_view tmpl) {
  if (samples.empty()) throw EmptyCorpus("cannot build a vocabulary from an empty corpus");
  std::set<std::string> seen;
  for (const auto& s : samples) {
    for (auto& t : tokenize(format_sample(s, tmpl))) seen.insert(std::move(t));
  }
  for (auto sp : kSpecials) seen.erase(std::string(sp));
  std::vector<std::string> sorted(seen.begin(), seen.end());
  return Vocab::from_tokens(sorted);
}

EncodedSample encode(const InstructionSample& sample, const Vocab& vocab, std::string_view tmpl,
                     const EncodeOptions& opts) {
  if (opts.mode == EncodeMode::training && sample.output_triplets.triplets.empty()) {
    throw MissingOutput("sample '" + sample.id + "' has no output triplets");
  }
  const auto parts = split_template(sample, tmpl);
  EncodedSample enc;
  enc.id = sample.id;
  enc.image_features = sample.image_features;
  enc.token_ids.push_back(Vocab::kBos);
  for (const auto& t : tokenize(parts.head)) enc.token_ids.push_back(lookup(vocab, t, opts.mode));
  enc.prompt_length = enc.token_ids.size();
  for (const auto& t : tokenize(serialize_triplets(sample.output_triplets))) {
    enc.token_ids.push_back(lookup(vocab, t, opts.mode));
  }
  for (const auto& t : tokenize(parts.tail)) enc.token_ids.push_back(lookup(vocab, t, opts.mode));
  enc.token_ids.push_back(Vocab::kEos);

  enc.loss_mask.assign(enc.token_ids.size(), 0);
  const std::size_t first = opts.mask == LossMaskMode::output_only ? enc.prompt_length : 1;
  for (std::size_t i = first; i < enc.loss_mask.size(); ++i) enc.loss_mask[i] = 1;
  return enc;
}

std::vector<std::int32_t> encode_prompt(const InstructionSample& sample, const Vocab& vocab,
                                        std::string_view tmpl) {
  const auto parts = split_template(sample, tmpl);
  std::vector<std::int32_t> ids{Vocab::kBos};
  for (const auto& t : tokenize(parts.head)) ids.push_back(lookup(vocab, t, EncodeMode::inference));
  return ids;
}

std::string decode(std::span<const std::int32_t> ids, const Vocab& vocab) {
  std::string out;
  for (auto id : ids) {
    if (id == Vocab::kBos || id == Vocab::kEos || id == Vocab::kPad || id == Vocab::kImg) continue;
    if (!out.empty()) out += ' ';
    out += vocab.token(id);
  }
  return out;
}

// ---------------------------------------------------------------- synthetic

void validate(const SynthConfig& cfg) {
  if (cfg.anatomy_lexicon.empty() || cfg.observation_lexicon.empty()) {
    throw ConfigError("synthetic lexicons must be non-empty");
  }
  std::set<std::string> all;
  for (const auto* lex : {&cfg.anatomy_lexicon, &cfg.observation_lexicon}) {
    for (const auto& w : *lex) {
      if (!is_valid_entity_text(w)) throw ConfigError("lexicon entry '" + w + "' is not a valid entity");
      if (!all.insert(w).second) throw ConfigError("lexicon entry '" + w + "' is duplicated or shared");
    }
  }
  if (cfg.observation_lexicon.size() < 2) {
    throw ConfigError("observation lexicon needs at least two entries");
  }
  if (!(cfg.image_only_fraction >= 0.0 && cfg.image_only_fraction <= 1.0)) {
    throw ConfigError("image_only_fraction must lie in [0, 1]");
  }
  if (!(cfg.suggestive_probability >= 0.0 && cfg.suggestive_probability <= 1.0)) {
    throw ConfigError("suggestive_probability must lie in [0, 1]");
  }
  if (!(cfg.noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
  if (cfg.d_vis == 0) throw ConfigError("d_vis must be positive");
  if (cfg.n_samples == 0) throw ConfigError("n_samples must be positive");
}

std::string synthetic_sentence(const Triplet& t) {
  switch (t.relation) {
    case Relation::located_at: return "There is " + t.subject.text + " in the " + t.object.text + ".";
    case Relation::suggestive_of: return t.subject.text + " suggestive of " + t.object.text + ".";
    case Relation::modify: return t.subject.text + " modifies " + t.object.text + ".";
  }
  return {};
}

std::vector<double> synthetic_image_features(const KnowledgeGraph& kg, std::string_view sample_id,
                                             const SynthConfig& cfg) {
  std::vector<double> f(cfg.d_vis, 0.0);
  for (const auto& t : kg.triplets) {
    for (const auto* e : {&t.subject, &t.object}) {
      const auto b = concept_basis(concept_index(e->text, cfg), cfg.d_vis);
      for (std::size_t i = 0; i < f.size(); ++i) f[i] += b[i];
    }
  }
  if (cfg.noise_sigma > 0.0) {
    Rng rng(mix_seed(cfg.seed, fnv1a(sample_id)));
    for (auto& x : f) x += cfg.noise_sigma * rng.normal();
  }
  return f;
}

std::vector<InstructionSample> gen_synthetic(const SynthConfig& cfg) {
  validate(cfg);
  Rng rng(cfg.seed);
  const auto& obs = cfg.observation_lexicon;
  const auto& anat = cfg.anatomy_lexicon;
  const std::size_t max_pairs = std::min<std::size_t>(4, obs.size());
  const std::size_t width = std::to_string(cfg.n_samples).size();

  std::vector<InstructionSample> out;
  out.reserve(cfg.n_samples);
  for (std::size_t s = 0; s < cfg.n_samples; ++s) {
    InstructionSample sample;
    std::string idx = std::to_string(s);
    sample.id = "syn" + std::string(width - idx.size(), '0') + idx;

    // Distinct observations per sample, each placed at one anatomy.
    std::vector<std::size_t> obs_order(obs.size());
    for (std::size_t i = 0; i < obs_order.size(); ++i) obs_order[i] = i;
    rng.shuffle(obs_order.begin(), obs_order.end());
    const std::size_t n_pairs = 1 + rng.below(max_pairs);
    auto& triplets = sample.output_triplets.triplets;
    for (std::size_t p = 0; p < n_pairs; ++p) {
      const auto& a = anat[rng.below(anat.size())];
      triplets.push_back({Entity{obs[obs_order[p]], EntityLabel::observation_present}, Relation::located_at,
                          Entity{a, EntityLabel::anatomy}});
    }
    if (n_pairs < obs.size() && rng.uniform() < cfg.suggestive_probability) {
      const auto from = obs_order[rng.below(n_pairs)];
      const auto to = obs_order[n_pairs + rng.below(obs.size() - n_pairs)];
      triplets.push_back({Entity{obs[from], EntityLabel::observation_present}, Relation::suggestive_of,
                          Entity{obs[to], EntityLabel::observation_uncertain}});
    }

    std::string report;
    for (const auto& t : triplets) {
      if (rng.uniform() < cfg.image_only_fraction) continue;
      if (!report.empty()) report += ' ';
      report += synthetic_sentence(t);
    }
    sample.input_report = report.empty() ? "No findings described." : report;
    sample.output_triplets.source_id = sample.id;
    sample.image_features = synthetic_image_features(sample.output_triplets, sample.id, cfg);
    out.push_back(std::move(sample));
  }
  return out;
}

// ---------------------------------------------------------------- files

void write_corpus_jsonl(const std::filesystem::path& path, std::span<const InstructionSample> samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write corpus file " + path.string());
  for (const auto& s : samples) {
    nlohmann::json rec;
    rec["id"] = s.id;
    rec["report"] = s.input_report;
    rec["triplets"] = triplets_to_json(s.output_triplets);
    rec["image_features"] = s.image_features ? nlohmann::json(*s.image_features) : nlohmann::json(nullptr);
    out << rec.dump() << '\n';
  }
}

std::vector<InstructionSample> read_corpus_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus file " + path.string());
  std::vector<InstructionSample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      const auto rec = nlohmann::json::parse(line);
      InstructionSample s;
      s.id = rec.at("id").get<std::string>();
      s.input_report = rec.at("report").get<std::string>();
      s.output_triplets = triplets_from_json(rec.at("triplets"), s.id);
      if (rec.contains("image_features") && !rec["image_features"].is_null()) {
        s.image_features = rec["image_features"].get<std::vector<double>>();
      }
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace vkg
