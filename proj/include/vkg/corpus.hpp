// SPDX-License-Identifier: Apache-2.0
//
// Tokenizer, vocabulary, instruction formatting and the synthetic paired
// (report, image features, triplets) corpus.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vkg/kg_schema.hpp"

namespace vkg {

inline constexpr std::string_view kDefaultInstruction =
    "Extract knowledge graph triplets (entity, relation, entity) from the report.";

// {instruction}, {report} and {triplets} are substituted; {triplets} must
// appear after {report}.
inline constexpr std::string_view kDefaultTemplate =
    "### Instruction: Extract knowledge graph triplets (entity, relation, entity) from the report. "
    "### Input: {report} ### Output: {triplets}";

// Lowercases, splits on whitespace, and emits every ASCII punctuation
// character except '_' as its own token.
std::vector<std::string> tokenize(std::string_view text);

class Vocab {
 public:
  static constexpr std::int32_t kBos = 0;
  static constexpr std::int32_t kEos = 1;
  static constexpr std::int32_t kPad = 2;
  static constexpr std::int32_t kImg = 3;
  static constexpr std::int32_t kUnk = 4;
  static constexpr std::int32_t kNumSpecial = 5;

  Vocab();
  // Specials are prepended; tokens must be unique and non-special.
  static Vocab from_tokens(std::span<const std::string> tokens);
  static Vocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return tokens_.size(); }
  std::optional<std::int32_t> find(std::string_view token) const;
  const std::string& token(std::int32_t id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  static bool is_special(std::int32_t id) { return id >= 0 && id < kNumSpecial; }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
};

struct InstructionSample {
  std::string id;
  std::string instruction{kDefaultInstruction};
  std::string input_report;
  KnowledgeGraph output_triplets;
  std::optional<std::vector<double>> image_features;
};

struct EncodedSample {
  std::string id;
  std::vector<std::int32_t> token_ids;
  std::vector<std::uint8_t> loss_mask;
  std::optional<std::vector<double>> image_features;
  // Tokens up to and including the template text preceding the output (bos included).
  std::size_t prompt_length = 0;
};

enum class EncodeMode { training, inference };
enum class LossMaskMode { output_only, full_sequence };

struct EncodeOptions {
  EncodeMode mode = EncodeMode::training;
  LossMaskMode mask = LossMaskMode::output_only;
};

std::string format_sample(const InstructionSample& sample, std::string_view tmpl = kDefaultTemplate);

// Throws EmptyCorpus for no samples.
Vocab build_vocab(std::span<const InstructionSample> samples, std::string_view tmpl = kDefaultTemplate);

// Training mode throws MissingOutput for an empty triplet list and
// UnknownToken for out-of-vocabulary tokens; inference mode maps those to kUnk.
EncodedSample encode(const InstructionSample& sample, const Vocab& vocab,
                     std::string_view tmpl = kDefaultTemplate, const EncodeOptions& opts = {});

// bos + everything before the output segment; the generation prompt.
std::vector<std::int32_t> encode_prompt(const InstructionSample& sample, const Vocab& vocab,
                                        std::string_view tmpl = kDefaultTemplate);

// Space-joined tokens; bos/eos/pad/img are dropped.
std::string decode(std::span<const std::int32_t> ids, const Vocab& vocab);

struct SynthConfig {
  std::size_t n_samples = 256;
  std::vector<std::string> anatomy_lexicon{
      "left lung",  "right lung", "left lower lobe", "right upper lobe",
      "heart",      "mediastinum", "pleural space",  "lung base"};
  std::vector<std::string> observation_lexicon{
      "opacity",       "effusion", "pneumonia",    "atelectasis", "edema",
      "consolidation", "nodule",   "pneumothorax", "infection",   "scarring"};
  double image_only_fraction = 0.0;
  std::size_t d_vis = 32;
  double noise_sigma = 0.05;
  // Chance that a sample also carries one suggestive_of finding.
  double suggestive_probability = 0.3;
  std::uint64_t seed = 0;
};

// Throws ConfigError.
void validate(const SynthConfig& cfg);

std::vector<InstructionSample> gen_synthetic(const SynthConfig& cfg);

// Report sentence that carries a triplet in synthetic reports.
std::string synthetic_sentence(const Triplet& t);

// Sum of fixed per-concept basis vectors over every triplet entity, plus
// gaussian noise seeded by (cfg.seed, sample_id). Throws MissingFeatures for
// an entity outside the lexicons.
std::vector<double> synthetic_image_features(const KnowledgeGraph& kg, std::string_view sample_id,
                                             const SynthConfig& cfg);

// JSON-lines corpus: {"id", "report", "triplets", "image_features"}.
void write_corpus_jsonl(const std::filesystem::path& path, std::span<const InstructionSample> samples);
std::vector<InstructionSample> read_corpus_jsonl(const std::filesystem::path& path);

}  // namespace vkg
