// SPDX-License-Identifier: Apache-2.0
//
// Radiology knowledge-graph triplets: types, the text grammar
//   (subject, relation, object); (subject, relation, object); ...
// a tolerant parser for model output, metric strings, and set diffs.
#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace vkg {

enum class Relation { suggestive_of, located_at, modify };

enum class EntityLabel { anatomy, observation_present, observation_uncertain, observation_absent };

std::string_view relation_name(Relation r);
std::optional<Relation> parse_relation(std::string_view token);
std::string_view label_name(EntityLabel l);
std::optional<EntityLabel> parse_label(std::string_view token);

// Identity is the text only; the label is schema metadata that the text
// grammar does not carry.
struct Entity {
  std::string text;
  EntityLabel label = EntityLabel::observation_present;

  friend bool operator==(const Entity& a, const Entity& b) { return a.text == b.text; }
};

struct Triplet {
  Entity subject;
  Relation relation = Relation::located_at;
  Entity object;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

struct KnowledgeGraph {
  std::vector<Triplet> triplets;
  std::string source_id;

  friend bool operator==(const KnowledgeGraph&, const KnowledgeGraph&) = default;
};

struct ParseResult {
  KnowledgeGraph graph;
  // Parenthesized fragments that looked like triplets but were rejected
  // (wrong arity, unknown relation, empty or reserved-character entity).
  std::size_t skipped = 0;
};

// True when text is non-empty, has no leading/trailing whitespace and none
// of the reserved characters ( ) , ;
bool is_valid_entity_text(std::string_view text);

// Throws GrammarViolation on an invalid entity.
std::string serialize_triplets(const KnowledgeGraph& kg);

// Never throws. Accepts arbitrary bytes.
ParseResult parse_triplets(std::string_view text, std::string source_id = {});

// Every ( ) , ; becomes its own whitespace-delimited token.
std::string to_metric_string(const KnowledgeGraph& kg);

struct DiffReport {
  std::vector<Triplet> correct;
  std::vector<Triplet> hallucinated;
  std::vector<Triplet> missed;
};

// Set semantics after deduplication; entity text compares case-insensitively,
// relations exactly. Output sets are sorted by their lowercase key.
DiffReport kg_diff(const KnowledgeGraph& pred, const KnowledgeGraph& gold);

std::string triplet_key(const Triplet& t);

// JSON-lines KG files: {"id": ..., "triplets": [[subject, label, relation, object, label], ...]}
nlohmann::json triplets_to_json(const KnowledgeGraph& kg);
KnowledgeGraph triplets_from_json(const nlohmann::json& arr, std::string source_id);
std::vector<KnowledgeGraph> read_kg_jsonl(const std::filesystem::path& path);
void write_kg_jsonl(const std::filesystem::path& path, const std::vector<KnowledgeGraph>& kgs);

}  // namespace vkg
