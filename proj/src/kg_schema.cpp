// SPDX-License-Identifier: Apache-2.0
#include "vkg/kg_schema.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "vkg/errors.hpp"
#include "vkg/text.hpp"

namespace vkg {

namespace {

constexpr std::string_view kReserved = "(),;";

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = ascii_lower(c);
  return out;
}

void check_entity(const Entity& e) {
  if (!is_valid_entity_text(e.text)) {
    throw GrammarViolation("entity text '" + e.text +
                           "' is empty, untrimmed, or contains one of ( ) , ;");
  }
}

}  // namespace

std::string_view relation_name(Relation r) {
  switch (r) {
    case Relation::suggestive_of: return "suggestive_of";
    case Relation::located_at: return "located_at";
    case Relation::modify: return "modify";
  }
  return "";
}

std::optional<Relation> parse_relation(std::string_view token) {
  if (token == "suggestive_of") return Relation::suggestive_of;
  if (token == "located_at") return Relation::located_at;
  if (token == "modify") return Relation::modify;
  return std::nullopt;
}

std::string_view label_name(EntityLabel l) {
  switch (l) {
    case EntityLabel::anatomy: return "anatomy";
    case EntityLabel::observation_present: return "observation_present";
    case EntityLabel::observation_uncertain: return "observation_uncertain";
    case EntityLabel::observation_absent: return "observation_absent";
  }
  return "";
}

std::optional<EntityLabel> parse_label(std::string_view token) {
  for (auto l : {EntityLabel::anatomy, EntityLabel::observation_present,
                 EntityLabel::observation_uncertain, EntityLabel::observation_absent}) {
    if (token == label_name(l)) return l;
  }
  return std::nullopt;
}

bool is_valid_entity_text(std::string_view text) {
  if (text.empty()) return false;
  if (is_ascii_space(text.front()) || is_ascii_space(text.back())) return false;
  return text.find_first_of(kReserved) == std::string_view::npos;
}

std::string serialize_triplets(const KnowledgeGraph& kg) {
  std::string out;
  for (std::size_t i = 0; i < kg.triplets.size(); ++i) {
    const auto& t = kg.triplets[i];
    check_entity(t.subject);
    check_entity(t.object);
    if (i) out += "; ";
    out += '(';
    out += t.subject.text;
    out += ", ";
    out += relation_name(t.relation);
    out += ", ";
    out += t.object.text;
    out += ')';
  }
  return out;
}

ParseResult parse_triplets(std::string_view text, std::string source_id) {
  ParseResult result;
  result.graph.source_id = std::move(source_id);
  // Equivalent to repeatedly searching for the regex \(([^()]*)\): an open
  // parenthesis followed by the nearest parenthesis character, if that is a
  // closing one. Scanning avoids the recursion depth of std::regex on long input.
  std::size_t pos = 0;
  while (true) {
    const std::size_t open = text.find('(', pos);
    if (open == std::string_view::npos) break;
    const std::size_t next = text.find_first_of("()", open + 1);
    if (next == std::string_view::npos) break;
    if (text[next] == '(') {
      pos = next;
      continue;
    }
    const std::string_view body = text.substr(open + 1, next - open - 1);
    pos = next + 1;

    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = body.find(',', start);
      parts.push_back(trim(body.substr(start, comma == std::string_view::npos ? comma : comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (parts.size() != 3) {
      ++result.skipped;
      continue;
    }
    const auto rel = parse_relation(parts[1]);
    if (!rel || !is_valid_entity_text(parts[0]) || !is_valid_entity_text(parts[2])) {
      ++result.skipped;
      continue;
    }
    result.graph.triplets.push_back(
        Triplet{Entity{std::string(parts[0])}, *rel, Entity{std::string(parts[2])}});
  }
  return result;
}

std::string to_metric_string(const KnowledgeGraph& kg) {
  std::string out;
  for (std::size_t i = 0; i < kg.triplets.size(); ++i) {
    const auto& t = kg.triplets[i];
    if (i) out += " ; ";
    out += "( ";
    out += t.subject.text;
    out += " , ";
    out += relation_name(t.relation);
    out += " , ";
    out += t.object.text;
    out += " )";
  }
  return out;
}

std::string triplet_key(const Triplet& t) {
  std::string key = lower(t.subject.text);
  key += '\x1f';
  key += relation_name(t.relation);
  key += '\x1f';
  key += lower(t.object.text);
  return key;
}

DiffReport kg_diff(const KnowledgeGraph& pred, const KnowledgeGraph& gold) {
  // First occurrence wins as the representative of a deduplicated key.
  std::map<std::string, Triplet> p, g;
  for (const auto& t : pred.triplets) p.emplace(triplet_key(t), t);
  for (const auto& t : gold.triplets) g.emplace(triplet_key(t), t);
  DiffReport d;
  for (const auto& [k, t] : p) (g.count(k) ? d.correct : d.hallucinated).push_back(t);
  for (const auto& [k, t] : g) {
    if (!p.count(k)) d.missed.push_back(t);
  }
  return d;
}

nlohmann::json triplets_to_json(const KnowledgeGraph& kg) {
  auto arr = nlohmann::json::array();
  for (const auto& t : kg.triplets) {
    arr.push_back({t.subject.text, label_name(t.subject.label), relation_name(t.relation),
                   t.object.text, label_name(t.object.label)});
  }
  return arr;
}

KnowledgeGraph triplets_from_json(const nlohmann::json& arr, std::string source_id) {
  KnowledgeGraph kg;
  kg.source_id = std::move(source_id);
  if (!arr.is_array()) throw FormatError("triplets for '" + kg.source_id + "' is not an array");
  for (const auto& row : arr) {
    if (!row.is_array() || row.size() != 5) {
      throw FormatError("triplet row for '" + kg.source_id + "' must have 5 fields");
    }
    const auto rel = parse_relation(row[2].get<std::string>());
    const auto sl = parse_label(row[1].get<std::string>());
    const auto ol = parse_label(row[4].get<std::string>());
    if (!rel) throw GrammarViolation("unknown relation '" + row[2].get<std::string>() + "'");
    if (!sl || !ol) throw FormatError("unknown entity label in '" + kg.source_id + "'");
    Triplet t{Entity{row[0].get<std::string>(), *sl}, *rel, Entity{row[3].get<std::string>(), *ol}};
    check_entity(t.subject);
    check_entity(t.object);
    kg.triplets.push_back(std::move(t));
  }
  return kg;
}

std::vector<KnowledgeGraph> read_kg_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open KG file " + path.string());
  std::vector<KnowledgeGraph> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
      out.push_back(triplets_from_json(rec.at("triplets"), rec.at("id").get<std::string>()));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_kg_jsonl(const std::filesystem::path& path, const std::vector<KnowledgeGraph>& kgs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write KG file " + path.string());
  for (const auto& kg : kgs) {
    nlohmann::json rec;
    rec["id"] = kg.source_id;
    rec["triplets"] = triplets_to_json(kg);
    out << rec.dump() << '\n';
  }
}

}  // namespace vkg
