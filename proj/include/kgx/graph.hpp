#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "kgx/error.hpp"

namespace kgx {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
  EntityId head;
  RelationId relation;
  EntityId tail;

  friend bool operator==(const Triple&, const Triple&) = default;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const {
    std::uint64_t x = t.head;
    x = x * 0x9e3779b97f4a7c15ULL + t.relation;
    x = x * 0x9e3779b97f4a7c15ULL + t.tail;
    x ^= x >> 32;
    return static_cast<std::size_t>(x * 0xd6e8feb86659fd93ULL);
  }
};

using TripleSet = std::unordered_set<Triple, TripleHash>;

struct LabelTriple {
  std::string head;
  std::string relation;
  std::string tail;
};

// Ordered label vocabulary with O(1) label -> dense index lookup.
class Vocab {
 public:
  std::uint32_t add(const std::string& label);  // returns existing index if present
  std::optional<std::uint32_t> find(const std::string& label) const;
  const std::string& label(std::uint32_t id) const { return labels_.at(id); }
  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

enum class VocabMode { kBuild, kExtend };

// Immutable triple store over dense entity/relation vocabularies, with
// disjoint support and query partitions. Safe to share read-only across
// workers after construction.
class KnowledgeGraph {
 public:
  struct BuildStats {
    std::size_t duplicate_support = 0;
    std::size_t duplicate_query = 0;
  };

  // Vocabularies are assigned in first-appearance order over support then
  // query triples; with base vocabularies the shared labels keep the base
  // indices and new labels are appended. Duplicate triples are dropped and
  // counted; a triple present in both lists stays in support only.
  static KnowledgeGraph build(const std::vector<LabelTriple>& support,
                              const std::vector<LabelTriple>& query,
                              const Vocab* base_entities = nullptr,
                              const Vocab* base_relations = nullptr,
                              BuildStats* stats = nullptr);

  const Vocab& entities() const { return entities_; }
  const Vocab& relations() const { return relations_; }
  const std::vector<Triple>& support() const { return support_; }
  const std::vector<Triple>& query() const { return query_; }
  std::size_t n_entities() const { return entities_.size(); }
  std::size_t n_relations() const { return relations_.size(); }

  bool contains(const Triple& t) const { return all_.contains(t); }  // support or query
  const TripleSet& triple_set() const { return all_; }

  LabelTriple to_labels(const Triple& t) const;

 private:
  Vocab entities_;
  Vocab relations_;
  std::vector<Triple> support_;
  std::vector<Triple> query_;
  TripleSet all_;
};

// Which components of a graph also occur in a reference (training) graph.
struct SeenMask {
  std::vector<bool> seen_entities;
  std::vector<bool> seen_relations;

  bool entity_seen(EntityId e) const { return seen_entities[e]; }
  bool relation_seen(RelationId r) const { return seen_relations[r]; }
};

enum class QueryCategory { kUnseenEntityOnly, kUnseenRelationOnly, kUnseenBoth, kAllSeen };

const char* category_name(QueryCategory c);

// Triple files: UTF-8, one `head<TAB>relation<TAB>tail` per line, no header.
std::vector<LabelTriple> read_triple_file(const std::filesystem::path& file);
void write_triple_file(const std::filesystem::path& file, const std::vector<Triple>& triples,
                       const KnowledgeGraph& graph);

KnowledgeGraph load_graph(const std::filesystem::path& triple_file,
                          const std::optional<std::filesystem::path>& query_file,
                          VocabMode mode = VocabMode::kBuild,
                          const KnowledgeGraph* base = nullptr, std::size_t* duplicates = nullptr);

// Entity/relation marked seen iff its label occurs in the training graph.
// Throws ContractError when the entity or relation overlap is empty.
SeenMask build_seen_mask(const KnowledgeGraph& test_graph, const KnowledgeGraph& train_graph);
SeenMask build_seen_mask(const KnowledgeGraph& test_graph, const Vocab& train_entities,
                         const Vocab& train_relations);

QueryCategory categorize(const Triple& t, const SeenMask& mask);

}  // namespace kgx
