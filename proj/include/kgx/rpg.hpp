#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "kgx/graph.hpp"

namespace kgx {

// Relative position of two relations sharing an entity. kTH means a tail
// entity of the source relation is a head entity of the target relation;
// kTH/kHT are mutual inverses, kHH and kTT are symmetric.
enum class MetaRelation : std::uint8_t { kTH = 0, kHT = 1, kHH = 2, kTT = 3 };
inline constexpr std::size_t kNumMetaRelations = 4;

const char* meta_relation_name(MetaRelation m);

struct RpgEdge {
  RelationId source;
  MetaRelation kind;
  RelationId target;

  friend bool operator==(const RpgEdge&, const RpgEdge&) = default;
  friend auto operator<=>(const RpgEdge&, const RpgEdge&) = default;
};

// Directed multigraph over the relations of one task; edges are deduplicated
// per (source, kind, target) and kept sorted for deterministic iteration.
class RelationPositionGraph {
 public:
  RelationPositionGraph(std::size_t n_relations, std::vector<RpgEdge> edges);

  std::size_t n_relations() const { return n_relations_; }
  const std::vector<RpgEdge>& edges() const { return edges_; }

  // Kinds of the deduplicated in-edges of r, one element per distinct
  // (source, kind, r) edge; empty for an isolated rel-node.
  std::span<const MetaRelation> in_meta_edges(RelationId r) const;
  // In-edge kinds collapsed to a set (at most one element per kind).
  std::vector<MetaRelation> in_meta_kinds(RelationId r) const;

  // Count per kind of the in-edges of each relation.
  std::vector<std::array<std::uint32_t, kNumMetaRelations>> in_histogram() const;

 private:
  std::size_t n_relations_;
  std::vector<RpgEdge> edges_;
  std::vector<MetaRelation> in_kinds_;      // grouped by target relation
  std::vector<std::uint32_t> in_offsets_;   // n_relations_ + 1
};

// Connects two rel-nodes whenever the corresponding relative position occurs
// at some entity shared by the two relations in the support triples. Ordered
// incidence pairs at the same entity generate both edge directions, so the
// inverse/symmetry invariants hold by construction; self-pairs (the same
// relation via distinct triples, or a loop triple) are included.
RelationPositionGraph build_rpg(std::span<const Triple> support, std::size_t n_relations);

void dump_rpg(const std::filesystem::path& file, const RelationPositionGraph& rpg,
              const Vocab& relations);
void export_rpg_histogram(const std::filesystem::path& file, const RelationPositionGraph& rpg,
                          const Vocab& relations);

}  // namespace kgx
