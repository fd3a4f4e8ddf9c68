#include "kgx/rpg.hpp"

#include <algorithm>
#include <fstream>

namespace kgx {

namespace {

// Edge kind for an ordered pair of incidence roles at a shared entity.
MetaRelation kind_for(bool first_is_head, bool second_is_head) {
  if (!first_is_head && second_is_head) return MetaRelation::kTH;
  if (first_is_head && !second_is_head) return MetaRelation::kHT;
  if (first_is_head && second_is_head) return MetaRelation::kHH;
  return MetaRelation::kTT;
}

}  // namespace

const char* meta_relation_name(MetaRelation m) {
  switch (m) {
    case MetaRelation::kTH: return "t-h";
    case MetaRelation::kHT: return "h-t";
    case MetaRelation::kHH: return "h-h";
    case MetaRelation::kTT: return "t-t";
  }
  return "?";
}

RelationPositionGraph::RelationPositionGraph(std::size_t n_relations, std::vector<RpgEdge> edges)
    : n_relations_(n_relations), edges_(std::move(edges)) {
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());

  std::vector<std::uint32_t> counts(n_relations_, 0);
  for (const RpgEdge& e : edges_) {
    if (e.source >= n_relations_ || e.target >= n_relations_) {
      throw ContractError("rpg edge references unknown relation");
    }
    ++counts[e.target];
  }
  in_offsets_.assign(n_relations_ + 1, 0);
  for (std::size_t r = 0; r < n_relations_; ++r) in_offsets_[r + 1] = in_offsets_[r] + counts[r];
  in_kinds_.resize(edges_.size());
  std::vector<std::uint32_t> cursor(in_offsets_.begin(), in_offsets_.end() - 1);
  for (const RpgEdge& e : edges_) in_kinds_[cursor[e.target]++] = e.kind;
}

std::span<const MetaRelation> RelationPositionGraph::in_meta_edges(RelationId r) const {
  if (r >= n_relations_) throw ContractError("in_meta_edges: unknown relation id");
  return {in_kinds_.data() + in_offsets_[r], in_offsets_[r + 1] - in_offsets_[r]};
}

std::vector<MetaRelation> RelationPositionGraph::in_meta_kinds(RelationId r) const {
  bool present[kNumMetaRelations] = {};
  for (MetaRelation m : in_meta_edges(r)) present[static_cast<std::size_t>(m)] = true;
  std::vector<MetaRelation> out;
  for (std::size_t k = 0; k < kNumMetaRelations; ++k) {
    if (present[k]) out.push_back(static_cast<MetaRelation>(k));
  }
  return out;
}

std::vector<std::array<std::uint32_t, kNumMetaRelations>> RelationPositionGraph::in_histogram()
    const {
  std::vector<std::array<std::uint32_t, kNumMetaRelations>> hist(
      n_relations_, std::array<std::uint32_t, kNumMetaRelations>{});
  for (const RpgEdge& e : edges_) ++hist[e.target][static_cast<std::size_t>(e.kind)];
  return hist;
}

RelationPositionGraph build_rpg(std::span<const Triple> support, std::size_t n_relations) {
  // Incidences grouped per entity: (relation, role). A loop triple (e,r,e)
  // contributes two incidences at e.
  struct Incidence {
    RelationId relation;
    bool is_head;
  };
  std::unordered_map<EntityId, std::vector<Incidence>> at_entity;
  for (const Triple& t : support) {
    if (t.relation >= n_relations) throw ContractError("build_rpg: relation id out of range");
    at_entity[t.head].push_back({t.relation, true});
    at_entity[t.tail].push_back({t.relation, false});
  }

  std::vector<RpgEdge> edges;
  for (const auto& [entity, incidences] : at_entity) {
    (void)entity;
    for (std::size_t i = 0; i < incidences.size(); ++i) {
      for (std::size_t j = 0; j < incidences.size(); ++j) {
        if (i == j) continue;
        edges.push_back({incidences[i].relation,
                         kind_for(incidences[i].is_head, incidences[j].is_head),
                         incidences[j].relation});
      }
    }
  }
  return RelationPositionGraph(n_relations, std::move(edges));
}

void dump_rpg(const std::filesystem::path& file, const RelationPositionGraph& rpg,
              const Vocab& relations) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot write rpg dump: " + file.string());
  for (const RpgEdge& e : rpg.edges()) {
    out << relations.label(e.source) << '\t' << meta_relation_name(e.kind) << '\t'
        << relations.label(e.target) << '\n';
  }
}

void export_rpg_histogram(const std::filesystem::path& file, const RelationPositionGraph& rpg,
                          const Vocab& relations) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot write rpg histogram: " + file.string());
  out << "relation\tt-h\th-t\th-h\tt-t\n";
  const auto hist = rpg.in_histogram();
  for (std::size_t r = 0; r < rpg.n_relations(); ++r) {
    out << relations.label(static_cast<std::uint32_t>(r));
    for (std::size_t k = 0; k < kNumMetaRelations; ++k) out << '\t' << hist[r][k];
    out << '\n';
  }
}

}  // namespace kgx
