#include "kgx/graph.hpp"

#include <fstream>

namespace kgx {

std::uint32_t Vocab::add(const std::string& label) {
  auto it = index_.find(label);
  if (it != index_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(labels_.size());
  labels_.push_back(label);
  index_.emplace(label, id);
  return id;
}

std::optional<std::uint32_t> Vocab::find(const std::string& label) const {
  auto it = index_.find(label);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

KnowledgeGraph KnowledgeGraph::build(const std::vector<LabelTriple>& support,
                                     const std::vector<LabelTriple>& query,
                                     const Vocab* base_entities, const Vocab* base_relations,
                                     BuildStats* stats) {
  KnowledgeGraph g;
  if (base_entities) g.entities_ = *base_entities;
  if (base_relations) g.relations_ = *base_relations;

  auto ingest = [&g](const std::vector<LabelTriple>& src, std::vector<Triple>& dst) {
    std::size_t dups = 0;
    for (const LabelTriple& lt : src) {
      const Triple t{g.entities_.add(lt.head), g.relations_.add(lt.relation),
                     g.entities_.add(lt.tail)};
      if (!g.all_.insert(t).second) {
        ++dups;
        continue;
      }
      dst.push_back(t);
    }
    return dups;
  };

  const std::size_t dup_sup = ingest(support, g.support_);
  const std::size_t dup_que = ingest(query, g.query_);
  if (stats) {
    stats->duplicate_support = dup_sup;
    stats->duplicate_query = dup_que;
  }
  return g;
}

LabelTriple KnowledgeGraph::to_labels(const Triple& t) const {
  return {entities_.label(t.head), relations_.label(t.relation), entities_.label(t.tail)};
}

const char* category_name(QueryCategory c) {
  switch (c) {
    case QueryCategory::kUnseenEntityOnly: return "u_ent";
    case QueryCategory::kUnseenRelationOnly: return "u_rel";
    case QueryCategory::kUnseenBoth: return "u_both";
    case QueryCategory::kAllSeen: return "all_seen";
  }
  return "?";
}

std::vector<LabelTriple> read_triple_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open triple file: " + file.string());
  std::vector<LabelTriple> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab1 = line.find('\t');
    const auto tab2 = (tab1 == std::string::npos) ? std::string::npos : line.find('\t', tab1 + 1);
    const auto tab3 = (tab2 == std::string::npos) ? std::string::npos : line.find('\t', tab2 + 1);
    if (tab1 == std::string::npos || tab2 == std::string::npos || tab3 != std::string::npos) {
      throw ParseError(file.string() + ":" + std::to_string(line_no) +
                       ": expected head<TAB>relation<TAB>tail");
    }
    out.push_back({line.substr(0, tab1), line.substr(tab1 + 1, tab2 - tab1 - 1),
                   line.substr(tab2 + 1)});
  }
  return out;
}

void write_triple_file(const std::filesystem::path& file, const std::vector<Triple>& triples,
                       const KnowledgeGraph& graph) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot write triple file: " + file.string());
  for (const Triple& t : triples) {
    const LabelTriple lt = graph.to_labels(t);
    out << lt.head << '\t' << lt.relation << '\t' << lt.tail << '\n';
  }
  if (!out) throw IoError("failed writing triple file: " + file.string());
}

KnowledgeGraph load_graph(const std::filesystem::path& triple_file,
                          const std::optional<std::filesystem::path>& query_file, VocabMode mode,
                          const KnowledgeGraph* base, std::size_t* duplicates) {
  const std::vector<LabelTriple> support = read_triple_file(triple_file);
  if (support.empty()) throw ParseError("empty triple file: " + triple_file.string());
  std::vector<LabelTriple> query;
  if (query_file) query = read_triple_file(*query_file);

  const Vocab* base_ents = nullptr;
  const Vocab* base_rels = nullptr;
  if (mode == VocabMode::kExtend) {
    if (!base) throw ContractError("load_graph: extend mode needs a base graph");
    base_ents = &base->entities();
    base_rels = &base->relations();
  }
  KnowledgeGraph::BuildStats stats;
  KnowledgeGraph g = KnowledgeGraph::build(support, query, base_ents, base_rels, &stats);
  if (duplicates) *duplicates = stats.duplicate_support + stats.duplicate_query;
  return g;
}

SeenMask build_seen_mask(const KnowledgeGraph& test_graph, const Vocab& train_entities,
                         const Vocab& train_relations) {
  SeenMask mask;
  mask.seen_entities.resize(test_graph.n_entities());
  mask.seen_relations.resize(test_graph.n_relations());
  std::size_t seen_e = 0, seen_r = 0;
  for (std::uint32_t e = 0; e < test_graph.n_entities(); ++e) {
    const bool seen = train_entities.find(test_graph.entities().label(e)).has_value();
    mask.seen_entities[e] = seen;
    seen_e += seen;
  }
  for (std::uint32_t r = 0; r < test_graph.n_relations(); ++r) {
    const bool seen = train_relations.find(test_graph.relations().label(r)).has_value();
    mask.seen_relations[r] = seen;
    seen_r += seen;
  }
  if (seen_e == 0 || seen_r == 0) {
    throw ContractError(
        "seen mask: training and test graphs must share at least one entity and one relation");
  }
  return mask;
}

SeenMask build_seen_mask(const KnowledgeGraph& test_graph, const KnowledgeGraph& train_graph) {
  return build_seen_mask(test_graph, train_graph.entities(), train_graph.relations());
}

QueryCategory categorize(const Triple& t, const SeenMask& mask) {
  const bool ent_unseen = !mask.entity_seen(t.head) || !mask.entity_seen(t.tail);
  const bool rel_unseen = !mask.relation_seen(t.relation);
  if (ent_unseen && rel_unseen) return QueryCategory::kUnseenBoth;
  if (ent_unseen) return QueryCategory::kUnseenEntityOnly;
  if (rel_unseen) return QueryCategory::kUnseenRelationOnly;
  return QueryCategory::kAllSeen;
}

}  // namespace kgx
