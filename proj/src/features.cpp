#include "kgx/features.hpp"

#include <algorithm>

namespace kgx {

namespace {

// Uniform random rows bounded componentwise by the bank's min/max.
Tensor bounded_random_rows(const Tensor& bank, std::size_t n_rows, Rng& rng) {
  const std::size_t d = bank.cols();
  std::vector<double> lo(d, 0.0), hi(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    lo[j] = bank[j];
    hi[j] = bank[j];
  }
  for (std::size_t i = 1; i < bank.rows(); ++i) {
    const double* r = bank.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      lo[j] = std::min(lo[j], r[j]);
      hi[j] = std::max(hi[j], r[j]);
    }
  }
  Tensor out({n_rows, d});
  for (std::size_t i = 0; i < n_rows; ++i) {
    double* r = out.row(i);
    for (std::size_t j = 0; j < d; ++j) r[j] = rng.uniform(lo[j], hi[j]);
  }
  return out;
}

// Assembles the final [n x d] matrix from blocks whose rows were assigned to
// component ids out of order.
Tape::NodeId assemble_rows(Tape& tape, std::span<const Tape::NodeId> blocks,
                           const std::vector<std::uint32_t>& row_of_component) {
  const Tape::NodeId stacked = tape.concat_rows(blocks);
  return tape.gather(stacked, row_of_component);
}

}  // namespace

Tape::NodeId relation_features(Tape& tape, const Episode& episode,
                               const RelationPositionGraph& rpg, const FeaturizerInputs& inputs,
                               const FeatureOptions& opts) {
  const std::size_t n_rels = episode.n_relations;
  if (rpg.n_relations() != n_rels) {
    throw ContractError("relation_features: RPG does not cover the episode's relations");
  }

  std::vector<std::uint32_t> seen_ids, unseen_ids;
  for (std::uint32_t r = 0; r < n_rels; ++r) {
    (episode.mask->relation_seen(r) ? seen_ids : unseen_ids).push_back(r);
  }

  std::vector<Tape::NodeId> blocks;
  std::vector<std::uint32_t> row_of(n_rels, 0);
  std::uint32_t next_row = 0;

  if (!seen_ids.empty()) {
    std::vector<std::uint32_t> bank_rows;
    bank_rows.reserve(seen_ids.size());
    for (std::uint32_t r : seen_ids) {
      const std::uint32_t g = episode.global_relation[r];
      if (g == kNoGlobalId) throw ContractError("seen relation without a training-KG id");
      bank_rows.push_back(g);
    }
    blocks.push_back(tape.gather(inputs.relation_bank, std::move(bank_rows)));
    for (std::uint32_t r : seen_ids) row_of[r] = next_row++;
  }

  if (!unseen_ids.empty()) {
    if (opts.randomize_unseen_relations) {
      if (!opts.ablation_rng) throw ContractError("relation ablation needs an rng");
      blocks.push_back(tape.constant(
          bounded_random_rows(tape.value(inputs.relation_bank), unseen_ids.size(),
                              *opts.ablation_rng)));
      for (std::uint32_t r : unseen_ids) row_of[r] = next_row++;
    } else {
      std::vector<std::uint32_t> populated, isolated;
      std::vector<std::uint32_t> meta_rows, groups;
      for (std::uint32_t r : unseen_ids) {
        std::vector<MetaRelation> kinds;
        if (opts.rpg_mode == RpgNeighborMode::kEdges) {
          const auto span = rpg.in_meta_edges(r);
          kinds.assign(span.begin(), span.end());
        } else {
          kinds = rpg.in_meta_kinds(r);
        }
        if (kinds.empty()) {
          isolated.push_back(r);
          continue;
        }
        const auto group = static_cast<std::uint32_t>(populated.size());
        populated.push_back(r);
        for (MetaRelation m : kinds) {
          meta_rows.push_back(static_cast<std::uint32_t>(m));
          groups.push_back(group);
        }
      }
      if (!populated.empty()) {
        const Tape::NodeId gathered = tape.gather(inputs.meta_embeddings, std::move(meta_rows));
        blocks.push_back(tape.scatter_mean(gathered, std::move(groups), populated.size()));
        for (std::uint32_t r : populated) row_of[r] = next_row++;
      }
      if (!isolated.empty()) {
        // Isolated unseen rel-node: mean of all four meta-relation embeddings.
        const Tape::NodeId fallback =
            tape.reshape(tape.mean(inputs.meta_embeddings, 0),
                         {1, tape.value(inputs.meta_embeddings).cols()});
        blocks.push_back(
            tape.gather(fallback, std::vector<std::uint32_t>(isolated.size(), 0)));
        for (std::uint32_t r : isolated) row_of[r] = next_row++;
      }
    }
  }
  return assemble_rows(tape, blocks, row_of);
}

Tape::NodeId entity_features(Tape& tape, const Episode& episode, Tape::NodeId rel_feats,
                             const FeaturizerInputs& inputs, const FeatureOptions& opts) {
  const std::size_t n_ents = episode.n_entities;

  std::vector<std::uint32_t> seen_ids, unseen_ids;
  for (std::uint32_t e = 0; e < n_ents; ++e) {
    (episode.mask->entity_seen(e) ? seen_ids : unseen_ids).push_back(e);
  }

  std::vector<Tape::NodeId> blocks;
  std::vector<std::uint32_t> row_of(n_ents, 0);
  std::uint32_t next_row = 0;

  if (!seen_ids.empty()) {
    std::vector<std::uint32_t> bank_rows;
    bank_rows.reserve(seen_ids.size());
    for (std::uint32_t e : seen_ids) {
      const std::uint32_t g = episode.global_entity[e];
      if (g == kNoGlobalId) throw ContractError("seen entity without a training-KG id");
      bank_rows.push_back(g);
    }
    blocks.push_back(tape.gather(inputs.entity_bank, std::move(bank_rows)));
    for (std::uint32_t e : seen_ids) row_of[e] = next_row++;
  }

  if (!unseen_ids.empty()) {
    if (opts.randomize_unseen_entities) {
      if (!opts.ablation_rng) throw ContractError("entity ablation needs an rng");
      blocks.push_back(tape.constant(
          bounded_random_rows(tape.value(inputs.entity_bank), unseen_ids.size(),
                              *opts.ablation_rng)));
      for (std::uint32_t e : unseen_ids) row_of[e] = next_row++;
    } else {
      std::vector<std::uint32_t> group_of(n_ents, kNoGlobalId);
      for (std::uint32_t i = 0; i < unseen_ids.size(); ++i) group_of[unseen_ids[i]] = i;

      std::vector<std::uint32_t> out_rels, out_groups, in_rels, in_groups;
      for (const Triple& t : episode.support) {
        if (group_of[t.head] != kNoGlobalId) {
          out_rels.push_back(t.relation);
          out_groups.push_back(group_of[t.head]);
        }
        if (group_of[t.tail] != kNoGlobalId) {
          in_rels.push_back(t.relation);
          in_groups.push_back(group_of[t.tail]);
        }
      }
      std::vector<std::uint32_t> incidence_count(unseen_ids.size(), 0);
      for (std::uint32_t g : out_groups) ++incidence_count[g];
      for (std::uint32_t g : in_groups) ++incidence_count[g];
      for (std::uint32_t i = 0; i < unseen_ids.size(); ++i) {
        if (incidence_count[i] == 0) {
          throw ContractError("unseen entity '" +
                              episode.graph->entities().label(unseen_ids[i]) +
                              "' has no support incidence");
        }
      }

      std::vector<Tape::NodeId> parts;
      std::vector<std::uint32_t> groups;
      if (!out_rels.empty()) {
        parts.push_back(tape.matmul(tape.gather(rel_feats, std::move(out_rels)), inputs.w_ent_out));
        groups.insert(groups.end(), out_groups.begin(), out_groups.end());
      }
      if (!in_rels.empty()) {
        parts.push_back(tape.matmul(tape.gather(rel_feats, std::move(in_rels)), inputs.w_ent_in));
        groups.insert(groups.end(), in_groups.begin(), in_groups.end());
      }
      const Tape::NodeId transformed = tape.concat_rows(parts);
      blocks.push_back(tape.scatter_mean(transformed, std::move(groups), unseen_ids.size()));
      for (std::uint32_t e : unseen_ids) row_of[e] = next_row++;
    }
  }
  return assemble_rows(tape, blocks, row_of);
}

}  // namespace kgx
