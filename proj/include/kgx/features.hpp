#pragma once

#include "kgx/rng.hpp"
#include "kgx/rpg.hpp"
#include "kgx/sampler.hpp"
#include "kgx/tape.hpp"

namespace kgx {

// How the neighborhood of a rel-node is read when averaging meta-relation
// embeddings: once per deduplicated in-edge (default), or collapsed to the
// set of distinct kinds.
enum class RpgNeighborMode { kEdges, kKinds };

struct FeaturizerInputs {
  Tape::NodeId entity_bank;      // |E_tr| x d_e
  Tape::NodeId relation_bank;    // |R_tr| x d_r
  Tape::NodeId meta_embeddings;  // 4 x d_r, rows ordered (t-h, h-t, h-h, t-t)
  Tape::NodeId w_ent_in;         // d_r x d_e, applied as row-vector @ W
  Tape::NodeId w_ent_out;
};

struct FeatureOptions {
  RpgNeighborMode rpg_mode = RpgNeighborMode::kEdges;
  // Ablations: replace constructed unseen features with uniform random
  // vectors bounded componentwise by the min/max of the matching bank.
  bool randomize_unseen_relations = false;
  bool randomize_unseen_entities = false;
  Rng* ablation_rng = nullptr;
};

// Per-relation input features [n_relations x d_r]: bank lookup for seen
// relations, mean of the in-edge meta-relation embeddings for unseen ones,
// mean of all four meta-relation embeddings for an isolated unseen rel-node.
Tape::NodeId relation_features(Tape& tape, const Episode& episode,
                               const RelationPositionGraph& rpg, const FeaturizerInputs& inputs,
                               const FeatureOptions& opts);

// Per-entity input features [n_entities x d_e]: bank lookup for seen
// entities; an unseen entity averages, over its support incidences, the
// direction-specific transform of the incident relation's feature (w_ent_out
// where it is head, w_ent_in where it is tail). A relation incident twice
// contributes twice. Throws ContractError for an unseen entity with no
// support incidence.
Tape::NodeId entity_features(Tape& tape, const Episode& episode, Tape::NodeId rel_feats,
                             const FeaturizerInputs& inputs, const FeatureOptions& opts);

}  // namespace kgx
