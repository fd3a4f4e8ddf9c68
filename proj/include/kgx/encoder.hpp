#pragma once

#include <span>

#include "kgx/graph.hpp"
#include "kgx/tape.hpp"

namespace kgx {

// One message-passing layer. Weights are stored [in_dim x out_dim] and
// applied as row-vector @ W; w_out / w_in act on concatenated
// [relation ; entity] rows.
struct GnnLayer {
  Tape::NodeId w_out;   // (d_rel + d_ent) x d_ent_next
  Tape::NodeId w_in;    // (d_rel + d_ent) x d_ent_next
  Tape::NodeId w_self;  // d_ent x d_ent_next
  Tape::NodeId w_rel;   // d_rel x d_rel_next
};

struct TaskEmbeddings {
  Tape::NodeId entities;   // [n_entities x d_ent_out]
  Tape::NodeId relations;  // [n_relations x d_rel_out]
};

// Message passing over the support triples:
// each directed edge (h, r, t) sends w_out @ [h_r ; h_t] to h and
// w_in @ [h_r ; h_h] to t; an entity averages its messages and adds the
// self-loop transform, relations update through w_rel. relu between layers,
// identity on the last layer so decoder scores keep both signs.
//
// Every entity must occur in at least one support triple (the per-entity
// message count is the normalizer); otherwise throws ContractError.
TaskEmbeddings encode(Tape& tape, std::span<const Triple> support, Tape::NodeId entity_feats,
                      Tape::NodeId relation_feats, std::span<const GnnLayer> layers);

}  // namespace kgx
