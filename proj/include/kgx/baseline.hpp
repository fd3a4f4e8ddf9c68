#pragma once

#include <filesystem>

#include "kgx/adam.hpp"
#include "kgx/decoder.hpp"
#include "kgx/evaluator.hpp"
#include "kgx/graph.hpp"

namespace kgx {

struct BaselineTrainConfig {
  std::size_t dim = 32;  // entity embedding width
  std::size_t batch_size = 64;
  double learning_rate = 0.001;
  std::size_t max_epochs = 50;
  std::size_t total_steps = 0;  // 0: max_epochs * ceil(triples / batch)
  double clip_norm = 1.0;
  std::uint64_t rng_seed = 1;
  LossConfig loss;
};

// Conventional KGE model trained on the training KG alone: one embedding row
// per training entity and relation (phases for rotate).
struct KgeModel {
  ScoreFunction score_fn = ScoreFunction::kTransE;
  std::size_t dim = 32;
  Vocab entities;
  Vocab relations;
  ParameterStore store;  // "entity_emb", "relation_emb"

  void save(const std::filesystem::path& file) const;
  static KgeModel load(const std::filesystem::path& file);
};

// Standard (non-meta) training with the self-adversarial loss over the
// training triples with negative sampling.
KgeModel train_kge(const KnowledgeGraph& train_kg, ScoreFunction fn,
                   const BaselineTrainConfig& cfg, std::vector<std::string>* log = nullptr);

// Unseen components of the derivation pass, in the order they are processed:
// a single pass over entities then relations, each anchored only on support
// triples whose other two components are seen. Derived embeddings are never
// reused as anchors.
struct DerivationOrder {
  std::vector<EntityId> entities;
  std::vector<RelationId> relations;
};
DerivationOrder one_pass_inference_order(const KnowledgeGraph& test_kg, const SeenMask& mask);

struct DerivationStats {
  std::size_t anchored_entities = 0;
  std::size_t fallback_entities = 0;
  std::size_t anchored_relations = 0;
  std::size_t fallback_relations = 0;
  std::size_t skipped_anchors = 0;  // rotate: zero-modulus divisor coordinate
};

// Extends the trained embeddings over the test KG's vocabulary: seen
// components are looked up, unseen ones are derived from the score
// function's inversion formulas averaged over their seen-anchored support
// triples, and components with no such anchor get the global mean embedding.
// Relation rows come out in the representation score_triple expects.
struct ExtendedEmbeddings {
  Tensor entities;   // [test E x d]
  Tensor relations;  // [test R x d_ready]
  ScoreFunction score_fn;

  double score(const Triple& t) const {
    return score_triple({entities.row(t.head), entities.cols()},
                        {relations.row(t.relation), relations.cols()},
                        {entities.row(t.tail), entities.cols()}, score_fn);
  }
};

ExtendedEmbeddings derive_unseen(const KgeModel& model, const KnowledgeGraph& test_kg,
                                 const SeenMask& mask, DerivationStats* stats = nullptr);

// Inversion formulas (one per slot) applied to score-ready representations;
// exposed for the algebraic round-trip checks.
std::vector<double> f_hr2t(std::span<const double> h, std::span<const double> r, ScoreFunction fn);
std::vector<double> f_tr2h(std::span<const double> t, std::span<const double> r, ScoreFunction fn);
std::vector<double> f_ht2r(std::span<const double> h, std::span<const double> t, ScoreFunction fn);

}  // namespace kgx
