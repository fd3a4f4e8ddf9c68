#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "kgx/adam.hpp"
#include "kgx/decoder.hpp"
#include "kgx/encoder.hpp"
#include "kgx/features.hpp"
#include "kgx/rpg.hpp"
#include "kgx/sampler.hpp"

namespace kgx {

// Training variants that drop one ingredient each: no episodic training
// (meta), random unseen relation features (rel_feat), random unseen entity
// features (ent_feat), features passed through as embeddings (gnn).
struct AblationSet {
  bool meta = false;
  bool rel_feat = false;
  bool ent_feat = false;
  bool gnn = false;

  static AblationSet parse(const std::string& csv);  // e.g. "meta,gnn"
  std::string to_string() const;
  bool any() const { return meta || rel_feat || ent_feat || gnn; }
};

struct ModelConfig {
  std::size_t feature_dim = 32;    // input feature width for entities
  std::size_t hidden_dim = 32;
  std::size_t embedding_dim = 32;  // entity embedding width
  std::size_t gnn_layers = 2;
  ScoreFunction score_fn = ScoreFunction::kTransE;
  RpgNeighborMode rpg_mode = RpgNeighborMode::kEdges;
  AblationSet ablations;
  LossConfig loss;

  // Relation feature width: feature_dim normally; when the encoder is
  // ablated the features are the embeddings, so the width the decoder
  // expects.
  std::size_t relation_feature_dim() const;
  std::size_t entity_out_dim() const;
  std::size_t relation_out_dim() const;  // raw width (phases for rotate)

  void validate() const;
  std::string serialize() const;
  static ModelConfig deserialize(const std::string& text);
};

// Plain (non-differentiable) embeddings of one episode, relation rows
// already in the representation score_triple expects.
struct EmbeddingTable {
  Tensor entities;
  Tensor relations;
  ScoreFunction score_fn;

  double score(const Triple& t) const {
    return score_triple({entities.row(t.head), entities.cols()},
                        {relations.row(t.relation), relations.cols()},
                        {entities.row(t.tail), entities.cols()}, score_fn);
  }
};

// The full extrapolation model: learnable feature banks, meta-relation
// embeddings, direction transforms and GNN weights, with the forward pass
// featurize -> encode -> score wired over a tape.
class ExtrapolationModel {
 public:
  ExtrapolationModel(ModelConfig cfg, std::size_t n_train_entities,
                     std::size_t n_train_relations, std::uint64_t init_seed);
  ExtrapolationModel(ModelConfig cfg, ParameterStore store);  // checkpoint path

  const ModelConfig& config() const { return cfg_; }
  ParameterStore& params() { return store_; }
  const ParameterStore& params() const { return store_; }
  std::size_t n_train_entities() const;
  std::size_t n_train_relations() const;

  // Parameter leaves on a fresh tape, one per stored tensor.
  struct Bound {
    std::vector<Tape::NodeId> leaves;  // aligned with params() indices
    FeaturizerInputs feat;
    std::vector<GnnLayer> layers;
  };
  Bound bind(Tape& tape) const;

  // Featurize + encode one episode. ablation_rng is only consulted by the
  // random-feature ablations.
  TaskEmbeddings embed(Tape& tape, const Bound& bound, const Episode& episode,
                       const RelationPositionGraph& rpg, Rng* ablation_rng = nullptr) const;

  // Relation embeddings mapped to what the decoder consumes (unit complex
  // for rotate, identity otherwise).
  Tape::NodeId decoder_relations(Tape& tape, const TaskEmbeddings& emb) const;

  // Self-adversarial loss of an episode; negatives[i] belongs to query i.
  // Queries are grouped by negative count so shortfalls stay exact.
  Tape::NodeId episode_loss(Tape& tape, const Bound& bound, const Episode& episode,
                            const RelationPositionGraph& rpg,
                            std::span<const std::vector<Triple>> negatives,
                            Rng* ablation_rng = nullptr,
                            const std::vector<Tensor>* fixed_weights = nullptr) const;

  EmbeddingTable embed_table(const Episode& episode, Rng* ablation_rng = nullptr) const;

 private:
  ModelConfig cfg_;
  ParameterStore store_;
};

// Everything needed to resume or evaluate a run: parameters with optimizer
// state, the model configuration, and the training vocabulary (labels only;
// evaluation never needs the training triples).
struct ModelCheckpoint {
  ModelConfig config;
  Vocab train_entities;
  Vocab train_relations;
  ParameterStore store;

  void save(const std::filesystem::path& file) const;
  static ModelCheckpoint load(const std::filesystem::path& file);
};

// Shared helpers for checkpoint meta blocks (model + baseline files).
std::string encode_vocab_meta(const Vocab& entities, const Vocab& relations);
void decode_vocab_meta(const std::string& text, std::size_t* cursor, Vocab* entities,
                       Vocab* relations);

void export_embeddings(const std::filesystem::path& file, const EmbeddingTable& table,
                       const KnowledgeGraph& graph);

}  // namespace kgx
