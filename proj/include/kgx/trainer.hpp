#pragma once

#include <vector>

#include "kgx/evaluator.hpp"
#include "kgx/model.hpp"
#include "kgx/sampler.hpp"

namespace kgx {

struct TrainConfig {
  std::size_t batch_size = 64;
  double learning_rate = 0.001;
  std::size_t max_epochs = 10;
  std::size_t total_steps = 0;          // 0: max_epochs * ceil(pool / batch)
  std::size_t validation_every = 50;    // optimizer steps; 0 disables
  std::size_t early_stop_patience = 3;  // validations without improvement
  double clip_norm = 1.0;               // global L2; <= 0 disables
  double relabel_lo = 0.30;             // asserted against every task
  double relabel_hi = 0.80;
  std::uint64_t rng_seed = 1;
  EvalConfig validation_eval{.n_candidates = 50, .n_repeats = 1, .rng_seed = 7};

  void validate() const;
};

struct TrainResult {
  ModelCheckpoint checkpoint;  // best validation MRR; final state if never validated
  double best_validation_mrr = -1.0;
  std::size_t steps_run = 0;
  bool diverged = false;
  std::vector<std::string> log_lines;  // "step<TAB>loss[<TAB>val_mrr]"
};

// The meta-training loop: batches of tasks, per task build RPG -> features ->
// embeddings -> self-adversarial loss over its query triples, losses summed
// over the batch, one Adam step per batch. Periodically evaluates on the
// validation KG and keeps the parameters with the best overall MRR. With the
// meta ablation the pool is ignored and every step trains on the whole
// training KG with support = query = all triples and nothing unseen.
//
// A non-finite loss aborts the run and returns the last good checkpoint with
// diverged = true.
TrainResult meta_train(const KnowledgeGraph& train_kg, const KnowledgeGraph& valid_kg,
                       const std::vector<Task>& pool, ExtrapolationModel& model,
                       const TrainConfig& cfg);

// Link-prediction metrics of the model on an evaluation KG: its support
// triples are the encoding context, its query triples are ranked.
EvalReport validate(const ExtrapolationModel& model, const Vocab& train_entities,
                    const Vocab& train_relations, const KnowledgeGraph& eval_kg,
                    const EvalConfig& cfg);
EvalReport validate(const ModelCheckpoint& checkpoint, const KnowledgeGraph& eval_kg,
                    const EvalConfig& cfg);

}  // namespace kgx
