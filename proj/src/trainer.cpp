#include "kgx/trainer.hpp"

#include <cmath>
#include <sstream>

namespace kgx {

namespace {

constexpr std::uint64_t kShuffleStream = 0x73687566666c6501ULL;
constexpr std::uint64_t kNegativeStream = 0x6e65676174697601ULL;
constexpr std::uint64_t kAblationStream = 0x61626c6174653701ULL;

// Negatives for one query triple: n split between head and tail corruption.
std::vector<Triple> draw_negatives(const Triple& query, const KnowledgeGraph& graph,
                                   std::size_t n, Rng& rng) {
  const std::size_t n_head = n / 2;
  const std::size_t n_tail = n - n_head;
  auto head = sample_negatives(query, graph, n_head, CorruptionSlot::kHead, rng);
  auto tail = sample_negatives(query, graph, n_tail, CorruptionSlot::kTail, rng);
  std::vector<Triple> out = std::move(head.triples);
  out.insert(out.end(), tail.triples.begin(), tail.triples.end());
  return out;
}

std::string format_double(double x) {
  std::ostringstream out;
  out.precision(17);
  out << x;
  return out.str();
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw ContractError("training: batch_size must be >= 1");
  if (learning_rate <= 0.0) throw ContractError("training: learning_rate must be positive");
  if (relabel_lo > relabel_hi) throw ContractError("training: bad relabel range");
}

EvalReport validate(const ExtrapolationModel& model, const Vocab& train_entities,
                    const Vocab& train_relations, const KnowledgeGraph& eval_kg,
                    const EvalConfig& cfg) {
  const Task task = task_from_eval_graph(eval_kg, train_entities, train_relations);
  const Episode episode = as_episode(task);
  Rng ablation_rng = Rng(cfg.rng_seed).derive({kAblationStream});
  const EmbeddingTable table = model.embed_table(episode, &ablation_rng);
  return evaluate([&table](const Triple& t) { return table.score(t); }, eval_kg, task.mask, cfg);
}

EvalReport validate(const ModelCheckpoint& checkpoint, const KnowledgeGraph& eval_kg,
                    const EvalConfig& cfg) {
  const ExtrapolationModel model(checkpoint.config, checkpoint.store);
  return validate(model, checkpoint.train_entities, checkpoint.train_relations, eval_kg, cfg);
}

TrainResult meta_train(const KnowledgeGraph& train_kg, const KnowledgeGraph& valid_kg,
                       const std::vector<Task>& pool, ExtrapolationModel& model,
                       const TrainConfig& cfg) {
  cfg.validate();
  const bool meta = !model.config().ablations.meta;
  if (meta && pool.empty()) throw ContractError("meta training needs a sampled task pool");
  if (meta) {
    for (const Task& task : pool) {
      if (task.relabel_ratio < cfg.relabel_lo || task.relabel_ratio > cfg.relabel_hi) {
        throw ContractError("task relabel ratio " + std::to_string(task.relabel_ratio) +
                            " outside [" + std::to_string(cfg.relabel_lo) + ", " +
                            std::to_string(cfg.relabel_hi) + "]");
      }
    }
  }

  const std::size_t pool_size = meta ? pool.size() : 1;
  const std::size_t steps_per_epoch = (pool_size + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps =
      cfg.total_steps > 0 ? cfg.total_steps : cfg.max_epochs * steps_per_epoch;

  const AdamConfig adam{.learning_rate = cfg.learning_rate};
  const Rng base(cfg.rng_seed);

  // RPGs depend only on support triples; build each task's once.
  std::vector<RelationPositionGraph> rpgs;
  rpgs.reserve(pool_size);
  const WholeGraphEpisode whole(train_kg);
  if (meta) {
    for (const Task& task : pool) {
      rpgs.push_back(build_rpg(task.graph.support(), task.graph.n_relations()));
    }
  } else {
    rpgs.push_back(build_rpg(whole.episode().support, whole.episode().n_relations));
  }

  TrainResult result;
  auto snapshot = [&]() {
    return ModelCheckpoint{model.config(), train_kg.entities(), train_kg.relations(),
                           model.params()};
  };
  result.checkpoint = snapshot();

  std::vector<std::size_t> order(pool_size);
  for (std::size_t i = 0; i < pool_size; ++i) order[i] = i;

  std::size_t epoch = 0, cursor = 0, stale_validations = 0;
  bool have_best = false;
  auto reshuffle = [&]() {
    Rng rng = base.derive({kShuffleStream, epoch});
    rng.shuffle(order);
    cursor = 0;
  };
  reshuffle();

  std::vector<Tensor> grad_acc(model.params().count());
  for (std::size_t step = 1; step <= total_steps; ++step) {
    for (Tensor& g : grad_acc) g = Tensor();
    double batch_loss = 0.0;

    const std::size_t batch_n = std::min(cfg.batch_size, pool_size - cursor);
    for (std::size_t b = 0; b < batch_n; ++b) {
      const std::size_t task_idx = order[cursor + b];
      const Episode episode = meta ? as_episode(pool[task_idx]) : whole.episode();
      if (episode.query.empty()) continue;  // degenerate task, nothing to score
      const RelationPositionGraph& rpg = rpgs[task_idx];

      Rng neg_rng = base.derive({kNegativeStream, epoch, step, task_idx});
      std::vector<std::vector<Triple>> negatives;
      negatives.reserve(episode.query.size());
      for (const Triple& q : episode.query) {
        negatives.push_back(
            draw_negatives(q, *episode.graph, model.config().loss.n_negatives, neg_rng));
      }

      Rng ablation_rng = base.derive({kAblationStream, epoch, step, task_idx});
      Tape tape;
      const auto bound = model.bind(tape);
      const Tape::NodeId loss =
          model.episode_loss(tape, bound, episode, rpg, negatives, &ablation_rng);
      batch_loss += tape.value(loss).item();

      const std::vector<Tensor> grads = tape.backward(loss);
      for (std::size_t p = 0; p < bound.leaves.size(); ++p) {
        const Tensor& g = grads[bound.leaves[p]];
        if (g.size() == 0) continue;
        if (grad_acc[p].size() == 0) {
          grad_acc[p] = g;
        } else {
          auto dst = grad_acc[p].data();
          const auto src = g.data();
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        }
      }
    }
    cursor += batch_n;
    if (cursor >= pool_size) {
      ++epoch;
      reshuffle();
    }

    if (!std::isfinite(batch_loss)) {
      // Parameters have not been stepped yet, so the current state is the
      // last good one.
      result.diverged = true;
      if (!have_best) result.checkpoint = snapshot();
      result.log_lines.push_back(std::to_string(step) + "\tdiverged");
      return result;
    }
    model.params().adam_step(grad_acc, adam, cfg.clip_norm);
    result.steps_run = step;
    result.log_lines.push_back(std::to_string(step) + "\t" + format_double(batch_loss));

    if (cfg.validation_every > 0 && step % cfg.validation_every == 0) {
      const EvalReport report = validate(model, train_kg.entities(), train_kg.relations(),
                                         valid_kg, cfg.validation_eval);
      const CategoryMetrics* all = report.find("all");
      const double mrr = all ? all->mrr_mean : 0.0;
      result.log_lines.back() += "\t" + format_double(mrr);
      if (mrr > result.best_validation_mrr) {
        result.best_validation_mrr = mrr;
        result.checkpoint = snapshot();
        have_best = true;
        stale_validations = 0;
      } else {
        ++stale_validations;
        if (stale_validations >= cfg.early_stop_patience) break;
      }
    }
  }

  if (!have_best) result.checkpoint = snapshot();
  return result;
}

}  // namespace kgx
