#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "kgx/graph.hpp"
#include "kgx/rng.hpp"

namespace kgx {

inline constexpr std::uint32_t kNoGlobalId = ~std::uint32_t{0};

struct DatasetSampleParams {
  std::size_t n_seed_entities_test = 100;
  std::size_t n_seed_entities_train = 100;
  std::size_t walk_len_test = 10;
  std::size_t walk_len_train = 10;
  double removal_ratio = 0.1;
  std::uint64_t rng_seed = 1;

  void validate() const;
};

struct TaskSampleParams {
  std::size_t n_walks = 5;        // expansion rounds after the first walk
  std::size_t walk_len = 10;      // steps per walk
  double query_fraction = 0.2;
  double relabel_lo = 0.30;
  double relabel_hi = 0.80;
  std::uint64_t rng_seed = 1;

  void validate() const;
};

// One meta-learning episode: a sub-KG with its own dense vocabulary, a mask
// marking which local components are treated as unseen, and the training-KG
// indices of the seen ones. Every query triple's components appear in at
// least one support triple, so everything the loss touches is embeddable.
struct Task {
  KnowledgeGraph graph;
  SeenMask mask;
  std::vector<std::uint32_t> global_entity;    // kNoGlobalId for unseen
  std::vector<std::uint32_t> global_relation;
  double relabel_ratio = 0.0;                  // the drawn rho
};

struct DatasetSplit {
  KnowledgeGraph train;
  KnowledgeGraph valid;
  KnowledgeGraph test;
};

// Random-walk dataset construction: a test KG is induced from walk-expanded
// seed entities and removed from the source, a removal_ratio share of the
// remaining entities and relations is dropped, the validation KG repeats the
// same procedure, and the training KG is induced from fresh seeds on the
// final remainder. Test and valid triples are then split so that every query
// triple has at least one component absent from the training KG while all of
// its components still occur in a support triple.
DatasetSplit sample_dataset(const KnowledgeGraph& source, const DatasetSampleParams& params);

// Seed entity, random walk, n_walks expansion rounds from the accumulated
// entity set, induced triples split into support/query, then a relabel ratio
// drawn from [relabel_lo, relabel_hi] marks that share of entities and
// relations unseen (capped so at least one of each stays seen). Walks treat
// the KG as undirected. Pure function of (train, params).
Task sample_task(const KnowledgeGraph& train, const TaskSampleParams& params);

// n tasks with per-task seeds derived from (params.rng_seed, index), so the
// pool is order-deterministic and tasks could be drawn in parallel.
std::vector<Task> sample_task_pool(const KnowledgeGraph& train, const TaskSampleParams& params,
                                   std::size_t n);

enum class CorruptionSlot { kHead, kTail };

struct NegativeSample {
  std::vector<Triple> triples;
  bool shortfall = false;  // fewer than n valid corruptions exist
};

// n distinct corruptions of the designated slot drawn uniformly from the
// graph's entity vocabulary, excluding any corruption that reconstructs a
// support or query triple; the original triple never appears.
NegativeSample sample_negatives(const Triple& triple, const KnowledgeGraph& graph, std::size_t n,
                                CorruptionSlot slot, Rng& rng);

// Line-based archive for reusing a sampled task pool across runs.
void save_tasks(const std::filesystem::path& file, const std::vector<Task>& tasks);
std::vector<Task> load_tasks(const std::filesystem::path& file);

// Treats an evaluation KG (support + query over its own vocabulary) as a
// task against a training vocabulary: seen components get their training
// indices, unseen ones get none. The two triple sets are never merged.
Task task_from_eval_graph(const KnowledgeGraph& eval_kg, const Vocab& train_entities,
                          const Vocab& train_relations);

// Borrowed view of one episode as consumed by the model: support triples as
// encoding context, query triples as loss/ranking targets. Unlike Task, the
// query span may alias support (the no-meta-learning training mode), which a
// KnowledgeGraph's disjointness invariant would forbid.
struct Episode {
  std::span<const Triple> support;
  std::span<const Triple> query;
  const SeenMask* mask;
  std::span<const std::uint32_t> global_entity;
  std::span<const std::uint32_t> global_relation;
  std::size_t n_entities = 0;
  std::size_t n_relations = 0;
  const KnowledgeGraph* graph = nullptr;  // corruption filtering + labels
};

Episode as_episode(const Task& task);

// The whole training KG as one degenerate episode: support = query = all
// triples, nothing unseen, identity global ids.
class WholeGraphEpisode {
 public:
  explicit WholeGraphEpisode(const KnowledgeGraph& train);
  Episode episode() const;

 private:
  const KnowledgeGraph* graph_;
  SeenMask mask_;
  std::vector<std::uint32_t> global_entity_;
  std::vector<std::uint32_t> global_relation_;
};

}  // namespace kgx
