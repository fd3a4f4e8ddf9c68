#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "kgx/graph.hpp"
#include "kgx/rng.hpp"

namespace kgx {

struct EvalConfig {
  std::size_t n_candidates = 50;
  std::size_t n_repeats = 5;
  std::uint64_t rng_seed = 1;
  std::size_t threads = 1;  // workers for query scoring; results do not depend on it

  void validate() const;
};

struct CategoryMetrics {
  std::size_t count = 0;  // query triples in the category
  double mrr_mean = 0.0;
  double mrr_std = 0.0;
  double hits1_mean = 0.0;
  double hits1_std = 0.0;
  double hits10_mean = 0.0;
  double hits10_std = 0.0;
};

// Per-category link prediction metrics, mean +- std over repeats. Categories
// with zero queries are absent rather than zero.
struct EvalReport {
  std::vector<std::pair<std::string, CategoryMetrics>> rows;  // u_ent, u_rel, u_both, all_seen, all

  const CategoryMetrics* find(const std::string& category) const;
  std::string to_tsv() const;
  std::string to_table() const;
  static EvalReport from_tsv(const std::string& text);
};

struct RankMetrics {
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits10 = 0.0;
};

// The aggregation evaluate() applies to a rank list.
RankMetrics aggregate_ranks(std::span<const double> ranks);

// Naive independent reimplementation of the metric definitions, used to
// cross-check evaluate's aggregation. Throws on an empty list.
RankMetrics metrics_oracle(std::span<const double> ranks);

using TripleScorer = std::function<double(const Triple&)>;

// Ranks every query triple of eval_kg in two trials (head replaced, tail
// replaced) against itself plus n_candidates filtered corruptions; ties get
// the mean rank. Candidate draws come from per-(repeat, query, slot) rng
// streams, so results do not depend on evaluation order. The whole pass runs
// n_repeats times with fresh candidates.
EvalReport evaluate(const TripleScorer& scorer, const KnowledgeGraph& eval_kg,
                    const SeenMask& mask, const EvalConfig& cfg);

// Query triples per category name, in report row order.
std::map<std::string, std::size_t> category_counts(const KnowledgeGraph& eval_kg,
                                                   const SeenMask& mask);

}  // namespace kgx
