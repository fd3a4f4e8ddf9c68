#pragma once

#include <span>
#include <string>
#include <vector>

#include "kgx/tape.hpp"
#include "kgx/tensor.hpp"

namespace kgx {

enum class ScoreFunction { kTransE, kDistMult, kComplEx, kRotatE };

ScoreFunction score_function_from_string(const std::string& s);
const char* score_function_name(ScoreFunction fn);

// Width of the raw relation representation given the entity embedding width:
// same width for TransE/DistMult/ComplEx, half for RotatE (phases).
std::size_t relation_dim_for(ScoreFunction fn, std::size_t entity_dim);

// Phases -> interleaved unit-modulus complex (doubles the width).
Tensor phases_to_complex(const Tensor& phases);

// Plausibility score, higher is better:
//   TransE    -|h + r - t|_1
//   DistMult  sum(h * r * t)
//   ComplEx   Re(sum(h * r * conj(t)))   (interleaved complex)
//   RotatE    -|h o r - t|_1             (r as interleaved complex; convert
//                                         phases with phases_to_complex first)
double score_triple(std::span<const double> h, std::span<const double> r,
                    std::span<const double> t, ScoreFunction fn);

// Batched tape version over row-aligned component matrices -> [n] scores.
// Same representation conventions as score_triple.
Tape::NodeId score_rows(Tape& tape, Tape::NodeId h, Tape::NodeId r, Tape::NodeId t,
                        ScoreFunction fn);

// Softmax of alpha-scaled scores, numerically stabilized by max-subtraction.
// alpha = 0 gives the uniform distribution.
std::vector<double> adversarial_weights(std::span<const double> neg_scores, double alpha);

struct LossConfig {
  double margin = 10.0;          // gamma
  std::size_t n_negatives = 32;  // per query triple
  double adv_temperature = 1.0;  // alpha, >= 0
};

// Scores of a group of queries sharing a negative count: pos is [m], neg is
// [m x c] (neg == Tape::kNone when c == 0, e.g. no valid corruption exists).
struct ScoreBucket {
  Tape::NodeId pos = Tape::kNone;
  Tape::NodeId neg = Tape::kNone;
};

// Self-adversarial loss over all buckets, averaged over n_queries:
//   (1/n) sum_q [ -log sig(gamma + s_q) - sum_j p_qj log sig(-gamma - s_qj) ]
// where p_qj is the adversarial weight of negative j. The weights are
// computed from the current scores and treated as constants (no gradient
// flows through them). fixed_weights, when given (one [m x c] tensor per
// bucket, empty tensor for c == 0), replaces that computation; tests use it
// to pin the weights across finite-difference evaluations.
Tape::NodeId adversarial_task_loss(Tape& tape, std::span<const ScoreBucket> buckets,
                                   std::size_t n_queries, const LossConfig& cfg,
                                   const std::vector<Tensor>* fixed_weights = nullptr);

}  // namespace kgx
