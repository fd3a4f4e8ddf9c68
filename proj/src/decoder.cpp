#include "kgx/decoder.hpp"

#include <algorithm>
#include <cmath>

#include "kgx/error.hpp"

namespace kgx {

ScoreFunction score_function_from_string(const std::string& s) {
  if (s == "transe") return ScoreFunction::kTransE;
  if (s == "distmult") return ScoreFunction::kDistMult;
  if (s == "complex") return ScoreFunction::kComplEx;
  if (s == "rotate") return ScoreFunction::kRotatE;
  throw ContractError("unknown score_fn '" + s + "' (transe|distmult|complex|rotate)");
}

const char* score_function_name(ScoreFunction fn) {
  switch (fn) {
    case ScoreFunction::kTransE: return "transe";
    case ScoreFunction::kDistMult: return "distmult";
    case ScoreFunction::kComplEx: return "complex";
    case ScoreFunction::kRotatE: return "rotate";
  }
  return "?";
}

std::size_t relation_dim_for(ScoreFunction fn, std::size_t entity_dim) {
  if (fn == ScoreFunction::kRotatE) {
    if (entity_dim % 2 != 0) throw ContractError("rotate needs an even entity dimension");
    return entity_dim / 2;
  }
  if (fn == ScoreFunction::kComplEx && entity_dim % 2 != 0) {
    throw ContractError("complex needs an even entity dimension");
  }
  return entity_dim;
}

Tensor phases_to_complex(const Tensor& phases) {
  Shape shape = phases.shape();
  if (shape.empty()) throw ShapeError("phases_to_complex: needs at least one axis");
  shape.back() *= 2;
  Tensor out(std::move(shape));
  for (std::size_t i = 0; i < phases.size(); ++i) {
    out[2 * i] = std::cos(phases[i]);
    out[2 * i + 1] = std::sin(phases[i]);
  }
  return out;
}

double score_triple(std::span<const double> h, std::span<const double> r,
                    std::span<const double> t, ScoreFunction fn) {
  if (h.size() != t.size() || h.size() != r.size()) {
    throw ShapeError("score_triple: component dimensions differ (" + std::to_string(h.size()) +
                     ", " + std::to_string(r.size()) + ", " + std::to_string(t.size()) + ")");
  }
  const std::size_t d = h.size();
  switch (fn) {
    case ScoreFunction::kTransE: {
      double acc = 0.0;
      for (std::size_t i = 0; i < d; ++i) acc += std::fabs(h[i] + r[i] - t[i]);
      return -acc;
    }
    case ScoreFunction::kDistMult: {
      double acc = 0.0;
      for (std::size_t i = 0; i < d; ++i) acc += h[i] * r[i] * t[i];
      return acc;
    }
    case ScoreFunction::kComplEx: {
      if (d % 2 != 0) throw ShapeError("complex score needs an even dimension");
      double acc = 0.0;
      for (std::size_t i = 0; i < d; i += 2) {
        const double ur = h[i] * r[i] - h[i + 1] * r[i + 1];
        const double ui = h[i] * r[i + 1] + h[i + 1] * r[i];
        // Re(u * conj(t))
        acc += ur * t[i] + ui * t[i + 1];
      }
      return acc;
    }
    case ScoreFunction::kRotatE: {
      if (d % 2 != 0) throw ShapeError("rotate score needs an even dimension");
      double acc = 0.0;
      for (std::size_t i = 0; i < d; i += 2) {
        const double ur = h[i] * r[i] - h[i + 1] * r[i + 1];
        const double ui = h[i] * r[i + 1] + h[i + 1] * r[i];
        acc += std::fabs(ur - t[i]) + std::fabs(ui - t[i + 1]);
      }
      return -acc;
    }
  }
  throw ContractError("score_triple: bad score function");
}

Tape::NodeId score_rows(Tape& tape, Tape::NodeId h, Tape::NodeId r, Tape::NodeId t,
                        ScoreFunction fn) {
  switch (fn) {
    case ScoreFunction::kTransE:
      return tape.neg(tape.l1_norm_rows(tape.sub(tape.add(h, r), t)));
    case ScoreFunction::kDistMult:
      return tape.sum(tape.mul(tape.mul(h, r), t), 1);
    case ScoreFunction::kComplEx:
      // Re(sum u conj(t)) = sum over interleaved lanes of (u * t)
      return tape.sum(tape.mul(tape.complex_hadamard(h, r), t), 1);
    case ScoreFunction::kRotatE:
      return tape.neg(tape.l1_norm_rows(tape.sub(tape.complex_hadamard(h, r), t)));
  }
  throw ContractError("score_rows: bad score function");
}

std::vector<double> adversarial_weights(std::span<const double> neg_scores, double alpha) {
  if (neg_scores.empty()) throw ContractError("adversarial_weights: empty score list");
  if (alpha < 0.0) throw ContractError("adversarial_weights: negative temperature");
  double mx = neg_scores[0] * alpha;
  for (double s : neg_scores) mx = std::max(mx, s * alpha);
  std::vector<double> w(neg_scores.size());
  double denom = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp(alpha * neg_scores[i] - mx);
    denom += w[i];
  }
  for (double& x : w) x /= denom;
  return w;
}

Tape::NodeId adversarial_task_loss(Tape& tape, std::span<const ScoreBucket> buckets,
                                   std::size_t n_queries, const LossConfig& cfg,
                                   const std::vector<Tensor>* fixed_weights) {
  if (n_queries == 0) throw ContractError("task loss: empty query set");
  if (fixed_weights && fixed_weights->size() != buckets.size()) {
    throw ContractError("task loss: fixed weights do not match buckets");
  }

  Tape::NodeId total = Tape::kNone;
  for (std::size_t b = 0; b < buckets.size(); ++b) {
    const ScoreBucket& bucket = buckets[b];
    // -log sig(gamma + s_pos)
    Tape::NodeId per_query = tape.log_sigmoid(tape.add_scalar(bucket.pos, cfg.margin));

    if (bucket.neg != Tape::kNone && tape.value(bucket.neg).size() > 0) {
      const Tensor& neg_vals = tape.value(bucket.neg);
      const std::size_t m = neg_vals.rows(), c = neg_vals.cols();
      Tensor weights({m, c});
      if (fixed_weights) {
        weights = (*fixed_weights)[b];
      } else {
        for (std::size_t i = 0; i < m; ++i) {
          const auto w = adversarial_weights({neg_vals.row(i), c}, cfg.adv_temperature);
          std::copy(w.begin(), w.end(), weights.row(i));
        }
      }
      // sum_j p_qj log sig(-gamma - s_qj); weights enter as constants
      const Tape::NodeId log_neg =
          tape.log_sigmoid(tape.neg(tape.add_scalar(bucket.neg, cfg.margin)));
      const Tape::NodeId weighted = tape.sum(tape.mul(tape.constant(std::move(weights)), log_neg), 1);
      per_query = tape.add(per_query, weighted);
    }
    const Tape::NodeId bucket_sum = tape.sum_all(per_query);
    total = (total == Tape::kNone) ? bucket_sum : tape.add(total, bucket_sum);
  }
  if (total == Tape::kNone) throw ContractError("task loss: no score buckets");
  return tape.scale(total, -1.0 / static_cast<double>(n_queries));
}

}  // namespace kgx
