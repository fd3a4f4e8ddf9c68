#include "kgx/evaluator.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <sstream>
#include <thread>

#include "kgx/sampler.hpp"

namespace kgx {

namespace {

constexpr std::array<const char*, 5> kRowOrder = {"u_ent", "u_rel", "u_both", "all_seen", "all"};

constexpr std::uint64_t kEvalStream = 0x65762e7374726d01ULL;

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd over_repeats(std::span<const double> xs) {
  MeanStd out;
  for (double x : xs) out.mean += x;
  out.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double sq = 0.0;
    for (double x : xs) sq += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(sq / static_cast<double>(xs.size() - 1));
  }
  return out;
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6f", x);
  return buf;
}

}  // namespace

void EvalConfig::validate() const {
  if (n_candidates < 1) throw ContractError("evaluation: n_candidates must be >= 1");
  if (n_repeats < 1) throw ContractError("evaluation: n_repeats must be >= 1");
}

// metrics_oracle below restates the same definitions independently and the
// two must agree exactly.
RankMetrics aggregate_ranks(std::span<const double> ranks) {
  RankMetrics m;
  double rr = 0.0, h1 = 0.0, h10 = 0.0;
  for (double r : ranks) {
    rr += 1.0 / r;
    if (r <= 1.0) h1 += 1.0;
    if (r <= 10.0) h10 += 1.0;
  }
  const auto n = static_cast<double>(ranks.size());
  m.mrr = rr / n;
  m.hits1 = h1 / n;
  m.hits10 = h10 / n;
  return m;
}

RankMetrics metrics_oracle(std::span<const double> ranks) {
  if (ranks.empty()) throw ContractError("metrics_oracle: empty rank list");
  RankMetrics m;
  double rr = 0.0;
  for (double r : ranks) rr += 1.0 / r;
  m.mrr = rr / static_cast<double>(ranks.size());
  double h1 = 0.0;
  for (double r : ranks) {
    if (r <= 1.0) h1 += 1.0;
  }
  m.hits1 = h1 / static_cast<double>(ranks.size());
  double h10 = 0.0;
  for (double r : ranks) {
    if (r <= 10.0) h10 += 1.0;
  }
  m.hits10 = h10 / static_cast<double>(ranks.size());
  return m;
}

const CategoryMetrics* EvalReport::find(const std::string& category) const {
  for (const auto& [name, metrics] : rows) {
    if (name == category) return &metrics;
  }
  return nullptr;
}

std::string EvalReport::to_tsv() const {
  std::ostringstream out;
  out << "category\tcount\tmrr\tmrr_std\thits1\thits1_std\thits10\thits10_std\n";
  for (const auto& [name, m] : rows) {
    out << name << '\t' << m.count << '\t' << fmt(m.mrr_mean) << '\t' << fmt(m.mrr_std) << '\t'
        << fmt(m.hits1_mean) << '\t' << fmt(m.hits1_std) << '\t' << fmt(m.hits10_mean) << '\t'
        << fmt(m.hits10_std) << '\n';
  }
  return out.str();
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-10s %8s %18s %10s %18s\n", "category", "queries",
                "MRR", "Hits@1", "Hits@10");
  out << line;
  for (const auto& [name, m] : rows) {
    std::snprintf(line, sizeof(line), "%-10s %8zu %10.4f +-%5.4f %10.4f %10.4f +-%5.4f\n",
                  name.c_str(), m.count, m.mrr_mean, m.mrr_std, m.hits1_mean, m.hits10_mean,
                  m.hits10_std);
    out << line;
  }
  return out.str();
}

EvalReport EvalReport::from_tsv(const std::string& text) {
  EvalReport report;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty eval report");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string name;
    CategoryMetrics m;
    if (!std::getline(ls, name, '\t')) throw ParseError("bad eval report line: " + line);
    ls >> m.count >> m.mrr_mean >> m.mrr_std >> m.hits1_mean >> m.hits1_std >> m.hits10_mean >>
        m.hits10_std;
    if (ls.fail()) throw ParseError("bad eval report line: " + line);
    report.rows.emplace_back(name, m);
  }
  return report;
}

EvalReport evaluate(const TripleScorer& scorer, const KnowledgeGraph& eval_kg,
                    const SeenMask& mask, const EvalConfig& cfg) {
  cfg.validate();
  const auto& queries = eval_kg.query();
  if (queries.empty()) throw ContractError("evaluate: evaluation KG has no query triples");

  std::vector<QueryCategory> category(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) category[q] = categorize(queries[q], mask);

  const Rng base(cfg.rng_seed);
  // per category (+ "all" at index 4): one metric row per repeat
  std::array<std::vector<double>, 5> mrr, hits1, hits10;
  std::array<std::size_t, 5> counts{};
  for (std::size_t q = 0; q < queries.size(); ++q) ++counts[static_cast<std::size_t>(category[q])];
  counts[4] = queries.size();

  // One trial = one (query, corrupted slot) ranking. Each trial draws its
  // candidates from a stream keyed by (repeat, query, slot) and writes into
  // its own slot, so the result is identical for any worker count.
  auto run_trial = [&](std::size_t rep, std::size_t q, int slot) {
    const Triple& truth = queries[q];
    Rng rng = base.derive({kEvalStream, rep, q, static_cast<std::uint64_t>(slot)});
    const auto negs =
        sample_negatives(truth, eval_kg, cfg.n_candidates,
                         slot == 0 ? CorruptionSlot::kHead : CorruptionSlot::kTail, rng);
    const double true_score = scorer(truth);
    double greater = 0.0, equal = 0.0;
    for (const Triple& cand : negs.triples) {
      if (eval_kg.contains(cand)) {
        throw ContractError("evaluate: candidate collides with a support/query triple");
      }
      const double s = scorer(cand);
      if (s > true_score) greater += 1.0;
      else if (s == true_score) equal += 1.0;
    }
    return 1.0 + greater + equal / 2.0;
  };

  std::vector<double> trial_ranks(2 * queries.size());
  for (std::size_t rep = 0; rep < cfg.n_repeats; ++rep) {
    const std::size_t n_workers =
        std::clamp<std::size_t>(cfg.threads, 1, std::max<std::size_t>(queries.size(), 1));
    if (n_workers <= 1) {
      for (std::size_t q = 0; q < queries.size(); ++q) {
        trial_ranks[2 * q] = run_trial(rep, q, 0);
        trial_ranks[2 * q + 1] = run_trial(rep, q, 1);
      }
    } else {
      std::vector<std::thread> workers;
      std::atomic<std::size_t> next{0};
      std::exception_ptr failure;
      std::mutex failure_mutex;
      for (std::size_t w = 0; w < n_workers; ++w) {
        workers.emplace_back([&] {
          try {
            for (std::size_t q = next.fetch_add(1); q < queries.size(); q = next.fetch_add(1)) {
              trial_ranks[2 * q] = run_trial(rep, q, 0);
              trial_ranks[2 * q + 1] = run_trial(rep, q, 1);
            }
          } catch (...) {
            const std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        });
      }
      for (auto& t : workers) t.join();
      if (failure) std::rethrow_exception(failure);
    }

    std::array<std::vector<double>, 5> ranks;
    for (std::size_t q = 0; q < queries.size(); ++q) {
      const auto c = static_cast<std::size_t>(category[q]);
      for (int slot = 0; slot < 2; ++slot) {
        ranks[c].push_back(trial_ranks[2 * q + slot]);
        ranks[4].push_back(trial_ranks[2 * q + slot]);
      }
    }
    for (std::size_t c = 0; c < 5; ++c) {
      if (ranks[c].empty()) continue;
      const RankMetrics m = aggregate_ranks(ranks[c]);
      mrr[c].push_back(m.mrr);
      hits1[c].push_back(m.hits1);
      hits10[c].push_back(m.hits10);
    }
  }

  EvalReport report;
  for (std::size_t c = 0; c < 5; ++c) {
    if (counts[c] == 0) continue;
    CategoryMetrics cm;
    cm.count = counts[c];
    const MeanStd ms_mrr = over_repeats(mrr[c]);
    const MeanStd ms_h1 = over_repeats(hits1[c]);
    const MeanStd ms_h10 = over_repeats(hits10[c]);
    cm.mrr_mean = ms_mrr.mean;
    cm.mrr_std = ms_mrr.std;
    cm.hits1_mean = ms_h1.mean;
    cm.hits1_std = ms_h1.std;
    cm.hits10_mean = ms_h10.mean;
    cm.hits10_std = ms_h10.std;
    report.rows.emplace_back(kRowOrder[c], cm);
  }
  return report;
}

std::map<std::string, std::size_t> category_counts(const KnowledgeGraph& eval_kg,
                                                   const SeenMask& mask) {
  std::map<std::string, std::size_t> counts;
  for (const Triple& t : eval_kg.query()) ++counts[category_name(categorize(t, mask))];
  return counts;
}

}  // namespace kgx
