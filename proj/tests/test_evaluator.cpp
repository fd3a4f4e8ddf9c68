#include <cmath>

#include "doctest.h"
#include "kgx/evaluator.hpp"
#include "kgx/rng.hpp"
#include "test_fixtures.hpp"

using namespace kgx;
using testutil::make_task;

namespace {

// deterministic pseudo-random score per triple, independent of call order
double hash_score(const Triple& t, std::uint64_t salt) {
  Rng rng(salt);
  return rng.derive({t.head, t.relation, t.tail}).next_double();
}

Task eval_fixture(std::size_t n_entities, std::size_t n_queries, std::uint64_t seed) {
  // sparse graph over many entities so 50 filtered candidates always exist
  Rng rng(seed);
  std::vector<LabelTriple> support, query;
  auto ent = [](std::size_t i) { return "e" + std::to_string(i); };
  for (std::size_t i = 0; i + 1 < n_entities; ++i) {
    support.push_back({ent(i), "r0", ent(i + 1)});
  }
  for (std::size_t q = 0; q < n_queries; ++q) {
    query.push_back({ent(rng.index(n_entities)), "r0", ent(rng.index(n_entities))});
  }
  return make_task(support, query, {ent(1)}, {});
}

}  // namespace

TEST_CASE("metrics oracle reference values") {
  SUBCASE("ranks 1, 2, 10") {
    const std::vector<double> ranks = {1.0, 2.0, 10.0};
    const RankMetrics m = metrics_oracle(ranks);
    CHECK(m.mrr == doctest::Approx((1.0 + 0.5 + 0.1) / 3.0).epsilon(1e-15));
    CHECK(m.hits1 == doctest::Approx(1.0 / 3.0));
    CHECK(m.hits10 == 1.0);
  }
  SUBCASE("all first") {
    const std::vector<double> ranks = {1.0, 1.0};
    const RankMetrics m = metrics_oracle(ranks);
    CHECK(m.mrr == 1.0);
    CHECK(m.hits1 == 1.0);
    CHECK(m.hits10 == 1.0);
  }
  SUBCASE("rank 11 misses the hits@10 cutoff") {
    const std::vector<double> ranks = {11.0};
    CHECK(metrics_oracle(ranks).hits10 == 0.0);
  }
  SUBCASE("empty list is a contract error") {
    CHECK_THROWS_AS(metrics_oracle({}), ContractError);
  }
}

TEST_CASE("a perfect scorer reaches MRR 1") {
  const Task task = eval_fixture(80, 25, 3);
  const TripleScorer perfect = [&](const Triple& t) {
    return task.graph.contains(t) ? 1000.0 : hash_score(t, 1);
  };
  EvalConfig cfg;
  cfg.n_repeats = 2;
  const EvalReport report = evaluate(perfect, task.graph, task.mask, cfg);
  const CategoryMetrics* all = report.find("all");
  REQUIRE(all != nullptr);
  CHECK(all->mrr_mean == 1.0);
  CHECK(all->hits1_mean == 1.0);
  CHECK(all->mrr_std == 0.0);
}

TEST_CASE("identical scores rank at the mean tie position 26") {
  const Task task = eval_fixture(80, 10, 4);
  const TripleScorer flat = [](const Triple&) { return 0.25; };
  EvalConfig cfg;
  cfg.n_repeats = 1;
  const EvalReport report = evaluate(flat, task.graph, task.mask, cfg);
  const CategoryMetrics* all = report.find("all");
  REQUIRE(all != nullptr);
  CHECK(all->mrr_mean == doctest::Approx(1.0 / 26.0).epsilon(1e-12));
  CHECK(all->hits1_mean == 0.0);
  CHECK(all->hits10_mean == 0.0);
}

TEST_CASE("categories with no queries are absent and counts add up") {
  // the only query touches the unseen entity e1 with a seen relation
  const Task task = make_task({{"e0", "r0", "e1"}, {"e1", "r0", "e2"}}, {{"e1", "r0", "e0"}},
                              {"e1"}, {});
  EvalConfig cfg;
  cfg.n_repeats = 1;
  const EvalReport report =
      evaluate([](const Triple& t) { return hash_score(t, 9); }, task.graph, task.mask, cfg);
  CHECK(report.find("u_ent") != nullptr);
  CHECK(report.find("u_rel") == nullptr);
  CHECK(report.find("u_both") == nullptr);
  CHECK(report.find("all_seen") == nullptr);
  std::size_t sum = 0;
  for (const auto& [name, m] : report.rows) {
    if (name != "all") sum += m.count;
  }
  CHECK(sum == report.find("all")->count);
}

TEST_CASE("monotone transforms of the scores leave the report unchanged") {
  const Task task = eval_fixture(60, 30, 5);
  EvalConfig cfg;
  cfg.n_repeats = 2;
  const TripleScorer raw = [](const Triple& t) { return hash_score(t, 31) - 0.5; };
  const TripleScorer squashed = [&raw](const Triple& t) {
    return std::tanh(3.0 * raw(t)) * 7.0 + 2.0;
  };
  const EvalReport a = evaluate(raw, task.graph, task.mask, cfg);
  const EvalReport b = evaluate(squashed, task.graph, task.mask, cfg);
  CHECK(a.to_tsv() == b.to_tsv());
}

TEST_CASE("fixed seed gives a byte-identical report") {
  const Task task = eval_fixture(60, 30, 6);
  EvalConfig cfg;
  cfg.n_repeats = 3;
  cfg.rng_seed = 12345;
  const TripleScorer scorer = [](const Triple& t) { return hash_score(t, 77); };
  const EvalReport a = evaluate(scorer, task.graph, task.mask, cfg);
  const EvalReport b = evaluate(scorer, task.graph, task.mask, cfg);
  CHECK(a.to_tsv() == b.to_tsv());

  cfg.rng_seed = 54321;
  const EvalReport c = evaluate(scorer, task.graph, task.mask, cfg);
  CHECK(a.to_tsv() != c.to_tsv());  // candidates differ
}

TEST_CASE("report tsv round trip and category counts helper") {
  const Task task = eval_fixture(60, 12, 7);
  EvalConfig cfg;
  cfg.n_repeats = 1;
  const EvalReport report =
      evaluate([](const Triple& t) { return hash_score(t, 5); }, task.graph, task.mask, cfg);
  const EvalReport back = EvalReport::from_tsv(report.to_tsv());
  REQUIRE(back.rows.size() == report.rows.size());
  for (std::size_t i = 0; i < back.rows.size(); ++i) {
    CHECK(back.rows[i].first == report.rows[i].first);
    CHECK(back.rows[i].second.count == report.rows[i].second.count);
    CHECK(back.rows[i].second.mrr_mean == doctest::Approx(report.rows[i].second.mrr_mean));
  }

  const auto counts = category_counts(task.graph, task.mask);
  std::size_t total = 0;
  for (const auto& [name, n] : counts) total += n;
  CHECK(total == task.graph.query().size());
}

TEST_CASE("worker count does not change the report") {
  const Task task = eval_fixture(60, 40, 11);
  const TripleScorer scorer = [](const Triple& t) { return hash_score(t, 99); };
  EvalConfig cfg;
  cfg.n_repeats = 2;
  const EvalReport serial = evaluate(scorer, task.graph, task.mask, cfg);
  cfg.threads = 4;
  const EvalReport parallel = evaluate(scorer, task.graph, task.mask, cfg);
  CHECK(serial.to_tsv() == parallel.to_tsv());
}

TEST_CASE("random scorer lands near the closed-form random-ranking MRR") {
  // expected MRR for a uniform rank among 51 = H_51 / 51
  double h51 = 0.0;
  for (int k = 1; k <= 51; ++k) h51 += 1.0 / k;
  const double expect = h51 / 51.0;

  const Task task = eval_fixture(120, 250, 8);
  EvalConfig cfg;
  cfg.n_repeats = 2;  // 250 queries x 2 slots x 2 repeats = 1000 trials
  const EvalReport report =
      evaluate([](const Triple& t) { return hash_score(t, 123); }, task.graph, task.mask, cfg);
  const double got = report.find("all")->mrr_mean;
  // loose 5-sigma band for the unit test; the acceptance suite pins 3 sigma
  // over 10,000 trials
  const double sigma = 0.155 / std::sqrt(1000.0);
  CHECK(std::fabs(got - expect) < 5.0 * sigma);
}
