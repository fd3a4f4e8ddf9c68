#include <cmath>
#include <filesystem>
#include <limits>

#include "doctest.h"
#include "fd_check.hpp"
#include "kgx/baseline.hpp"
#include "kgx/synthetic.hpp"
#include "test_fixtures.hpp"

using namespace kgx;
using testutil::make_task;
using testutil::random_tensor;

namespace {

std::vector<double> unit_complex(Rng& rng, std::size_t pairs) {
  std::vector<double> out(2 * pairs);
  for (std::size_t i = 0; i < pairs; ++i) {
    const double theta = rng.uniform(-3.14159265358979, 3.14159265358979);
    out[2 * i] = std::cos(theta);
    out[2 * i + 1] = std::sin(theta);
  }
  return out;
}

}  // namespace

TEST_CASE("inversion formula reference values") {
  SUBCASE("transe tail from head and relation") {
    const std::vector<double> h = {1.0, 0.0}, r = {0.0, 1.0};
    const auto t = f_hr2t(h, r, ScoreFunction::kTransE);
    CHECK(t == std::vector<double>{1.0, 1.0});
  }
  SUBCASE("rotate head from tail and unit relation") {
    // t = i, r = i  ->  h = t / r = 1
    const std::vector<double> t = {0.0, 1.0}, r = {0.0, 1.0};
    const auto h = f_tr2h(t, r, ScoreFunction::kRotatE);
    CHECK(h[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(h[1] == doctest::Approx(0.0).epsilon(1e-15));
  }
  SUBCASE("rotate zero-modulus divisor raises a domain error") {
    const std::vector<double> t = {1.0, 0.0}, zero = {0.0, 0.0};
    CHECK_THROWS_AS(f_tr2h(t, zero, ScoreFunction::kRotatE), DomainError);
  }
}

TEST_CASE("transe round trip is exact to machine epsilon") {
  Rng rng(3);
  for (int round = 0; round < 100; ++round) {
    const Tensor h = random_tensor({8}, rng), r = random_tensor({8}, rng);
    const auto t = f_hr2t(h.data(), r.data(), ScoreFunction::kTransE);
    const auto h_back = f_tr2h(t, r.data(), ScoreFunction::kTransE);
    const auto r_back = f_ht2r(h.data(), t, ScoreFunction::kTransE);
    for (std::size_t i = 0; i < 8; ++i) {
      // (h + r) - r rounds once per lane
      const double eps =
          4.0 * std::numeric_limits<double>::epsilon() * (std::fabs(h[i]) + std::fabs(r[i]) + 1.0);
      CHECK(std::fabs(h_back[i] - h[i]) <= eps);
      CHECK(std::fabs(r_back[i] - r[i]) <= eps);
    }
  }
}

TEST_CASE("complex and rotate round trips hold for unit-modulus relations") {
  Rng rng(4);
  for (int round = 0; round < 1000; ++round) {
    const Tensor h = random_tensor({8}, rng);
    const std::vector<double> r = unit_complex(rng, 4);

    const auto t_cx = f_hr2t(h.data(), r, ScoreFunction::kComplEx);
    const auto h_cx = f_tr2h(t_cx, r, ScoreFunction::kComplEx);
    for (std::size_t i = 0; i < 8; ++i) {
      CHECK(h_cx[i] == doctest::Approx(h[i]).epsilon(1e-10));
    }

    const auto t_ro = f_hr2t(h.data(), r, ScoreFunction::kRotatE);
    const auto h_ro = f_tr2h(t_ro, r, ScoreFunction::kRotatE);
    for (std::size_t i = 0; i < 8; ++i) {
      CHECK(h_ro[i] == doctest::Approx(h[i]).epsilon(1e-10));
    }
  }
}

TEST_CASE("kge training overfits a single triple") {
  const KnowledgeGraph train =
      KnowledgeGraph::build({{"a", "r", "b"}, {"c", "r", "d"}, {"d", "r", "a"}}, {});
  BaselineTrainConfig cfg;
  cfg.dim = 8;
  cfg.max_epochs = 300;
  cfg.learning_rate = 0.05;
  cfg.loss.margin = 2.0;
  cfg.loss.n_negatives = 4;
  std::vector<std::string> log;
  const KgeModel model = train_kge(train, ScoreFunction::kTransE, cfg, &log);

  // training loss decreased
  const double first = std::stod(log.front().substr(log.front().find('\t') + 1));
  const double last = std::stod(log.back().substr(log.back().find('\t') + 1));
  CHECK(last < first);

  // the true triple outranks every corruption of its tail
  const Tensor& ent = model.store.value("entity_emb");
  const Tensor& rel = model.store.value("relation_emb");
  auto score = [&](EntityId h, RelationId r, EntityId t) {
    return score_triple({ent.row(h), 8}, {rel.row(r), 8}, {ent.row(t), 8},
                        ScoreFunction::kTransE);
  };
  const auto a = *train.entities().find("a");
  const auto b = *train.entities().find("b");
  const double true_score = score(a, 0, b);
  for (EntityId e = 0; e < train.n_entities(); ++e) {
    if (e == b || train.contains({a, 0, e})) continue;
    CHECK(true_score > score(a, 0, e));
  }
}

TEST_CASE("kge training is deterministic in the seed") {
  const KnowledgeGraph train = make_synthetic_kg({.n_groups = 4, .members_per_group = 5});
  BaselineTrainConfig cfg;
  cfg.dim = 4;
  cfg.max_epochs = 2;
  const KgeModel a = train_kge(train, ScoreFunction::kDistMult, cfg);
  const KgeModel b = train_kge(train, ScoreFunction::kDistMult, cfg);
  CHECK(a.store.bitwise_equal(b.store));
}

TEST_CASE("derive_unseen anchors, averages, and falls back in one pass") {
  // seen: a, b, r1; unseen: u (anchored twice), v (reachable only through u),
  // w_rel (anchored), z_rel (no seen-anchored triple)
  const Task task = make_task(
      {
          {"a", "r1", "u"},   // f_hr2t anchor for u
          {"u", "r1", "b"},   // f_tr2h anchor for u
          {"u", "r1", "v"},   // v only reachable through unseen u -> fallback
          {"a", "w_rel", "b"},  // f_ht2r anchor for w_rel
          {"a", "z_rel", "u"},  // z_rel anchored on unseen u -> fallback
      },
      {{"b", "r1", "u"}}, {"u", "v"}, {"w_rel", "z_rel"});

  // training vocabulary: the seen components only
  const KnowledgeGraph train = KnowledgeGraph::build({{"a", "r1", "b"}}, {});
  KgeModel model;
  model.score_fn = ScoreFunction::kTransE;
  model.dim = 2;
  model.entities = train.entities();
  model.relations = train.relations();
  model.store.add("entity_emb", Tensor({2, 2}, {1.0, 2.0, 10.0, 20.0}));  // a, b
  model.store.add("relation_emb", Tensor({1, 2}, {0.5, -0.5}));           // r1

  DerivationStats stats;
  const ExtendedEmbeddings ext = derive_unseen(model, task.graph, task.mask, &stats);
  CHECK(stats.anchored_entities == 1);
  CHECK(stats.fallback_entities == 1);
  CHECK(stats.anchored_relations == 1);
  CHECK(stats.fallback_relations == 1);

  const auto u = *task.graph.entities().find("u");
  const auto v = *task.graph.entities().find("v");
  const auto a = *task.graph.entities().find("a");
  // u: mean of f_hr2t(a, r1) = (1.5, 1.5) and f_tr2h(b, r1) = (9.5, 20.5)
  CHECK(ext.entities.row(u)[0] == doctest::Approx((1.5 + 9.5) / 2.0));
  CHECK(ext.entities.row(u)[1] == doctest::Approx((1.5 + 20.5) / 2.0));
  // v: global mean of the trained entity embeddings
  CHECK(ext.entities.row(v)[0] == doctest::Approx(5.5));
  CHECK(ext.entities.row(v)[1] == doctest::Approx(11.0));
  // seen components are identity extensions
  CHECK(ext.entities.row(a)[0] == 1.0);

  const auto w_rel = *task.graph.relations().find("w_rel");
  const auto z_rel = *task.graph.relations().find("z_rel");
  // w_rel: f_ht2r(a, b) = b - a = (9, 18)
  CHECK(ext.relations.row(w_rel)[0] == doctest::Approx(9.0));
  CHECK(ext.relations.row(w_rel)[1] == doctest::Approx(18.0));
  // z_rel: global mean of relation embeddings = the only row
  CHECK(ext.relations.row(z_rel)[0] == doctest::Approx(0.5));

  // the derivation order lists exactly the unseen components
  const DerivationOrder order = one_pass_inference_order(task.graph, task.mask);
  CHECK(order.entities == std::vector<EntityId>{u, v});
  CHECK(order.relations.size() == 2);
}

TEST_CASE("fully seen test KG derives the identity extension") {
  const KnowledgeGraph train = KnowledgeGraph::build({{"a", "r", "b"}, {"b", "r", "c"}}, {});
  const Task task = make_task({{"a", "r", "b"}}, {{"b", "r", "c"}});
  BaselineTrainConfig cfg;
  cfg.dim = 4;
  cfg.max_epochs = 1;
  const KgeModel model = train_kge(train, ScoreFunction::kDistMult, cfg);
  const ExtendedEmbeddings ext = derive_unseen(model, task.graph, task.mask, nullptr);
  for (std::uint32_t e = 0; e < task.graph.n_entities(); ++e) {
    const auto g = *model.entities.find(task.graph.entities().label(e));
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(ext.entities.row(e)[j] == model.store.value("entity_emb").row(g)[j]);
    }
  }
}

TEST_CASE("complex score consistency of the derived tail") {
  // s(h, r, f_hr2t(h, r)) should beat random tails of the same norm
  Rng rng(9);
  int wins = 0, rounds = 200;
  for (int round = 0; round < rounds; ++round) {
    const Tensor h = random_tensor({8}, rng);
    const std::vector<double> r = unit_complex(rng, 4);
    const auto t = f_hr2t(h.data(), r, ScoreFunction::kComplEx);
    const double derived = score_triple(h.data(), r, t, ScoreFunction::kComplEx);
    double norm = 0.0;
    for (double x : t) norm += x * x;
    Tensor other = random_tensor({8}, rng);
    double onorm = 0.0;
    for (double x : other.data()) onorm += x * x;
    for (double& x : other.data()) x *= std::sqrt(norm / onorm);
    const double random_score = score_triple(h.data(), r, other.data(), ScoreFunction::kComplEx);
    wins += (derived >= random_score);
  }
  CHECK(wins == rounds);
}

TEST_CASE("rotate derivation skips zero-modulus anchors with a warning count") {
  // unseen relation anchored on a head entity with a (0, 0) complex pair:
  // t / h is undefined there, so the anchor is skipped and the relation
  // falls back to the global mean
  const Task task = testutil::make_task({{"a", "r1", "b"}, {"a", "u", "b"}}, {{"b", "r1", "a"}},
                                        {}, {"u"});
  const KnowledgeGraph train = KnowledgeGraph::build({{"a", "r1", "b"}}, {});
  KgeModel model;
  model.score_fn = ScoreFunction::kRotatE;
  model.dim = 2;
  model.entities = train.entities();
  model.relations = train.relations();
  model.store.add("entity_emb", Tensor({2, 2}, {0.0, 0.0, 1.0, 2.0}));  // a is zero-modulus
  model.store.add("relation_emb", Tensor({1, 1}, {0.5}));               // phase

  DerivationStats stats;
  const ExtendedEmbeddings ext = derive_unseen(model, task.graph, task.mask, &stats);
  CHECK(stats.skipped_anchors == 1);
  CHECK(stats.fallback_relations == 1);
  const auto u = *task.graph.relations().find("u");
  // global mean of the single unit-complex relation row
  CHECK(ext.relations.row(u)[0] == doctest::Approx(std::cos(0.5)));
  CHECK(ext.relations.row(u)[1] == doctest::Approx(std::sin(0.5)));
}

TEST_CASE("baseline checkpoint round trip") {
  const KnowledgeGraph train = make_synthetic_kg({.n_groups = 4, .members_per_group = 5});
  BaselineTrainConfig cfg;
  cfg.dim = 4;
  cfg.max_epochs = 1;
  const KgeModel model = train_kge(train, ScoreFunction::kRotatE, cfg);
  const auto file = std::filesystem::temp_directory_path() / "kgx_tests" / "baseline.ckpt";
  std::filesystem::create_directories(file.parent_path());
  model.save(file);
  const KgeModel back = KgeModel::load(file);
  CHECK(back.score_fn == ScoreFunction::kRotatE);
  CHECK(back.dim == 4);
  CHECK(back.store.bitwise_equal(model.store));
  CHECK(back.entities.labels() == model.entities.labels());
}
