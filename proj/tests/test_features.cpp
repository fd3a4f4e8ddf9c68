#include <cmath>

#include "doctest.h"
#include "fd_check.hpp"
#include "kgx/features.hpp"
#include "test_fixtures.hpp"

using namespace kgx;
using testutil::make_task;
using testutil::random_tensor;

namespace {

struct Fixture {
  Tape tape;
  Tensor entity_bank;
  Tensor relation_bank;
  Tensor meta;
  Tensor w_in;
  Tensor w_out;
  FeaturizerInputs inputs;

  Fixture(std::size_t n_ents, std::size_t n_rels, std::size_t d, std::uint64_t seed,
          bool identity_transforms = false) {
    Rng rng(seed);
    entity_bank = random_tensor({n_ents, d}, rng);
    relation_bank = random_tensor({n_rels, d}, rng);
    meta = random_tensor({kNumMetaRelations, d}, rng);
    if (identity_transforms) {
      w_in = Tensor({d, d});
      w_out = Tensor({d, d});
      for (std::size_t i = 0; i < d; ++i) {
        w_in.row(i)[i] = 1.0;
        w_out.row(i)[i] = 1.0;
      }
    } else {
      w_in = random_tensor({d, d}, rng);
      w_out = random_tensor({d, d}, rng);
    }
    inputs = FeaturizerInputs{.entity_bank = tape.leaf(entity_bank),
                              .relation_bank = tape.leaf(relation_bank),
                              .meta_embeddings = tape.leaf(meta),
                              .w_ent_in = tape.leaf(w_in),
                              .w_ent_out = tape.leaf(w_out)};
  }
};

std::vector<double> row_vec(const Tensor& t, std::size_t i) {
  return {t.row(i), t.row(i) + t.cols()};
}

}  // namespace

TEST_CASE("unseen relation features average meta-relation embeddings") {
  // r2 unseen: chain (a,r1,b),(b,r2,c) gives in-edge [TH]; adding (a,r3,b)
  //ups it to [TH, TH] from two sources; (c,r2,d),(c,r4,c)... keep it simple:
  const std::size_t d = 4;

  SUBCASE("single in-edge kind: feature equals that embedding") {
    const Task task =
        make_task({{"a", "r1", "b"}, {"b", "r2", "c"}}, {{"a", "r1", "c"}}, {}, {"r2"});
    Fixture fx(task.graph.n_entities(), task.graph.n_relations(), d, 7);
    const auto rpg = build_rpg(task.graph.support(), task.graph.n_relations());
    const auto feats = relation_features(fx.tape, as_episode(task), rpg, fx.inputs, {});
    const Tensor& out = fx.tape.value(feats);
    const auto r2 = *task.graph.relations().find("r2");
    for (std::size_t j = 0; j < d; ++j) {
      CHECK(out.row(r2)[j] ==
            doctest::Approx(fx.meta.row(static_cast<std::size_t>(MetaRelation::kTH))[j]));
    }
    // the seen relation is a plain bank lookup
    const auto r1 = *task.graph.relations().find("r1");
    for (std::size_t j = 0; j < d; ++j) CHECK(out.row(r1)[j] == fx.relation_bank.row(r1)[j]);
  }

  SUBCASE("two in-edge kinds: mean of the two embeddings") {
    // (a,r1,b),(b,r2,c) -> (r1,TH,r2); (a,r3,c)... gives (r3,TT,r2)? tail c
    // shared by r2,r3 -> (r3,TT,r2) yes. In-edges of r2: TH from r1, TT from r3.
    const Task task = make_task({{"a", "r1", "b"}, {"b", "r2", "c"}, {"a", "r3", "c"}},
                                {{"a", "r1", "c"}}, {}, {"r2"});
    Fixture fx(task.graph.n_entities(), task.graph.n_relations(), d, 8);
    const auto rpg = build_rpg(task.graph.support(), task.graph.n_relations());
    const auto feats = relation_features(fx.tape, as_episode(task), rpg, fx.inputs, {});
    const Tensor& out = fx.tape.value(feats);
    const auto r2 = *task.graph.relations().find("r2");
    const auto th = row_vec(fx.meta, static_cast<std::size_t>(MetaRelation::kTH));
    const auto tt = row_vec(fx.meta, static_cast<std::size_t>(MetaRelation::kTT));
    for (std::size_t j = 0; j < d; ++j) {
      CHECK(out.row(r2)[j] == doctest::Approx((th[j] + tt[j]) / 2.0).epsilon(1e-12));
    }
  }

  SUBCASE("isolated unseen relation falls back to the mean of all four") {
    // r2 appears only in a query triple; its rel-node has no in-edges
    const Task task = make_task({{"a", "r1", "b"}}, {{"a", "r2", "b"}}, {}, {"r2"});
    Fixture fx(task.graph.n_entities(), task.graph.n_relations(), d, 9);
    const auto rpg = build_rpg(task.graph.support(), task.graph.n_relations());
    const auto feats = relation_features(fx.tape, as_episode(task), rpg, fx.inputs, {});
    const Tensor& out = fx.tape.value(feats);
    const auto r2 = *task.graph.relations().find("r2");
    for (std::size_t j = 0; j < d; ++j) {
      double mean = 0.0;
      for (std::size_t k = 0; k < kNumMetaRelations; ++k) mean += fx.meta.row(k)[j];
      CHECK(out.row(r2)[j] == doctest::Approx(mean / 4.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("unseen relation features stay in the convex hull of the meta embeddings") {
  Rng rng(31);
  for (int round = 0; round < 20; ++round) {
    // random small task, all relations unseen
    std::vector<LabelTriple> support;
    const std::size_t n = 3 + rng.index(8);
    for (std::size_t i = 0; i < n; ++i) {
      support.push_back({"e" + std::to_string(rng.index(5)), "r" + std::to_string(rng.index(3)),
                         "e" + std::to_string(rng.index(5))});
    }
    Task task = make_task(support, {});
    std::vector<std::string> all_rels;
    for (const auto& l : task.graph.relations().labels()) all_rels.push_back(l);
    task = make_task(support, {}, {}, all_rels);

    Fixture fx(task.graph.n_entities(), task.graph.n_relations(), 3, 100 + round);
    const auto rpg = build_rpg(task.graph.support(), task.graph.n_relations());
    const auto feats = relation_features(fx.tape, as_episode(task), rpg, fx.inputs, {});
    const Tensor& out = fx.tape.value(feats);

    // each output row must be an average over a sub-multiset of meta rows:
    // verify componentwise bounds of the hull (min/max of meta rows)
    for (std::size_t r = 0; r < task.graph.n_relations(); ++r) {
      for (std::size_t j = 0; j < 3; ++j) {
        double lo = fx.meta.row(0)[j], hi = fx.meta.row(0)[j];
        for (std::size_t k = 1; k < kNumMetaRelations; ++k) {
          lo = std::min(lo, fx.meta.row(k)[j]);
          hi = std::max(hi, fx.meta.row(k)[j]);
        }
        CHECK(out.row(r)[j] >= lo - 1e-12);
        CHECK(out.row(r)[j] <= hi + 1e-12);
      }
    }
  }
}

TEST_CASE("unseen entity features average direction-transformed relation features") {
  const std::size_t d = 4;

  SUBCASE("one out-going and one in-going incidence") {
    // e unseen with (e,r1,x) and (y,r2,e)
    const Task task = make_task({{"e", "r1", "x"}, {"y", "r2", "e"}}, {}, {"e"}, {});
    Fixture fx(task.graph.n_entities(), task.graph.n_relations(), d, 21);
    const Episode ep = as_episode(task);
    const auto rpg = build_rpg(task.graph.support(), task.graph.n_relations());
    const auto rel_feats = relation_features(fx.tape, ep, rpg, fx.inputs, {});
    const auto ent_feats = entity_features(fx.tape, ep, rel_feats, fx.inputs, {});
    const Tensor& out = fx.tape.value(ent_feats);
    const Tensor& rf = fx.tape.value(rel_feats);

    const auto e = *task.graph.entities().find("e");
    const auto r1 = *task.graph.relations().find("r1");
    const auto r2 = *task.graph.relations().find("r2");
    for (std::size_t j = 0; j < d; ++j) {
      double out_part = 0.0, in_part = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        out_part += rf.row(r1)[k] * fx.w_out.row(k)[j];
        in_part += rf.row(r2)[k] * fx.w_in.row(k)[j];
      }
      CHECK(out.row(e)[j] == doctest::Approx((out_part + in_part) / 2.0).epsilon(1e-12));
    }
    // seen entities stay bank lookups
    const auto x = *task.graph.entities().find("x");
    for (std::size_t j = 0; j < d; ++j) CHECK(out.row(x)[j] == fx.entity_bank.row(x)[j]);
  }

  SUBCASE("head-only single incidence gives w_out @ h_r") {
    const Task task = make_task({{"e", "r1", "x"}, {"x", "r1", "y"}}, {}, {"e"}, {});
    Fixture fx(task.graph.n_entities(), task.graph.n_relations(), d, 22);
    const Episode ep = as_episode(task);
    const auto rpg = build_rpg(task.graph.support(), task.graph.n_relations());
    const auto rel_feats = relation_features(fx.tape, ep, rpg, fx.inputs, {});
    const auto ent_feats = entity_features(fx.tape, ep, rel_feats, fx.inputs, {});
    const Tensor& out = fx.tape.value(ent_feats);
    const Tensor& rf = fx.tape.value(rel_feats);
    const auto e = *task.graph.entities().find("e");
    const auto r1 = *task.graph.relations().find("r1");
    for (std::size_t j = 0; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += rf.row(r1)[k] * fx.w_out.row(k)[j];
      CHECK(out.row(e)[j] == doctest::Approx(acc).epsilon(1e-12));
    }
  }

  SUBCASE("identity transforms and equal incident features reproduce that feature") {
    const Task task = make_task({{"e", "r1", "x"}, {"y", "r1", "e"}}, {}, {"e"}, {});
    Fixture fx(task.graph.n_entities(), task.graph.n_relations(), d, 23,
               /*identity_transforms=*/true);
    const Episode ep = as_episode(task);
    const auto rpg = build_rpg(task.graph.support(), task.graph.n_relations());
    const auto rel_feats = relation_features(fx.tape, ep, rpg, fx.inputs, {});
    const auto ent_feats = entity_features(fx.tape, ep, rel_feats, fx.inputs, {});
    const Tensor& out = fx.tape.value(ent_feats);
    const auto e = *task.graph.entities().find("e");
    const auto r1 = *task.graph.relations().find("r1");
    for (std::size_t j = 0; j < d; ++j) {
      CHECK(out.row(e)[j] == doctest::Approx(fx.relation_bank.row(r1)[j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("features are invariant to support triple order") {
  Rng rng(55);
  const std::vector<LabelTriple> support = {{"a", "r1", "b"}, {"b", "r2", "c"}, {"c", "r1", "a"},
                                            {"b", "r3", "a"}, {"c", "r2", "c"}};
  const Task task = make_task(support, {}, {"b", "c"}, {"r2"});

  auto run = [&](const std::vector<Triple>& sup) {
    Fixture fx(task.graph.n_entities(), task.graph.n_relations(), 4, 77);
    Episode ep = as_episode(task);
    ep.support = sup;
    const auto rpg = build_rpg(sup, task.graph.n_relations());
    const auto rel_feats = relation_features(fx.tape, ep, rpg, fx.inputs, {});
    const auto ent_feats = entity_features(fx.tape, ep, rel_feats, fx.inputs, {});
    return std::pair{fx.tape.value(rel_feats), fx.tape.value(ent_feats)};
  };

  const auto [rel_a, ent_a] = run(task.graph.support());
  std::vector<Triple> shuffled = task.graph.support();
  rng.shuffle(shuffled);
  const auto [rel_b, ent_b] = run(shuffled);
  for (std::size_t i = 0; i < rel_a.size(); ++i) {
    CHECK(rel_a[i] == doctest::Approx(rel_b[i]).epsilon(1e-12));
  }
  for (std::size_t i = 0; i < ent_a.size(); ++i) {
    CHECK(ent_a[i] == doctest::Approx(ent_b[i]).epsilon(1e-12));
  }
}

TEST_CASE("unseen entity with no support incidence violates the contract") {
  const Task task = make_task({{"a", "r1", "b"}}, {{"a", "r1", "c"}}, {"c"}, {});
  Fixture fx(task.graph.n_entities(), task.graph.n_relations(), 4, 3);
  const Episode ep = as_episode(task);
  const auto rpg = build_rpg(task.graph.support(), task.graph.n_relations());
  const auto rel_feats = relation_features(fx.tape, ep, rpg, fx.inputs, {});
  CHECK_THROWS_AS(entity_features(fx.tape, ep, rel_feats, fx.inputs, {}), ContractError);
}

TEST_CASE("gradients flow from the loss into the meta-relation embeddings") {
  // unseen r2 has a TH in-edge; the sum of its feature must move when h_TH moves
  const Task task = make_task({{"a", "r1", "b"}, {"b", "r2", "c"}}, {}, {"c"}, {"r2"});
  const Episode ep = as_episode(task);
  const auto rpg = build_rpg(task.graph.support(), task.graph.n_relations());

  Rng rng(91);
  std::vector<Tensor> inputs = {
      testutil::random_tensor({task.graph.n_entities(), 3}, rng),
      testutil::random_tensor({task.graph.n_relations(), 3}, rng),
      testutil::random_tensor({kNumMetaRelations, 3}, rng),
      testutil::random_tensor({3, 3}, rng),
      testutil::random_tensor({3, 3}, rng),
  };
  auto build = [&](Tape& tape, std::span<const Tape::NodeId> xs) {
    const FeaturizerInputs fin{.entity_bank = xs[0],
                               .relation_bank = xs[1],
                               .meta_embeddings = xs[2],
                               .w_ent_in = xs[3],
                               .w_ent_out = xs[4]};
    const auto rel_feats = relation_features(tape, ep, rpg, fin, {});
    const auto ent_feats = entity_features(tape, ep, rel_feats, fin, {});
    return tape.sum_all(tape.sigmoid(tape.concat_rows(rel_feats, ent_feats)));
  };
  testutil::check_gradients(inputs, build);

  // r2's TH in-edge means the TH row must carry nonzero gradient
  Tape tape;
  std::vector<Tape::NodeId> leaves;
  for (const Tensor& x : inputs) leaves.push_back(tape.leaf(x));
  const auto grads = tape.backward(build(tape, leaves));
  const Tensor& meta_grad = grads[leaves[2]];
  double th_norm = 0.0;
  for (std::size_t j = 0; j < 3; ++j) {
    th_norm += std::fabs(meta_grad.row(static_cast<std::size_t>(MetaRelation::kTH))[j]);
  }
  CHECK(th_norm > 0.0);
}

TEST_CASE("feature ablations draw bounded random vectors") {
  const Task task = make_task({{"a", "r1", "b"}, {"b", "r2", "c"}}, {}, {"c"}, {"r2"});
  const Episode ep = as_episode(task);
  const auto rpg = build_rpg(task.graph.support(), task.graph.n_relations());
  Fixture fx(task.graph.n_entities(), task.graph.n_relations(), 4, 61);

  Rng ablation_rng(5);
  FeatureOptions opts;
  opts.randomize_unseen_relations = true;
  opts.randomize_unseen_entities = true;
  opts.ablation_rng = &ablation_rng;

  const auto rel_feats = relation_features(fx.tape, ep, rpg, fx.inputs, opts);
  const auto ent_feats = entity_features(fx.tape, ep, rel_feats, fx.inputs, opts);

  auto check_bounds = [](const Tensor& out, const Tensor& bank, std::uint32_t row) {
    for (std::size_t j = 0; j < bank.cols(); ++j) {
      double lo = bank.row(0)[j], hi = bank.row(0)[j];
      for (std::size_t i = 1; i < bank.rows(); ++i) {
        lo = std::min(lo, bank.row(i)[j]);
        hi = std::max(hi, bank.row(i)[j]);
      }
      CHECK(out.row(row)[j] >= lo);
      CHECK(out.row(row)[j] <= hi);
    }
  };
  check_bounds(fx.tape.value(rel_feats), fx.relation_bank, *task.graph.relations().find("r2"));
  check_bounds(fx.tape.value(ent_feats), fx.entity_bank, *task.graph.entities().find("c"));

  // random replacements are constants: no gradient reaches the meta embeddings
  const auto loss = fx.tape.sum_all(fx.tape.concat_rows(rel_feats, ent_feats));
  const auto grads = fx.tape.backward(loss);
  const Tensor& meta_grad = grads[fx.inputs.meta_embeddings];
  for (std::size_t i = 0; i < meta_grad.size(); ++i) CHECK(meta_grad[i] == 0.0);

  // missing rng is a contract error
  FeatureOptions no_rng;
  no_rng.randomize_unseen_relations = true;
  Tape tape2;
  Fixture fx2(task.graph.n_entities(), task.graph.n_relations(), 4, 62);
  CHECK_THROWS_AS(relation_features(fx2.tape, ep, rpg, fx2.inputs, no_rng), ContractError);
}
