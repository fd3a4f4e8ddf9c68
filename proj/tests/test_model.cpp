#include <map>
#include <filesystem>

#include "doctest.h"
#include "fd_check.hpp"
#include "kgx/model.hpp"
#include "test_fixtures.hpp"

using namespace kgx;
using testutil::make_task;

namespace {

Task small_task() {
  // mixed seen/unseen task with enough structure to exercise every path
  return make_task({{"a", "r1", "b"},
                    {"b", "r2", "c"},
                    {"c", "r1", "d"},
                    {"d", "r3", "a"},
                    {"b", "r3", "d"}},
                   {{"a", "r2", "c"}, {"d", "r1", "b"}}, {"c", "d"}, {"r2"});
}

std::vector<std::vector<Triple>> fixed_negatives(const Episode& ep, std::size_t n,
                                                 std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<Triple>> out;
  for (const Triple& q : ep.query) {
    auto head = sample_negatives(q, *ep.graph, n / 2, CorruptionSlot::kHead, rng);
    auto tail = sample_negatives(q, *ep.graph, n - n / 2, CorruptionSlot::kTail, rng);
    std::vector<Triple> negs = std::move(head.triples);
    negs.insert(negs.end(), tail.triples.begin(), tail.triples.end());
    out.push_back(std::move(negs));
  }
  return out;
}

}  // namespace

TEST_CASE("model config dimension bookkeeping") {
  ModelConfig cfg;
  cfg.score_fn = ScoreFunction::kRotatE;
  CHECK(cfg.relation_out_dim() == 16);  // half of the 32-dim entity embedding
  cfg.score_fn = ScoreFunction::kComplEx;
  CHECK(cfg.relation_out_dim() == 32);
  cfg.score_fn = ScoreFunction::kTransE;
  CHECK(cfg.relation_out_dim() == 32);

  cfg.embedding_dim = 31;
  cfg.score_fn = ScoreFunction::kRotatE;
  CHECK_THROWS_AS(cfg.validate(), ContractError);

  ModelConfig round;
  round.score_fn = ScoreFunction::kRotatE;
  round.ablations = AblationSet::parse("meta,relfeat");
  round.loss.margin = 6.5;
  const ModelConfig back = ModelConfig::deserialize(round.serialize());
  CHECK(back.score_fn == ScoreFunction::kRotatE);
  CHECK(back.ablations.meta);
  CHECK(back.ablations.rel_feat);
  CHECK_FALSE(back.ablations.gnn);
  CHECK(back.loss.margin == 6.5);
}

TEST_CASE("episode loss gradient passes finite differences for every score function") {
  const Task task = small_task();
  const Episode ep = as_episode(task);
  const RelationPositionGraph rpg = build_rpg(task.graph.support(), task.graph.n_relations());

  for (const ScoreFunction fn : {ScoreFunction::kTransE, ScoreFunction::kDistMult,
                                 ScoreFunction::kComplEx, ScoreFunction::kRotatE}) {
    CAPTURE(score_function_name(fn));
    ModelConfig cfg;
    cfg.feature_dim = 4;
    cfg.hidden_dim = 4;
    cfg.embedding_dim = 4;
    cfg.score_fn = fn;
    cfg.loss.margin = 1.5;
    cfg.loss.n_negatives = 3;
    cfg.loss.adv_temperature = 1.0;
    const ExtrapolationModel model(cfg, task.graph.n_entities(), task.graph.n_relations(), 99);
    const auto negatives = fixed_negatives(ep, cfg.loss.n_negatives, 5);

    // pin the adversarial weights at the base point so finite differences
    // see the same function backward differentiates
    std::vector<Tensor> fixed_weights;
    {
      Tape tape;
      const auto bound = model.bind(tape);
      model.episode_loss(tape, bound, ep, rpg, negatives);
      // recompute the bucket weights exactly as the loss does
      std::map<std::size_t, std::vector<std::size_t>> by_count;
      for (std::size_t q = 0; q < ep.query.size(); ++q) by_count[negatives[q].size()].push_back(q);
      const EmbeddingTable table = model.embed_table(ep);
      for (const auto& [count, ids] : by_count) {
        Tensor w({ids.size(), count});
        for (std::size_t i = 0; i < ids.size(); ++i) {
          std::vector<double> scores;
          for (const Triple& n : negatives[ids[i]]) scores.push_back(table.score(n));
          const auto probs = adversarial_weights(scores, cfg.loss.adv_temperature);
          std::copy(probs.begin(), probs.end(), w.row(i));
        }
        fixed_weights.push_back(std::move(w));
      }
    }

    std::vector<Tensor> inputs;
    for (std::size_t p = 0; p < model.params().count(); ++p) {
      inputs.push_back(model.params().value(p));
    }
    testutil::check_gradients(
        inputs,
        [&](Tape& tape, std::span<const Tape::NodeId> xs) {
          ExtrapolationModel::Bound bound;
          bound.leaves.assign(xs.begin(), xs.end());
          auto leaf = [&](const char* name) { return xs[model.params().index_of(name)]; };
          bound.feat = FeaturizerInputs{.entity_bank = leaf("entity_bank"),
                                        .relation_bank = leaf("relation_bank"),
                                        .meta_embeddings = leaf("meta_rel"),
                                        .w_ent_in = leaf("w_ent_in"),
                                        .w_ent_out = leaf("w_ent_out")};
          for (std::size_t l = 0; l < cfg.gnn_layers; ++l) {
            const std::string prefix = "gnn" + std::to_string(l) + ".";
            bound.layers.push_back(
                GnnLayer{xs[model.params().index_of(prefix + "w_out")],
                         xs[model.params().index_of(prefix + "w_in")],
                         xs[model.params().index_of(prefix + "w_self")],
                         xs[model.params().index_of(prefix + "w_rel")]});
          }
          return model.episode_loss(tape, bound, ep, rpg, negatives, nullptr, &fixed_weights);
        },
        1e-5, 1e-4, 1e-7);
  }
}

TEST_CASE("embed_table matches the tape values and scores consistently") {
  const Task task = small_task();
  const Episode ep = as_episode(task);
  ModelConfig cfg;
  cfg.feature_dim = 6;
  cfg.hidden_dim = 6;
  cfg.embedding_dim = 6;
  cfg.score_fn = ScoreFunction::kRotatE;
  const ExtrapolationModel model(cfg, task.graph.n_entities(), task.graph.n_relations(), 3);

  const EmbeddingTable table = model.embed_table(ep);
  CHECK(table.entities.rows() == task.graph.n_entities());
  CHECK(table.entities.cols() == 6);
  CHECK(table.relations.cols() == 6);  // 3 phases -> interleaved complex

  Tape tape;
  const auto bound = model.bind(tape);
  const RelationPositionGraph rpg = build_rpg(task.graph.support(), task.graph.n_relations());
  const TaskEmbeddings emb = model.embed(tape, bound, ep, rpg);
  const auto rel_ready = model.decoder_relations(tape, emb);
  const Triple q = task.graph.query()[0];
  const double via_table = table.score(q);
  Tape score_tape;
  const double via_tape = score_triple({tape.value(emb.entities).row(q.head), 6},
                                       {tape.value(rel_ready).row(q.relation), 6},
                                       {tape.value(emb.entities).row(q.tail), 6}, cfg.score_fn);
  CHECK(via_table == doctest::Approx(via_tape).epsilon(1e-14));
}

TEST_CASE("gnn ablation passes features through as embeddings") {
  const Task task = small_task();
  const Episode ep = as_episode(task);
  ModelConfig cfg;
  cfg.feature_dim = 4;
  cfg.score_fn = ScoreFunction::kTransE;
  cfg.ablations = AblationSet::parse("gnn");
  const ExtrapolationModel model(cfg, task.graph.n_entities(), task.graph.n_relations(), 8);

  // no gnn parameters exist in this mode
  CHECK_THROWS_AS(model.params().index_of("gnn0.w_out"), ContractError);

  const EmbeddingTable table = model.embed_table(ep);
  // seen relation embeddings equal the bank rows (features pass through)
  const auto r1 = *task.graph.relations().find("r1");
  REQUIRE(task.mask.seen_relations[r1]);
  const Tensor& bank = model.params().value("relation_bank");
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK(table.relations.row(r1)[j] == bank.row(task.global_relation[r1])[j]);
  }
}

TEST_CASE("checkpoints reload bit-exact with config and vocabulary") {
  const KnowledgeGraph train = KnowledgeGraph::build(
      {{"a", "r1", "b"}, {"b", "r2", "c"}, {"c", "r1", "a"}, {"a", "r3", "c"}}, {});
  ModelConfig cfg;
  cfg.feature_dim = 4;
  cfg.hidden_dim = 4;
  cfg.embedding_dim = 4;
  cfg.score_fn = ScoreFunction::kComplEx;
  ExtrapolationModel model(cfg, train.n_entities(), train.n_relations(), 17);

  const auto file = std::filesystem::temp_directory_path() / "kgx_tests" / "model.ckpt";
  std::filesystem::create_directories(file.parent_path());
  const ModelCheckpoint ck{cfg, train.entities(), train.relations(), model.params()};
  ck.save(file);
  const ModelCheckpoint back = ModelCheckpoint::load(file);

  CHECK(back.store.bitwise_equal(model.params()));
  CHECK(back.config.score_fn == ScoreFunction::kComplEx);
  CHECK(back.train_entities.labels() == train.entities().labels());
  CHECK(back.train_relations.labels() == train.relations().labels());

  // reloaded model produces bitwise-identical embeddings
  const Task task = small_task();
  const Episode ep = as_episode(task);
  const ExtrapolationModel model2(back.config, back.store);
  const EmbeddingTable t1 = model.embed_table(ep);
  const EmbeddingTable t2 = model2.embed_table(ep);
  for (std::size_t i = 0; i < t1.entities.size(); ++i) CHECK(t1.entities[i] == t2.entities[i]);
}
