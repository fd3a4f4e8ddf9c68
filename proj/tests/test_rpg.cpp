#include <algorithm>
#include <set>

#include "doctest.h"
#include "kgx/rng.hpp"
#include "kgx/rpg.hpp"

using namespace kgx;

namespace {

// Independent O(|T|^2) oracle: every ordered pair of distinct (triple, role)
// incidences that lands on the same entity induces one edge.
std::set<RpgEdge> oracle_edges(const std::vector<Triple>& support) {
  std::set<RpgEdge> edges;
  struct Inc {
    EntityId entity;
    RelationId relation;
    bool is_head;
  };
  std::vector<Inc> incs;
  for (const Triple& t : support) {
    incs.push_back({t.head, t.relation, true});
    incs.push_back({t.tail, t.relation, false});
  }
  for (std::size_t i = 0; i < incs.size(); ++i) {
    for (std::size_t j = 0; j < incs.size(); ++j) {
      if (i == j || incs[i].entity != incs[j].entity) continue;
      MetaRelation kind;
      if (!incs[i].is_head && incs[j].is_head) kind = MetaRelation::kTH;
      else if (incs[i].is_head && !incs[j].is_head) kind = MetaRelation::kHT;
      else if (incs[i].is_head) kind = MetaRelation::kHH;
      else kind = MetaRelation::kTT;
      edges.insert({incs[i].relation, kind, incs[j].relation});
    }
  }
  return edges;
}

std::set<RpgEdge> edge_set(const RelationPositionGraph& rpg) {
  return {rpg.edges().begin(), rpg.edges().end()};
}

}  // namespace

TEST_CASE("chain produces a t-h edge and its h-t inverse") {
  const std::vector<Triple> support = {{0, 0, 1, }, {1, 1, 2}};
  const RelationPositionGraph rpg = build_rpg(support, 2);
  const std::set<RpgEdge> expected = {{0, MetaRelation::kTH, 1}, {1, MetaRelation::kHT, 0}};
  CHECK(edge_set(rpg) == oracle_edges(support));
  CHECK(edge_set(rpg) == expected);
  const auto in2 = rpg.in_meta_edges(1);
  REQUIRE(in2.size() == 1);
  CHECK(in2[0] == MetaRelation::kTH);
}

TEST_CASE("shared head produces symmetric h-h edges") {
  const std::vector<Triple> support = {{0, 0, 1}, {0, 1, 2}};
  const RelationPositionGraph rpg = build_rpg(support, 2);
  const std::set<RpgEdge> expected = {{0, MetaRelation::kHH, 1}, {1, MetaRelation::kHH, 0}};
  CHECK(edge_set(rpg) == expected);
  CHECK(edge_set(rpg) == oracle_edges(support));
}

TEST_CASE("shared tail and mixed positions") {
  // (a,r1,b), (c,r2,b), (b,r2,d)
  const std::vector<Triple> support = {{0, 0, 1}, {2, 1, 1}, {1, 1, 3}};
  const RelationPositionGraph rpg = build_rpg(support, 2);
  const auto edges = edge_set(rpg);
  CHECK(edges == oracle_edges(support));
  CHECK(edges.contains({0, MetaRelation::kTT, 1}));
  CHECK(edges.contains({1, MetaRelation::kTT, 0}));
  CHECK(edges.contains({0, MetaRelation::kTH, 1}));
  CHECK(edges.contains({1, MetaRelation::kHT, 0}));
}

TEST_CASE("isolated rel-node has no in-edges") {
  const RelationPositionGraph rpg = build_rpg(std::vector<Triple>{{0, 0, 1}}, 2);
  CHECK(rpg.in_meta_edges(1).empty());
  CHECK(rpg.in_meta_kinds(1).empty());
  CHECK_THROWS_AS(rpg.in_meta_edges(5), ContractError);
}

TEST_CASE("in-edge list keeps one entry per distinct source") {
  // edges (r1,TH,r0) and (r2,HH,r0) -> in kinds of r0 are {TH, HH}
  RelationPositionGraph rpg(3, {{1, MetaRelation::kTH, 0}, {2, MetaRelation::kHH, 0}});
  const auto kinds = rpg.in_meta_edges(0);
  std::multiset<MetaRelation> got(kinds.begin(), kinds.end());
  CHECK(got == std::multiset<MetaRelation>{MetaRelation::kTH, MetaRelation::kHH});

  // same kind from two sources counts twice in edge mode, once as a kind set
  RelationPositionGraph rpg2(3, {{1, MetaRelation::kTH, 0}, {2, MetaRelation::kTH, 0}});
  CHECK(rpg2.in_meta_edges(0).size() == 2);
  CHECK(rpg2.in_meta_kinds(0).size() == 1);
}

TEST_CASE("empty support gives an edgeless graph") {
  const RelationPositionGraph rpg = build_rpg(std::vector<Triple>{}, 3);
  CHECK(rpg.edges().empty());
}

TEST_CASE("oracle equivalence on random graphs") {
  Rng rng(20240);
  for (int round = 0; round < 220; ++round) {
    const std::size_t n_rel = 1 + rng.index(5);
    const std::size_t n_ent = 2 + rng.index(10);
    const std::size_t n_triples = 1 + rng.index(30);
    std::set<Triple> unique;
    for (std::size_t i = 0; i < n_triples; ++i) {
      unique.insert({static_cast<EntityId>(rng.index(n_ent)),
                     static_cast<RelationId>(rng.index(n_rel)),
                     static_cast<EntityId>(rng.index(n_ent))});
    }
    const std::vector<Triple> support(unique.begin(), unique.end());
    const RelationPositionGraph rpg = build_rpg(support, n_rel);
    CHECK(edge_set(rpg) == oracle_edges(support));

    // inverse and symmetry invariants
    const auto edges = edge_set(rpg);
    for (const RpgEdge& e : edges) {
      switch (e.kind) {
        case MetaRelation::kTH:
          CHECK(edges.contains({e.target, MetaRelation::kHT, e.source}));
          break;
        case MetaRelation::kHT:
          CHECK(edges.contains({e.target, MetaRelation::kTH, e.source}));
          break;
        case MetaRelation::kHH:
        case MetaRelation::kTT:
          CHECK(edges.contains({e.target, e.kind, e.source}));
          break;
      }
    }

    // order invariance
    std::vector<Triple> shuffled = support;
    rng.shuffle(shuffled);
    CHECK(edge_set(build_rpg(shuffled, n_rel)) == edges);
  }
}

TEST_CASE("loop triples and chains of one relation produce self edges") {
  // loop (a, r, a)
  const auto loop = edge_set(build_rpg(std::vector<Triple>{{0, 0, 0}}, 1));
  CHECK(loop.contains({0, MetaRelation::kTH, 0}));
  CHECK(loop.contains({0, MetaRelation::kHT, 0}));

  // chain (a,r,b), (b,r,c) of one relation
  const auto chain = edge_set(build_rpg(std::vector<Triple>{{0, 0, 1}, {1, 0, 2}}, 1));
  CHECK(chain.contains({0, MetaRelation::kTH, 0}));
  CHECK(chain.contains({0, MetaRelation::kHT, 0}));
}
