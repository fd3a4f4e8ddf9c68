#include "kgx/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace kgx {

namespace {

constexpr std::size_t kMaxAttempts = 100;

struct Adjacency {
  // triple indices incident to each entity
  std::vector<std::vector<std::uint32_t>> incident;

  explicit Adjacency(std::size_t n_entities, const std::vector<Triple>& triples)
      : incident(n_entities) {
    for (std::uint32_t i = 0; i < triples.size(); ++i) {
      incident[triples[i].head].push_back(i);
      if (triples[i].tail != triples[i].head) incident[triples[i].tail].push_back(i);
    }
  }

  bool isolated(EntityId e) const { return incident[e].empty(); }
};

EntityId draw_non_isolated(const Adjacency& adj, std::size_t n_entities, Rng& rng,
                           const char* what) {
  for (std::size_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const auto e = static_cast<EntityId>(rng.index(n_entities));
    if (!adj.isolated(e)) return e;
  }
  throw SamplingError(std::string("could not draw a walkable ") + what + " entity after " +
                      std::to_string(kMaxAttempts) + " attempts");
}

// Undirected random walk; a walk stuck on a node with no incident triples
// terminates early.
void random_walk(EntityId start, std::size_t steps, const Adjacency& adj,
                 const std::vector<Triple>& triples, Rng& rng, std::vector<EntityId>& order,
                 std::unordered_set<EntityId>& members) {
  auto visit = [&](EntityId e) {
    if (members.insert(e).second) order.push_back(e);
  };
  visit(start);
  EntityId cur = start;
  for (std::size_t s = 0; s < steps; ++s) {
    const auto& inc = adj.incident[cur];
    if (inc.empty()) return;
    const Triple& t = triples[inc[rng.index(inc.size())]];
    cur = (t.head == cur) ? t.tail : t.head;
    visit(cur);
  }
}

// Walk-expanded entity set from n_seeds seeds, then the induced triples.
// Induced triples are removed from `remaining`.
std::vector<Triple> extract_subgraph(std::vector<Triple>& remaining, std::size_t n_entities,
                                     std::size_t n_seeds, std::size_t walk_len, Rng& rng,
                                     const char* what) {
  const Adjacency adj(n_entities, remaining);
  std::vector<EntityId> order;
  std::unordered_set<EntityId> members;
  for (std::size_t s = 0; s < n_seeds; ++s) {
    const EntityId seed = draw_non_isolated(adj, n_entities, rng, what);
    random_walk(seed, walk_len, adj, remaining, rng, order, members);
  }
  std::vector<Triple> induced;
  std::vector<Triple> kept;
  kept.reserve(remaining.size());
  for (const Triple& t : remaining) {
    if (members.contains(t.head) && members.contains(t.tail)) {
      induced.push_back(t);
    } else {
      kept.push_back(t);
    }
  }
  remaining = std::move(kept);
  return induced;
}

// Drops ceil(ratio * count) uniformly chosen entities and relations together
// with every triple touching them.
void remove_components(std::vector<Triple>& remaining, double ratio, Rng& rng) {
  if (ratio <= 0.0 || remaining.empty()) return;
  std::vector<EntityId> ents;
  std::vector<RelationId> rels;
  {
    std::unordered_set<EntityId> es;
    std::unordered_set<RelationId> rs;
    for (const Triple& t : remaining) {
      if (es.insert(t.head).second) ents.push_back(t.head);
      if (es.insert(t.tail).second) ents.push_back(t.tail);
      if (rs.insert(t.relation).second) rels.push_back(t.relation);
    }
  }
  std::sort(ents.begin(), ents.end());
  std::sort(rels.begin(), rels.end());
  const auto n_drop_e = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(ents.size())));
  const auto n_drop_r = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(rels.size())));
  rng.shuffle(ents);
  rng.shuffle(rels);
  std::unordered_set<EntityId> drop_e(ents.begin(), ents.begin() + std::min(n_drop_e, ents.size()));
  std::unordered_set<RelationId> drop_r(rels.begin(), rels.begin() + std::min(n_drop_r, rels.size()));
  std::erase_if(remaining, [&](const Triple& t) {
    return drop_e.contains(t.head) || drop_e.contains(t.tail) || drop_r.contains(t.relation);
  });
}

std::vector<LabelTriple> to_labels(const std::vector<Triple>& triples, const KnowledgeGraph& g) {
  std::vector<LabelTriple> out;
  out.reserve(triples.size());
  for (const Triple& t : triples) out.push_back(g.to_labels(t));
  return out;
}

// Query triples never exceed this share of an eval KG; the benchmark splits
// this mirrors sit between a quarter and forty percent.
constexpr double kMaxQueryShare = 0.4;

// Moves unseen-touching triples into the query partition, up to the share
// cap, while keeping each of their components present in the remaining
// support.
void split_eval_triples(const std::vector<Triple>& triples, const KnowledgeGraph& source,
                        const Vocab& train_entities, const Vocab& train_relations, Rng& rng,
                        std::vector<Triple>& support, std::vector<Triple>& query) {
  auto entity_unseen = [&](EntityId e) {
    return !train_entities.find(source.entities().label(e)).has_value();
  };
  auto relation_unseen = [&](RelationId r) {
    return !train_relations.find(source.relations().label(r)).has_value();
  };

  std::unordered_map<EntityId, std::uint32_t> ent_count;
  std::unordered_map<RelationId, std::uint32_t> rel_count;
  for (const Triple& t : triples) {
    ++ent_count[t.head];
    if (t.tail != t.head) ++ent_count[t.tail];
    ++rel_count[t.relation];
  }

  std::vector<std::uint32_t> candidates;
  for (std::uint32_t i = 0; i < triples.size(); ++i) {
    const Triple& t = triples[i];
    if (entity_unseen(t.head) || entity_unseen(t.tail) || relation_unseen(t.relation)) {
      candidates.push_back(i);
    }
  }
  rng.shuffle(candidates);

  const auto max_query =
      static_cast<std::size_t>(kMaxQueryShare * static_cast<double>(triples.size()));
  std::size_t n_query = 0;
  std::vector<bool> in_query(triples.size(), false);
  for (std::uint32_t i : candidates) {
    if (n_query >= max_query) break;
    const Triple& t = triples[i];
    const bool head_ok = ent_count[t.head] >= 2;
    const bool tail_ok = (t.tail == t.head) || ent_count[t.tail] >= 2;
    if (head_ok && tail_ok && rel_count[t.relation] >= 2) {
      in_query[i] = true;
      ++n_query;
      --ent_count[t.head];
      if (t.tail != t.head) --ent_count[t.tail];
      --rel_count[t.relation];
    }
  }
  for (std::uint32_t i = 0; i < triples.size(); ++i) {
    (in_query[i] ? query : support).push_back(triples[i]);
  }
}

}  // namespace

void DatasetSampleParams::validate() const {
  if (n_seed_entities_test < 1 || n_seed_entities_train < 1) {
    throw ContractError("dataset sampling: seed counts must be >= 1");
  }
  if (walk_len_test < 1 || walk_len_train < 1) {
    throw ContractError("dataset sampling: walk lengths must be >= 1");
  }
  if (removal_ratio < 0.0 || removal_ratio >= 1.0) {
    throw ContractError("dataset sampling: removal_ratio must be in [0, 1)");
  }
}

void TaskSampleParams::validate() const {
  if (query_fraction <= 0.0 || query_fraction >= 1.0) {
    throw ContractError("task sampling: query_fraction must be in (0, 1)");
  }
  if (relabel_lo > relabel_hi || relabel_lo <= 0.0 || relabel_hi >= 1.0) {
    throw ContractError("task sampling: relabel range must satisfy 0 < lo <= hi < 1");
  }
  if (walk_len < 1) throw ContractError("task sampling: walk_len must be >= 1");
}

DatasetSplit sample_dataset(const KnowledgeGraph& source, const DatasetSampleParams& params) {
  params.validate();
  if (source.n_entities() < params.n_seed_entities_test + params.n_seed_entities_train) {
    throw ContractError("dataset sampling: source has fewer entities than requested seeds");
  }
  Rng rng(params.rng_seed);
  std::vector<Triple> remaining = source.support();
  remaining.insert(remaining.end(), source.query().begin(), source.query().end());

  std::vector<Triple> test_triples = extract_subgraph(
      remaining, source.n_entities(), params.n_seed_entities_test, params.walk_len_test, rng,
      "test seed");
  remove_components(remaining, params.removal_ratio, rng);
  std::vector<Triple> valid_triples = extract_subgraph(
      remaining, source.n_entities(), params.n_seed_entities_test, params.walk_len_test, rng,
      "validation seed");
  remove_components(remaining, params.removal_ratio, rng);
  std::vector<Triple> train_triples = extract_subgraph(
      remaining, source.n_entities(), params.n_seed_entities_train, params.walk_len_train, rng,
      "train seed");

  if (train_triples.empty()) throw SamplingError("dataset sampling: empty training KG");
  if (test_triples.empty()) throw SamplingError("dataset sampling: empty test KG");
  if (valid_triples.empty()) throw SamplingError("dataset sampling: empty validation KG");

  DatasetSplit split;
  split.train = KnowledgeGraph::build(to_labels(train_triples, source), {});

  auto build_eval = [&](const std::vector<Triple>& triples, const char* what) {
    std::vector<Triple> support, query;
    split_eval_triples(triples, source, split.train.entities(), split.train.relations(), rng,
                       support, query);
    if (query.empty()) {
      throw SamplingError(std::string("dataset sampling: ") + what +
                          " KG has no usable query triples with unseen components");
    }
    return KnowledgeGraph::build(to_labels(support, source), to_labels(query, source));
  };
  split.test = build_eval(test_triples, "test");
  split.valid = build_eval(valid_triples, "validation");
  return split;
}

Task sample_task(const KnowledgeGraph& train, const TaskSampleParams& params) {
  params.validate();
  if (train.support().size() < 2) throw ContractError("task sampling: training KG has < 2 triples");

  Rng rng(params.rng_seed);
  const Adjacency adj(train.n_entities(), train.support());

  // A sub-KG where no query triple can keep all of its components in support
  // (a bare chain, say) ends up with everything moved back to support; such a
  // task is kept as a fallback and returned only when no attempt produces a
  // query-bearing one.
  std::optional<Task> fallback;

  for (std::size_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
    std::vector<EntityId> order;
    std::unordered_set<EntityId> members;
    const EntityId seed = draw_non_isolated(adj, train.n_entities(), rng, "task seed");
    random_walk(seed, params.walk_len, adj, train.support(), rng, order, members);
    for (std::size_t w = 0; w < params.n_walks; ++w) {
      const EntityId start = order[rng.index(order.size())];
      random_walk(start, params.walk_len, adj, train.support(), rng, order, members);
    }

    std::vector<Triple> induced;
    for (const Triple& t : train.support()) {
      if (members.contains(t.head) && members.contains(t.tail)) induced.push_back(t);
    }
    if (induced.size() < 2) continue;

    rng.shuffle(induced);
    const auto n = induced.size();
    auto n_query = static_cast<std::size_t>(std::llround(params.query_fraction * static_cast<double>(n)));
    n_query = std::clamp<std::size_t>(n_query, 1, n - 1);

    // Query triples whose components are missing from support move back to
    // support so everything scored stays embeddable.
    std::vector<Triple> support(induced.begin(), induced.end() - static_cast<std::ptrdiff_t>(n_query));
    std::vector<Triple> query(induced.end() - static_cast<std::ptrdiff_t>(n_query), induced.end());
    std::unordered_set<EntityId> sup_ents;
    std::unordered_set<RelationId> sup_rels;
    for (const Triple& t : support) {
      sup_ents.insert(t.head);
      sup_ents.insert(t.tail);
      sup_rels.insert(t.relation);
    }
    std::vector<Triple> kept_query;
    for (const Triple& t : query) {
      if (sup_ents.contains(t.head) && sup_ents.contains(t.tail) && sup_rels.contains(t.relation)) {
        kept_query.push_back(t);
      } else {
        support.push_back(t);
        sup_ents.insert(t.head);
        sup_ents.insert(t.tail);
        sup_rels.insert(t.relation);
      }
    }
    const bool empty_query = kept_query.empty();
    if (empty_query && fallback.has_value()) continue;

    Task task;
    task.graph = KnowledgeGraph::build(to_labels(support, train), to_labels(kept_query, train));

    const std::size_t n_ents = task.graph.n_entities();
    const std::size_t n_rels = task.graph.n_relations();
    const double rho = rng.uniform(params.relabel_lo, params.relabel_hi);
    auto unseen_count = [rho](std::size_t count) {
      const auto k = static_cast<std::size_t>(std::ceil(rho * static_cast<double>(count)));
      return std::min(k, count - 1);  // keep at least one seen
    };
    std::vector<std::uint32_t> ent_ids(n_ents), rel_ids(n_rels);
    for (std::uint32_t i = 0; i < n_ents; ++i) ent_ids[i] = i;
    for (std::uint32_t i = 0; i < n_rels; ++i) rel_ids[i] = i;
    rng.shuffle(ent_ids);
    rng.shuffle(rel_ids);

    task.mask.seen_entities.assign(n_ents, true);
    task.mask.seen_relations.assign(n_rels, true);
    for (std::size_t i = 0; i < unseen_count(n_ents); ++i) task.mask.seen_entities[ent_ids[i]] = false;
    for (std::size_t i = 0; i < unseen_count(n_rels); ++i) task.mask.seen_relations[rel_ids[i]] = false;

    task.global_entity.assign(n_ents, kNoGlobalId);
    task.global_relation.assign(n_rels, kNoGlobalId);
    for (std::uint32_t e = 0; e < n_ents; ++e) {
      if (task.mask.seen_entities[e]) {
        task.global_entity[e] = *train.entities().find(task.graph.entities().label(e));
      }
    }
    for (std::uint32_t r = 0; r < n_rels; ++r) {
      if (task.mask.seen_relations[r]) {
        task.global_relation[r] = *train.relations().find(task.graph.relations().label(r));
      }
    }
    task.relabel_ratio = rho;
    if (empty_query) {
      fallback = std::move(task);
      continue;
    }
    return task;
  }
  if (fallback) return std::move(*fallback);
  throw SamplingError("task sampling: no usable sub-KG after " + std::to_string(kMaxAttempts) +
                      " attempts");
}

std::vector<Task> sample_task_pool(const KnowledgeGraph& train, const TaskSampleParams& params,
                                   std::size_t n) {
  std::vector<Task> pool;
  pool.reserve(n);
  const Rng base(params.rng_seed);
  for (std::size_t i = 0; i < n; ++i) {
    TaskSampleParams p = params;
    p.rng_seed = base.derive({0x7461736bULL, i}).next_u64();
    pool.push_back(sample_task(train, p));
  }
  return pool;
}

NegativeSample sample_negatives(const Triple& triple, const KnowledgeGraph& graph, std::size_t n,
                                CorruptionSlot slot, Rng& rng) {
  NegativeSample out;
  if (n == 0) return out;

  std::vector<EntityId> valid;
  const auto n_entities = static_cast<EntityId>(graph.n_entities());
  const EntityId original = (slot == CorruptionSlot::kHead) ? triple.head : triple.tail;
  for (EntityId e = 0; e < n_entities; ++e) {
    if (e == original) continue;
    const Triple corrupted = (slot == CorruptionSlot::kHead)
                                 ? Triple{e, triple.relation, triple.tail}
                                 : Triple{triple.head, triple.relation, e};
    if (!graph.contains(corrupted)) valid.push_back(e);
  }
  rng.shuffle(valid);
  const std::size_t take = std::min(n, valid.size());
  out.triples.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    out.triples.push_back((slot == CorruptionSlot::kHead)
                              ? Triple{valid[i], triple.relation, triple.tail}
                              : Triple{triple.head, triple.relation, valid[i]});
  }
  out.shortfall = valid.size() < n;
  return out;
}

void save_tasks(const std::filesystem::path& file, const std::vector<Task>& tasks) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot write task archive: " + file.string());
  out << "taskset\t1\t" << tasks.size() << "\n";
  out.precision(17);
  for (const Task& task : tasks) {
    out << "task\t" << task.graph.n_entities() << '\t' << task.graph.n_relations() << '\t'
        << task.graph.support().size() << '\t' << task.graph.query().size() << '\t'
        << task.relabel_ratio << '\n';
    for (std::uint32_t e = 0; e < task.graph.n_entities(); ++e) {
      out << "e\t" << task.graph.entities().label(e) << '\t' << (task.mask.seen_entities[e] ? 1 : 0)
          << '\t';
      if (task.global_entity[e] == kNoGlobalId) out << '-';
      else out << task.global_entity[e];
      out << '\n';
    }
    for (std::uint32_t r = 0; r < task.graph.n_relations(); ++r) {
      out << "r\t" << task.graph.relations().label(r) << '\t'
          << (task.mask.seen_relations[r] ? 1 : 0) << '\t';
      if (task.global_relation[r] == kNoGlobalId) out << '-';
      else out << task.global_relation[r];
      out << '\n';
    }
    for (const Triple& t : task.graph.support()) {
      out << "s\t" << t.head << '\t' << t.relation << '\t' << t.tail << '\n';
    }
    for (const Triple& t : task.graph.query()) {
      out << "q\t" << t.head << '\t' << t.relation << '\t' << t.tail << '\n';
    }
  }
  if (!out) throw IoError("failed writing task archive: " + file.string());
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace

std::vector<Task> load_tasks(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open task archive: " + file.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty task archive: " + file.string());
  auto header = split_tabs(line);
  if (header.size() != 3 || header[0] != "taskset" || header[1] != "1") {
    throw ParseError("bad task archive header: " + file.string());
  }
  const auto count = static_cast<std::size_t>(std::stoull(header[2]));

  std::vector<Task> tasks;
  tasks.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    if (!std::getline(in, line)) throw ParseError("truncated task archive: " + file.string());
    auto head = split_tabs(line);
    if (head.size() != 6 || head[0] != "task") throw ParseError("bad task record: " + line);
    const auto n_ents = static_cast<std::size_t>(std::stoull(head[1]));
    const auto n_rels = static_cast<std::size_t>(std::stoull(head[2]));
    const auto n_sup = static_cast<std::size_t>(std::stoull(head[3]));
    const auto n_que = static_cast<std::size_t>(std::stoull(head[4]));

    Task task;
    task.relabel_ratio = std::stod(head[5]);
    task.mask.seen_entities.resize(n_ents);
    task.mask.seen_relations.resize(n_rels);
    task.global_entity.resize(n_ents);
    task.global_relation.resize(n_rels);

    std::vector<std::string> ent_labels(n_ents), rel_labels(n_rels);
    auto read_component = [&](char tag, std::size_t i, std::vector<std::string>& labels,
                              std::vector<bool>& seen, std::vector<std::uint32_t>& global) {
      if (!std::getline(in, line)) throw ParseError("truncated task archive");
      auto f = split_tabs(line);
      if (f.size() != 4 || f[0].size() != 1 || f[0][0] != tag) {
        throw ParseError("bad task component line: " + line);
      }
      labels[i] = f[1];
      seen[i] = (f[2] == "1");
      global[i] = (f[3] == "-") ? kNoGlobalId : static_cast<std::uint32_t>(std::stoul(f[3]));
    };
    for (std::size_t i = 0; i < n_ents; ++i) {
      read_component('e', i, ent_labels, task.mask.seen_entities, task.global_entity);
    }
    for (std::size_t i = 0; i < n_rels; ++i) {
      read_component('r', i, rel_labels, task.mask.seen_relations, task.global_relation);
    }
    auto read_triples = [&](char tag, std::size_t n_triples, std::vector<LabelTriple>& dst) {
      for (std::size_t i = 0; i < n_triples; ++i) {
        if (!std::getline(in, line)) throw ParseError("truncated task archive");
        auto f = split_tabs(line);
        if (f.size() != 4 || f[0].size() != 1 || f[0][0] != tag) {
          throw ParseError("bad task triple line: " + line);
        }
        dst.push_back({ent_labels.at(std::stoul(f[1])), rel_labels.at(std::stoul(f[2])),
                       ent_labels.at(std::stoul(f[3]))});
      }
    };
    std::vector<LabelTriple> support, query;
    read_triples('s', n_sup, support);
    read_triples('q', n_que, query);
    task.graph = KnowledgeGraph::build(support, query);
    if (task.graph.n_entities() != n_ents || task.graph.n_relations() != n_rels) {
      throw ParseError("task archive vocabulary does not match rebuilt graph");
    }
    tasks.push_back(std::move(task));
  }
  return tasks;
}

Task task_from_eval_graph(const KnowledgeGraph& eval_kg, const Vocab& train_entities,
                          const Vocab& train_relations) {
  Task task;
  task.graph = eval_kg;
  task.mask = build_seen_mask(eval_kg, train_entities, train_relations);
  task.global_entity.assign(eval_kg.n_entities(), kNoGlobalId);
  task.global_relation.assign(eval_kg.n_relations(), kNoGlobalId);
  for (std::uint32_t e = 0; e < eval_kg.n_entities(); ++e) {
    if (auto id = train_entities.find(eval_kg.entities().label(e))) task.global_entity[e] = *id;
  }
  for (std::uint32_t r = 0; r < eval_kg.n_relations(); ++r) {
    if (auto id = train_relations.find(eval_kg.relations().label(r))) task.global_relation[r] = *id;
  }
  return task;
}

Episode as_episode(const Task& task) {
  return Episode{.support = task.graph.support(),
                 .query = task.graph.query(),
                 .mask = &task.mask,
                 .global_entity = task.global_entity,
                 .global_relation = task.global_relation,
                 .n_entities = task.graph.n_entities(),
                 .n_relations = task.graph.n_relations(),
                 .graph = &task.graph};
}

WholeGraphEpisode::WholeGraphEpisode(const KnowledgeGraph& train) : graph_(&train) {
  mask_.seen_entities.assign(train.n_entities(), true);
  mask_.seen_relations.assign(train.n_relations(), true);
  global_entity_.resize(train.n_entities());
  global_relation_.resize(train.n_relations());
  for (std::uint32_t e = 0; e < train.n_entities(); ++e) global_entity_[e] = e;
  for (std::uint32_t r = 0; r < train.n_relations(); ++r) global_relation_[r] = r;
}

Episode WholeGraphEpisode::episode() const {
  return Episode{.support = graph_->support(),
                 .query = graph_->support(),  // loss targets are the same triples
                 .mask = &mask_,
                 .global_entity = global_entity_,
                 .global_relation = global_relation_,
                 .n_entities = graph_->n_entities(),
                 .n_relations = graph_->n_relations(),
                 .graph = graph_};
}

}  // namespace kgx
