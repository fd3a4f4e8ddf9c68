#include "kgx/baseline.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "kgx/model.hpp"
#include "kgx/sampler.hpp"
#include "kgx/tape.hpp"

namespace kgx {

namespace {

constexpr std::uint64_t kKgeShuffleStream = 0x6b67652e73686601ULL;
constexpr std::uint64_t kKgeNegativeStream = 0x6b67652e6e656701ULL;

void cmul(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  for (std::size_t i = 0; i < out.size(); i += 2) {
    out[i] = a[i] * b[i] - a[i + 1] * b[i + 1];
    out[i + 1] = a[i] * b[i + 1] + a[i + 1] * b[i];
  }
}

// a / b; returns false when some coordinate of b has zero modulus.
bool cdiv(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  for (std::size_t i = 0; i < out.size(); i += 2) {
    const double denom = b[i] * b[i] + b[i + 1] * b[i + 1];
    if (denom == 0.0) return false;
    out[i] = (a[i] * b[i] + a[i + 1] * b[i + 1]) / denom;
    out[i + 1] = (a[i + 1] * b[i] - a[i] * b[i + 1]) / denom;
  }
  return true;
}

void cconj_inplace(std::span<double> a) {
  for (std::size_t i = 1; i < a.size(); i += 2) a[i] = -a[i];
}

std::size_t relation_param_dim(ScoreFunction fn, std::size_t dim) {
  return relation_dim_for(fn, dim);
}

}  // namespace

std::vector<double> f_hr2t(std::span<const double> h, std::span<const double> r,
                           ScoreFunction fn) {
  std::vector<double> out(h.size());
  switch (fn) {
    case ScoreFunction::kTransE:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = h[i] + r[i];
      return out;
    case ScoreFunction::kDistMult:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = h[i] * r[i];
      return out;
    case ScoreFunction::kComplEx:
    case ScoreFunction::kRotatE:
      cmul(h, r, out);
      return out;
  }
  throw ContractError("f_hr2t: bad score function");
}

std::vector<double> f_tr2h(std::span<const double> t, std::span<const double> r,
                           ScoreFunction fn) {
  std::vector<double> out(t.size());
  switch (fn) {
    case ScoreFunction::kTransE:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = t[i] - r[i];
      return out;
    case ScoreFunction::kDistMult:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = t[i] * r[i];
      return out;
    case ScoreFunction::kComplEx: {
      // conj(conj(t) o r)
      std::vector<double> tc(t.begin(), t.end());
      cconj_inplace(tc);
      cmul(tc, r, out);
      cconj_inplace(out);
      return out;
    }
    case ScoreFunction::kRotatE:
      if (!cdiv(t, r, out)) throw DomainError("f_tr2h: zero-modulus relation coordinate");
      return out;
  }
  throw ContractError("f_tr2h: bad score function");
}

std::vector<double> f_ht2r(std::span<const double> h, std::span<const double> t,
                           ScoreFunction fn) {
  std::vector<double> out(h.size());
  switch (fn) {
    case ScoreFunction::kTransE:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = t[i] - h[i];
      return out;
    case ScoreFunction::kDistMult:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = h[i] * t[i];
      return out;
    case ScoreFunction::kComplEx: {
      // conj(h o conj(t))
      std::vector<double> tc(t.begin(), t.end());
      cconj_inplace(tc);
      cmul(h, tc, out);
      cconj_inplace(out);
      return out;
    }
    case ScoreFunction::kRotatE:
      if (!cdiv(t, h, out)) throw DomainError("f_ht2r: zero-modulus head coordinate");
      return out;
  }
  throw ContractError("f_ht2r: bad score function");
}

KgeModel train_kge(const KnowledgeGraph& train_kg, ScoreFunction fn,
                   const BaselineTrainConfig& cfg, std::vector<std::string>* log) {
  if (train_kg.support().empty()) throw ContractError("train_kge: empty training KG");
  if (cfg.batch_size < 1 || cfg.dim < 1) throw ContractError("train_kge: bad config");

  KgeModel model;
  model.score_fn = fn;
  model.dim = cfg.dim;
  model.entities = train_kg.entities();
  model.relations = train_kg.relations();

  const std::size_t rel_dim = relation_param_dim(fn, cfg.dim);
  Rng init_rng = Rng(cfg.rng_seed).derive({0x696e6974ULL});
  auto uniform = [&](Shape shape, double limit) {
    Tensor t(std::move(shape));
    for (double& x : t.data()) x = init_rng.uniform(-limit, limit);
    return t;
  };
  model.store.add("entity_emb",
                  uniform({train_kg.n_entities(), cfg.dim},
                          1.0 / std::sqrt(static_cast<double>(cfg.dim))));
  // rotate relations are phases; spread them over the full circle
  model.store.add("relation_emb",
                  fn == ScoreFunction::kRotatE
                      ? uniform({train_kg.n_relations(), rel_dim}, 3.14159265358979323846)
                      : uniform({train_kg.n_relations(), rel_dim},
                                1.0 / std::sqrt(static_cast<double>(rel_dim))));

  const std::vector<Triple>& triples = train_kg.support();
  const std::size_t steps_per_epoch = (triples.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps =
      cfg.total_steps > 0 ? cfg.total_steps : cfg.max_epochs * steps_per_epoch;

  const AdamConfig adam{.learning_rate = cfg.learning_rate};
  const Rng base(cfg.rng_seed);
  std::vector<std::size_t> order(triples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t epoch = 0, cursor = 0;
  {
    Rng rng = base.derive({kKgeShuffleStream, epoch});
    rng.shuffle(order);
  }

  for (std::size_t step = 1; step <= total_steps; ++step) {
    const std::size_t batch_n = std::min(cfg.batch_size, triples.size() - cursor);
    std::vector<Triple> batch;
    batch.reserve(batch_n);
    for (std::size_t b = 0; b < batch_n; ++b) batch.push_back(triples[order[cursor + b]]);
    cursor += batch_n;
    if (cursor >= triples.size()) {
      ++epoch;
      Rng rng = base.derive({kKgeShuffleStream, epoch});
      rng.shuffle(order);
      cursor = 0;
    }

    Rng neg_rng = base.derive({kKgeNegativeStream, step});
    std::vector<std::vector<Triple>> negatives;
    negatives.reserve(batch.size());
    for (const Triple& q : batch) {
      const std::size_t n_head = cfg.loss.n_negatives / 2;
      const std::size_t n_tail = cfg.loss.n_negatives - n_head;
      auto head = sample_negatives(q, train_kg, n_head, CorruptionSlot::kHead, neg_rng);
      auto tail = sample_negatives(q, train_kg, n_tail, CorruptionSlot::kTail, neg_rng);
      std::vector<Triple> neg = std::move(head.triples);
      neg.insert(neg.end(), tail.triples.begin(), tail.triples.end());
      negatives.push_back(std::move(neg));
    }

    Tape tape;
    const Tape::NodeId ent = tape.leaf(model.store.value("entity_emb"));
    const Tape::NodeId rel = tape.leaf(model.store.value("relation_emb"));
    const Tape::NodeId rel_ready =
        (fn == ScoreFunction::kRotatE) ? tape.polar_unit(rel) : rel;

    auto score_list = [&](const std::vector<Triple>& list) {
      std::vector<std::uint32_t> h, r, t;
      for (const Triple& x : list) {
        h.push_back(x.head);
        r.push_back(x.relation);
        t.push_back(x.tail);
      }
      return score_rows(tape, tape.gather(ent, std::move(h)), tape.gather(rel_ready, std::move(r)),
                        tape.gather(ent, std::move(t)), fn);
    };

    std::map<std::size_t, std::vector<std::size_t>> by_count;
    for (std::size_t q = 0; q < batch.size(); ++q) by_count[negatives[q].size()].push_back(q);
    std::vector<ScoreBucket> buckets;
    for (const auto& [count, ids] : by_count) {
      std::vector<Triple> pos, neg;
      for (std::size_t q : ids) {
        pos.push_back(batch[q]);
        neg.insert(neg.end(), negatives[q].begin(), negatives[q].end());
      }
      ScoreBucket bucket;
      bucket.pos = score_list(pos);
      if (count > 0) bucket.neg = tape.reshape(score_list(neg), {ids.size(), count});
      buckets.push_back(bucket);
    }
    const Tape::NodeId loss = adversarial_task_loss(tape, buckets, batch.size(), cfg.loss);
    const double loss_value = tape.value(loss).item();
    if (!std::isfinite(loss_value)) throw ContractError("train_kge: divergent loss");

    const auto grads = tape.backward(loss);
    std::vector<Tensor> g(2);
    g[model.store.index_of("entity_emb")] = grads[ent];
    g[model.store.index_of("relation_emb")] = grads[rel];
    model.store.adam_step(g, adam, cfg.clip_norm);
    if (log) log->push_back(std::to_string(step) + "\t" + std::to_string(loss_value));
  }
  return model;
}

DerivationOrder one_pass_inference_order(const KnowledgeGraph& test_kg, const SeenMask& mask) {
  DerivationOrder order;
  for (EntityId e = 0; e < test_kg.n_entities(); ++e) {
    if (!mask.entity_seen(e)) order.entities.push_back(e);
  }
  for (RelationId r = 0; r < test_kg.n_relations(); ++r) {
    if (!mask.relation_seen(r)) order.relations.push_back(r);
  }
  return order;
}

ExtendedEmbeddings derive_unseen(const KgeModel& model, const KnowledgeGraph& test_kg,
                                 const SeenMask& mask, DerivationStats* stats) {
  const Tensor& ent_emb = model.store.value("entity_emb");
  const Tensor& rel_emb = model.store.value("relation_emb");
  const std::size_t d = ent_emb.cols();
  // Score-ready relation rows: rotate phases become unit complex.
  const Tensor rel_ready =
      (model.score_fn == ScoreFunction::kRotatE) ? phases_to_complex(rel_emb) : rel_emb;
  const std::size_t rd = rel_ready.cols();

  // Global means back the components with no seen-anchored triple.
  std::vector<double> mean_ent(d, 0.0), mean_rel(rd, 0.0);
  for (std::size_t i = 0; i < ent_emb.rows(); ++i) {
    const double* row = ent_emb.row(i);
    for (std::size_t j = 0; j < d; ++j) mean_ent[j] += row[j];
  }
  for (double& x : mean_ent) x /= static_cast<double>(ent_emb.rows());
  for (std::size_t i = 0; i < rel_ready.rows(); ++i) {
    const double* row = rel_ready.row(i);
    for (std::size_t j = 0; j < rd; ++j) mean_rel[j] += row[j];
  }
  for (double& x : mean_rel) x /= static_cast<double>(rel_ready.rows());

  ExtendedEmbeddings out;
  out.score_fn = model.score_fn;
  out.entities = Tensor({test_kg.n_entities(), d});
  out.relations = Tensor({test_kg.n_relations(), rd});

  // training row of each seen test component
  std::vector<std::uint32_t> train_ent(test_kg.n_entities(), kNoGlobalId);
  std::vector<std::uint32_t> train_rel(test_kg.n_relations(), kNoGlobalId);
  for (EntityId e = 0; e < test_kg.n_entities(); ++e) {
    if (mask.entity_seen(e)) {
      const auto id = model.entities.find(test_kg.entities().label(e));
      if (!id) throw ContractError("seen test entity missing from the trained vocabulary");
      train_ent[e] = *id;
      std::copy_n(ent_emb.row(*id), d, out.entities.row(e));
    }
  }
  for (RelationId r = 0; r < test_kg.n_relations(); ++r) {
    if (mask.relation_seen(r)) {
      const auto id = model.relations.find(test_kg.relations().label(r));
      if (!id) throw ContractError("seen test relation missing from the trained vocabulary");
      train_rel[r] = *id;
      std::copy_n(rel_ready.row(*id), rd, out.relations.row(r));
    }
  }

  auto ent_row = [&](EntityId e) {
    return std::span<const double>(ent_emb.row(train_ent[e]), d);
  };
  auto rel_row = [&](RelationId r) {
    return std::span<const double>(rel_ready.row(train_rel[r]), rd);
  };

  DerivationStats local_stats;
  const DerivationOrder order = one_pass_inference_order(test_kg, mask);

  for (EntityId e : order.entities) {
    std::vector<double> acc(d, 0.0);
    std::size_t n_anchors = 0;
    for (const Triple& t : test_kg.support()) {
      std::vector<double> derived;
      if (t.tail == e && mask.entity_seen(t.head) && mask.relation_seen(t.relation)) {
        derived = f_hr2t(ent_row(t.head), rel_row(t.relation), model.score_fn);
      } else if (t.head == e && mask.entity_seen(t.tail) && mask.relation_seen(t.relation)) {
        try {
          derived = f_tr2h(ent_row(t.tail), rel_row(t.relation), model.score_fn);
        } catch (const DomainError&) {
          ++local_stats.skipped_anchors;
          continue;
        }
      } else {
        continue;
      }
      for (std::size_t j = 0; j < d; ++j) acc[j] += derived[j];
      ++n_anchors;
    }
    double* dst = out.entities.row(e);
    if (n_anchors == 0) {
      std::copy(mean_ent.begin(), mean_ent.end(), dst);
      ++local_stats.fallback_entities;
    } else {
      for (std::size_t j = 0; j < d; ++j) dst[j] = acc[j] / static_cast<double>(n_anchors);
      ++local_stats.anchored_entities;
    }
  }

  for (RelationId r : order.relations) {
    std::vector<double> acc(rd, 0.0);
    std::size_t n_anchors = 0;
    for (const Triple& t : test_kg.support()) {
      if (t.relation != r || !mask.entity_seen(t.head) || !mask.entity_seen(t.tail)) continue;
      std::vector<double> derived;
      try {
        derived = f_ht2r(ent_row(t.head), ent_row(t.tail), model.score_fn);
      } catch (const DomainError&) {
        ++local_stats.skipped_anchors;
        continue;
      }
      for (std::size_t j = 0; j < rd; ++j) acc[j] += derived[j];
      ++n_anchors;
    }
    double* dst = out.relations.row(r);
    if (n_anchors == 0) {
      std::copy(mean_rel.begin(), mean_rel.end(), dst);
      ++local_stats.fallback_relations;
    } else {
      for (std::size_t j = 0; j < rd; ++j) dst[j] = acc[j] / static_cast<double>(n_anchors);
      ++local_stats.anchored_relations;
    }
  }

  if (stats) *stats = local_stats;
  return out;
}

void KgeModel::save(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write baseline checkpoint: " + file.string());
  std::ostringstream meta;
  meta << "type=baseline\nscore_fn=" << score_function_name(score_fn) << "\ndim=" << dim << '\n';
  meta << encode_vocab_meta(entities, relations);
  store.save(out, meta.str());
}

KgeModel KgeModel::load(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open baseline checkpoint: " + file.string());
  std::string meta;
  KgeModel model;
  model.store = ParameterStore::load(in, &meta);
  if (meta.rfind("type=baseline\n", 0) != 0) {
    throw ParseError("not a baseline checkpoint: " + file.string());
  }
  std::istringstream ms(meta);
  std::string line;
  std::getline(ms, line);  // type
  std::getline(ms, line);
  if (line.rfind("score_fn=", 0) != 0) throw ParseError("baseline checkpoint missing score_fn");
  model.score_fn = score_function_from_string(line.substr(9));
  std::getline(ms, line);
  if (line.rfind("dim=", 0) != 0) throw ParseError("baseline checkpoint missing dim");
  model.dim = std::stoull(line.substr(4));
  const auto vocab_pos = meta.find("n_entities=");
  if (vocab_pos == std::string::npos) throw ParseError("baseline checkpoint has no vocabulary");
  std::size_t cursor = vocab_pos;
  decode_vocab_meta(meta, &cursor, &model.entities, &model.relations);
  return model;
}

}  // namespace kgx
