#include "kgx/model.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace kgx {

namespace {

Tensor uniform_init(Shape shape, double limit, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& x : t.data()) x = rng.uniform(-limit, limit);
  return t;
}

Tensor xavier_init(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return uniform_init({fan_in, fan_out}, limit, rng);
}

std::string get_field(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw ParseError("checkpoint config missing key: " + key);
  return it->second;
}

}  // namespace

AblationSet AblationSet::parse(const std::string& csv) {
  AblationSet set;
  std::size_t start = 0;
  while (start <= csv.size()) {
    auto end = csv.find(',', start);
    if (end == std::string::npos) end = csv.size();
    const std::string item = csv.substr(start, end - start);
    if (item == "meta") set.meta = true;
    else if (item == "relfeat" || item == "rel_feat") set.rel_feat = true;
    else if (item == "entfeat" || item == "ent_feat") set.ent_feat = true;
    else if (item == "gnn") set.gnn = true;
    else if (!item.empty()) throw ContractError("unknown ablation '" + item +
                                                "' (meta|relfeat|entfeat|gnn)");
    if (end == csv.size()) break;
    start = end + 1;
  }
  return set;
}

std::string AblationSet::to_string() const {
  std::string out;
  auto append = [&out](const char* name) {
    if (!out.empty()) out += ',';
    out += name;
  };
  if (meta) append("meta");
  if (rel_feat) append("relfeat");
  if (ent_feat) append("entfeat");
  if (gnn) append("gnn");
  return out;
}

std::size_t ModelConfig::relation_feature_dim() const {
  return ablations.gnn ? relation_dim_for(score_fn, feature_dim) : feature_dim;
}

std::size_t ModelConfig::entity_out_dim() const {
  return ablations.gnn ? feature_dim : embedding_dim;
}

std::size_t ModelConfig::relation_out_dim() const {
  return relation_dim_for(score_fn, entity_out_dim());
}

void ModelConfig::validate() const {
  if (feature_dim == 0 || hidden_dim == 0 || embedding_dim == 0) {
    throw ContractError("model config: dimensions must be positive");
  }
  if (!ablations.gnn && gnn_layers == 0) {
    throw ContractError("model config: gnn_layers must be >= 1 unless the gnn ablation is active");
  }
  if (loss.n_negatives < 1) throw ContractError("model config: n_negatives must be >= 1");
  if (loss.adv_temperature < 0.0) throw ContractError("model config: adv_temperature must be >= 0");
  relation_dim_for(score_fn, entity_out_dim());  // throws on odd complex dims
}

std::string ModelConfig::serialize() const {
  std::ostringstream out;
  out.precision(17);
  out << "score_fn=" << score_function_name(score_fn) << '\n'
      << "feature_dim=" << feature_dim << '\n'
      << "hidden_dim=" << hidden_dim << '\n'
      << "embedding_dim=" << embedding_dim << '\n'
      << "gnn_layers=" << gnn_layers << '\n'
      << "rpg_mode=" << (rpg_mode == RpgNeighborMode::kEdges ? "edges" : "kinds") << '\n'
      << "ablations=" << ablations.to_string() << '\n'
      << "margin=" << loss.margin << '\n'
      << "n_negatives=" << loss.n_negatives << '\n'
      << "adv_temperature=" << loss.adv_temperature << '\n';
  return out.str();
}

ModelConfig ModelConfig::deserialize(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  ModelConfig cfg;
  cfg.score_fn = score_function_from_string(get_field(kv, "score_fn"));
  cfg.feature_dim = std::stoull(get_field(kv, "feature_dim"));
  cfg.hidden_dim = std::stoull(get_field(kv, "hidden_dim"));
  cfg.embedding_dim = std::stoull(get_field(kv, "embedding_dim"));
  cfg.gnn_layers = std::stoull(get_field(kv, "gnn_layers"));
  cfg.rpg_mode = (get_field(kv, "rpg_mode") == "kinds") ? RpgNeighborMode::kKinds
                                                        : RpgNeighborMode::kEdges;
  cfg.ablations = AblationSet::parse(get_field(kv, "ablations"));
  cfg.loss.margin = std::stod(get_field(kv, "margin"));
  cfg.loss.n_negatives = std::stoull(get_field(kv, "n_negatives"));
  cfg.loss.adv_temperature = std::stod(get_field(kv, "adv_temperature"));
  return cfg;
}

ExtrapolationModel::ExtrapolationModel(ModelConfig cfg, std::size_t n_train_entities,
                                       std::size_t n_train_relations, std::uint64_t init_seed)
    : cfg_(std::move(cfg)) {
  cfg_.validate();
  if (n_train_entities == 0 || n_train_relations == 0) {
    throw ContractError("model: training vocabulary must be nonempty");
  }
  Rng rng(init_seed);
  const std::size_t d_e = cfg_.feature_dim;
  const std::size_t d_r = cfg_.relation_feature_dim();
  const double bank_limit_e = 1.0 / std::sqrt(static_cast<double>(d_e));
  const double bank_limit_r = 1.0 / std::sqrt(static_cast<double>(d_r));

  store_.add("entity_bank", uniform_init({n_train_entities, d_e}, bank_limit_e, rng));
  store_.add("relation_bank", uniform_init({n_train_relations, d_r}, bank_limit_r, rng));
  store_.add("meta_rel", uniform_init({kNumMetaRelations, d_r}, bank_limit_r, rng));
  store_.add("w_ent_in", xavier_init(d_r, d_e, rng));
  store_.add("w_ent_out", xavier_init(d_r, d_e, rng));

  if (!cfg_.ablations.gnn) {
    std::size_t ent_dim = d_e, rel_dim = d_r;
    for (std::size_t l = 0; l < cfg_.gnn_layers; ++l) {
      const bool last = (l + 1 == cfg_.gnn_layers);
      const std::size_t ent_next = last ? cfg_.entity_out_dim() : cfg_.hidden_dim;
      const std::size_t rel_next = last ? cfg_.relation_out_dim() : cfg_.hidden_dim;
      const std::string prefix = "gnn" + std::to_string(l) + ".";
      store_.add(prefix + "w_out", xavier_init(rel_dim + ent_dim, ent_next, rng));
      store_.add(prefix + "w_in", xavier_init(rel_dim + ent_dim, ent_next, rng));
      store_.add(prefix + "w_self", xavier_init(ent_dim, ent_next, rng));
      store_.add(prefix + "w_rel", xavier_init(rel_dim, rel_next, rng));
      ent_dim = ent_next;
      rel_dim = rel_next;
    }
  }
}

ExtrapolationModel::ExtrapolationModel(ModelConfig cfg, ParameterStore store)
    : cfg_(std::move(cfg)), store_(std::move(store)) {
  cfg_.validate();
  store_.index_of("entity_bank");  // sanity: throws when the archive is foreign
}

std::size_t ExtrapolationModel::n_train_entities() const {
  return store_.value("entity_bank").rows();
}

std::size_t ExtrapolationModel::n_train_relations() const {
  return store_.value("relation_bank").rows();
}

ExtrapolationModel::Bound ExtrapolationModel::bind(Tape& tape) const {
  Bound bound;
  bound.leaves.reserve(store_.count());
  for (std::size_t p = 0; p < store_.count(); ++p) {
    bound.leaves.push_back(tape.leaf(store_.value(p)));
  }
  auto leaf = [&](const char* name) { return bound.leaves[store_.index_of(name)]; };
  bound.feat = FeaturizerInputs{.entity_bank = leaf("entity_bank"),
                                .relation_bank = leaf("relation_bank"),
                                .meta_embeddings = leaf("meta_rel"),
                                .w_ent_in = leaf("w_ent_in"),
                                .w_ent_out = leaf("w_ent_out")};
  if (!cfg_.ablations.gnn) {
    for (std::size_t l = 0; l < cfg_.gnn_layers; ++l) {
      const std::string prefix = "gnn" + std::to_string(l) + ".";
      bound.layers.push_back(GnnLayer{
          .w_out = bound.leaves[store_.index_of(prefix + "w_out")],
          .w_in = bound.leaves[store_.index_of(prefix + "w_in")],
          .w_self = bound.leaves[store_.index_of(prefix + "w_self")],
          .w_rel = bound.leaves[store_.index_of(prefix + "w_rel")]});
    }
  }
  return bound;
}

TaskEmbeddings ExtrapolationModel::embed(Tape& tape, const Bound& bound, const Episode& episode,
                                         const RelationPositionGraph& rpg,
                                         Rng* ablation_rng) const {
  FeatureOptions opts;
  opts.rpg_mode = cfg_.rpg_mode;
  opts.randomize_unseen_relations = cfg_.ablations.rel_feat;
  opts.randomize_unseen_entities = cfg_.ablations.ent_feat;
  opts.ablation_rng = ablation_rng;

  const Tape::NodeId rel_feats = relation_features(tape, episode, rpg, bound.feat, opts);
  const Tape::NodeId ent_feats = entity_features(tape, episode, rel_feats, bound.feat, opts);
  if (cfg_.ablations.gnn) return TaskEmbeddings{ent_feats, rel_feats};
  return encode(tape, episode.support, ent_feats, rel_feats, bound.layers);
}

Tape::NodeId ExtrapolationModel::decoder_relations(Tape& tape, const TaskEmbeddings& emb) const {
  if (cfg_.score_fn == ScoreFunction::kRotatE) return tape.polar_unit(emb.relations);
  return emb.relations;
}

Tape::NodeId ExtrapolationModel::episode_loss(Tape& tape, const Bound& bound,
                                              const Episode& episode,
                                              const RelationPositionGraph& rpg,
                                              std::span<const std::vector<Triple>> negatives,
                                              Rng* ablation_rng,
                                              const std::vector<Tensor>* fixed_weights) const {
  if (episode.query.empty()) throw ContractError("episode loss: empty query set");
  if (negatives.size() != episode.query.size()) {
    throw ContractError("episode loss: negatives are not aligned with query triples");
  }
  const TaskEmbeddings emb = embed(tape, bound, episode, rpg, ablation_rng);
  const Tape::NodeId rel_rows = decoder_relations(tape, emb);

  // group queries by negative count, deterministically ascending
  std::map<std::size_t, std::vector<std::size_t>> by_count;
  for (std::size_t q = 0; q < episode.query.size(); ++q) {
    by_count[negatives[q].size()].push_back(q);
  }

  auto score_list = [&](const std::vector<Triple>& triples) {
    std::vector<std::uint32_t> h, r, t;
    h.reserve(triples.size());
    r.reserve(triples.size());
    t.reserve(triples.size());
    for (const Triple& x : triples) {
      h.push_back(x.head);
      r.push_back(x.relation);
      t.push_back(x.tail);
    }
    return score_rows(tape, tape.gather(emb.entities, std::move(h)),
                      tape.gather(rel_rows, std::move(r)),
                      tape.gather(emb.entities, std::move(t)), cfg_.score_fn);
  };

  std::vector<ScoreBucket> buckets;
  for (const auto& [count, query_ids] : by_count) {
    std::vector<Triple> pos;
    std::vector<Triple> neg;
    pos.reserve(query_ids.size());
    neg.reserve(query_ids.size() * count);
    for (std::size_t q : query_ids) {
      pos.push_back(episode.query[q]);
      neg.insert(neg.end(), negatives[q].begin(), negatives[q].end());
    }
    ScoreBucket bucket;
    bucket.pos = score_list(pos);
    if (count > 0) {
      bucket.neg = tape.reshape(score_list(neg), {query_ids.size(), count});
    }
    buckets.push_back(bucket);
  }
  return adversarial_task_loss(tape, buckets, episode.query.size(), cfg_.loss, fixed_weights);
}

EmbeddingTable ExtrapolationModel::embed_table(const Episode& episode, Rng* ablation_rng) const {
  Tape tape;
  const Bound bound = bind(tape);
  const RelationPositionGraph rpg = build_rpg(episode.support, episode.n_relations);
  const TaskEmbeddings emb = embed(tape, bound, episode, rpg, ablation_rng);
  EmbeddingTable table{.entities = tape.value(emb.entities),
                       .relations = tape.value(emb.relations),
                       .score_fn = cfg_.score_fn};
  if (cfg_.score_fn == ScoreFunction::kRotatE) {
    table.relations = phases_to_complex(table.relations);
  }
  return table;
}

std::string encode_vocab_meta(const Vocab& entities, const Vocab& relations) {
  std::ostringstream out;
  out << "n_entities=" << entities.size() << '\n' << "n_relations=" << relations.size() << '\n';
  for (const std::string& l : entities.labels()) out << l << '\n';
  for (const std::string& l : relations.labels()) out << l << '\n';
  return out.str();
}

void decode_vocab_meta(const std::string& text, std::size_t* cursor, Vocab* entities,
                       Vocab* relations) {
  auto next_line = [&]() -> std::string {
    if (*cursor >= text.size()) throw ParseError("checkpoint vocab block truncated");
    const auto nl = text.find('\n', *cursor);
    const auto end = (nl == std::string::npos) ? text.size() : nl;
    std::string line = text.substr(*cursor, end - *cursor);
    *cursor = (nl == std::string::npos) ? text.size() : nl + 1;
    return line;
  };
  auto parse_count = [&](const std::string& key) {
    const std::string line = next_line();
    if (line.rfind(key + "=", 0) != 0) throw ParseError("checkpoint vocab block: expected " + key);
    return static_cast<std::size_t>(std::stoull(line.substr(key.size() + 1)));
  };
  const std::size_t n_e = parse_count("n_entities");
  const std::size_t n_r = parse_count("n_relations");
  for (std::size_t i = 0; i < n_e; ++i) entities->add(next_line());
  for (std::size_t i = 0; i < n_r; ++i) relations->add(next_line());
  if (entities->size() != n_e || relations->size() != n_r) {
    throw ParseError("checkpoint vocab block has duplicate labels");
  }
}

void ModelCheckpoint::save(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + file.string());
  std::string meta = "type=model\n";
  meta += config.serialize();
  meta += encode_vocab_meta(train_entities, train_relations);
  store.save(out, meta);
}

ModelCheckpoint ModelCheckpoint::load(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + file.string());
  std::string meta;
  ModelCheckpoint ck;
  ck.store = ParameterStore::load(in, &meta);
  if (meta.rfind("type=model\n", 0) != 0) {
    throw ParseError("not a model checkpoint: " + file.string());
  }
  const auto vocab_pos = meta.find("n_entities=");
  if (vocab_pos == std::string::npos) throw ParseError("checkpoint has no vocabulary block");
  ck.config = ModelConfig::deserialize(meta.substr(0, vocab_pos));
  std::size_t cursor = vocab_pos;
  decode_vocab_meta(meta, &cursor, &ck.train_entities, &ck.train_relations);
  return ck;
}

void export_embeddings(const std::filesystem::path& file, const EmbeddingTable& table,
                       const KnowledgeGraph& graph) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot write embedding export: " + file.string());
  out.precision(17);
  for (std::uint32_t e = 0; e < graph.n_entities(); ++e) {
    out << graph.entities().label(e);
    const double* row = table.entities.row(e);
    for (std::size_t j = 0; j < table.entities.cols(); ++j) out << '\t' << row[j];
    out << '\n';
  }
  for (std::uint32_t r = 0; r < graph.n_relations(); ++r) {
    out << graph.relations().label(r);
    const double* row = table.relations.row(r);
    for (std::size_t j = 0; j < table.relations.cols(); ++j) out << '\t' << row[j];
    out << '\n';
  }
}

}  // namespace kgx
