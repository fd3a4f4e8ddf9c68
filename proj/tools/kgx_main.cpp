// kgx: knowledge-graph extrapolation pipeline.
//
// Commands cover the whole workflow: carve train/valid/test KGs out of a
// source benchmark, sample meta-learning tasks, meta-train the model, train
// the analytic baseline, rank query triples, run the ablation grid, and
// merge reports. Every command resolves its configuration from an optional
// `--config file` of `key = value` lines plus `--key value` flags (flags
// win) and writes a manifest before any other artifact.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "kgx/baseline.hpp"
#include "kgx/config.hpp"
#include "kgx/model.hpp"
#include "kgx/rpg.hpp"
#include "kgx/sampler.hpp"
#include "kgx/synthetic.hpp"
#include "kgx/trainer.hpp"

namespace fs = std::filesystem;
using namespace kgx;

namespace {

struct KeySpec {
  const char* key;
  const char* fallback;
  const char* help;
};

// One flat registry; commands validate against it so a typo fails loudly.
constexpr KeySpec kKeys[] = {
    {"config", "", "config file of `key = value` lines; flags override"},
    {"out", "", "output directory (or file for sample-tasks/report/make-synth)"},
    {"source", "", "source triple file for sample-dataset"},
    {"data", "", "dataset directory produced by sample-dataset"},
    {"tasks", "", "task archive path (sample-tasks output, train/ablate input)"},
    {"checkpoint", "", "checkpoint file for evaluate"},
    {"split", "test", "evaluation split: test | valid"},
    {"seed", "1", "rng seed; every derived stream is keyed off it"},
    {"threads", "1", "worker cap for evaluation scoring"},
    {"score_fn", "transe", "transe | distmult | complex | rotate"},
    {"dim", "32", "feature / hidden / embedding width"},
    {"gnn_layers", "2", "message-passing layers"},
    {"rpg_mode", "edges", "rel-node neighborhoods: edges | kinds"},
    {"ablations", "", "comma list of meta,relfeat,entfeat,gnn"},
    {"margin", "10", "loss margin gamma"},
    {"n_negatives", "32", "negative samples per query triple"},
    {"adv_temperature", "1", "self-adversarial softmax temperature alpha"},
    {"batch_size", "64", "tasks per optimizer step (triples for baseline)"},
    {"lr", "0.001", "Adam learning rate"},
    {"epochs", "10", "passes over the task pool (or triples for baseline)"},
    {"total_steps", "0", "optimizer step cap; 0 derives it from epochs"},
    {"validation_every", "50", "steps between validations; 0 disables"},
    {"patience", "3", "validations without improvement before stopping"},
    {"clip_norm", "1", "global gradient-norm clip; 0 disables"},
    {"n_tasks", "10000", "task pool size for sample-tasks"},
    {"n_walks", "5", "expansion walks per task"},
    {"walk_len", "10", "steps per task walk"},
    {"query_fraction", "0.2", "share of task triples used as queries"},
    {"relabel_lo", "0.3", "lower unseen relabel ratio"},
    {"relabel_hi", "0.8", "upper unseen relabel ratio"},
    {"n_seed_test", "100", "seed entities for the test/valid extraction"},
    {"n_seed_train", "100", "seed entities for the train extraction"},
    {"walk_len_test", "10", "walk length for the test/valid extraction"},
    {"walk_len_train", "10", "walk length for the train extraction"},
    {"removal_ratio", "0.1", "entity/relation removal ratio after extraction"},
    {"removal_mode", "uniform", "removal sampling (only uniform is implemented)"},
    {"n_candidates", "50", "negative candidates per ranking trial"},
    {"n_repeats", "5", "evaluation repeats with fresh candidates"},
    {"inputs", "", "comma list of report TSVs for report"},
    {"labels", "", "comma list of row labels for report"},
    {"export_embeddings", "", "optional TSV path for evaluate's embeddings"},
    {"dump_rpg", "", "optional path for the eval KG's relation-position graph"},
    {"n_groups", "14", "make-synth: team count"},
    {"members_per_group", "10", "make-synth: people per team"},
    {"n_orgs", "3", "make-synth: org count"},
    {"n_skills", "10", "make-synth: skill count"},
    {"friend_pairs", "160", "make-synth: random friendship edges"},
    {"irregular_fraction", "0.15", "make-synth: members with pattern-breaking edges"},
};

void print_usage() {
  std::cout << "kgx " << kVersion << " - knowledge-graph extrapolation pipeline\n\n"
            << "usage: kgx <command> [--config FILE] [--key value ...]\n\ncommands:\n"
            << "  sample-dataset  carve train/valid/test KGs out of a source triple file\n"
            << "  sample-tasks    sample a meta-learning task pool from the training KG\n"
            << "  train           meta-train the extrapolation model\n"
            << "  baseline        train the analytic KGE baseline\n"
            << "  evaluate        rank query triples of a split with a checkpoint\n"
            << "  ablate          full model plus the four ablation variants\n"
            << "  report          merge evaluation reports into one matrix\n"
            << "  make-synth      generate the synthetic organization KG\n\nkeys:\n";
  for (const KeySpec& k : kKeys) {
    const std::string fallback = *k.fallback ? std::string("[") + k.fallback + "]" : "";
    std::printf("  --%-18s %-10s %s\n", k.key, fallback.c_str(), k.help);
  }
}

bool known_key(const std::string& key) {
  for (const KeySpec& k : kKeys) {
    if (key == k.key) return true;
  }
  return false;
}

std::string known_keys_list() {
  std::string out;
  for (const KeySpec& k : kKeys) {
    if (!out.empty()) out += ", ";
    out += k.key;
  }
  return out;
}

Config parse_command_line(int argc, char** argv) {
  Config flags;
  for (int i = 2; i < argc; ++i) {
    std::string arg = argv[i];
    if (arg.rfind("--", 0) != 0) throw ContractError("expected --key, got '" + arg + "'");
    arg = arg.substr(2);
    if (arg == "help") {
      flags.set("help", "1");
      continue;
    }
    if (!known_key(arg)) {
      throw ContractError("unknown key '--" + arg + "'; valid keys: " + known_keys_list());
    }
    if (i + 1 >= argc) throw ContractError("missing value for --" + arg);
    flags.set(arg, argv[++i]);
  }
  Config cfg;
  if (flags.has("config")) cfg = Config::from_file(flags.get("config", ""));
  for (const auto& [k, v] : cfg.entries()) {
    if (!known_key(k)) {
      throw ContractError("unknown config key '" + k + "'; valid keys: " + known_keys_list());
    }
  }
  cfg.merge_overrides(flags);
  return cfg;
}

std::string required(const Config& cfg, const std::string& key) {
  const std::string v = cfg.get(key, "");
  if (v.empty()) throw ContractError("missing required key --" + key);
  return v;
}

std::map<std::string, std::string> resolved_entries(const Config& cfg) {
  std::map<std::string, std::string> out;
  for (const KeySpec& k : kKeys) out[k.key] = cfg.get(k.key, k.fallback);
  return out;
}

RunManifest start_manifest(const std::string& command, const Config& cfg,
                           const std::vector<fs::path>& inputs,
                           const std::vector<fs::path>& artifacts) {
  RunManifest m;
  m.command = command;
  m.config = resolved_entries(cfg);
  for (const fs::path& p : inputs) m.inputs.emplace_back(p.string(), to_hex(fnv1a64_file(p)));
  for (const fs::path& p : artifacts) m.artifacts.push_back(p.string());
  return m;
}

struct DatasetFiles {
  fs::path train_support, train_query;
  fs::path valid_support, valid_query;
  fs::path test_support, test_query;

  explicit DatasetFiles(const fs::path& dir)
      : train_support(dir / "train_support.tsv"),
        train_query(dir / "train_query.tsv"),
        valid_support(dir / "valid_support.tsv"),
        valid_query(dir / "valid_query.tsv"),
        test_support(dir / "test_support.tsv"),
        test_query(dir / "test_query.tsv") {}

  std::vector<fs::path> all() const {
    return {train_support, train_query, valid_support, valid_query, test_support, test_query};
  }
};

KnowledgeGraph load_pair(const fs::path& support, const fs::path& query) {
  // a query file may legitimately be empty (the training KG)
  std::error_code ec;
  const bool has_query = fs::exists(query, ec) && fs::file_size(query, ec) > 0;
  std::size_t duplicates = 0;
  KnowledgeGraph g = load_graph(support, has_query ? std::optional<fs::path>(query) : std::nullopt,
                                VocabMode::kBuild, nullptr, &duplicates);
  if (duplicates > 0) {
    std::cerr << "warning: dropped " << duplicates << " duplicate triples from "
              << support.string() << "\n";
  }
  return g;
}

KnowledgeGraph load_train(const fs::path& dir) {
  const DatasetFiles files(dir);
  return load_pair(files.train_support, files.train_query);
}

KnowledgeGraph load_split(const fs::path& dir, const std::string& split) {
  const DatasetFiles files(dir);
  if (split == "test") return load_pair(files.test_support, files.test_query);
  if (split == "valid") return load_pair(files.valid_support, files.valid_query);
  throw ContractError("split must be test or valid, got '" + split + "'");
}

ModelConfig model_config_from(const Config& cfg) {
  ModelConfig mc;
  mc.feature_dim = cfg.get_size("dim", 32);
  mc.hidden_dim = mc.feature_dim;
  mc.embedding_dim = mc.feature_dim;
  mc.gnn_layers = cfg.get_size("gnn_layers", 2);
  mc.score_fn = score_function_from_string(cfg.get("score_fn", "transe"));
  const std::string rpg_mode = cfg.get("rpg_mode", "edges");
  if (rpg_mode != "edges" && rpg_mode != "kinds") {
    throw ContractError("rpg_mode must be edges or kinds");
  }
  mc.rpg_mode = rpg_mode == "edges" ? RpgNeighborMode::kEdges : RpgNeighborMode::kKinds;
  mc.ablations = AblationSet::parse(cfg.get("ablations", ""));
  mc.loss.margin = cfg.get_double("margin", 10.0);
  mc.loss.n_negatives = cfg.get_size("n_negatives", 32);
  mc.loss.adv_temperature = cfg.get_double("adv_temperature", 1.0);
  mc.validate();
  return mc;
}

TrainConfig train_config_from(const Config& cfg) {
  TrainConfig tc;
  tc.batch_size = cfg.get_size("batch_size", 64);
  tc.learning_rate = cfg.get_double("lr", 0.001);
  tc.max_epochs = cfg.get_size("epochs", 10);
  tc.total_steps = cfg.get_size("total_steps", 0);
  tc.validation_every = cfg.get_size("validation_every", 50);
  tc.early_stop_patience = cfg.get_size("patience", 3);
  tc.clip_norm = cfg.get_double("clip_norm", 1.0);
  tc.relabel_lo = cfg.get_double("relabel_lo", 0.3);
  tc.relabel_hi = cfg.get_double("relabel_hi", 0.8);
  tc.rng_seed = cfg.get_u64("seed", 1);
  tc.validation_eval.n_candidates = cfg.get_size("n_candidates", 50);
  tc.validation_eval.n_repeats = 1;
  tc.validation_eval.rng_seed = tc.rng_seed + 1;
  return tc;
}

EvalConfig eval_config_from(const Config& cfg) {
  EvalConfig ec;
  ec.n_candidates = cfg.get_size("n_candidates", 50);
  ec.n_repeats = cfg.get_size("n_repeats", 5);
  ec.rng_seed = cfg.get_u64("seed", 1);
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  ec.threads = std::clamp<std::size_t>(cfg.get_size("threads", 1), 1, hw);
  return ec;
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot write " + file.string());
  out << text;
  if (!out) throw IoError("failed writing " + file.string());
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find(',', start);
    if (end == std::string::npos) end = s.size();
    if (end > start) out.push_back(s.substr(start, end - start));
    if (end == s.size()) break;
    start = end + 1;
  }
  return out;
}

// --- commands -------------------------------------------------------------

int cmd_sample_dataset(const Config& cfg) {
  const fs::path source = required(cfg, "source");
  const fs::path out_dir = required(cfg, "out");
  if (cfg.get("removal_mode", "uniform") != "uniform") {
    throw ContractError("removal_mode: only uniform is implemented");
  }
  DatasetSampleParams params;
  params.n_seed_entities_test = cfg.get_size("n_seed_test", 100);
  params.n_seed_entities_train = cfg.get_size("n_seed_train", 100);
  params.walk_len_test = cfg.get_size("walk_len_test", 10);
  params.walk_len_train = cfg.get_size("walk_len_train", 10);
  params.removal_ratio = cfg.get_double("removal_ratio", 0.1);
  params.rng_seed = cfg.get_u64("seed", 1);

  fs::create_directories(out_dir);
  const DatasetFiles files(out_dir);
  start_manifest("sample-dataset", cfg, {source}, files.all()).write(out_dir / "manifest.txt");

  const KnowledgeGraph source_kg = load_graph(source, std::nullopt);
  const DatasetSplit split = sample_dataset(source_kg, params);

  write_triple_file(files.train_support, split.train.support(), split.train);
  write_triple_file(files.train_query, split.train.query(), split.train);
  write_triple_file(files.valid_support, split.valid.support(), split.valid);
  write_triple_file(files.valid_query, split.valid.query(), split.valid);
  write_triple_file(files.test_support, split.test.support(), split.test);
  write_triple_file(files.test_query, split.test.query(), split.test);

  const SeenMask test_mask = build_seen_mask(split.test, split.train);
  std::size_t unseen_e = 0, unseen_r = 0;
  for (bool s : test_mask.seen_entities) unseen_e += !s;
  for (bool s : test_mask.seen_relations) unseen_r += !s;
  std::cout << "train: " << split.train.n_entities() << " entities, "
            << split.train.n_relations() << " relations, " << split.train.support().size()
            << " triples\n"
            << "test:  " << split.test.n_entities() << " entities (" << unseen_e << " unseen), "
            << split.test.n_relations() << " relations (" << unseen_r << " unseen), "
            << split.test.support().size() << " support / " << split.test.query().size()
            << " query\n";
  return 0;
}

int cmd_sample_tasks(const Config& cfg) {
  const fs::path data = required(cfg, "data");
  const fs::path out = required(cfg, "out");
  TaskSampleParams params;
  params.n_walks = cfg.get_size("n_walks", 5);
  params.walk_len = cfg.get_size("walk_len", 10);
  params.query_fraction = cfg.get_double("query_fraction", 0.2);
  params.relabel_lo = cfg.get_double("relabel_lo", 0.3);
  params.relabel_hi = cfg.get_double("relabel_hi", 0.8);
  const std::uint64_t seed = cfg.get_u64("seed", 1);
  const std::size_t n_tasks = cfg.get_size("n_tasks", 10000);

  const DatasetFiles files(data);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  start_manifest("sample-tasks", cfg, {files.train_support}, {out})
      .write(fs::path(out.string() + ".manifest"));

  const KnowledgeGraph train = load_train(data);
  params.rng_seed = seed;
  const std::vector<Task> tasks = sample_task_pool(train, params, n_tasks);
  save_tasks(out, tasks);
  std::cout << "sampled " << tasks.size() << " tasks -> " << out.string() << "\n";
  return 0;
}

int cmd_train(const Config& cfg) {
  const fs::path data = required(cfg, "data");
  const fs::path out_dir = required(cfg, "out");
  const ModelConfig mc = model_config_from(cfg);
  const TrainConfig tc = train_config_from(cfg);

  const DatasetFiles files(data);
  std::vector<fs::path> inputs = {files.train_support, files.valid_support, files.valid_query};
  std::vector<Task> pool;
  if (!mc.ablations.meta) {
    const fs::path tasks = required(cfg, "tasks");
    inputs.push_back(tasks);
    pool = load_tasks(tasks);
  }
  fs::create_directories(out_dir);
  const fs::path ckpt_path = out_dir / "checkpoint.ckpt";
  const fs::path log_path = out_dir / "train_log.tsv";
  start_manifest("train", cfg, inputs, {ckpt_path, log_path}).write(out_dir / "manifest.txt");

  const KnowledgeGraph train = load_train(data);
  const KnowledgeGraph valid = load_split(data, "valid");
  ExtrapolationModel model(mc, train.n_entities(), train.n_relations(), cfg.get_u64("seed", 1));
  const TrainResult result = meta_train(train, valid, pool, model, tc);

  result.checkpoint.save(ckpt_path);
  std::string log = "step\tloss\tval_mrr\n";
  for (const std::string& line : result.log_lines) log += line + "\n";
  write_text(log_path, log);

  std::cout << "steps: " << result.steps_run << (result.diverged ? " (diverged)" : "")
            << ", best validation MRR: " << result.best_validation_mrr << "\n"
            << "checkpoint -> " << ckpt_path.string() << "\n";
  return result.diverged ? 2 : 0;
}

int cmd_baseline(const Config& cfg) {
  const fs::path data = required(cfg, "data");
  const fs::path out_dir = required(cfg, "out");
  BaselineTrainConfig bc;
  bc.dim = cfg.get_size("dim", 32);
  bc.batch_size = cfg.get_size("batch_size", 64);
  bc.learning_rate = cfg.get_double("lr", 0.001);
  bc.max_epochs = cfg.get_size("epochs", 50);
  bc.total_steps = cfg.get_size("total_steps", 0);
  bc.clip_norm = cfg.get_double("clip_norm", 1.0);
  bc.rng_seed = cfg.get_u64("seed", 1);
  bc.loss.margin = cfg.get_double("margin", 10.0);
  bc.loss.n_negatives = cfg.get_size("n_negatives", 32);
  bc.loss.adv_temperature = cfg.get_double("adv_temperature", 1.0);
  const ScoreFunction fn = score_function_from_string(cfg.get("score_fn", "transe"));

  const DatasetFiles files(data);
  fs::create_directories(out_dir);
  const fs::path ckpt_path = out_dir / "baseline.ckpt";
  const fs::path log_path = out_dir / "baseline_log.tsv";
  start_manifest("baseline", cfg, {files.train_support}, {ckpt_path, log_path})
      .write(out_dir / "manifest.txt");

  const KnowledgeGraph train = load_train(data);
  std::vector<std::string> log;
  const KgeModel model = train_kge(train, fn, bc, &log);
  model.save(ckpt_path);
  std::string text = "step\tloss\n";
  for (const std::string& line : log) text += line + "\n";
  write_text(log_path, text);
  std::cout << "baseline checkpoint -> " << ckpt_path.string() << "\n";
  return 0;
}

// model or baseline file, detected from the archive meta block
EvalReport evaluate_checkpoint(const fs::path& ckpt, const KnowledgeGraph& eval_kg,
                               const EvalConfig& ecfg, const Config& cfg) {
  std::ifstream probe(ckpt, std::ios::binary);
  if (!probe) throw IoError("cannot open checkpoint: " + ckpt.string());
  std::string meta;
  ParameterStore::load(probe, &meta);

  const std::string export_path = cfg.get("export_embeddings", "");
  const std::string rpg_path = cfg.get("dump_rpg", "");
  if (!rpg_path.empty()) {
    const RelationPositionGraph rpg = build_rpg(eval_kg.support(), eval_kg.n_relations());
    dump_rpg(rpg_path, rpg, eval_kg.relations());
    export_rpg_histogram(fs::path(rpg_path + ".hist"), rpg, eval_kg.relations());
  }

  if (meta.rfind("type=model\n", 0) == 0) {
    const ModelCheckpoint mc = ModelCheckpoint::load(ckpt);
    if (!export_path.empty()) {
      const ExtrapolationModel model(mc.config, mc.store);
      const Task task = task_from_eval_graph(eval_kg, mc.train_entities, mc.train_relations);
      Rng rng = Rng(ecfg.rng_seed).derive({0x6578706f7274ULL});
      export_embeddings(export_path, model.embed_table(as_episode(task), &rng), eval_kg);
    }
    return validate(mc, eval_kg, ecfg);
  }
  if (meta.rfind("type=baseline\n", 0) == 0) {
    const KgeModel model = KgeModel::load(ckpt);
    const SeenMask mask = build_seen_mask(eval_kg, model.entities, model.relations);
    DerivationStats stats;
    const ExtendedEmbeddings ext = derive_unseen(model, eval_kg, mask, &stats);
    if (stats.skipped_anchors > 0) {
      std::cerr << "warning: skipped " << stats.skipped_anchors
                << " zero-modulus anchors during derivation\n";
    }
    if (!export_path.empty()) {
      export_embeddings(export_path, EmbeddingTable{ext.entities, ext.relations, ext.score_fn},
                        eval_kg);
    }
    return evaluate([&ext](const Triple& t) { return ext.score(t); }, eval_kg, mask, ecfg);
  }
  throw ParseError("unrecognized checkpoint type: " + ckpt.string());
}

int cmd_evaluate(const Config& cfg) {
  const fs::path data = required(cfg, "data");
  const fs::path ckpt = required(cfg, "checkpoint");
  const fs::path out_dir = required(cfg, "out");
  const std::string split = cfg.get("split", "test");
  const EvalConfig ecfg = eval_config_from(cfg);

  const DatasetFiles files(data);
  fs::create_directories(out_dir);
  const fs::path tsv_path = out_dir / ("report_" + split + ".tsv");
  const fs::path txt_path = out_dir / ("report_" + split + ".txt");
  const std::vector<fs::path> inputs = {
      ckpt, split == "test" ? files.test_support : files.valid_support,
      split == "test" ? files.test_query : files.valid_query};
  start_manifest("evaluate", cfg, inputs, {tsv_path, txt_path}).write(out_dir / "manifest.txt");

  const KnowledgeGraph eval_kg = load_split(data, split);
  const EvalReport report = evaluate_checkpoint(ckpt, eval_kg, ecfg, cfg);
  write_text(tsv_path, report.to_tsv());
  write_text(txt_path, report.to_table());
  std::cout << report.to_table();
  return 0;
}

int cmd_ablate(const Config& cfg) {
  const fs::path out_dir = required(cfg, "out");
  const fs::path data = required(cfg, "data");
  required(cfg, "tasks");
  fs::create_directories(out_dir);
  const fs::path table_path = out_dir / "ablation.tsv";
  start_manifest("ablate", cfg, {}, {table_path}).write(out_dir / "manifest.txt");

  // every variant gets the same optimizer-step budget; without this the
  // no-meta run would derive its step count from a pool of size one
  std::size_t budget = cfg.get_size("total_steps", 0);
  if (budget == 0) {
    const std::size_t pool_size = load_tasks(required(cfg, "tasks")).size();
    const std::size_t batch = cfg.get_size("batch_size", 64);
    budget = cfg.get_size("epochs", 10) * ((pool_size + batch - 1) / batch);
  }

  const char* variants[] = {"", "meta", "relfeat", "entfeat", "gnn"};
  const char* headers[] = {"full", "-meta", "-relfeat", "-entfeat", "-gnn"};
  std::vector<double> mrr, hits1;
  for (const char* ablation : variants) {
    Config variant = cfg;
    variant.set("ablations", ablation);
    variant.set("total_steps", std::to_string(budget));
    const fs::path run_dir = out_dir / (std::string("run_") + (*ablation ? ablation : "full"));
    variant.set("out", run_dir.string());
    const int rc = cmd_train(variant);
    if (rc != 0) return rc;

    const KnowledgeGraph eval_kg = load_split(data, "test");
    const EvalReport report = evaluate_checkpoint(run_dir / "checkpoint.ckpt", eval_kg,
                                                  eval_config_from(variant), variant);
    const CategoryMetrics* all = report.find("all");
    mrr.push_back(all ? all->mrr_mean : 0.0);
    hits1.push_back(all ? all->hits1_mean : 0.0);
  }

  std::string tsv = "metric";
  for (const char* h : headers) tsv += std::string("\t") + h;
  tsv += "\nmrr";
  char buf[32];
  for (double v : mrr) {
    std::snprintf(buf, sizeof(buf), "\t%.6f", v);
    tsv += buf;
  }
  tsv += "\nhits1";
  for (double v : hits1) {
    std::snprintf(buf, sizeof(buf), "\t%.6f", v);
    tsv += buf;
  }
  tsv += "\n";
  write_text(table_path, tsv);
  std::cout << tsv;
  return 0;
}

int cmd_report(const Config& cfg) {
  const fs::path out = required(cfg, "out");
  const std::vector<std::string> inputs = split_csv(required(cfg, "inputs"));
  std::vector<std::string> labels = split_csv(cfg.get("labels", ""));
  if (labels.empty()) {
    for (const std::string& p : inputs) labels.push_back(fs::path(p).stem().string());
  }
  if (labels.size() != inputs.size()) {
    throw ContractError("report: labels and inputs must have matching lengths");
  }
  const std::vector<fs::path> input_paths(inputs.begin(), inputs.end());
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  start_manifest("report", cfg, input_paths, {out}).write(fs::path(out.string() + ".manifest"));

  std::vector<EvalReport> reports;
  std::vector<std::string> categories;  // union, first-appearance order
  for (const std::string& p : inputs) {
    std::ifstream in(p);
    if (!in) throw IoError("cannot open report: " + p);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    reports.push_back(EvalReport::from_tsv(text));
    for (const auto& [name, m] : reports.back().rows) {
      if (std::find(categories.begin(), categories.end(), name) == categories.end()) {
        categories.push_back(name);
      }
    }
  }

  std::string tsv = "run";
  for (const std::string& c : categories) tsv += "\t" + c + ".mrr\t" + c + ".hits10";
  tsv += "\n";
  char buf[40];
  for (std::size_t i = 0; i < reports.size(); ++i) {
    tsv += labels[i];
    for (const std::string& c : categories) {
      if (const CategoryMetrics* m = reports[i].find(c)) {
        std::snprintf(buf, sizeof(buf), "\t%.6f\t%.6f", m->mrr_mean, m->hits10_mean);
        tsv += buf;
      } else {
        tsv += "\t-\t-";
      }
    }
    tsv += "\n";
  }
  write_text(out, tsv);
  std::cout << tsv;
  return 0;
}

int cmd_make_synth(const Config& cfg) {
  const fs::path out = required(cfg, "out");
  SyntheticConfig sc;
  sc.n_groups = cfg.get_size("n_groups", 14);
  sc.members_per_group = cfg.get_size("members_per_group", 10);
  sc.n_orgs = cfg.get_size("n_orgs", 3);
  sc.n_skills = cfg.get_size("n_skills", 10);
  sc.extra_friend_pairs = cfg.get_size("friend_pairs", 160);
  sc.irregular_fraction = cfg.get_double("irregular_fraction", 0.15);
  sc.rng_seed = cfg.get_u64("seed", 1);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  start_manifest("make-synth", cfg, {}, {out}).write(fs::path(out.string() + ".manifest"));

  const KnowledgeGraph kg = make_synthetic_kg(sc);
  write_triple_file(out, kg.support(), kg);
  std::cout << "synthetic KG: " << kg.n_entities() << " entities, " << kg.n_relations()
            << " relations, " << kg.support().size() << " triples -> " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2 || std::string(argv[1]) == "--help" || std::string(argv[1]) == "help") {
    print_usage();
    return argc < 2 ? 1 : 0;
  }
  const std::string command = argv[1];
  try {
    const Config cfg = parse_command_line(argc, argv);
    if (cfg.has("help")) {
      print_usage();
      return 0;
    }
    if (command == "sample-dataset") return cmd_sample_dataset(cfg);
    if (command == "sample-tasks") return cmd_sample_tasks(cfg);
    if (command == "train") return cmd_train(cfg);
    if (command == "baseline") return cmd_baseline(cfg);
    if (command == "evaluate") return cmd_evaluate(cfg);
    if (command == "ablate") return cmd_ablate(cfg);
    if (command == "report") return cmd_report(cfg);
    if (command == "make-synth") return cmd_make_synth(cfg);
    std::cerr << "unknown command '" << command << "'\n\n";
    print_usage();
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}
