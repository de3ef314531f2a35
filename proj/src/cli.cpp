#include "vidcap/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "vidcap/analysis.hpp"
#include "vidcap/classifiers.hpp"
#include "vidcap/corpus.hpp"
#include "vidcap/errors.hpp"
#include "vidcap/lstm.hpp"
#include "vidcap/metrics.hpp"
#include "vidcap/serialize.hpp"
#include "vidcap/text.hpp"

namespace fs = std::filesystem;

namespace vidcap {
namespace cli {

namespace {

struct Paths {
  std::string out_dir;
  std::string clips[3], sentences[3], annotations[3];  // train, val, test
  std::string group_lexicon;
  std::string topic_lexicon;
};

constexpr const char* kSplits[3] = {"train", "val", "test"};

int split_index(const std::string& name) {
  for (int i = 0; i < 3; ++i)
    if (name == kSplits[i]) return i;
  throw ConfigError("unknown split '" + name + "' (expected train, val or test)");
}

struct PipelineConfig {
  Paths paths;

  std::size_t min_count = 30;
  bool fallback_matching = true;

  cls::BankMode mode = cls::BankMode::Trained;
  double roc_threshold = 0.7;
  cls::SvmTrainConfig svm;
  FeatureAssignment assignment;

  std::vector<lstm::NetworkConfig> grid;  // visual_dim filled in at train time
  int ensemble_size = 3;
  std::size_t vocab_min_freq = 1;
  int max_len = 30;

  metrics::MetricConfig metric;

  int knn_k = 10;
  int window = 25;
  int extremes_n = 5;

  std::string hash;  // over the semantic sections; never over paths
};

std::string resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base_dir) / path).string();
}

lstm::LrSchedule parse_schedule(const nlohmann::json& j) {
  lstm::LrSchedule s;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "step")
    s.kind = lstm::LrSchedule::Kind::Step;
  else if (kind == "poly")
    s.kind = lstm::LrSchedule::Kind::Poly;
  else
    throw ConfigError("lstm schedule kind must be 'step' or 'poly', got '" + kind + "'");
  s.base_lr = j.at("base_lr").get<double>();
  if (j.contains("step_size")) s.step_size = j.at("step_size").get<int>();
  if (j.contains("power")) s.power = j.at("power").get<double>();
  if (j.contains("max_iter")) s.max_iter = j.at("max_iter").get<int>();
  return s;
}

lstm::NetworkConfig parse_network(const nlohmann::json& j) {
  lstm::NetworkConfig c;
  c.architecture = lstm::architecture_from_name(j.at("architecture").get<std::string>());
  c.hidden_dim = j.at("hidden_dim").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.dropout_site = lstm::dropout_site_from_name(j.at("dropout_site").get<std::string>());
  c.dropout_ratio = j.at("dropout_ratio").get<double>();
  c.schedule = parse_schedule(j.at("schedule"));
  c.max_iters = j.at("max_iters").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.visual_dim = 0;  // resolved once the score dimension is known
  return c;
}

void apply_override(nlohmann::json& root, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) throw ConfigError("--set expects dotted.path=value, got '" + spec + "'");
  const std::string value = spec.substr(eq + 1);
  nlohmann::json* node = &root;
  for (const auto& key : split(spec.substr(0, eq), '.')) {
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(key);
      } catch (const std::exception&) {
        throw ConfigError("--set: '" + key + "' is not an array index");
      }
      if (idx >= node->size()) throw ConfigError("--set: index " + key + " out of range");
      node = &(*node)[idx];
    } else {
      node = &(*node)[key];
    }
  }
  try {
    *node = nlohmann::json::parse(value);
  } catch (const nlohmann::json::parse_error&) {
    *node = value;  // bare strings stay strings
  }
}

PipelineConfig load_config(const std::string& config_path, const std::vector<std::string>& sets) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(config_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("cannot parse config " + config_path + ": " + e.what());
  }
  for (const auto& s : sets) apply_override(j, s);

  PipelineConfig cfg;
  const std::string base_dir = fs::path(config_path).parent_path().string();
  try {
    const auto& paths = j.at("paths");
    cfg.paths.out_dir = resolve(base_dir, paths.at("out_dir").get<std::string>());
    for (int s = 0; s < 3; ++s) {
      const std::string prefix = kSplits[s];
      cfg.paths.clips[s] = resolve(base_dir, paths.at(prefix + "_clips").get<std::string>());
      cfg.paths.sentences[s] = resolve(base_dir, paths.at(prefix + "_sentences").get<std::string>());
      cfg.paths.annotations[s] =
          resolve(base_dir, paths.at(prefix + "_annotations").get<std::string>());
    }
    cfg.paths.group_lexicon = resolve(base_dir, paths.at("group_lexicon").get<std::string>());
    cfg.paths.topic_lexicon = resolve(base_dir, paths.at("topic_lexicon").get<std::string>());

    const auto& labels = j.at("labels");
    cfg.min_count = labels.at("min_count").get<std::size_t>();
    cfg.fallback_matching = labels.at("fallback_matching").get<bool>();

    const auto& clf = j.at("classifiers");
    const std::string mode = clf.at("mode").get<std::string>();
    if (mode == "trained")
      cfg.mode = cls::BankMode::Trained;
    else if (mode == "retrieved")
      cfg.mode = cls::BankMode::Retrieved;
    else
      throw ConfigError("classifiers.mode must be 'trained' or 'retrieved', got '" + mode + "'");
    cfg.roc_threshold = clf.at("roc_threshold").get<double>();
    cfg.svm.reg_lambda = clf.at("reg_lambda").get<double>();
    cfg.svm.epochs = clf.at("epochs").get<int>();
    cfg.svm.seed = clf.at("seed").get<std::uint64_t>();
    cfg.svm.learning_rate = clf.at("learning_rate").get<double>();

    const auto& assign = clf.at("assignment");
    const std::string policy = assign.at("policy").get<std::string>();
    if (policy == "grouped")
      cfg.assignment.policy = FeatureAssignment::Policy::Grouped;
    else if (policy == "uniform")
      cfg.assignment.policy = FeatureAssignment::Policy::Uniform;
    else
      throw ConfigError("assignment.policy must be 'grouped' or 'uniform', got '" + policy + "'");
    cfg.assignment.verb_channel = assign.at("verb_channel").get<std::string>();
    cfg.assignment.object_channel = assign.at("object_channel").get<std::string>();
    cfg.assignment.place_channel = assign.at("place_channel").get<std::string>();
    cfg.assignment.stacked_channels =
        assign.at("stacked_channels").get<std::vector<std::string>>();

    const auto& lstm_cfg = j.at("lstm");
    for (const auto& entry : lstm_cfg.at("grid")) cfg.grid.push_back(parse_network(entry));
    if (cfg.grid.empty()) throw ConfigError("lstm.grid must not be empty");
    cfg.ensemble_size = lstm_cfg.at("ensemble_size").get<int>();
    if (cfg.ensemble_size < 1) throw ConfigError("lstm.ensemble_size must be >= 1");
    cfg.vocab_min_freq = lstm_cfg.at("vocab_min_freq").get<std::size_t>();
    cfg.max_len = lstm_cfg.at("max_len").get<int>();

    const auto& metric = j.at("metrics");
    cfg.metric.bleu_smoothing = metric.at("bleu_smoothing").get<bool>();
    for (const auto& [word, group] : metric.at("synonyms").items())
      cfg.metric.synonyms[word] = group.get<int>();

    const auto& an = j.at("analysis");
    cfg.knn_k = an.at("knn_k").get<int>();
    cfg.window = an.at("window").get<int>();
    cfg.extremes_n = an.at("extremes_n").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad config " + config_path + ": " + e.what());
  }

  if (const char* env_out = std::getenv("VIDCAP_OUT")) cfg.paths.out_dir = env_out;

  // Hash the semantic sections only, so reruns into different directories (or
  // from moved inputs) still recognise their own artifacts.
  nlohmann::json semantic = j;
  semantic.erase("paths");
  cfg.hash = fnv1a_hex(semantic.dump());
  return cfg;
}

std::string out_path(const PipelineConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.paths.out_dir);
  return (fs::path(cfg.paths.out_dir) / name).string();
}

void require_artifact(const PipelineConfig& cfg, const std::string& name,
                      const std::string& producer) {
  if (!fs::exists(fs::path(cfg.paths.out_dir) / name))
    throw ArtifactError("missing artifact " + name + "; run `" + producer + "` first");
}

void check_hash(const PipelineConfig& cfg, const std::string& artifact_hash,
                const std::string& name) {
  if (artifact_hash != cfg.hash)
    throw ConfigError("artifact " + name + " was produced under a different config (hash " +
                      artifact_hash + ", current " + cfg.hash + ")");
}

CorpusSplit load_split(const PipelineConfig& cfg, int split) {
  CorpusSplit corpus = ingest_corpus(cfg.paths.clips[split], cfg.paths.sentences[split],
                                     cfg.paths.annotations[split]);
  if (cfg.fallback_matching) {
    auto known = known_labels_from_parsed(corpus.annotations);
    corpus.annotations = match_unparsed(corpus.sentences, corpus.annotations, known);
  }
  return corpus;
}

// ---- artifact readers/writers ----------------------------------------------

void write_vocab(const PipelineConfig& cfg, const LabelVocabulary& vocab) {
  nlohmann::json j;
  j["format"] = "vidcap-vocab";
  j["version"] = 1;
  j["config_hash"] = cfg.hash;
  j["min_count"] = vocab.min_count;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : vocab.entries) {
    nlohmann::json ej;
    ej["text"] = e.text;
    ej["group"] = e.group ? nlohmann::json(group_name(*e.group)) : nlohmann::json();
    ej["count"] = e.count;
    ej["verb_count"] = e.verb_count;
    ej["channel"] = e.channel;
    entries.push_back(std::move(ej));
  }
  j["entries"] = std::move(entries);
  write_text_atomic(out_path(cfg, "vocab.json"), j.dump(2) + "\n");
}

LabelVocabulary read_vocab(const PipelineConfig& cfg) {
  require_artifact(cfg, "vocab.json", "extract-labels");
  const auto j = read_json_file(out_path(cfg, "vocab.json"));
  try {
    check_hash(cfg, j.at("config_hash").get<std::string>(), "vocab.json");
    LabelVocabulary vocab;
    vocab.min_count = j.at("min_count").get<std::size_t>();
    for (const auto& ej : j.at("entries")) {
      GroupedLabel e;
      e.text = ej.at("text").get<std::string>();
      if (!ej.at("group").is_null()) e.group = group_from_name(ej.at("group").get<std::string>());
      e.count = ej.at("count").get<std::size_t>();
      e.verb_count = ej.at("verb_count").get<std::size_t>();
      e.channel = ej.at("channel").get<std::string>();
      vocab.entries.push_back(std::move(e));
    }
    return vocab;
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError(std::string("malformed vocab.json: ") + e.what());
  }
}

struct ScoresArtifact {
  std::vector<std::string> labels;  // "text|group" in canonical order
  std::map<std::string, Eigen::VectorXd> clips;
};

void write_scores(const PipelineConfig& cfg, int split, const cls::ClassifierBank& bank,
                  const CorpusSplit& corpus) {
  nlohmann::json j;
  j["format"] = "vidcap-scores";
  j["version"] = 1;
  j["config_hash"] = cfg.hash;
  nlohmann::json labels = nlohmann::json::array();
  for (const auto& c : bank.classifiers)
    labels.push_back(c.label.text + "|" + (c.label.group ? group_name(*c.label.group) : "?"));
  j["labels"] = std::move(labels);
  nlohmann::json clips = nlohmann::json::object();
  for (const auto& clip : corpus.clips)
    clips[clip.clip_id] = vector_json(cls::score_clip(bank, clip).scores);
  j["clips"] = std::move(clips);
  write_text_atomic(out_path(cfg, std::string("scores_") + kSplits[split] + ".json"),
                    j.dump(2) + "\n");
}

ScoresArtifact read_scores(const PipelineConfig& cfg, int split) {
  const std::string name = std::string("scores_") + kSplits[split] + ".json";
  require_artifact(cfg, name, "score");
  const auto j = read_json_file(out_path(cfg, name));
  try {
    check_hash(cfg, j.at("config_hash").get<std::string>(), name);
    ScoresArtifact scores;
    scores.labels = j.at("labels").get<std::vector<std::string>>();
    for (const auto& [id, vec] : j.at("clips").items())
      scores.clips[id] = vector_from_json(vec);
    return scores;
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError("malformed " + name + ": " + e.what());
  }
}

const Eigen::VectorXd& score_of(const ScoresArtifact& scores, const std::string& clip_id,
                                const std::string& artifact) {
  auto it = scores.clips.find(clip_id);
  if (it == scores.clips.end())
    throw ArtifactError(artifact + " has no scores for clip " + clip_id);
  return it->second;
}

std::string net_name(int entry, int member) {
  return "net_e" + std::to_string(entry) + "_m" + std::to_string(member) + ".json";
}

std::string generated_name(const std::string& split, int entry, int member, bool grid) {
  std::string name = "generated_" + split;
  if (grid || entry != 0) name += "_e" + std::to_string(entry);
  if (member >= 0) name += "_m" + std::to_string(member);
  return name + ".txt";
}

// References grouped by clip id, in first-appearance order of the clips.
struct GroupedRefs {
  std::vector<std::string> clip_ids;
  std::map<std::string, metrics::RefSet> by_clip;
};

GroupedRefs group_references(const CorpusSplit& corpus) {
  GroupedRefs refs;
  for (const auto& s : corpus.sentences) {
    auto [it, inserted] = refs.by_clip.try_emplace(s.clip_id);
    if (inserted) refs.clip_ids.push_back(s.clip_id);
    it->second.push_back(s.tokens);
  }
  return refs;
}

// ---- stages ----------------------------------------------------------------

void stage_extract_labels(const PipelineConfig& cfg) {
  CorpusSplit corpus = load_split(cfg, 0);
  GroupLexicon lexicon = load_lexicon(cfg.paths.group_lexicon);
  LabelVocabulary raw = extract_labels(corpus.annotations, cfg.min_count);
  LabelVocabulary vocab = assign_groups(raw, lexicon, cfg.assignment);
  write_vocab(cfg, vocab);

  std::size_t per_group[3] = {0, 0, 0};
  for (const auto& e : vocab.entries)
    if (e.group) ++per_group[static_cast<int>(*e.group)];
  std::cout << "extract-labels: kept " << vocab.entries.size() << " labels (" << per_group[0]
            << " verb, " << per_group[1] << " object, " << per_group[2] << " place) of "
            << raw.entries.size() << " candidates\n";
}

void stage_train_classifiers(const PipelineConfig& cfg) {
  LabelVocabulary vocab = read_vocab(cfg);
  CorpusSplit corpus = load_split(cfg, 0);
  cls::ClassifierBank bank = cls::train_group_classifiers(corpus, vocab, cfg.svm, cfg.mode);
  cls::save_bank(bank, out_path(cfg, "bank.json"), cfg.hash);
  std::cout << "train-classifiers: trained " << bank.classifiers.size() << " classifiers, skipped "
            << bank.skipped.size() << "\n";
}

void stage_select(const PipelineConfig& cfg) {
  require_artifact(cfg, "bank.json", "train-classifiers");
  cls::LoadedBank loaded = cls::load_bank(out_path(cfg, "bank.json"));
  check_hash(cfg, loaded.config_hash, "bank.json");
  CorpusSplit val = load_split(cfg, 1);
  cls::ClassifierBank selected = cls::select_labels(loaded.bank, val, cfg.roc_threshold);
  cls::save_bank(selected, out_path(cfg, "bank_selected.json"), cfg.hash);
  std::cout << "select: kept " << selected.classifiers.size() << " of "
            << loaded.bank.classifiers.size() << " classifiers (ROC-AUC >= " << cfg.roc_threshold
            << ")\n";
}

void stage_score(const PipelineConfig& cfg) {
  require_artifact(cfg, "bank_selected.json", "select");
  cls::LoadedBank loaded = cls::load_bank(out_path(cfg, "bank_selected.json"));
  check_hash(cfg, loaded.config_hash, "bank_selected.json");
  for (int split = 0; split < 3; ++split) {
    CorpusSplit corpus = ingest_corpus(cfg.paths.clips[split], cfg.paths.sentences[split],
                                       cfg.paths.annotations[split]);
    write_scores(cfg, split, loaded.bank, corpus);
  }
  std::cout << "score: wrote score vectors (dim " << loaded.bank.classifiers.size()
            << ") for train/val/test\n";
}

std::vector<int> grid_entries(const PipelineConfig& cfg, bool grid, int entry) {
  if (grid) {
    std::vector<int> all(cfg.grid.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    return all;
  }
  if (entry < 0 || entry >= static_cast<int>(cfg.grid.size()))
    throw ConfigError("--entry " + std::to_string(entry) + " out of range (grid has " +
                      std::to_string(cfg.grid.size()) + " entries)");
  return {entry};
}

void stage_train_lstm(const PipelineConfig& cfg, bool grid, int entry) {
  ScoresArtifact scores = read_scores(cfg, 0);
  CorpusSplit corpus = ingest_corpus(cfg.paths.clips[0], cfg.paths.sentences[0],
                                     cfg.paths.annotations[0]);

  std::vector<std::vector<std::string>> token_lists;
  for (const auto& s : corpus.sentences) token_lists.push_back(s.tokens);
  lstm::Vocabulary vocab = lstm::Vocabulary::build(token_lists, cfg.vocab_min_freq);

  std::vector<lstm::TrainPair> pairs;
  for (const auto& s : corpus.sentences)
    pairs.push_back({score_of(scores, s.clip_id, "scores_train.json"), vocab.encode(s.tokens)});

  for (int e : grid_entries(cfg, grid, entry)) {
    for (int m = 0; m < cfg.ensemble_size; ++m) {
      lstm::NetworkConfig net_cfg = cfg.grid[static_cast<std::size_t>(e)];
      net_cfg.visual_dim = static_cast<int>(scores.labels.size());
      net_cfg.seed += static_cast<std::uint64_t>(m);  // ensemble members differ by seed
      net_cfg.validate();

      std::vector<lstm::TrainLogEntry> log;
      lstm::Network net = lstm::train(lstm::Network::init(net_cfg, vocab), pairs, &log);
      lstm::save_network(net, out_path(cfg, net_name(e, m)), cfg.hash);

      std::ostringstream csv;
      csv << "iter,lr,loss\n";
      for (const auto& row : log) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g\n", row.iter, row.lr, row.loss);
        csv << buf;
      }
      write_text_atomic(out_path(cfg, "train_log_e" + std::to_string(e) + "_m" +
                                          std::to_string(m) + ".csv"),
                        csv.str());
      std::cout << "train-lstm: entry " << e << " member " << m << " final loss "
                << (log.empty() ? 0.0 : log.back().loss) << " (" << log.size() << " iterations)\n";
    }
  }
}

void stage_generate(const PipelineConfig& cfg, bool grid, int entry, int member,
                    const std::string& split_name) {
  const int split = split_index(split_name);
  ScoresArtifact scores = read_scores(cfg, split);
  CorpusSplit corpus = ingest_corpus(cfg.paths.clips[split], cfg.paths.sentences[split],
                                     cfg.paths.annotations[split]);

  for (int e : grid_entries(cfg, grid, entry)) {
    lstm::Ensemble ensemble;
    const int lo = member >= 0 ? member : 0;
    const int hi = member >= 0 ? member + 1 : cfg.ensemble_size;
    for (int m = lo; m < hi; ++m) {
      require_artifact(cfg, net_name(e, m), "train-lstm");
      lstm::LoadedNetwork loaded = lstm::load_network(out_path(cfg, net_name(e, m)));
      check_hash(cfg, loaded.config_hash, net_name(e, m));
      ensemble.members.push_back(std::move(loaded.net));
    }

    std::ostringstream out;
    for (const auto& clip : corpus.clips) {
      const Eigen::VectorXd& visual =
          score_of(scores, clip.clip_id, std::string("scores_") + kSplits[split] + ".json");
      std::vector<std::string> words =
          ensemble.members.size() == 1 ? lstm::generate(ensemble.members.front(), visual, cfg.max_len)
                                       : lstm::ensemble_generate(ensemble, visual, cfg.max_len);
      out << clip.clip_id << '\t' << join(words, " ") << '\n';
    }
    const std::string name = generated_name(split_name, e, member, grid);
    write_text_atomic(out_path(cfg, name), out.str());
    std::cout << "generate: wrote " << name << " (" << corpus.clips.size() << " clips, "
              << ensemble.members.size() << " member" << (ensemble.members.size() == 1 ? "" : "s")
              << ")\n";
  }
}

struct GeneratedFile {
  std::vector<std::string> clip_ids;
  std::vector<metrics::Tokens> candidates;
};

GeneratedFile read_generated(const PipelineConfig& cfg, const std::string& name) {
  require_artifact(cfg, name, "generate");
  GeneratedFile gen;
  std::istringstream in(read_text(out_path(cfg, name)));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ArtifactError("malformed line in " + name + ": '" + line + "'");
    gen.clip_ids.push_back(line.substr(0, tab));
    gen.candidates.push_back(tokenize(line.substr(tab + 1)));
  }
  if (gen.clip_ids.empty()) throw ArtifactError(name + " holds no generations");
  return gen;
}

metrics::EvalReport evaluate_generated(const PipelineConfig& cfg, const GeneratedFile& gen,
                                       const GroupedRefs& refs) {
  std::vector<metrics::RefSet> ref_sets;
  for (const auto& id : gen.clip_ids) {
    auto it = refs.by_clip.find(id);
    if (it == refs.by_clip.end())
      throw ArtifactError("no reference sentences for generated clip " + id);
    ref_sets.push_back(it->second);
  }
  return metrics::evaluate_corpus(gen.clip_ids, gen.candidates, ref_sets, cfg.metric);
}

double exact_match_rate(const metrics::EvalReport& report) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < report.candidates.size(); ++i) {
    const auto& refs = report.references[i];
    if (std::find(refs.begin(), refs.end(), report.candidates[i]) != refs.end()) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(report.candidates.size());
}

void stage_evaluate(const PipelineConfig& cfg, bool grid, const std::string& split_name) {
  const int split = split_index(split_name);
  CorpusSplit corpus = ingest_corpus(cfg.paths.clips[split], cfg.paths.sentences[split],
                                     cfg.paths.annotations[split]);
  GroupedRefs refs = group_references(corpus);

  if (grid) {
    std::ostringstream csv;
    csv << "entry,architecture,hidden_dim,embed_dim,dropout_site,dropout_ratio,schedule,base_lr,"
           "step_size,power,max_iter,max_iters,meteor_pct\n";
    for (std::size_t e = 0; e < cfg.grid.size(); ++e) {
      GeneratedFile gen =
          read_generated(cfg, generated_name(split_name, static_cast<int>(e), -1, true));
      metrics::EvalReport report = evaluate_generated(cfg, gen, refs);
      const auto& g = cfg.grid[e];
      char buf[256];
      std::snprintf(buf, sizeof(buf), "%zu,%s,%d,%d,%s,%.3g,%s,%.6g,%d,%.6g,%d,%d,%.4f\n", e,
                    lstm::architecture_name(g.architecture), g.hidden_dim, g.embed_dim,
                    lstm::dropout_site_name(g.dropout_site), g.dropout_ratio,
                    g.schedule.kind == lstm::LrSchedule::Kind::Step ? "step" : "poly",
                    g.schedule.base_lr, g.schedule.step_size, g.schedule.power,
                    g.schedule.max_iter, g.max_iters, report.corpus_meteor * 100.0);
      csv << buf;
    }
    write_text_atomic(out_path(cfg, "grid_summary.csv"), csv.str());
    std::cout << "evaluate: wrote grid_summary.csv (" << cfg.grid.size() << " entries)\n";
    return;
  }

  GeneratedFile gen = read_generated(cfg, generated_name(split_name, 0, -1, false));
  metrics::EvalReport report = evaluate_generated(cfg, gen, refs);

  std::ostringstream csv;
  csv << "clip_id,meteor,bleu4_sentence,rouge_l,cider_contrib\n";
  for (std::size_t i = 0; i < report.clip_ids.size(); ++i) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f\n", report.clip_ids[i].c_str(),
                  report.meteor_scores[i], report.bleu_sentence[i], report.rouge_scores[i],
                  report.cider_contrib[i]);
    csv << buf;
  }
  // Summary block: METEOR/BLEU/ROUGE in percent, CIDEr on its native x10 scale.
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "#summary,meteor_pct,%.4f\n#summary,bleu4_pct,%.4f\n#summary,rouge_l_pct,%.4f\n"
                "#summary,cider,%.4f\n#summary,exact_match_pct,%.4f\n",
                report.corpus_meteor * 100.0, report.corpus_bleu4 * 100.0,
                report.corpus_rouge * 100.0, report.corpus_cider, exact_match_rate(report) * 100.0);
  csv << buf;
  write_text_atomic(out_path(cfg, "report_" + split_name + ".csv"), csv.str());
  std::cout << "evaluate: METEOR " << report.corpus_meteor * 100.0 << "%, BLEU@4 "
            << report.corpus_bleu4 * 100.0 << "%, ROUGE-L " << report.corpus_rouge * 100.0
            << "%, CIDEr " << report.corpus_cider << ", exact match "
            << exact_match_rate(report) * 100.0 << "%\n";
}

std::map<std::string, double> read_report_meteor(const PipelineConfig& cfg,
                                                 const std::string& split_name) {
  const std::string name = "report_" + split_name + ".csv";
  require_artifact(cfg, name, "evaluate");
  std::map<std::string, double> meteor;
  std::istringstream in(read_text(out_path(cfg, name)));
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    const auto fields = split(line, ',');
    if (fields.size() < 2) throw ArtifactError("malformed row in " + name + ": '" + line + "'");
    meteor[fields[0]] = std::stod(fields[1]);
  }
  if (meteor.empty()) throw ArtifactError(name + " holds no per-clip rows");
  return meteor;
}

void stage_analyze(const PipelineConfig& cfg, const std::string& split_name) {
  const int split = split_index(split_name);
  std::map<std::string, double> clip_meteor = read_report_meteor(cfg, split_name);

  CorpusSplit test = load_split(cfg, split);
  CorpusSplit train = load_split(cfg, 0);
  ScoresArtifact test_scores = read_scores(cfg, split);
  ScoresArtifact train_scores = read_scores(cfg, 0);

  // One record per clip: its first reference sentence, the verb-flagged labels
  // of that sentence, and the pipeline's METEOR for the clip.
  std::vector<analysis::SentenceRecord> records;
  {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < test.sentences.size(); ++i) {
      const auto& s = test.sentences[i];
      if (!seen.insert(s.clip_id).second) continue;
      auto it = clip_meteor.find(s.clip_id);
      if (it == clip_meteor.end())
        throw ArtifactError("report_" + split_name + ".csv has no row for clip " + s.clip_id);
      analysis::SentenceRecord rec;
      rec.clip_id = s.clip_id;
      rec.tokens = s.tokens;
      const auto& ann = test.annotations[i];
      for (std::size_t k = 0; k < ann.labels.size(); ++k)
        if (ann.verb_flags[k]) rec.verbs.push_back(ann.labels[k]);
      rec.score = it->second;
      records.push_back(std::move(rec));
    }
  }

  std::vector<analysis::Tokens> refs;
  std::vector<std::string> ids;
  std::vector<double> scores;
  for (const auto& r : records) {
    refs.push_back(r.tokens);
    ids.push_back(r.clip_id);
    scores.push_back(r.score);
  }

  std::map<std::string, std::size_t> train_counts;
  std::vector<analysis::Tokens> train_sentences;
  for (const auto& s : train.sentences) {
    train_sentences.push_back(s.tokens);
    for (const auto& w : s.tokens) ++train_counts[w];
  }

  auto desc_order = [](const std::vector<double>& key) {
    std::vector<std::size_t> order(key.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&key](std::size_t a, std::size_t b) { return key[a] > key[b]; });
    return order;
  };

  {  // sentence length, increasing
    std::vector<double> lengths;
    for (const auto& r : refs) lengths.push_back(static_cast<double>(r.size()));
    auto curve = analysis::make_curve("length", analysis::sort_by_length(refs), ids, lengths,
                                      scores, cfg.window);
    write_text_atomic(out_path(cfg, "curve_length.csv"), analysis::curve_csv(curve));
  }
  {  // mean training word frequency, decreasing
    std::vector<double> freq;
    for (const auto& r : refs) freq.push_back(analysis::mean_token_frequency(r, train_counts));
    auto curve = analysis::make_curve("wordfreq", analysis::sort_by_word_frequency(refs, train_counts),
                                      ids, freq, scores, cfg.window);
    write_text_atomic(out_path(cfg, "curve_wordfreq.csv"), analysis::curve_csv(curve));
  }
  double nn_upper_sum = 0.0;
  {  // textual nearest-neighbour upper bound, decreasing
    std::vector<double> nn;
    for (const auto& r : refs) {
      nn.push_back(analysis::textual_nn(r, train_sentences, cfg.metric).score);
      nn_upper_sum += nn.back();
    }
    auto curve = analysis::make_curve("textnn", desc_order(nn), ids, nn, scores, cfg.window);
    write_text_atomic(out_path(cfg, "curve_textnn.csv"), analysis::curve_csv(curve));
  }
  {  // visual kNN difficulty, decreasing
    std::vector<std::pair<Eigen::VectorXd, analysis::Tokens>> train_pairs;
    for (const auto& s : train.sentences)
      train_pairs.emplace_back(score_of(train_scores, s.clip_id, "scores_train.json"), s.tokens);
    const int k = std::min<int>(cfg.knn_k, static_cast<int>(train_pairs.size()));
    std::vector<double> knn;
    for (std::size_t i = 0; i < records.size(); ++i)
      knn.push_back(analysis::visual_knn(
          score_of(test_scores, ids[i], std::string("scores_") + split_name + ".json"),
          train_pairs, k, refs[i], cfg.metric));
    auto curve = analysis::make_curve("visknn", desc_order(knn), ids, knn, scores, cfg.window);
    write_text_atomic(out_path(cfg, "curve_visknn.csv"), analysis::curve_csv(curve));
  }
  {
    analysis::TopicLexicon lexicon = analysis::load_topic_lexicon(cfg.paths.topic_lexicon);
    auto report = analysis::topic_report(records, lexicon);
    write_text_atomic(out_path(cfg, "topic_report.csv"), analysis::topic_csv(report));
  }
  {
    const int n = std::min<int>(cfg.extremes_n, static_cast<int>(records.size()));
    auto report = analysis::extremes_report(records, n);
    write_text_atomic(out_path(cfg, "extremes.csv"), analysis::extremes_csv(report));
  }

  std::cout << "analyze: wrote 4 difficulty curves, topic report and extremes ("
            << records.size() << " clips; NN upper bound "
            << nn_upper_sum / static_cast<double>(records.size()) * 100.0 << "%)\n";
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"weakly-supervised movie description pipeline"};
  app.require_subcommand(1);

  std::string config_path = "config.json";
  std::vector<std::string> sets;
  bool grid = false;
  std::string split = "test";
  int entry = 0;
  int member = -1;

  app.add_option("-c,--config", config_path, "pipeline config file")->capture_default_str();
  app.add_option("--set", sets, "override a config value, e.g. --set labels.min_count=10");
  app.add_flag("--grid", grid, "operate on every lstm.grid entry (sweep mode)");

  CLI::App* sc_extract = app.add_subcommand("extract-labels", "mine grouped labels from training annotations");
  CLI::App* sc_train_cls = app.add_subcommand("train-classifiers", "train one-vs-all visual classifiers");
  CLI::App* sc_select = app.add_subcommand("select", "keep classifiers by validation ROC-AUC");
  CLI::App* sc_score = app.add_subcommand("score", "write score vectors for every split");
  CLI::App* sc_train_lstm = app.add_subcommand("train-lstm", "train the sentence generator(s)");
  CLI::App* sc_generate = app.add_subcommand("generate", "decode sentences for a split");
  CLI::App* sc_evaluate = app.add_subcommand("evaluate", "score generations against references");
  CLI::App* sc_analyze = app.add_subcommand("analyze", "difficulty curves, topics and extremes");

  sc_train_lstm->add_option("--entry", entry, "grid entry to train")->capture_default_str();
  sc_generate->add_option("--entry", entry, "grid entry to decode with")->capture_default_str();
  sc_generate->add_option("--member", member, "single ensemble member (default: full ensemble)");
  for (CLI::App* sc : {sc_generate, sc_evaluate, sc_analyze})
    sc->add_option("--split", split, "corpus split")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    PipelineConfig cfg = load_config(config_path, sets);
    if (sc_extract->parsed()) stage_extract_labels(cfg);
    if (sc_train_cls->parsed()) stage_train_classifiers(cfg);
    if (sc_select->parsed()) stage_select(cfg);
    if (sc_score->parsed()) stage_score(cfg);
    if (sc_train_lstm->parsed()) stage_train_lstm(cfg, grid, entry);
    if (sc_generate->parsed()) stage_generate(cfg, grid, entry, member, split);
    if (sc_evaluate->parsed()) stage_evaluate(cfg, grid, split);
    if (sc_analyze->parsed()) stage_analyze(cfg, split);
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ArtifactError& e) {
    std::cerr << "artifact error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace cli
}  // namespace vidcap
