#include "vidcap/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "vidcap/errors.hpp"
#include "vidcap/rng.hpp"
#include "vidcap/serialize.hpp"
#include "vidcap/text.hpp"

namespace vidcap {
namespace cls {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

LinearClassifier train_binary_svm(const std::vector<Eigen::VectorXd>& positives,
                                  const std::vector<Eigen::VectorXd>& negatives,
                                  const SvmTrainConfig& cfg) {
  if (positives.empty() || negatives.empty())
    throw std::invalid_argument("train_binary_svm: needs at least one positive and one negative");
  const Eigen::Index dim = positives[0].size();
  for (const auto& v : positives)
    if (v.size() != dim) throw std::invalid_argument("train_binary_svm: inconsistent dimensions");
  for (const auto& v : negatives)
    if (v.size() != dim) throw std::invalid_argument("train_binary_svm: inconsistent dimensions");

  struct Sample {
    const Eigen::VectorXd* x;
    double y;
  };
  std::vector<Sample> samples;
  samples.reserve(positives.size() + negatives.size());
  for (const auto& v : positives) samples.push_back({&v, 1.0});
  for (const auto& v : negatives) samples.push_back({&v, -1.0});

  Eigen::VectorXd w = Eigen::VectorXd::Zero(dim);
  double b = 0.0;
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t idx : order) {
      const Sample& s = samples[idx];
      const double margin = s.y * (w.dot(*s.x) + b);
      w *= 1.0 - cfg.learning_rate * cfg.reg_lambda;
      if (margin < 1.0) {
        w += cfg.learning_rate * s.y * (*s.x);
        b += cfg.learning_rate * s.y;
      }
    }
  }
  LinearClassifier out;
  out.weights = std::move(w);
  out.bias = b;
  return out;
}

double roc_auc(const std::vector<double>& scores, const std::vector<bool>& truth) {
  if (scores.size() != truth.size()) throw std::invalid_argument("roc_auc: length mismatch");
  std::size_t n_pos = static_cast<std::size_t>(std::count(truth.begin(), truth.end(), true));
  std::size_t n_neg = truth.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("roc_auc: needs both classes");

  // Rank-sum with midranks for ties.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (std::size_t k = i; k < j; ++k) {
      if (truth[order[k]]) pos_rank_sum += midrank;
    }
    i = j;
  }
  const double u = pos_rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

ChannelStats compute_channel_stats(const std::vector<const Eigen::VectorXd*>& vectors) {
  if (vectors.empty()) throw std::invalid_argument("compute_channel_stats: no vectors");
  const Eigen::Index dim = vectors[0]->size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (const auto* v : vectors) mean += *v;
  mean /= static_cast<double>(vectors.size());
  Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
  for (const auto* v : vectors) var += (*v - mean).cwiseAbs2();
  var /= static_cast<double>(vectors.size());
  ChannelStats st;
  st.mean = std::move(mean);
  st.stddev = var.cwiseSqrt();
  for (Eigen::Index d = 0; d < dim; ++d) {
    if (st.stddev[d] == 0.0) st.stddev[d] = 1.0;
  }
  return st;
}

Eigen::VectorXd standardized_feature(const Clip& clip, const std::string& channel,
                                     const std::map<std::string, ChannelStats>& stats) {
  auto parts = split(channel, '+');
  std::vector<Eigen::VectorXd> pieces;
  std::size_t total = 0;
  for (const auto& p : parts) {
    auto fit = clip.features.find(p);
    if (fit == clip.features.end())
      throw ArtifactError("clip " + clip.clip_id + " is missing channel " + p);
    auto sit = stats.find(p);
    if (sit == stats.end()) throw ArtifactError("no standardization stats for channel " + p);
    pieces.push_back((fit->second - sit->second.mean).cwiseQuotient(sit->second.stddev));
    total += static_cast<std::size_t>(pieces.back().size());
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(total));
  Eigen::Index off = 0;
  for (const auto& p : pieces) {
    out.segment(off, p.size()) = p;
    off += p.size();
  }
  return out;
}

std::vector<std::string> positive_clips(const CorpusSplit& corpus, const GroupedLabel& label) {
  const bool want_verb = label.group == Group::Verb;
  std::set<std::string> hits;
  for (const auto& a : corpus.annotations) {
    for (std::size_t i = 0; i < a.labels.size(); ++i) {
      if (a.labels[i] == label.text && a.verb_flags[i] == want_verb) hits.insert(a.clip_id);
    }
  }
  std::vector<std::string> out(hits.begin(), hits.end());
  // Preserve corpus clip order for determinism.
  std::sort(out.begin(), out.end(), [&](const std::string& x, const std::string& y) {
    return corpus.clip_index.at(x) < corpus.clip_index.at(y);
  });
  return out;
}

ClassifierBank train_group_classifiers(const CorpusSplit& corpus, const LabelVocabulary& vocab,
                                       const SvmTrainConfig& cfg, BankMode mode) {
  ClassifierBank bank;
  bank.mode = mode;

  // Standardization stats per base channel referenced by the vocabulary.
  std::set<std::string> base_channels;
  for (const auto& e : vocab.entries) {
    if (!e.group) throw ConfigError("train_group_classifiers: vocabulary has unassigned groups");
    for (const auto& p : split(e.channel, '+')) base_channels.insert(p);
  }
  for (const auto& ch : base_channels) {
    std::vector<const Eigen::VectorXd*> vecs;
    for (const auto& clip : corpus.clips) {
      auto it = clip.features.find(ch);
      if (it == clip.features.end()) throw ArtifactError("clip " + clip.clip_id + " is missing channel " + ch);
      vecs.push_back(&it->second);
    }
    bank.standardization[ch] = compute_channel_stats(vecs);
  }

  // Positive clip sets per vocabulary entry.
  std::vector<std::set<std::string>> positives(vocab.entries.size());
  for (std::size_t i = 0; i < vocab.entries.size(); ++i) {
    auto p = positive_clips(corpus, vocab.entries[i]);
    positives[i] = std::set<std::string>(p.begin(), p.end());
  }
  // Clips carrying any label of a group and any label at all.
  std::map<Group, std::set<std::string>> group_carriers;
  std::set<std::string> any_carriers;
  for (std::size_t i = 0; i < vocab.entries.size(); ++i) {
    group_carriers[*vocab.entries[i].group].insert(positives[i].begin(), positives[i].end());
    any_carriers.insert(positives[i].begin(), positives[i].end());
  }

  for (std::size_t i = 0; i < vocab.entries.size(); ++i) {
    const auto& entry = vocab.entries[i];
    const auto& pool = mode == BankMode::Trained ? group_carriers[*entry.group] : any_carriers;
    std::vector<Eigen::VectorXd> pos, neg;
    for (const auto& clip : corpus.clips) {
      if (positives[i].count(clip.clip_id)) {
        pos.push_back(standardized_feature(clip, entry.channel, bank.standardization));
      } else if (pool.count(clip.clip_id)) {
        neg.push_back(standardized_feature(clip, entry.channel, bank.standardization));
      }
    }
    if (pos.empty() || neg.empty()) {
      bank.skipped.push_back(entry.text + "|" + group_name(*entry.group));
      continue;
    }
    LinearClassifier c = train_binary_svm(pos, neg, cfg);
    c.label = entry;
    bank.classifiers.push_back(std::move(c));
  }
  return bank;
}

ClassifierBank select_labels(const ClassifierBank& bank, const CorpusSplit& validation,
                             double threshold) {
  if (threshold < 0.0 || threshold > 1.0) throw ConfigError("roc threshold must be in [0,1]");
  ClassifierBank out;
  out.mode = bank.mode;
  out.standardization = bank.standardization;
  out.skipped = bank.skipped;
  for (const auto& c : bank.classifiers) {
    auto pos = positive_clips(validation, c.label);
    std::set<std::string> pos_set(pos.begin(), pos.end());
    std::vector<double> scores;
    std::vector<bool> truth;
    for (const auto& clip : validation.clips) {
      auto x = standardized_feature(clip, c.label.channel, bank.standardization);
      scores.push_back(c.weights.dot(x) + c.bias);
      truth.push_back(pos_set.count(clip.clip_id) > 0);
    }
    LinearClassifier kept = c;
    const std::size_t n_pos = pos_set.size();
    if (n_pos > 0 && n_pos < validation.clips.size()) {
      kept.roc_auc = roc_auc(scores, truth);
    } else {
      kept.roc_auc.reset();
    }
    const double auc = kept.roc_auc.value_or(0.0);
    if (auc >= threshold) out.classifiers.push_back(std::move(kept));
  }
  return out;
}

ScoreVector score_clip(const ClassifierBank& bank, const Clip& clip) {
  ScoreVector sv;
  sv.clip_id = clip.clip_id;
  sv.scores.resize(static_cast<Eigen::Index>(bank.classifiers.size()));
  for (std::size_t i = 0; i < bank.classifiers.size(); ++i) {
    const auto& c = bank.classifiers[i];
    auto x = standardized_feature(clip, c.label.channel, bank.standardization);
    if (x.size() != c.weights.size())
      throw ArtifactError("feature dimension mismatch for label " + c.label.text);
    sv.scores[static_cast<Eigen::Index>(i)] = logistic(c.weights.dot(x) + c.bias);
  }
  return sv;
}

void save_bank(const ClassifierBank& bank, const std::string& path,
               const std::string& config_hash) {
  nlohmann::json j;
  j["format"] = "vidcap-bank";
  j["version"] = 1;
  j["config_hash"] = config_hash;
  j["mode"] = bank.mode == BankMode::Trained ? "trained" : "retrieved";
  j["skipped"] = bank.skipped;

  nlohmann::json stats = nlohmann::json::object();
  for (const auto& [name, st] : bank.standardization)
    stats[name] = {{"mean", vector_json(st.mean)}, {"stddev", vector_json(st.stddev)}};
  j["standardization"] = std::move(stats);

  nlohmann::json classifiers = nlohmann::json::array();
  for (const auto& c : bank.classifiers) {
    nlohmann::json cj;
    cj["text"] = c.label.text;
    cj["group"] = c.label.group ? nlohmann::json(group_name(*c.label.group)) : nlohmann::json();
    cj["count"] = c.label.count;
    cj["verb_count"] = c.label.verb_count;
    cj["channel"] = c.label.channel;
    cj["weights"] = vector_json(c.weights);
    cj["bias"] = c.bias;
    cj["roc_auc"] = c.roc_auc ? nlohmann::json(*c.roc_auc) : nlohmann::json();
    classifiers.push_back(std::move(cj));
  }
  j["classifiers"] = std::move(classifiers);
  write_text_atomic(path, j.dump(2) + "\n");
}

LoadedBank load_bank(const std::string& path) {
  const nlohmann::json j = read_json_file(path);
  try {
    if (j.at("format").get<std::string>() != "vidcap-bank")
      throw ArtifactError("not a classifier bank artifact: " + path);
    LoadedBank loaded;
    loaded.config_hash = j.at("config_hash").get<std::string>();
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "trained")
      loaded.bank.mode = BankMode::Trained;
    else if (mode == "retrieved")
      loaded.bank.mode = BankMode::Retrieved;
    else
      throw ArtifactError("unknown bank mode: " + mode);
    loaded.bank.skipped = j.at("skipped").get<std::vector<std::string>>();
    for (const auto& [name, st] : j.at("standardization").items()) {
      ChannelStats cs;
      cs.mean = vector_from_json(st.at("mean"));
      cs.stddev = vector_from_json(st.at("stddev"));
      loaded.bank.standardization[name] = std::move(cs);
    }
    for (const auto& cj : j.at("classifiers")) {
      LinearClassifier c;
      c.label.text = cj.at("text").get<std::string>();
      if (!cj.at("group").is_null())
        c.label.group = group_from_name(cj.at("group").get<std::string>());
      c.label.count = cj.at("count").get<std::size_t>();
      c.label.verb_count = cj.at("verb_count").get<std::size_t>();
      c.label.channel = cj.at("channel").get<std::string>();
      c.weights = vector_from_json(cj.at("weights"));
      c.bias = cj.at("bias").get<double>();
      if (!cj.at("roc_auc").is_null()) c.roc_auc = cj.at("roc_auc").get<double>();
      loaded.bank.classifiers.push_back(std::move(c));
    }
    return loaded;
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError("malformed bank artifact " + path + ": " + e.what());
  }
}

}  // namespace cls
}  // namespace vidcap
