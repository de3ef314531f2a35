#include "vidcap/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "vidcap/errors.hpp"
#include "vidcap/text.hpp"

namespace vidcap {
namespace analysis {

namespace {

std::vector<std::size_t> identity_order(std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  return order;
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", x);
  return buf;
}

}  // namespace

std::vector<std::size_t> sort_by_length(const std::vector<Tokens>& refs) {
  if (refs.empty()) throw std::invalid_argument("sort_by_length: empty input");
  auto order = identity_order(refs.size());
  std::stable_sort(order.begin(), order.end(), [&refs](std::size_t a, std::size_t b) {
    return refs[a].size() < refs[b].size();
  });
  return order;
}

double mean_token_frequency(const Tokens& sentence,
                            const std::map<std::string, std::size_t>& train_counts) {
  if (sentence.empty()) return 0.0;
  double total = 0.0;
  for (const auto& w : sentence) {
    auto it = train_counts.find(w);
    if (it != train_counts.end()) total += static_cast<double>(it->second);
  }
  return total / static_cast<double>(sentence.size());
}

std::vector<std::size_t> sort_by_word_frequency(
    const std::vector<Tokens>& refs, const std::map<std::string, std::size_t>& train_counts) {
  if (refs.empty()) throw std::invalid_argument("sort_by_word_frequency: empty input");
  std::vector<double> means(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i)
    means[i] = mean_token_frequency(refs[i], train_counts);
  auto order = identity_order(refs.size());
  std::stable_sort(order.begin(), order.end(),
                   [&means](std::size_t a, std::size_t b) { return means[a] > means[b]; });
  return order;
}

std::vector<double> mean_filter(const std::vector<double>& series, int window) {
  if (window < 1) throw std::invalid_argument("mean_filter: window must be >= 1");
  const std::size_t n = series.size();
  std::vector<double> out(n);
  const std::size_t back = static_cast<std::size_t>((window - 1) / 2);
  const std::size_t fwd = static_cast<std::size_t>(window / 2);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= back ? i - back : 0;
    const std::size_t hi = std::min(n - 1, i + fwd);
    double sum = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) sum += series[j];
    out[i] = sum / static_cast<double>(hi - lo + 1);
  }
  return out;
}

NnResult textual_nn(const Tokens& test_ref, const std::vector<Tokens>& train_sentences,
                    const metrics::MetricConfig& mc) {
  if (train_sentences.empty()) throw std::invalid_argument("textual_nn: empty training set");
  NnResult best{-1.0, 0};
  const std::vector<Tokens> refs{test_ref};
  for (std::size_t i = 0; i < train_sentences.size(); ++i) {
    const double s = metrics::meteor(train_sentences[i], refs, mc.synonyms);
    if (s > best.score) best = {s, i};
  }
  return best;
}

double visual_knn(const Eigen::VectorXd& test_clip,
                  const std::vector<std::pair<Eigen::VectorXd, Tokens>>& train, int k,
                  const Tokens& test_ref, const metrics::MetricConfig& mc) {
  if (k < 1 || static_cast<std::size_t>(k) > train.size())
    throw std::invalid_argument("visual_knn: k out of range");
  const double test_norm = test_clip.norm();
  std::vector<double> sims(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train[i].first.size() != test_clip.size())
      throw std::invalid_argument("visual_knn: dimension mismatch");
    const double denom = test_norm * train[i].first.norm();
    sims[i] = denom > 0.0 ? test_clip.dot(train[i].first) / denom : 0.0;
  }
  auto order = identity_order(train.size());
  std::stable_sort(order.begin(), order.end(),
                   [&sims](std::size_t a, std::size_t b) { return sims[a] > sims[b]; });

  double best = 0.0;
  const std::vector<Tokens> refs{test_ref};
  for (int i = 0; i < k; ++i)
    best = std::max(best,
                    metrics::meteor(train[order[static_cast<std::size_t>(i)]].second, refs, mc.synonyms));
  return best;
}

std::string TopicLexicon::topic_of(const std::string& verb) const {
  auto it = verb_topic.find(verb);
  return it == verb_topic.end() ? "none" : it->second;
}

TopicLexicon load_topic_lexicon(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArtifactError("missing topic lexicon: " + path);
  TopicLexicon lex;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string verb, topic, extra;
    if (!(ss >> verb)) continue;  // blank line
    if (!(ss >> topic) || (ss >> extra))
      throw ConfigError("topic lexicon " + path + " line " + std::to_string(lineno) +
                        ": expected `verb topic`");
    auto [it, inserted] = lex.verb_topic.emplace(verb, topic);
    if (!inserted && it->second != topic)
      throw ConfigError("topic lexicon " + path + ": verb '" + verb +
                        "' mapped to two topics");
  }
  return lex;
}

TopicReport topic_report(const std::vector<SentenceRecord>& records, const TopicLexicon& lexicon) {
  struct Acc {
    std::size_t count = 0;
    double score_sum = 0.0;
    std::map<std::string, std::size_t> verb_counts;
  };
  std::map<std::string, Acc> acc;
  for (const auto& rec : records) {
    if (rec.verbs.size() != 1) continue;  // the report covers single-verb sentences only
    const std::string& verb = rec.verbs.front();
    Acc& a = acc[lexicon.topic_of(verb)];
    ++a.count;
    a.score_sum += rec.score;
    ++a.verb_counts[verb];
  }

  TopicReport report;
  for (const auto& [topic, a] : acc) {
    TopicStats st;
    st.topic = topic;
    st.count = a.count;
    st.mean_meteor = a.score_sum / static_cast<double>(a.count);

    double entropy = 0.0;
    for (const auto& [verb, n] : a.verb_counts) {
      const double p = static_cast<double>(n) / static_cast<double>(a.count);
      entropy -= p * std::log2(p);
    }
    st.entropy_bits = entropy;

    std::vector<std::pair<std::string, std::size_t>> by_count(a.verb_counts.begin(),
                                                              a.verb_counts.end());
    std::sort(by_count.begin(), by_count.end(), [](const auto& x, const auto& y) {
      if (x.second != y.second) return x.second > y.second;
      return x.first < y.first;
    });
    for (std::size_t i = 0; i < by_count.size() && i < 5; ++i)
      st.top_verbs.push_back(by_count[i].first);

    report.analyzed += a.count;
    report.topics.push_back(std::move(st));
  }
  return report;
}

namespace {

TaggedRecord tag_record(const SentenceRecord& rec) {
  TaggedRecord t;
  t.clip_id = rec.clip_id;
  t.tokens = rec.tokens;
  t.score = rec.score;
  if (rec.verbs.empty()) t.tags.push_back("no-verb");
  if (!rec.tokens.empty()) {
    const std::string first_stem = stem(rec.tokens.front());
    for (const auto& v : rec.verbs) {
      if (stem(v) == first_stem) {
        t.tags.push_back("no-subject");  // sentence leads with its verb
        break;
      }
    }
    if (rec.tokens.front() != "someone") t.tags.push_back("non-human-subject");
  }
  return t;
}

}  // namespace

ExtremesReport extremes_report(const std::vector<SentenceRecord>& records, int n) {
  if (n < 1 || static_cast<std::size_t>(n) > records.size())
    throw std::invalid_argument("extremes_report: n out of range");
  auto order = identity_order(records.size());
  std::stable_sort(order.begin(), order.end(), [&records](std::size_t a, std::size_t b) {
    return records[a].score > records[b].score;
  });
  ExtremesReport report;
  for (int i = 0; i < n; ++i) report.top.push_back(tag_record(records[order[static_cast<std::size_t>(i)]]));
  for (int i = 0; i < n; ++i)
    report.bottom.push_back(
        tag_record(records[order[records.size() - 1 - static_cast<std::size_t>(i)]]));
  return report;
}

DifficultyCurve make_curve(const std::string& key, const std::vector<std::size_t>& order,
                           const std::vector<std::string>& clip_ids,
                           const std::vector<double>& key_values,
                           const std::vector<double>& scores, int window) {
  if (order.size() != clip_ids.size() || order.size() != key_values.size() ||
      order.size() != scores.size())
    throw std::invalid_argument("make_curve: series lengths differ");
  DifficultyCurve curve;
  curve.key = key;
  curve.window = window;
  for (std::size_t idx : order) {
    curve.clip_ids.push_back(clip_ids[idx]);
    curve.key_values.push_back(key_values[idx]);
    curve.raw.push_back(scores[idx]);
  }
  curve.smoothed = mean_filter(curve.raw, window);
  return curve;
}

std::string curve_csv(const DifficultyCurve& curve) {
  std::ostringstream out;
  out << "rank,clip_id,key_value,score,smoothed\n";
  for (std::size_t i = 0; i < curve.clip_ids.size(); ++i)
    out << i << ',' << curve.clip_ids[i] << ',' << fmt(curve.key_values[i]) << ','
        << fmt(curve.raw[i]) << ',' << fmt(curve.smoothed[i]) << '\n';
  return out.str();
}

std::string topic_csv(const TopicReport& report) {
  std::ostringstream out;
  out << "topic,count,mean_meteor,entropy,top5\n";
  for (const auto& t : report.topics)
    out << t.topic << ',' << t.count << ',' << fmt(t.mean_meteor) << ',' << fmt(t.entropy_bits)
        << ',' << join(t.top_verbs, " ") << '\n';
  return out.str();
}

std::string extremes_csv(const ExtremesReport& report) {
  std::ostringstream out;
  out << "end,rank,clip_id,score,tags,sentence\n";
  for (std::size_t i = 0; i < report.top.size(); ++i) {
    const auto& r = report.top[i];
    out << "top," << i << ',' << r.clip_id << ',' << fmt(r.score) << ',' << join(r.tags, " ")
        << ',' << join(r.tokens, " ") << '\n';
  }
  for (std::size_t i = 0; i < report.bottom.size(); ++i) {
    const auto& r = report.bottom[i];
    out << "bottom," << i << ',' << r.clip_id << ',' << fmt(r.score) << ',' << join(r.tags, " ")
        << ',' << join(r.tokens, " ") << '\n';
  }
  return out.str();
}

}  // namespace analysis
}  // namespace vidcap
