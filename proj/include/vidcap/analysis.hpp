#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "vidcap/metrics.hpp"

namespace vidcap {
namespace analysis {

using Tokens = std::vector<std::string>;

/// Stable ascending sort by token count; returns the permutation.
std::vector<std::size_t> sort_by_length(const std::vector<Tokens>& refs);

/// Mean per-token training-corpus frequency; unseen words count 0.
double mean_token_frequency(const Tokens& sentence,
                            const std::map<std::string, std::size_t>& train_counts);

/// Stable descending sort by mean token frequency; returns the permutation.
std::vector<std::size_t> sort_by_word_frequency(
    const std::vector<Tokens>& refs, const std::map<std::string, std::size_t>& train_counts);

/// Centered mean filter with the window clipped to the series bounds.
std::vector<double> mean_filter(const std::vector<double>& series, int window);

struct NnResult {
  double score = 0.0;
  std::size_t index = 0;  // position in the training list
};

/// Best training sentence for the reference, scored as a candidate against it;
/// ties resolved by training order.
NnResult textual_nn(const Tokens& test_ref, const std::vector<Tokens>& train_sentences,
                    const metrics::MetricConfig& mc = {});

/// Best METEOR among the sentences of the k training clips most cosine-similar
/// to the test clip (zero-norm vectors score similarity 0; ties by training order).
double visual_knn(const Eigen::VectorXd& test_clip,
                  const std::vector<std::pair<Eigen::VectorXd, Tokens>>& train, int k,
                  const Tokens& test_ref, const metrics::MetricConfig& mc = {});

struct TopicLexicon {
  std::map<std::string, std::string> verb_topic;
  std::string topic_of(const std::string& verb) const;  // "none" when unmapped
};

/// Lines of `verb<TAB>topic` (or space-separated); '#' starts a comment.
TopicLexicon load_topic_lexicon(const std::string& path);

struct SentenceRecord {
  std::string clip_id;
  Tokens tokens;
  std::vector<std::string> verbs;
  double score = 0.0;  // METEOR of this sentence
};

struct TopicStats {
  std::string topic;
  std::size_t count = 0;
  double mean_meteor = 0.0;
  double entropy_bits = 0.0;
  std::vector<std::string> top_verbs;  // up to five, by count then alphabetical
};

struct TopicReport {
  std::vector<TopicStats> topics;  // alphabetical by topic name
  std::size_t analyzed = 0;        // single-verb sentences considered
};

/// Restricts to single-verb sentences and aggregates per verb topic.
TopicReport topic_report(const std::vector<SentenceRecord>& records, const TopicLexicon& lexicon);

struct TaggedRecord {
  std::string clip_id;
  Tokens tokens;
  double score = 0.0;
  std::vector<std::string> tags;  // subset of {no-verb, no-subject, non-human-subject}
};

struct ExtremesReport {
  std::vector<TaggedRecord> top;     // n highest scores, descending
  std::vector<TaggedRecord> bottom;  // n lowest scores, ascending
};

ExtremesReport extremes_report(const std::vector<SentenceRecord>& records, int n);

struct DifficultyCurve {
  std::string key;
  std::vector<std::string> clip_ids;
  std::vector<double> key_values;
  std::vector<double> raw;
  std::vector<double> smoothed;
  int window = 1;
};

/// Applies the ordering to the aligned id/key/score series and smooths.
DifficultyCurve make_curve(const std::string& key, const std::vector<std::size_t>& order,
                           const std::vector<std::string>& clip_ids,
                           const std::vector<double>& key_values,
                           const std::vector<double>& scores, int window);

std::string curve_csv(const DifficultyCurve& curve);
std::string topic_csv(const TopicReport& report);
std::string extremes_csv(const ExtremesReport& report);

}  // namespace analysis
}  // namespace vidcap
