#pragma once

#include <map>
#include <string>
#include <vector>

namespace vidcap {
namespace metrics {

using Tokens = std::vector<std::string>;
using RefSet = std::vector<Tokens>;

struct MetricConfig {
  bool bleu_smoothing = false;  // add-one smoothing on n>=2 precisions
  std::map<std::string, int> synonyms;  // word -> synonym group; empty disables the stage
};

struct Alignment {
  std::size_t matches = 0;
  std::size_t chunks = 0;
};

/// Unigram alignment by stage cascade (exact, stem, optional synonym),
/// in-order pairing within each word class.
Alignment align_unigrams(const Tokens& candidate, const Tokens& reference,
                         const std::map<std::string, int>& synonyms);

/// METEOR-lite: best score over references. F_mean = 10PR/(R+9P),
/// penalty = 0.5 * (chunks/matches)^3, score = F_mean * (1 - penalty).
double meteor(const Tokens& candidate, const RefSet& references,
              const std::map<std::string, int>& synonyms = {});

/// Corpus-level BLEU@4: geometric mean of clipped n-gram precisions with
/// brevity penalty. references[i] are the references for candidates[i].
double bleu4(const std::vector<Tokens>& candidates, const std::vector<RefSet>& references,
             bool smoothing = false);

/// Single-sentence BLEU@4 (same formula on a one-sentence corpus).
double sentence_bleu4(const Tokens& candidate, const RefSet& references, bool smoothing = false);

/// LCS-based F-measure, beta = 1.2: F = (1+b^2)PR / (R + b^2 P).
double rouge_l(const Tokens& candidate, const Tokens& reference);

/// Per-clip CIDEr contributions (mean over n=1..4 of tf-idf cosine against
/// the clip's references, scaled by 10). Corpus CIDEr is their mean.
std::vector<double> cider(const std::vector<Tokens>& candidates,
                          const std::vector<RefSet>& references);

struct EvalReport {
  std::vector<std::string> clip_ids;
  std::vector<Tokens> candidates;
  std::vector<RefSet> references;
  std::vector<double> meteor_scores;
  std::vector<double> bleu_sentence;
  std::vector<double> rouge_scores;
  std::vector<double> cider_contrib;
  double corpus_meteor = 0.0;
  double corpus_bleu4 = 0.0;
  double corpus_rouge = 0.0;
  double corpus_cider = 0.0;
};

EvalReport evaluate_corpus(const std::vector<std::string>& clip_ids,
                           const std::vector<Tokens>& candidates,
                           const std::vector<RefSet>& references, const MetricConfig& cfg);

}  // namespace metrics
}  // namespace vidcap
