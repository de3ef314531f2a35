#include "vidcap/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "vidcap/text.hpp"

namespace vidcap {
namespace metrics {

namespace {

constexpr double kRougeBeta = 1.2;

// One matching stage: words are equivalent when their stage keys coincide.
// Unmatched occurrences of each key are paired in position order, which keeps
// the alignment monotone inside a word class and the chunk count small.
void run_stage(const Tokens& cand_keys, const Tokens& ref_keys, std::vector<int>& cand_to_ref,
               std::vector<bool>& ref_used) {
  std::map<std::string, std::vector<std::size_t>> ref_slots;
  for (std::size_t j = 0; j < ref_keys.size(); ++j) {
    if (!ref_used[j] && !ref_keys[j].empty()) ref_slots[ref_keys[j]].push_back(j);
  }
  std::map<std::string, std::size_t> next;  // per-key cursor into ref_slots
  for (std::size_t i = 0; i < cand_keys.size(); ++i) {
    if (cand_to_ref[i] >= 0 || cand_keys[i].empty()) continue;
    auto it = ref_slots.find(cand_keys[i]);
    if (it == ref_slots.end()) continue;
    auto& cursor = next[cand_keys[i]];
    if (cursor >= it->second.size()) continue;
    std::size_t j = it->second[cursor++];
    cand_to_ref[i] = static_cast<int>(j);
    ref_used[j] = true;
  }
}

std::size_t count_chunks(const std::vector<int>& cand_to_ref) {
  std::size_t chunks = 0;
  int prev_ref = -2;
  bool in_chunk = false;
  for (std::size_t i = 0; i < cand_to_ref.size(); ++i) {
    if (cand_to_ref[i] < 0) {
      in_chunk = false;
      continue;
    }
    if (!in_chunk || cand_to_ref[i] != prev_ref + 1) ++chunks;
    in_chunk = true;
    prev_ref = cand_to_ref[i];
  }
  return chunks;
}

Tokens synonym_keys(const Tokens& tokens, const std::map<std::string, int>& synonyms) {
  Tokens keys(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto it = synonyms.find(tokens[i]);
    if (it != synonyms.end()) keys[i] = "syn:" + std::to_string(it->second);
  }
  return keys;
}

using Ngram = std::vector<std::string>;

std::map<Ngram, std::size_t> ngram_counts(const Tokens& tokens, std::size_t n) {
  std::map<Ngram, std::size_t> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[Ngram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                   tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

struct BleuStats {
  std::array<std::size_t, 4> matches{};
  std::array<std::size_t, 4> totals{};
  std::size_t cand_len = 0;
  std::size_t ref_len = 0;  // closest reference length, ties toward shorter
};

BleuStats bleu_sentence_stats(const Tokens& cand, const RefSet& refs) {
  BleuStats st;
  st.cand_len = cand.size();
  std::size_t best = refs.empty() ? 0 : refs[0].size();
  for (const auto& r : refs) {
    auto closer = [&](std::size_t a, std::size_t b) {
      auto da = a > st.cand_len ? a - st.cand_len : st.cand_len - a;
      auto db = b > st.cand_len ? b - st.cand_len : st.cand_len - b;
      return da < db || (da == db && a < b);
    };
    if (closer(r.size(), best)) best = r.size();
  }
  st.ref_len = best;
  for (std::size_t n = 1; n <= 4; ++n) {
    auto cc = ngram_counts(cand, n);
    std::map<Ngram, std::size_t> max_ref;
    for (const auto& r : refs) {
      for (const auto& [ng, c] : ngram_counts(r, n)) {
        auto& m = max_ref[ng];
        m = std::max(m, c);
      }
    }
    for (const auto& [ng, c] : cc) {
      st.totals[n - 1] += c;
      auto it = max_ref.find(ng);
      if (it != max_ref.end()) st.matches[n - 1] += std::min(c, it->second);
    }
  }
  return st;
}

double bleu_from_stats(const BleuStats& st, bool smoothing) {
  if (st.cand_len == 0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    double m = static_cast<double>(st.matches[n]);
    double t = static_cast<double>(st.totals[n]);
    if (smoothing && n >= 1) {
      m += 1.0;
      t += 1.0;
    }
    if (m <= 0.0 || t <= 0.0) return 0.0;
    log_sum += 0.25 * std::log(m / t);
  }
  double bp = st.cand_len >= st.ref_len
                  ? 1.0
                  : std::exp(1.0 - static_cast<double>(st.ref_len) / static_cast<double>(st.cand_len));
  return bp * std::exp(log_sum);
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

Alignment align_unigrams(const Tokens& candidate, const Tokens& reference,
                         const std::map<std::string, int>& synonyms) {
  std::vector<int> cand_to_ref(candidate.size(), -1);
  std::vector<bool> ref_used(reference.size(), false);

  run_stage(candidate, reference, cand_to_ref, ref_used);
  run_stage(stem_all(candidate), stem_all(reference), cand_to_ref, ref_used);
  if (!synonyms.empty()) {
    run_stage(synonym_keys(candidate, synonyms), synonym_keys(reference, synonyms), cand_to_ref,
              ref_used);
  }

  Alignment a;
  a.matches = static_cast<std::size_t>(
      std::count_if(cand_to_ref.begin(), cand_to_ref.end(), [](int v) { return v >= 0; }));
  a.chunks = count_chunks(cand_to_ref);
  return a;
}

double meteor(const Tokens& candidate, const RefSet& references,
              const std::map<std::string, int>& synonyms) {
  if (candidate.empty()) throw std::invalid_argument("meteor: empty candidate");
  if (references.empty()) throw std::invalid_argument("meteor: no references");
  double best = 0.0;
  for (const auto& ref : references) {
    if (ref.empty()) continue;
    Alignment a = align_unigrams(candidate, ref, synonyms);
    if (a.matches == 0) continue;
    double m = static_cast<double>(a.matches);
    double precision = m / static_cast<double>(candidate.size());
    double recall = m / static_cast<double>(ref.size());
    double f_mean = 10.0 * precision * recall / (recall + 9.0 * precision);
    double frag = static_cast<double>(a.chunks) / m;
    double penalty = 0.5 * frag * frag * frag;
    best = std::max(best, f_mean * (1.0 - penalty));
  }
  return best;
}

double bleu4(const std::vector<Tokens>& candidates, const std::vector<RefSet>& references,
             bool smoothing) {
  if (candidates.size() != references.size())
    throw std::invalid_argument("bleu4: candidate/reference length mismatch");
  BleuStats total;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    BleuStats st = bleu_sentence_stats(candidates[i], references[i]);
    for (std::size_t n = 0; n < 4; ++n) {
      total.matches[n] += st.matches[n];
      total.totals[n] += st.totals[n];
    }
    total.cand_len += st.cand_len;
    total.ref_len += st.ref_len;
  }
  return bleu_from_stats(total, smoothing);
}

double sentence_bleu4(const Tokens& candidate, const RefSet& references, bool smoothing) {
  return bleu_from_stats(bleu_sentence_stats(candidate, references), smoothing);
}

double rouge_l(const Tokens& candidate, const Tokens& reference) {
  if (candidate.empty() || reference.empty())
    throw std::invalid_argument("rouge_l: empty input");
  double lcs = static_cast<double>(lcs_length(candidate, reference));
  if (lcs == 0.0) return 0.0;
  double p = lcs / static_cast<double>(candidate.size());
  double r = lcs / static_cast<double>(reference.size());
  double b2 = kRougeBeta * kRougeBeta;
  return (1.0 + b2) * p * r / (r + b2 * p);
}

std::vector<double> cider(const std::vector<Tokens>& candidates,
                          const std::vector<RefSet>& references) {
  if (candidates.size() != references.size())
    throw std::invalid_argument("cider: candidate/reference length mismatch");
  const std::size_t n_clips = candidates.size();
  if (n_clips < 2) throw std::invalid_argument("cider: needs at least 2 clips for idf");

  // Document frequency per n-gram over the reference sets.
  std::array<std::map<Ngram, std::size_t>, 4> df;
  for (const auto& refs : references) {
    for (std::size_t n = 1; n <= 4; ++n) {
      std::map<Ngram, bool> seen;
      for (const auto& r : refs) {
        for (const auto& [ng, c] : ngram_counts(r, n)) {
          (void)c;
          seen[ng] = true;
        }
      }
      for (const auto& [ng, _] : seen) ++df[n - 1][ng];
    }
  }
  const double log_n = std::log(static_cast<double>(n_clips));
  auto idf = [&](std::size_t n, const Ngram& ng) {
    auto it = df[n - 1].find(ng);
    double d = it == df[n - 1].end() ? 1.0 : std::max<double>(1.0, static_cast<double>(it->second));
    return log_n - std::log(d);
  };
  auto tfidf = [&](const Tokens& s, std::size_t n) {
    std::map<Ngram, double> vec;
    for (const auto& [ng, c] : ngram_counts(s, n)) vec[ng] = static_cast<double>(c) * idf(n, ng);
    return vec;
  };
  auto cosine = [](const std::map<Ngram, double>& a, const std::map<Ngram, double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (const auto& [ng, v] : a) {
      na += v * v;
      auto it = b.find(ng);
      if (it != b.end()) dot += v * it->second;
    }
    for (const auto& [ng, v] : b) nb += v * v;
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
  };

  std::vector<double> scores(n_clips, 0.0);
  for (std::size_t i = 0; i < n_clips; ++i) {
    double sum_n = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
      auto cv = tfidf(candidates[i], n);
      double sum_refs = 0.0;
      for (const auto& r : references[i]) sum_refs += cosine(cv, tfidf(r, n));
      if (!references[i].empty()) sum_refs /= static_cast<double>(references[i].size());
      sum_n += sum_refs;
    }
    scores[i] = 10.0 * sum_n / 4.0;
  }
  return scores;
}

EvalReport evaluate_corpus(const std::vector<std::string>& clip_ids,
                           const std::vector<Tokens>& candidates,
                           const std::vector<RefSet>& references, const MetricConfig& cfg) {
  if (clip_ids.size() != candidates.size() || candidates.size() != references.size())
    throw std::invalid_argument("evaluate_corpus: misaligned inputs");
  EvalReport rep;
  rep.clip_ids = clip_ids;
  rep.candidates = candidates;
  rep.references = references;
  const std::size_t n = candidates.size();
  rep.meteor_scores.resize(n);
  rep.bleu_sentence.resize(n);
  rep.rouge_scores.resize(n);
  double meteor_sum = 0.0, rouge_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    rep.meteor_scores[i] = candidates[i].empty() ? 0.0 : meteor(candidates[i], references[i], cfg.synonyms);
    rep.bleu_sentence[i] = sentence_bleu4(candidates[i], references[i], cfg.bleu_smoothing);
    double best_rouge = 0.0;
    for (const auto& r : references[i]) {
      if (!candidates[i].empty() && !r.empty()) best_rouge = std::max(best_rouge, rouge_l(candidates[i], r));
    }
    rep.rouge_scores[i] = best_rouge;
    meteor_sum += rep.meteor_scores[i];
    rouge_sum += rep.rouge_scores[i];
  }
  rep.cider_contrib = cider(candidates, references);
  double cider_sum = 0.0;
  for (double c : rep.cider_contrib) cider_sum += c;
  rep.corpus_meteor = n ? meteor_sum / static_cast<double>(n) : 0.0;
  rep.corpus_rouge = n ? rouge_sum / static_cast<double>(n) : 0.0;
  rep.corpus_cider = n ? cider_sum / static_cast<double>(n) : 0.0;
  rep.corpus_bleu4 = bleu4(candidates, references, cfg.bleu_smoothing);
  return rep;
}

}  // namespace metrics
}  // namespace vidcap
