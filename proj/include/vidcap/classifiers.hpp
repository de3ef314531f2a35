#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vidcap/corpus.hpp"

namespace vidcap {
namespace cls {

struct SvmTrainConfig {
  double reg_lambda = 1e-4;
  int epochs = 20;
  std::uint64_t seed = 1;
  double learning_rate = 0.1;
};

struct LinearClassifier {
  GroupedLabel label;
  Eigen::VectorXd weights;
  double bias = 0.0;
  std::optional<double> roc_auc;
};

enum class BankMode { Retrieved, Trained };

/// Per-dimension standardization statistics for one base channel, computed on
/// the training split and applied everywhere.
struct ChannelStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;  // zero-variance dims carry 1.0
};

struct ClassifierBank {
  std::vector<LinearClassifier> classifiers;  // canonical vocabulary order
  BankMode mode = BankMode::Trained;
  std::map<std::string, ChannelStats> standardization;  // base channel name -> stats
  std::vector<std::string> skipped;  // "text|group" of labels without a trainable split

  std::size_t size() const { return classifiers.size(); }
};

struct ScoreVector {
  std::string clip_id;
  Eigen::VectorXd scores;  // components in (0,1), canonical order
};

/// L2-regularized hinge loss via seeded per-sample subgradient descent.
/// Identical inputs and seed give bit-identical parameters.
LinearClassifier train_binary_svm(const std::vector<Eigen::VectorXd>& positives,
                                  const std::vector<Eigen::VectorXd>& negatives,
                                  const SvmTrainConfig& cfg);

/// Pairwise ROC-AUC: P(score_pos > score_neg) + 0.5 P(score_pos = score_neg).
double roc_auc(const std::vector<double>& scores, const std::vector<bool>& truth);

ChannelStats compute_channel_stats(const std::vector<const Eigen::VectorXd*>& vectors);

/// Standardized feature of a clip on a (possibly composite) channel.
Eigen::VectorXd standardized_feature(const Clip& clip, const std::string& channel,
                                     const std::map<std::string, ChannelStats>& stats);

/// The clips positive for one grouped label: verb entries match verb-flagged
/// annotation occurrences, object/place entries match the rest.
std::vector<std::string> positive_clips(const CorpusSplit& corpus, const GroupedLabel& label);

/// Trains one-vs-all classifiers per vocabulary entry. Trained mode restricts
/// negatives to clips carrying another label of the same group; Retrieved mode
/// pools negatives over all labels. Labels without positives or negatives are
/// skipped and recorded.
ClassifierBank train_group_classifiers(const CorpusSplit& corpus, const LabelVocabulary& vocab,
                                       const SvmTrainConfig& cfg, BankMode mode);

/// Recomputes validation ROC-AUC per classifier and keeps those >= threshold.
/// Classifiers whose AUC is undefined on the validation split count as 0.
ClassifierBank select_labels(const ClassifierBank& bank, const CorpusSplit& validation,
                             double threshold);

/// Concatenated logistic scores, one per classifier, canonical order.
ScoreVector score_clip(const ClassifierBank& bank, const Clip& clip);

double logistic(double x);

void save_bank(const ClassifierBank& bank, const std::string& path,
               const std::string& config_hash = "");

struct LoadedBank {
  ClassifierBank bank;
  std::string config_hash;
};
LoadedBank load_bank(const std::string& path);

}  // namespace cls
}  // namespace vidcap
