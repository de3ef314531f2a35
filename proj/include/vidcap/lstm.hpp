#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vidcap/rng.hpp"

namespace vidcap {
namespace lstm {

/// Word <-> index bijection with reserved sentence-delimiter tokens.
class Vocabulary {
 public:
  static constexpr int kBos = 0;
  static constexpr int kEos = 1;
  static constexpr int kUnk = 2;

  Vocabulary();

  /// Words with count >= min_freq, ordered by (count desc, word asc) after
  /// the reserved tokens.
  static Vocabulary build(const std::vector<std::vector<std::string>>& sentences,
                          std::size_t min_freq = 1);
  static Vocabulary from_words(const std::vector<std::string>& regular_words);

  int size() const { return static_cast<int>(words_.size()); }
  int id(const std::string& word) const;  // kUnk when absent
  const std::string& word(int id) const { return words_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& words() const { return words_; }

  /// BOS w1 ... wn EOS as indices.
  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  std::vector<std::string> decode(const std::vector<int>& ids) const;

  bool operator==(const Vocabulary& o) const { return words_ == o.words_; }

 private:
  std::vector<std::string> words_;
  std::map<std::string, int> index_;
};

enum class Architecture { OneLayer, TwoLayerUnfactored, TwoLayerFactored };
enum class DropoutSite { None, LangDrop, VisDrop, ConcatDrop, LstmDrop };

const char* architecture_name(Architecture a);
Architecture architecture_from_name(const std::string& s);
const char* dropout_site_name(DropoutSite s);
DropoutSite dropout_site_from_name(const std::string& s);

struct LrSchedule {
  enum class Kind { Step, Poly };
  Kind kind = Kind::Step;
  double base_lr = 0.01;
  int step_size = 4000;  // Step: lr halves every step_size iterations
  double power = 0.5;    // Poly
  int max_iter = 25000;  // Poly

  static LrSchedule step(double base_lr, int step_size);
  static LrSchedule poly(double base_lr, double power, int max_iter);
};

/// Step: base_lr * 0.5^floor(iter/step_size); Poly: base_lr * (1 - iter/max_iter)^power.
double lr_at(const LrSchedule& schedule, int iter);

struct NetworkConfig {
  Architecture architecture = Architecture::OneLayer;
  int hidden_dim = 500;
  int embed_dim = 500;
  DropoutSite dropout_site = DropoutSite::LstmDrop;
  double dropout_ratio = 0.5;
  LrSchedule schedule;
  int max_iters = 15000;
  std::uint64_t seed = 42;
  int visual_dim = 0;

  void validate() const;  // throws ConfigError naming the offending field
  int num_layers() const { return architecture == Architecture::OneLayer ? 1 : 2; }
  int layer_input_dim(int layer) const;
};

/// Stacked gate parameters of one LSTM layer; rows blocked [i; f; o; g].
struct LstmLayerParams {
  Eigen::MatrixXd w;  // 4H x (input_dim + H)
  Eigen::VectorXd b;  // 4H
};

struct Network {
  NetworkConfig config;
  Vocabulary vocab;
  Eigen::MatrixXd embedding;  // V x embed_dim
  std::vector<LstmLayerParams> layers;
  Eigen::MatrixXd out_w;  // V x hidden_dim
  Eigen::VectorXd out_b;  // V

  /// Uniform [-0.08, 0.08] init, drawn in a fixed tensor order from config.seed.
  static Network init(const NetworkConfig& cfg, const Vocabulary& vocab);
};

struct LstmState {
  std::vector<Eigen::VectorXd> h;
  std::vector<Eigen::VectorXd> c;
  static LstmState zero(const NetworkConfig& cfg);
};

/// i=sigma(Wi[x;h]+bi), f=sigma(Wf[x;h]+bf), o=sigma(Wo[x;h]+bo),
/// g=tanh(Wg[x;h]+bg); c'=f.c+i.g; h'=o.tanh(c').
void lstm_cell_forward(const LstmLayerParams& params, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& h, const Eigen::VectorXd& c, Eigen::VectorXd& h_out,
                       Eigen::VectorXd& c_out);

/// Inverted dropout: units zeroed with probability ratio, survivors scaled by
/// 1/(1-ratio). Identity when train is false or ratio is 0.
Eigen::VectorXd apply_dropout(const Eigen::VectorXd& v, double ratio, bool train, Rng* rng);

/// Mask with entries 0 (dropped) or 1/(1-ratio).
Eigen::VectorXd dropout_mask(Eigen::Index n, double ratio, Rng& rng);

struct StepResult {
  Eigen::VectorXd dist;  // softmax over the vocabulary
  LstmState state;
};

/// One decoding step. When mask_rng is non-null the configured dropout site is
/// active (training mode); otherwise dropout is identity.
StepResult forward_step(const Network& net, const Eigen::VectorXd& visual, int prev_word,
                        const LstmState& state, Rng* mask_rng = nullptr);

struct Grads {
  Eigen::MatrixXd embedding;
  std::vector<LstmLayerParams> layers;
  Eigen::MatrixXd out_w;
  Eigen::VectorXd out_b;
  static Grads zero_like(const Network& net);
};

/// Summed cross-entropy over the sequence (BOS ... EOS indices) plus, when
/// grads is non-null, its gradient via backpropagation through time. Dropout
/// masks are drawn from mask_rng when provided (training mode).
double sequence_loss(const Network& net, const Eigen::VectorXd& visual,
                     const std::vector<int>& tokens, Rng* mask_rng, Grads* grads);

struct TrainPair {
  Eigen::VectorXd visual;
  std::vector<int> tokens;  // BOS ... EOS
};

struct TrainLogEntry {
  int iter;
  double lr;
  double loss;
};

/// Seeded SGD on mean per-token cross-entropy; one sequence per iteration,
/// order reshuffled each epoch. Deterministic for a fixed (config, data, seed).
Network train(Network net, const std::vector<TrainPair>& pairs,
              std::vector<TrainLogEntry>* log = nullptr);

/// Greedy decode from BOS; BOS/UNK are never emitted, EOS stops.
std::vector<std::string> generate(const Network& net, const Eigen::VectorXd& visual,
                                  int max_len = 30);

struct Ensemble {
  std::vector<Network> members;
};

/// Greedy decode over the mean of member word distributions; every member is
/// fed the same chosen word.
std::vector<std::string> ensemble_generate(const Ensemble& ensemble,
                                           const Eigen::VectorXd& visual, int max_len = 30);

void save_network(const Network& net, const std::string& path, const std::string& config_hash = "");

struct LoadedNetwork {
  Network net;
  std::string config_hash;
};
LoadedNetwork load_network(const std::string& path);

}  // namespace lstm
}  // namespace vidcap
