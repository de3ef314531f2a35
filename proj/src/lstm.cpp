#include "vidcap/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "vidcap/errors.hpp"
#include "vidcap/serialize.hpp"

namespace vidcap {
namespace lstm {

namespace {
const char* kBosWord = "<bos>";
const char* kEosWord = "<eos>";
const char* kUnkWord = "<unk>";
}  // namespace

Vocabulary::Vocabulary() : words_{kBosWord, kEosWord, kUnkWord} {
  for (std::size_t i = 0; i < words_.size(); ++i) index_[words_[i]] = static_cast<int>(i);
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& sentences,
                             std::size_t min_freq) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& sent : sentences)
    for (const auto& w : sent) ++counts[w];

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [w, n] : counts)
    if (n >= min_freq) kept.emplace_back(w, n);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  std::vector<std::string> regular;
  regular.reserve(kept.size());
  for (const auto& [w, n] : kept) regular.push_back(w);
  return from_words(regular);
}

Vocabulary Vocabulary::from_words(const std::vector<std::string>& regular_words) {
  Vocabulary v;
  for (const auto& w : regular_words) {
    if (v.index_.count(w)) throw std::invalid_argument("Vocabulary: duplicate word '" + w + "'");
    v.index_[w] = static_cast<int>(v.words_.size());
    v.words_.push_back(w);
  }
  return v;
}

int Vocabulary::id(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size() + 2);
  ids.push_back(kBos);
  for (const auto& t : tokens) ids.push_back(id(t));
  ids.push_back(kEos);
  return ids;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(word(i));
  return out;
}

const char* architecture_name(Architecture a) {
  switch (a) {
    case Architecture::OneLayer: return "one-layer";
    case Architecture::TwoLayerUnfactored: return "two-layer-unfactored";
    case Architecture::TwoLayerFactored: return "two-layer-factored";
  }
  return "?";
}

Architecture architecture_from_name(const std::string& s) {
  if (s == "one-layer" || s == "1-layer") return Architecture::OneLayer;
  if (s == "two-layer-unfactored" || s == "2-layer-unfactored")
    return Architecture::TwoLayerUnfactored;
  if (s == "two-layer-factored" || s == "2-layer-factored") return Architecture::TwoLayerFactored;
  throw ConfigError("unknown architecture: " + s);
}

const char* dropout_site_name(DropoutSite s) {
  switch (s) {
    case DropoutSite::None: return "none";
    case DropoutSite::LangDrop: return "lang-drop";
    case DropoutSite::VisDrop: return "vis-drop";
    case DropoutSite::ConcatDrop: return "concat-drop";
    case DropoutSite::LstmDrop: return "lstm-drop";
  }
  return "?";
}

DropoutSite dropout_site_from_name(const std::string& s) {
  if (s == "none") return DropoutSite::None;
  if (s == "lang-drop") return DropoutSite::LangDrop;
  if (s == "vis-drop") return DropoutSite::VisDrop;
  if (s == "concat-drop") return DropoutSite::ConcatDrop;
  if (s == "lstm-drop") return DropoutSite::LstmDrop;
  throw ConfigError("unknown dropout site: " + s);
}

LrSchedule LrSchedule::step(double base_lr, int step_size) {
  LrSchedule s;
  s.kind = Kind::Step;
  s.base_lr = base_lr;
  s.step_size = step_size;
  return s;
}

LrSchedule LrSchedule::poly(double base_lr, double power, int max_iter) {
  LrSchedule s;
  s.kind = Kind::Poly;
  s.base_lr = base_lr;
  s.power = power;
  s.max_iter = max_iter;
  return s;
}

double lr_at(const LrSchedule& schedule, int iter) {
  if (iter < 0) throw std::invalid_argument("lr_at: negative iteration");
  if (schedule.kind == LrSchedule::Kind::Step)
    return schedule.base_lr * std::pow(0.5, iter / schedule.step_size);
  if (iter > schedule.max_iter)
    throw std::invalid_argument("lr_at: iteration beyond poly max_iter");
  const double frac = 1.0 - static_cast<double>(iter) / static_cast<double>(schedule.max_iter);
  return schedule.base_lr * std::pow(frac, schedule.power);
}

void NetworkConfig::validate() const {
  if (hidden_dim <= 0) throw ConfigError("NetworkConfig.hidden_dim must be positive");
  if (embed_dim <= 0) throw ConfigError("NetworkConfig.embed_dim must be positive");
  if (visual_dim <= 0) throw ConfigError("NetworkConfig.visual_dim must be positive");
  if (dropout_ratio < 0.0 || dropout_ratio >= 1.0)
    throw ConfigError("NetworkConfig.dropout_ratio must lie in [0,1)");
  if (max_iters <= 0) throw ConfigError("NetworkConfig.max_iters must be positive");
  if (schedule.base_lr <= 0.0) throw ConfigError("LrSchedule.base_lr must be positive");
  if (schedule.kind == LrSchedule::Kind::Step) {
    if (schedule.step_size < 1) throw ConfigError("LrSchedule.step_size must be >= 1");
  } else {
    if (schedule.power <= 0.0) throw ConfigError("LrSchedule.power must be positive");
    if (schedule.max_iter < 1) throw ConfigError("LrSchedule.max_iter must be >= 1");
    if (max_iters > schedule.max_iter)
      throw ConfigError("NetworkConfig.max_iters exceeds poly LrSchedule.max_iter");
  }
}

int NetworkConfig::layer_input_dim(int layer) const {
  if (layer < 0 || layer >= num_layers())
    throw std::invalid_argument("layer_input_dim: layer out of range");
  switch (architecture) {
    case Architecture::OneLayer:
      return visual_dim + embed_dim;
    case Architecture::TwoLayerUnfactored:
      return layer == 0 ? visual_dim + embed_dim : hidden_dim;
    case Architecture::TwoLayerFactored:
      return layer == 0 ? embed_dim : hidden_dim + visual_dim;
  }
  return 0;
}

Network Network::init(const NetworkConfig& cfg, const Vocabulary& vocab) {
  cfg.validate();
  Network net;
  net.config = cfg;
  net.vocab = vocab;
  Rng rng(cfg.seed);
  auto fill = [&rng](Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(-0.08, 0.08);
  };
  auto fill_vec = [&rng](Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.uniform(-0.08, 0.08);
  };
  const int V = vocab.size();
  net.embedding.resize(V, cfg.embed_dim);
  fill(net.embedding);
  for (int l = 0; l < cfg.num_layers(); ++l) {
    LstmLayerParams p;
    p.w.resize(4 * cfg.hidden_dim, cfg.layer_input_dim(l) + cfg.hidden_dim);
    p.b.resize(4 * cfg.hidden_dim);
    fill(p.w);
    fill_vec(p.b);
    net.layers.push_back(std::move(p));
  }
  net.out_w.resize(V, cfg.hidden_dim);
  fill(net.out_w);
  net.out_b.resize(V);
  fill_vec(net.out_b);
  return net;
}

LstmState LstmState::zero(const NetworkConfig& cfg) {
  LstmState s;
  for (int l = 0; l < cfg.num_layers(); ++l) {
    s.h.push_back(Eigen::VectorXd::Zero(cfg.hidden_dim));
    s.c.push_back(Eigen::VectorXd::Zero(cfg.hidden_dim));
  }
  return s;
}

namespace {

Eigen::VectorXd sigmoid(const Eigen::VectorXd& z) {
  return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

struct CellCache {
  Eigen::VectorXd xh;      // concatenated [x; h_prev]
  Eigen::VectorXd c_prev;
  Eigen::VectorXd i, f, o, g;
  Eigen::VectorXd tanh_c;
  Eigen::VectorXd c_new, h_new;
};

CellCache cell_forward_cached(const LstmLayerParams& params, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& h, const Eigen::VectorXd& c) {
  const Eigen::Index H = h.size();
  CellCache cc;
  cc.xh.resize(x.size() + H);
  cc.xh << x, h;
  cc.c_prev = c;
  const Eigen::VectorXd a = params.w * cc.xh + params.b;
  cc.i = sigmoid(a.segment(0, H));
  cc.f = sigmoid(a.segment(H, H));
  cc.o = sigmoid(a.segment(2 * H, H));
  cc.g = a.segment(3 * H, H).array().tanh().matrix();
  cc.c_new = cc.f.cwiseProduct(cc.c_prev) + cc.i.cwiseProduct(cc.g);
  cc.tanh_c = cc.c_new.array().tanh().matrix();
  cc.h_new = cc.o.cwiseProduct(cc.tanh_c);
  return cc;
}

struct StepCache {
  Eigen::VectorXd mask_vis, mask_lang, mask_lstm;  // size 0 when the site is inactive
  std::vector<CellCache> cells;
  Eigen::VectorXd top_dropped;
  Eigen::VectorXd probs;
};

// One decoder step shared by inference and training; masks are drawn only when
// mask_rng is non-null and the configured site applies.
void step_forward(const Network& net, const Eigen::VectorXd& visual, int prev_word,
                  const LstmState& state, Rng* mask_rng, StepCache& cache, LstmState& next) {
  const NetworkConfig& cfg = net.config;
  if (visual.size() != cfg.visual_dim)
    throw std::invalid_argument("forward_step: visual vector has wrong dimension");
  if (prev_word < 0 || prev_word >= net.vocab.size())
    throw std::invalid_argument("forward_step: word index out of range");

  const bool train = mask_rng != nullptr && cfg.dropout_ratio > 0.0 &&
                     cfg.dropout_site != DropoutSite::None;
  if (train) {
    switch (cfg.dropout_site) {
      case DropoutSite::ConcatDrop: {
        // One mask over the concatenated [visual; language] input, split across
        // the two consumption points.
        Eigen::VectorXd full =
            dropout_mask(cfg.visual_dim + cfg.embed_dim, cfg.dropout_ratio, *mask_rng);
        cache.mask_vis = full.head(cfg.visual_dim);
        cache.mask_lang = full.tail(cfg.embed_dim);
        break;
      }
      case DropoutSite::VisDrop:
        cache.mask_vis = dropout_mask(cfg.visual_dim, cfg.dropout_ratio, *mask_rng);
        break;
      case DropoutSite::LangDrop:
        cache.mask_lang = dropout_mask(cfg.embed_dim, cfg.dropout_ratio, *mask_rng);
        break;
      case DropoutSite::LstmDrop:
        cache.mask_lstm = dropout_mask(cfg.hidden_dim, cfg.dropout_ratio, *mask_rng);
        break;
      case DropoutSite::None:
        break;
    }
  }

  Eigen::VectorXd embed = net.embedding.row(prev_word).transpose();
  if (cache.mask_lang.size()) embed = embed.cwiseProduct(cache.mask_lang);
  Eigen::VectorXd vis = visual;
  if (cache.mask_vis.size()) vis = vis.cwiseProduct(cache.mask_vis);

  next.h.resize(net.layers.size());
  next.c.resize(net.layers.size());
  cache.cells.clear();

  if (cfg.architecture == Architecture::TwoLayerFactored) {
    // Layer 1 sees only the language input; layer 2 sees [layer-1 output; visual].
    cache.cells.push_back(cell_forward_cached(net.layers[0], embed, state.h[0], state.c[0]));
    Eigen::VectorXd x1(cfg.hidden_dim + cfg.visual_dim);
    x1 << cache.cells[0].h_new, vis;
    cache.cells.push_back(cell_forward_cached(net.layers[1], x1, state.h[1], state.c[1]));
  } else {
    Eigen::VectorXd x0(cfg.visual_dim + cfg.embed_dim);
    x0 << vis, embed;
    cache.cells.push_back(cell_forward_cached(net.layers[0], x0, state.h[0], state.c[0]));
    if (cfg.architecture == Architecture::TwoLayerUnfactored)
      cache.cells.push_back(
          cell_forward_cached(net.layers[1], cache.cells[0].h_new, state.h[1], state.c[1]));
  }
  for (std::size_t l = 0; l < cache.cells.size(); ++l) {
    next.h[l] = cache.cells[l].h_new;
    next.c[l] = cache.cells[l].c_new;
  }

  cache.top_dropped = cache.cells.back().h_new;
  if (cache.mask_lstm.size())
    cache.top_dropped = cache.top_dropped.cwiseProduct(cache.mask_lstm);

  Eigen::VectorXd logits = net.out_w * cache.top_dropped + net.out_b;
  logits.array() -= logits.maxCoeff();
  Eigen::VectorXd ex = logits.array().exp().matrix();
  cache.probs = ex / ex.sum();
}

void cell_backward(const LstmLayerParams& params, const CellCache& cc, const Eigen::VectorXd& dh,
                   const Eigen::VectorXd& dc_in, LstmLayerParams& grad, Eigen::VectorXd& dx,
                   Eigen::VectorXd& dh_prev, Eigen::VectorXd& dc_prev) {
  const Eigen::Index H = cc.i.size();
  const Eigen::VectorXd d_o = dh.cwiseProduct(cc.tanh_c);
  const Eigen::VectorXd dc =
      dc_in + (dh.array() * cc.o.array() * (1.0 - cc.tanh_c.array().square())).matrix();
  const Eigen::VectorXd d_i = dc.cwiseProduct(cc.g);
  const Eigen::VectorXd d_f = dc.cwiseProduct(cc.c_prev);
  const Eigen::VectorXd d_g = dc.cwiseProduct(cc.i);
  dc_prev = dc.cwiseProduct(cc.f);

  Eigen::VectorXd da(4 * H);
  da.segment(0, H) = (d_i.array() * cc.i.array() * (1.0 - cc.i.array())).matrix();
  da.segment(H, H) = (d_f.array() * cc.f.array() * (1.0 - cc.f.array())).matrix();
  da.segment(2 * H, H) = (d_o.array() * cc.o.array() * (1.0 - cc.o.array())).matrix();
  da.segment(3 * H, H) = (d_g.array() * (1.0 - cc.g.array().square())).matrix();

  grad.w += da * cc.xh.transpose();
  grad.b += da;
  const Eigen::VectorXd dxh = params.w.transpose() * da;
  const Eigen::Index in_dim = cc.xh.size() - H;
  dx = dxh.head(in_dim);
  dh_prev = dxh.tail(H);
}

}  // namespace

void lstm_cell_forward(const LstmLayerParams& params, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& h, const Eigen::VectorXd& c, Eigen::VectorXd& h_out,
                       Eigen::VectorXd& c_out) {
  CellCache cc = cell_forward_cached(params, x, h, c);
  h_out = cc.h_new;
  c_out = cc.c_new;
}

Eigen::VectorXd apply_dropout(const Eigen::VectorXd& v, double ratio, bool train, Rng* rng) {
  if (ratio < 0.0 || ratio >= 1.0)
    throw std::invalid_argument("apply_dropout: ratio must lie in [0,1)");
  if (!train || ratio == 0.0) return v;
  if (rng == nullptr) throw std::invalid_argument("apply_dropout: rng required in train mode");
  return v.cwiseProduct(dropout_mask(v.size(), ratio, *rng));
}

Eigen::VectorXd dropout_mask(Eigen::Index n, double ratio, Rng& rng) {
  if (ratio < 0.0 || ratio >= 1.0)
    throw std::invalid_argument("dropout_mask: ratio must lie in [0,1)");
  const double scale = 1.0 / (1.0 - ratio);
  Eigen::VectorXd mask(n);
  for (Eigen::Index i = 0; i < n; ++i) mask(i) = rng.uniform() < ratio ? 0.0 : scale;
  return mask;
}

StepResult forward_step(const Network& net, const Eigen::VectorXd& visual, int prev_word,
                        const LstmState& state, Rng* mask_rng) {
  StepCache cache;
  StepResult result;
  step_forward(net, visual, prev_word, state, mask_rng, cache, result.state);
  result.dist = cache.probs;
  return result;
}

Grads Grads::zero_like(const Network& net) {
  Grads g;
  g.embedding = Eigen::MatrixXd::Zero(net.embedding.rows(), net.embedding.cols());
  for (const auto& layer : net.layers) {
    LstmLayerParams p;
    p.w = Eigen::MatrixXd::Zero(layer.w.rows(), layer.w.cols());
    p.b = Eigen::VectorXd::Zero(layer.b.size());
    g.layers.push_back(std::move(p));
  }
  g.out_w = Eigen::MatrixXd::Zero(net.out_w.rows(), net.out_w.cols());
  g.out_b = Eigen::VectorXd::Zero(net.out_b.size());
  return g;
}

double sequence_loss(const Network& net, const Eigen::VectorXd& visual,
                     const std::vector<int>& tokens, Rng* mask_rng, Grads* grads) {
  if (tokens.size() < 2 || tokens.front() != Vocabulary::kBos || tokens.back() != Vocabulary::kEos)
    throw std::invalid_argument("sequence_loss: tokens must run BOS ... EOS");
  for (int id : tokens)
    if (id < 0 || id >= net.vocab.size())
      throw std::invalid_argument("sequence_loss: token index out of range");

  const NetworkConfig& cfg = net.config;
  const int steps = static_cast<int>(tokens.size()) - 1;
  std::vector<StepCache> caches(static_cast<std::size_t>(steps));
  LstmState state = LstmState::zero(cfg);
  double loss = 0.0;
  for (int t = 0; t < steps; ++t) {
    LstmState next;
    step_forward(net, visual, tokens[static_cast<std::size_t>(t)], state, mask_rng,
                 caches[static_cast<std::size_t>(t)], next);
    state = std::move(next);
    loss -= std::log(caches[static_cast<std::size_t>(t)].probs(tokens[static_cast<std::size_t>(t) + 1]));
  }
  if (grads == nullptr) return loss;

  const int L = cfg.num_layers();
  std::vector<Eigen::VectorXd> dh(static_cast<std::size_t>(L),
                                  Eigen::VectorXd::Zero(cfg.hidden_dim));
  std::vector<Eigen::VectorXd> dc(static_cast<std::size_t>(L),
                                  Eigen::VectorXd::Zero(cfg.hidden_dim));
  for (int t = steps - 1; t >= 0; --t) {
    const StepCache& sc = caches[static_cast<std::size_t>(t)];
    const int prev = tokens[static_cast<std::size_t>(t)];
    const int target = tokens[static_cast<std::size_t>(t) + 1];

    Eigen::VectorXd dlogits = sc.probs;
    dlogits(target) -= 1.0;
    grads->out_w += dlogits * sc.top_dropped.transpose();
    grads->out_b += dlogits;
    Eigen::VectorXd dtop = net.out_w.transpose() * dlogits;
    if (sc.mask_lstm.size()) dtop = dtop.cwiseProduct(sc.mask_lstm);
    dh[static_cast<std::size_t>(L - 1)] += dtop;

    Eigen::VectorXd dx_bottom;
    for (int l = L - 1; l >= 0; --l) {
      Eigen::VectorXd dx, dh_prev, dc_prev;
      cell_backward(net.layers[static_cast<std::size_t>(l)], sc.cells[static_cast<std::size_t>(l)],
                    dh[static_cast<std::size_t>(l)], dc[static_cast<std::size_t>(l)],
                    grads->layers[static_cast<std::size_t>(l)], dx, dh_prev, dc_prev);
      dh[static_cast<std::size_t>(l)] = dh_prev;
      dc[static_cast<std::size_t>(l)] = dc_prev;
      if (l == 1) {
        // Layer 2's input was built from layer 1's same-step output (plus the
        // visual vector in the factored wiring, which carries no parameters).
        if (cfg.architecture == Architecture::TwoLayerUnfactored)
          dh[0] += dx;
        else
          dh[0] += dx.head(cfg.hidden_dim);
      } else {
        dx_bottom = std::move(dx);
      }
    }

    Eigen::VectorXd de = cfg.architecture == Architecture::TwoLayerFactored
                             ? dx_bottom
                             : Eigen::VectorXd(dx_bottom.tail(cfg.embed_dim));
    if (sc.mask_lang.size()) de = de.cwiseProduct(sc.mask_lang);
    grads->embedding.row(prev) += de.transpose();
  }
  return loss;
}

namespace {

void apply_update(Network& net, const Grads& grads, double scale) {
  net.embedding -= scale * grads.embedding;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    net.layers[l].w -= scale * grads.layers[l].w;
    net.layers[l].b -= scale * grads.layers[l].b;
  }
  net.out_w -= scale * grads.out_w;
  net.out_b -= scale * grads.out_b;
}

void zero_grads(Grads& g) {
  g.embedding.setZero();
  for (auto& layer : g.layers) {
    layer.w.setZero();
    layer.b.setZero();
  }
  g.out_w.setZero();
  g.out_b.setZero();
}

}  // namespace

Network train(Network net, const std::vector<TrainPair>& pairs,
              std::vector<TrainLogEntry>* log) {
  net.config.validate();
  if (pairs.empty()) throw std::invalid_argument("train: no training pairs");
  for (const auto& p : pairs) {
    if (p.visual.size() != net.config.visual_dim)
      throw std::invalid_argument("train: visual vector has wrong dimension");
    if (p.tokens.size() < 2)
      throw std::invalid_argument("train: sequence shorter than BOS+EOS");
  }

  Rng shuffle_rng(net.config.seed);
  // Separate stream so the shuffle and the dropout masks stay decoupled.
  Rng mask_rng(net.config.seed ^ 0x9e3779b97f4a7c15ULL);
  const bool use_dropout =
      net.config.dropout_site != DropoutSite::None && net.config.dropout_ratio > 0.0;

  Grads grads = Grads::zero_like(net);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  int iter = 0;
  while (iter < net.config.max_iters) {
    shuffle_rng.shuffle(order);
    for (std::size_t idx : order) {
      if (iter >= net.config.max_iters) break;
      const double lr = lr_at(net.config.schedule, iter);
      const TrainPair& pair = pairs[idx];
      zero_grads(grads);
      const double total =
          sequence_loss(net, pair.visual, pair.tokens, use_dropout ? &mask_rng : nullptr, &grads);
      const double n_tokens = static_cast<double>(pair.tokens.size() - 1);
      const double mean_loss = total / n_tokens;
      if (!std::isfinite(mean_loss))
        throw NumericError("train: non-finite loss at iteration " + std::to_string(iter));
      apply_update(net, grads, lr / n_tokens);
      if (log) log->push_back({iter, lr, mean_loss});
      ++iter;
    }
  }
  return net;
}

namespace {

// Greedy pick over a distribution, never emitting BOS or UNK.
int pick_word(const Eigen::VectorXd& dist) {
  int best = Vocabulary::kEos;
  double best_p = -1.0;
  for (Eigen::Index i = 0; i < dist.size(); ++i) {
    const int id = static_cast<int>(i);
    if (id == Vocabulary::kBos || id == Vocabulary::kUnk) continue;
    if (dist(i) > best_p) {
      best_p = dist(i);
      best = id;
    }
  }
  return best;
}

}  // namespace

std::vector<std::string> generate(const Network& net, const Eigen::VectorXd& visual, int max_len) {
  std::vector<std::string> out;
  LstmState state = LstmState::zero(net.config);
  int prev = Vocabulary::kBos;
  for (int step = 0; step < max_len; ++step) {
    StepResult r = forward_step(net, visual, prev, state);
    state = std::move(r.state);
    const int chosen = pick_word(r.dist);
    if (chosen == Vocabulary::kEos) break;
    out.push_back(net.vocab.word(chosen));
    prev = chosen;
  }
  return out;
}

std::vector<std::string> ensemble_generate(const Ensemble& ensemble, const Eigen::VectorXd& visual,
                                           int max_len) {
  if (ensemble.members.empty()) throw std::invalid_argument("ensemble_generate: no members");
  const Network& first = ensemble.members.front();
  for (const auto& m : ensemble.members) {
    if (!(m.vocab == first.vocab))
      throw std::invalid_argument("ensemble_generate: members disagree on the vocabulary");
    if (m.config.visual_dim != first.config.visual_dim)
      throw std::invalid_argument("ensemble_generate: members disagree on visual_dim");
  }

  std::vector<LstmState> states;
  for (const auto& m : ensemble.members) states.push_back(LstmState::zero(m.config));

  std::vector<std::string> out;
  int prev = Vocabulary::kBos;
  for (int step = 0; step < max_len; ++step) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(first.vocab.size());
    for (std::size_t i = 0; i < ensemble.members.size(); ++i) {
      StepResult r = forward_step(ensemble.members[i], visual, prev, states[i]);
      states[i] = std::move(r.state);
      mean += r.dist;
    }
    mean /= static_cast<double>(ensemble.members.size());
    const int chosen = pick_word(mean);
    if (chosen == Vocabulary::kEos) break;
    out.push_back(first.vocab.word(chosen));
    prev = chosen;
  }
  return out;
}

namespace {

nlohmann::json schedule_json(const LrSchedule& s) {
  nlohmann::json j;
  j["kind"] = s.kind == LrSchedule::Kind::Step ? "step" : "poly";
  j["base_lr"] = s.base_lr;
  j["step_size"] = s.step_size;
  j["power"] = s.power;
  j["max_iter"] = s.max_iter;
  return j;
}

LrSchedule schedule_from_json(const nlohmann::json& j) {
  LrSchedule s;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "step")
    s.kind = LrSchedule::Kind::Step;
  else if (kind == "poly")
    s.kind = LrSchedule::Kind::Poly;
  else
    throw ArtifactError("unknown schedule kind: " + kind);
  s.base_lr = j.at("base_lr").get<double>();
  s.step_size = j.at("step_size").get<int>();
  s.power = j.at("power").get<double>();
  s.max_iter = j.at("max_iter").get<int>();
  return s;
}

}  // namespace

void save_network(const Network& net, const std::string& path, const std::string& config_hash) {
  nlohmann::json j;
  j["format"] = "vidcap-network";
  j["version"] = 1;
  j["config_hash"] = config_hash;

  nlohmann::json cfg;
  cfg["architecture"] = architecture_name(net.config.architecture);
  cfg["hidden_dim"] = net.config.hidden_dim;
  cfg["embed_dim"] = net.config.embed_dim;
  cfg["dropout_site"] = dropout_site_name(net.config.dropout_site);
  cfg["dropout_ratio"] = net.config.dropout_ratio;
  cfg["schedule"] = schedule_json(net.config.schedule);
  cfg["max_iters"] = net.config.max_iters;
  cfg["seed"] = net.config.seed;
  cfg["visual_dim"] = net.config.visual_dim;
  j["config"] = cfg;

  std::vector<std::string> regular(net.vocab.words().begin() + 3, net.vocab.words().end());
  j["vocab"] = regular;

  nlohmann::json params;
  params["embedding"] = matrix_json(net.embedding);
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : net.layers) {
    nlohmann::json lj;
    lj["w"] = matrix_json(layer.w);
    lj["b"] = vector_json(layer.b);
    layers.push_back(std::move(lj));
  }
  params["layers"] = std::move(layers);
  params["out_w"] = matrix_json(net.out_w);
  params["out_b"] = vector_json(net.out_b);
  j["params"] = std::move(params);

  write_text_atomic(path, j.dump(2) + "\n");
}

LoadedNetwork load_network(const std::string& path) {
  const nlohmann::json j = read_json_file(path);
  try {
    if (j.at("format").get<std::string>() != "vidcap-network")
      throw ArtifactError("not a network artifact: " + path);

    const nlohmann::json& cfg = j.at("config");
    NetworkConfig config;
    config.architecture = architecture_from_name(cfg.at("architecture").get<std::string>());
    config.hidden_dim = cfg.at("hidden_dim").get<int>();
    config.embed_dim = cfg.at("embed_dim").get<int>();
    config.dropout_site = dropout_site_from_name(cfg.at("dropout_site").get<std::string>());
    config.dropout_ratio = cfg.at("dropout_ratio").get<double>();
    config.schedule = schedule_from_json(cfg.at("schedule"));
    config.max_iters = cfg.at("max_iters").get<int>();
    config.seed = cfg.at("seed").get<std::uint64_t>();
    config.visual_dim = cfg.at("visual_dim").get<int>();

    LoadedNetwork loaded;
    loaded.config_hash = j.at("config_hash").get<std::string>();
    loaded.net.config = config;
    loaded.net.vocab = Vocabulary::from_words(j.at("vocab").get<std::vector<std::string>>());

    const nlohmann::json& params = j.at("params");
    loaded.net.embedding = matrix_from_json(params.at("embedding"));
    for (const auto& lj : params.at("layers")) {
      LstmLayerParams p;
      p.w = matrix_from_json(lj.at("w"));
      p.b = vector_from_json(lj.at("b"));
      loaded.net.layers.push_back(std::move(p));
    }
    loaded.net.out_w = matrix_from_json(params.at("out_w"));
    loaded.net.out_b = vector_from_json(params.at("out_b"));

    const int V = loaded.net.vocab.size();
    if (loaded.net.embedding.rows() != V || loaded.net.embedding.cols() != config.embed_dim ||
        loaded.net.out_w.rows() != V || loaded.net.out_w.cols() != config.hidden_dim ||
        loaded.net.out_b.size() != V ||
        static_cast<int>(loaded.net.layers.size()) != config.num_layers())
      throw ArtifactError("network artifact has inconsistent shapes: " + path);
    for (int l = 0; l < config.num_layers(); ++l) {
      const auto& p = loaded.net.layers[static_cast<std::size_t>(l)];
      if (p.w.rows() != 4 * config.hidden_dim ||
          p.w.cols() != config.layer_input_dim(l) + config.hidden_dim ||
          p.b.size() != 4 * config.hidden_dim)
        throw ArtifactError("network artifact has inconsistent shapes: " + path);
    }
    return loaded;
  } catch (const nlohmann::json::exception& e) {
    throw ArtifactError("malformed network artifact " + path + ": " + e.what());
  }
}

}  // namespace lstm
}  // namespace vidcap
