#include <doctest.h>

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "temp_util.hpp"
#include "vidcap/classifiers.hpp"
#include "vidcap/corpus.hpp"
#include "vidcap/rng.hpp"

using namespace vidcap;
using namespace vidcap::cls;

namespace {

Eigen::VectorXd vec1(double x) {
  Eigen::VectorXd v(1);
  v[0] = x;
  return v;
}

Eigen::VectorXd vec2(double x, double y) {
  Eigen::VectorXd v(2);
  v << x, y;
  return v;
}

Eigen::VectorXd vec3(double x, double y, double z) {
  Eigen::VectorXd v(3);
  v << x, y, z;
  return v;
}

void add_clip(CorpusSplit& c, const std::string& id,
              std::map<std::string, Eigen::VectorXd> features) {
  Clip clip;
  clip.clip_id = id;
  clip.features = std::move(features);
  c.clip_index[id] = c.clips.size();
  c.clips.push_back(std::move(clip));
}

void add_annotation(CorpusSplit& c, const std::string& clip_id,
                    std::vector<std::string> labels, std::vector<bool> flags) {
  ParsedAnnotation a;
  a.clip_id = clip_id;
  a.labels = std::move(labels);
  a.verb_flags = std::move(flags);
  a.parse_ok = true;
  c.annotations.push_back(std::move(a));
}

GroupedLabel make_label(const std::string& text, Group g, const std::string& channel) {
  GroupedLabel gl;
  gl.text = text;
  gl.group = g;
  gl.channel = channel;
  gl.count = 1;
  return gl;
}

ChannelStats identity_stats(Eigen::Index dim) {
  ChannelStats st;
  st.mean = Eigen::VectorXd::Zero(dim);
  st.stddev = Eigen::VectorXd::Ones(dim);
  return st;
}

double brute_force_auc(const std::vector<double>& scores, const std::vector<bool>& truth) {
  double num = 0.0, pairs = 0.0;
  for (std::size_t p = 0; p < scores.size(); ++p) {
    if (!truth[p]) continue;
    for (std::size_t n = 0; n < scores.size(); ++n) {
      if (truth[n]) continue;
      pairs += 1.0;
      if (scores[p] > scores[n]) num += 1.0;
      else if (scores[p] == scores[n]) num += 0.5;
    }
  }
  return num / pairs;
}

}  // namespace

TEST_CASE("train_binary_svm separates 2D blobs perfectly") {
  Rng rng(3);
  std::vector<Eigen::VectorXd> pos, neg;
  for (int i = 0; i < 10; ++i) {
    pos.push_back(vec2(2.0 + rng.uniform(-0.5, 0.5), 2.0 + rng.uniform(-0.5, 0.5)));
    neg.push_back(vec2(-2.0 + rng.uniform(-0.5, 0.5), -2.0 + rng.uniform(-0.5, 0.5)));
  }
  SvmTrainConfig cfg;
  LinearClassifier c = train_binary_svm(pos, neg, cfg);
  for (const auto& x : pos) CHECK(c.weights.dot(x) + c.bias > 0.0);
  for (const auto& x : neg) CHECK(c.weights.dot(x) + c.bias < 0.0);
}

TEST_CASE("train_binary_svm rejects one-sided input") {
  SvmTrainConfig cfg;
  CHECK_THROWS_AS(train_binary_svm({vec2(1, 1)}, {}, cfg), std::invalid_argument);
  CHECK_THROWS_AS(train_binary_svm({}, {vec2(1, 1)}, cfg), std::invalid_argument);
  CHECK_THROWS_AS(train_binary_svm({vec2(1, 1)}, {vec1(0)}, cfg), std::invalid_argument);
}

TEST_CASE("train_binary_svm is bit-deterministic per seed") {
  Rng rng(11);
  std::vector<Eigen::VectorXd> pos, neg;
  for (int i = 0; i < 8; ++i) {
    pos.push_back(vec2(rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0)));
    neg.push_back(vec2(rng.uniform(-2.0, -0.5), rng.uniform(-2.0, -0.5)));
  }
  SvmTrainConfig cfg;
  cfg.seed = 7;
  LinearClassifier a = train_binary_svm(pos, neg, cfg);
  LinearClassifier b = train_binary_svm(pos, neg, cfg);
  CHECK(a.bias == b.bias);
  CHECK((a.weights.array() == b.weights.array()).all());

  cfg.seed = 8;
  LinearClassifier c = train_binary_svm(pos, neg, cfg);
  CHECK((a.weights - c.weights).norm() > 0.0);  // different shuffle, different path
}

TEST_CASE("roc_auc on hand-computable inputs") {
  CHECK(roc_auc({0.9, 0.8, 0.2, 0.1}, {true, true, false, false}) == doctest::Approx(1.0));
  CHECK(roc_auc({0.5, 0.5}, {true, false}) == doctest::Approx(0.5));
  CHECK(roc_auc({0.1, 0.9}, {true, false}) == doctest::Approx(0.0));
  CHECK_THROWS_AS(roc_auc({0.1, 0.9}, {true, true}), std::invalid_argument);
  CHECK_THROWS_AS(roc_auc({0.1}, {true, false}), std::invalid_argument);
}

TEST_CASE("roc_auc matches the pair-counting oracle on random inputs") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    std::vector<double> scores;
    std::vector<bool> truth;
    for (int i = 0; i < 50; ++i) {
      // Quantized scores so ties actually occur.
      scores.push_back(std::floor(rng.uniform() * 10.0) / 10.0);
      truth.push_back(rng.uniform() < 0.4);
    }
    if (std::count(truth.begin(), truth.end(), true) == 0) truth[0] = true;
    if (std::count(truth.begin(), truth.end(), false) == 0) truth[1] = false;
    CHECK(roc_auc(scores, truth) == doctest::Approx(brute_force_auc(scores, truth)).epsilon(1e-12));
  }
}

TEST_CASE("roc_auc is invariant under strictly increasing transforms") {
  Rng rng(21);
  std::vector<double> scores;
  std::vector<bool> truth;
  for (int i = 0; i < 40; ++i) {
    scores.push_back(std::floor(rng.uniform(-1.0, 1.0) * 5.0) / 5.0);
    truth.push_back(i % 3 == 0);
  }
  const double base = roc_auc(scores, truth);
  std::vector<double> affine(scores), cubic(scores), expo(scores);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    affine[i] = 2.0 * scores[i] + 1.0;
    cubic[i] = scores[i] * scores[i] * scores[i];
    expo[i] = std::exp(scores[i]);
  }
  CHECK(roc_auc(affine, truth) == doctest::Approx(base).epsilon(1e-12));
  CHECK(roc_auc(cubic, truth) == doctest::Approx(base).epsilon(1e-12));
  CHECK(roc_auc(expo, truth) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("compute_channel_stats and standardized_feature") {
  Eigen::VectorXd a = vec2(1.0, 5.0), b = vec2(3.0, 5.0);
  ChannelStats st = compute_channel_stats({&a, &b});
  CHECK(st.mean[0] == doctest::Approx(2.0));
  CHECK(st.mean[1] == doctest::Approx(5.0));
  CHECK(st.stddev[0] == doctest::Approx(1.0));
  CHECK(st.stddev[1] == doctest::Approx(1.0));  // zero variance -> 1.0 guard

  Clip clip;
  clip.clip_id = "c";
  clip.features["f"] = vec2(3.0, 5.0);
  clip.features["g"] = vec1(7.0);
  std::map<std::string, ChannelStats> stats;
  stats["f"] = st;
  ChannelStats gst;
  gst.mean = vec1(5.0);
  gst.stddev = vec1(2.0);
  stats["g"] = gst;

  Eigen::VectorXd z = standardized_feature(clip, "f+g", stats);
  REQUIRE(z.size() == 3);
  CHECK(z[0] == doctest::Approx(1.0));   // (3-2)/1
  CHECK(z[1] == doctest::Approx(0.0));   // (5-5)/1
  CHECK(z[2] == doctest::Approx(1.0));   // (7-5)/2
}

TEST_CASE("select_labels keeps classifiers at or above the threshold") {
  // Three verb classifiers whose validation scores are the raw channel values,
  // arranged so the AUCs come out exactly 0.90, 0.70 and 0.69.
  CorpusSplit val;
  // 25 negatives with channel values 1..25 on every channel.
  for (int i = 1; i <= 25; ++i) {
    add_clip(val, "n" + std::to_string(i),
             {{"f1", vec1(i)}, {"f2", vec1(i)}, {"f3", vec1(i)}});
  }
  // 4 positives; per-channel values chosen so the count of beaten negatives
  // sums to 90, 70 and 69 out of 100 pairs.
  const double p_f1[4] = {26.0, 27.0, 28.0, 15.5};   // 25+25+25+15 = 90
  const double p_f2[4] = {26.0, 27.0, 10.5, 10.25};  // 25+25+10+10 = 70
  const double p_f3[4] = {26.0, 27.0, 15.5, 4.5};    // 25+25+15+4  = 69
  for (int i = 0; i < 4; ++i) {
    std::string id = "p" + std::to_string(i);
    add_clip(val, id, {{"f1", vec1(p_f1[i])}, {"f2", vec1(p_f2[i])}, {"f3", vec1(p_f3[i])}});
    add_annotation(val, id, {"v1", "v2", "v3"}, {true, true, true});
  }

  ClassifierBank bank;
  for (const std::string& ch : {"f1", "f2", "f3"}) bank.standardization[ch] = identity_stats(1);
  for (int i = 1; i <= 3; ++i) {
    LinearClassifier c;
    c.label = make_label("v" + std::to_string(i), Group::Verb, "f" + std::to_string(i));
    c.weights = vec1(1.0);
    c.bias = 0.0;
    bank.classifiers.push_back(c);
  }

  ClassifierBank kept = select_labels(bank, val, 0.7);
  REQUIRE(kept.size() == 2);
  CHECK(kept.classifiers[0].label.text == "v1");
  CHECK(kept.classifiers[0].roc_auc.value() == doctest::Approx(0.90).epsilon(1e-12));
  CHECK(kept.classifiers[1].label.text == "v2");
  CHECK(kept.classifiers[1].roc_auc.value() == doctest::Approx(0.70).epsilon(1e-12));

  CHECK(select_labels(bank, val, 0.0).size() == 3);  // vacuous filter
  // Monotone: raising the threshold never adds a classifier.
  std::size_t prev = 4;
  for (double t : {0.0, 0.5, 0.69, 0.695, 0.7, 0.85, 0.9, 0.95}) {
    std::size_t n = select_labels(bank, val, t).size();
    CHECK(n <= prev);
    prev = n;
  }
  CHECK(select_labels(bank, val, 0.95).size() == 0);
}

TEST_CASE("score_clip emits logistic scores in canonical order") {
  ClassifierBank bank;
  bank.standardization["f"] = identity_stats(2);
  for (int i = 0; i < 3; ++i) {
    LinearClassifier c;
    c.label = make_label("l" + std::to_string(i), Group::Verb, "f");
    c.weights = Eigen::VectorXd::Zero(2);
    c.bias = 0.0;
    bank.classifiers.push_back(c);
  }
  bank.classifiers[2].weights = vec2(10.0, 0.0);  // planted large-margin classifier

  Clip clip;
  clip.clip_id = "c";
  clip.features["f"] = vec2(1.0, 0.0);

  ScoreVector sv = score_clip(bank, clip);
  REQUIRE(sv.scores.size() == 3);
  CHECK(sv.scores[0] == doctest::Approx(0.5));  // zero weights, zero bias
  CHECK(sv.scores[1] == doctest::Approx(0.5));
  CHECK(sv.scores[2] > 0.99);
  for (Eigen::Index i = 0; i < 3; ++i) {
    CHECK(sv.scores[i] > 0.0);
    CHECK(sv.scores[i] < 1.0);
  }
}

TEST_CASE("trained mode excludes group-foreign clips from the negative pool") {
  // Only one place label exists, so in Trained mode the bedroom classifier has
  // no same-group negatives -- the object-only clips are not eligible -- and
  // is skipped. Retrieved mode pools all labeled clips and trains it.
  CorpusSplit corpus;
  for (int i = 0; i < 2; ++i) {
    std::string id = "room" + std::to_string(i);
    add_clip(corpus, id, {{"pl", vec2(1, 0)}, {"ob", vec2(0, 0)}});
    add_annotation(corpus, id, {"bedroom"}, {false});
  }
  for (int i = 0; i < 2; ++i) {
    std::string id = "obj" + std::to_string(i);
    add_clip(corpus, id, {{"pl", vec2(0, 1)}, {"ob", vec2(1, 0)}});
    add_annotation(corpus, id, {"bed"}, {false});
  }
  LabelVocabulary vocab;
  vocab.entries = {make_label("bed", Group::Object, "ob"),
                   make_label("bedroom", Group::Place, "pl")};

  SvmTrainConfig cfg;
  ClassifierBank trained = train_group_classifiers(corpus, vocab, cfg, BankMode::Trained);
  CHECK(trained.classifiers.empty());
  REQUIRE(trained.skipped.size() == 2);
  CHECK(std::find(trained.skipped.begin(), trained.skipped.end(), "bedroom|place") !=
        trained.skipped.end());

  ClassifierBank retrieved = train_group_classifiers(corpus, vocab, cfg, BankMode::Retrieved);
  CHECK(retrieved.size() == 2);
  CHECK(retrieved.skipped.empty());
}

TEST_CASE("trained mode survives wrong negatives that sink retrieved mode") {
  // Bedroom clips light up pl[0]. Bed-object clips also light up pl[0] (beds
  // appear in bedrooms) plus a spurious pl[2]. Retrieved mode must separate
  // bedroom from bed clips and can only do so through pl[2]; at validation
  // time real bedrooms carry the spurious feature too, so that classifier
  // misranks them. Trained mode never sees the bed clips as negatives.
  Rng rng(5);
  auto noisy = [&](double x, double y, double z) {
    return vec3(x + rng.uniform(-0.05, 0.05), y + rng.uniform(-0.05, 0.05),
                z + rng.uniform(-0.05, 0.05));
  };

  CorpusSplit train;
  for (int i = 0; i < 6; ++i) {
    std::string id = "bedroom" + std::to_string(i);
    add_clip(train, id, {{"pl", noisy(1, 0, 0)}, {"ob", vec1(0)}});
    add_annotation(train, id, {"bedroom"}, {false});
  }
  for (int i = 0; i < 6; ++i) {
    std::string id = "kitchen" + std::to_string(i);
    add_clip(train, id, {{"pl", noisy(0, 1, 0)}, {"ob", vec1(0)}});
    add_annotation(train, id, {"kitchen"}, {false});
  }
  for (int i = 0; i < 6; ++i) {
    std::string id = "bed" + std::to_string(i);
    add_clip(train, id, {{"pl", noisy(1, 0, 1)}, {"ob", vec1(1)}});
    add_annotation(train, id, {"bed"}, {false});
  }

  CorpusSplit val;
  for (int i = 0; i < 6; ++i) {
    std::string id = "vbedroom" + std::to_string(i);
    add_clip(val, id, {{"pl", noisy(0.6, 0, 1)}, {"ob", vec1(0)}});
    add_annotation(val, id, {"bedroom"}, {false});
  }
  for (int i = 0; i < 6; ++i) {
    std::string id = "vkitchen" + std::to_string(i);
    add_clip(val, id, {{"pl", noisy(0, 1, 0)}, {"ob", vec1(0)}});
    add_annotation(val, id, {"kitchen"}, {false});
  }
  for (int i = 0; i < 6; ++i) {
    std::string id = "vother" + std::to_string(i);
    add_clip(val, id, {{"pl", noisy(0, 0, 1)}, {"ob", vec1(1)}});
    add_annotation(val, id, {"bed"}, {false});
  }

  LabelVocabulary vocab;
  vocab.entries = {make_label("bed", Group::Object, "ob"),
                   make_label("bedroom", Group::Place, "pl"),
                   make_label("kitchen", Group::Place, "pl")};

  SvmTrainConfig cfg;
  cfg.epochs = 50;

  auto bedroom_auc = [&](BankMode mode) {
    ClassifierBank bank = train_group_classifiers(train, vocab, cfg, mode);
    ClassifierBank scored = select_labels(bank, val, 0.0);
    for (const auto& c : scored.classifiers) {
      if (c.label.text == "bedroom") return c.roc_auc.value();
    }
    REQUIRE(false);
    return 0.0;
  };

  const double auc_trained = bedroom_auc(BankMode::Trained);
  const double auc_retrieved = bedroom_auc(BankMode::Retrieved);
  CHECK(auc_trained >= 0.95);
  CHECK(auc_trained >= auc_retrieved + 0.1);
}

TEST_CASE("classifier bank round-trips bit-exactly") {
  testutil::TempDir dir;

  ClassifierBank bank;
  bank.mode = BankMode::Retrieved;
  bank.skipped = {"mood|object"};
  ChannelStats st;
  st.mean = vec2(0.125, -3.5);
  st.stddev = vec2(1.0, 0.25);
  bank.standardization["pl"] = st;

  LinearClassifier a;
  a.label = make_label("bedroom", Group::Place, "pl");
  a.label.count = 41;
  a.label.verb_count = 0;
  a.weights = vec2(0.125, -2.0);
  a.bias = 0.75;
  a.roc_auc = 0.875;
  bank.classifiers.push_back(a);

  LinearClassifier b;
  b.label = make_label("run", Group::Verb, "dt");
  b.weights = vec1(3.0);
  b.bias = -1.0;
  bank.standardization["dt"] = identity_stats(1);
  bank.classifiers.push_back(b);  // roc_auc unset on purpose

  const std::string path = dir.file("bank.json");
  save_bank(bank, path, "cafebabe");
  LoadedBank loaded = load_bank(path);

  CHECK(loaded.config_hash == "cafebabe");
  CHECK(loaded.bank.mode == BankMode::Retrieved);
  CHECK(loaded.bank.skipped == bank.skipped);
  REQUIRE(loaded.bank.size() == 2);
  CHECK(loaded.bank.classifiers[0].label.text == "bedroom");
  CHECK(loaded.bank.classifiers[0].label.group == Group::Place);
  CHECK(loaded.bank.classifiers[0].label.count == 41);
  CHECK((loaded.bank.classifiers[0].weights.array() == a.weights.array()).all());
  CHECK(loaded.bank.classifiers[0].bias == a.bias);
  CHECK(loaded.bank.classifiers[0].roc_auc.value() == 0.875);
  CHECK(loaded.bank.classifiers[1].label.text == "run");
  CHECK(!loaded.bank.classifiers[1].roc_auc.has_value());
  CHECK((loaded.bank.standardization.at("pl").mean.array() == st.mean.array()).all());
  CHECK((loaded.bank.standardization.at("pl").stddev.array() == st.stddev.array()).all());
}
