#include "vidcap/synth.hpp"

#include <array>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "vidcap/rng.hpp"
#include "vidcap/serialize.hpp"

namespace vidcap {
namespace synth {

namespace {

// Surface form (as it appears in the sentence) and annotation label.
struct Word {
  const char* surface;
  const char* label;
};

constexpr std::array<Word, 4> kVerbs{{{"walks", "walk"},
                                      {"holds", "hold"},
                                      {"lifts", "lift"},
                                      {"turns", "turn"}}};
constexpr std::array<Word, 4> kObjects{{{"dog", "dog"},
                                        {"cup", "cup"},
                                        {"book", "book"},
                                        {"ball", "ball"}}};
constexpr std::array<Word, 4> kPlaces{{{"kitchen", "kitchen"},
                                       {"garden", "garden"},
                                       {"office", "office"},
                                       {"park", "park"}}};
constexpr int kCombos = 64;  // 4 verbs x 4 objects x 4 places

struct Combo {
  int verb, object, place;
};

Combo combo_at(int index) {
  return {index % 4, (index / 4) % 4, (index / 16) % 4};
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", x);
  return buf;
}

// One feature channel: noise everywhere, +1 on the hot label dimension.
std::string channel_values(int dim, int hot, double noise, Rng& rng) {
  std::ostringstream out;
  for (int i = 0; i < dim; ++i) {
    double v = rng.uniform(-noise, noise);
    if (i == hot) v += 1.0;
    if (i) out << ',';
    out << fmt(v);
  }
  return out.str();
}

struct SplitFiles {
  std::ostringstream clips, sentences, annotations;
};

void emit_clip(SplitFiles& files, const std::string& clip_id, const Combo& combo,
               const SynthConfig& cfg, Rng& rng, bool parsed) {
  files.clips << clip_id << "\tdt=" << channel_values(cfg.dim_per_channel, combo.verb, cfg.noise, rng)
              << ";lsda=" << channel_values(cfg.dim_per_channel, combo.object, cfg.noise, rng)
              << ";places=" << channel_values(cfg.dim_per_channel, combo.place, cfg.noise, rng)
              << '\n';
  files.sentences << clip_id << "\tSomeone " << kVerbs[combo.verb].surface << " the "
                  << kObjects[combo.object].surface << " in the " << kPlaces[combo.place].surface
                  << ".\n";
  if (parsed) {
    files.annotations << clip_id << "\t1\t" << kVerbs[combo.verb].label << "|1;"
                      << kObjects[combo.object].label << "|0;" << kPlaces[combo.place].label
                      << "|0\n";
  } else {
    files.annotations << clip_id << "\t0\n";
  }
}

void write_split(const std::string& out_dir, const std::string& split, const SplitFiles& files,
                 const SynthConfig& cfg) {
  std::ostringstream header;
  header << "#channel:dt:" << cfg.dim_per_channel << "\n#channel:lsda:" << cfg.dim_per_channel
         << "\n#channel:places:" << cfg.dim_per_channel << '\n';
  write_text_atomic(out_dir + "/" + split + "_clips.tsv", header.str() + files.clips.str());
  write_text_atomic(out_dir + "/" + split + "_sentences.tsv", files.sentences.str());
  write_text_atomic(out_dir + "/" + split + "_annotations.tsv", files.annotations.str());
}

nlohmann::json default_pipeline_config() {
  nlohmann::json cfg;
  cfg["paths"] = {{"out_dir", "out"},
                  {"train_clips", "train_clips.tsv"},
                  {"train_sentences", "train_sentences.tsv"},
                  {"train_annotations", "train_annotations.tsv"},
                  {"val_clips", "val_clips.tsv"},
                  {"val_sentences", "val_sentences.tsv"},
                  {"val_annotations", "val_annotations.tsv"},
                  {"test_clips", "test_clips.tsv"},
                  {"test_sentences", "test_sentences.tsv"},
                  {"test_annotations", "test_annotations.tsv"},
                  {"group_lexicon", "lexicon.txt"},
                  {"topic_lexicon", "topics.txt"}};
  cfg["labels"] = {{"min_count", 30}, {"fallback_matching", true}};
  cfg["classifiers"] = {{"mode", "trained"},
                        {"roc_threshold", 0.7},
                        {"reg_lambda", 1e-4},
                        {"epochs", 20},
                        {"seed", 1},
                        {"learning_rate", 0.1},
                        {"assignment",
                         {{"policy", "grouped"},
                          {"verb_channel", "dt"},
                          {"object_channel", "lsda"},
                          {"place_channel", "places"},
                          {"stacked_channels", {"dt", "lsda", "places"}}}}};
  cfg["lstm"] = {{"grid",
                  {{{"architecture", "one-layer"},
                    {"hidden_dim", 64},
                    {"embed_dim", 32},
                    {"dropout_site", "lstm-drop"},
                    {"dropout_ratio", 0.5},
                    {"schedule", {{"kind", "step"}, {"base_lr", 0.1}, {"step_size", 2000}}},
                    {"max_iters", 4000},
                    {"seed", 42}}}},
                 {"ensemble_size", 3},
                 {"vocab_min_freq", 1},
                 {"max_len", 30}};
  cfg["metrics"] = {{"bleu_smoothing", true}, {"synonyms", nlohmann::json::object()}};
  cfg["analysis"] = {{"knn_k", 10}, {"window", 25}, {"extremes_n", 5}};
  return cfg;
}

}  // namespace

SynthSummary generate_corpus(const SynthConfig& cfg, const std::string& out_dir) {
  if (cfg.train_clips < 1 || cfg.val_clips < 1 || cfg.test_clips < 1)
    throw std::invalid_argument("generate_corpus: every split needs at least one clip");
  if (cfg.dim_per_channel < 4)
    throw std::invalid_argument("generate_corpus: dim_per_channel must be >= 4");

  std::filesystem::create_directories(out_dir);
  Rng rng(cfg.seed);

  // Training: round-robin over the combination grid keeps label counts balanced.
  SplitFiles train;
  for (int i = 0; i < cfg.train_clips; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "train_%03d", i);
    const bool parsed = cfg.unparsed_every <= 0 || (i + 1) % cfg.unparsed_every != 0;
    emit_clip(train, id, combo_at(i % kCombos), cfg, rng, parsed);
  }
  write_split(out_dir, "train", train, cfg);

  // Validation: plain round-robin; with the default 64 clips this covers every
  // combination exactly once.
  SplitFiles val;
  for (int i = 0; i < cfg.val_clips; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "val_%03d", i);
    emit_clip(val, id, combo_at(i % kCombos), cfg, rng, true);
  }
  write_split(out_dir, "val", val, cfg);

  // Held-out test: stride 13 is coprime with 64, so the 50 default clips spread
  // across distinct combinations with every label represented.
  SplitFiles test;
  for (int i = 0; i < cfg.test_clips; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "test_%03d", i);
    emit_clip(test, id, combo_at((i * 13) % kCombos), cfg, rng, true);
  }
  write_split(out_dir, "test", test, cfg);

  {
    std::ostringstream lex;
    lex << "[places]\n";
    for (const auto& w : kPlaces) lex << w.label << '\n';
    lex << "[objects]\n";
    for (const auto& w : kObjects) lex << w.label << '\n';
    write_text_atomic(out_dir + "/lexicon.txt", lex.str());
  }
  {
    std::ostringstream topics;
    topics << "walk\tmotion\nturn\tmotion\nhold\tcontact\nlift\tcontact\n";
    write_text_atomic(out_dir + "/topics.txt", topics.str());
  }
  write_text_atomic(out_dir + "/config.json", default_pipeline_config().dump(2) + "\n");

  SynthSummary summary;
  summary.train_clips = cfg.train_clips;
  summary.val_clips = cfg.val_clips;
  summary.test_clips = cfg.test_clips;
  summary.labels = static_cast<int>(kVerbs.size() + kObjects.size() + kPlaces.size());
  return summary;
}

}  // namespace synth
}  // namespace vidcap
