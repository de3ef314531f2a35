// End-to-end coverage of the command-line driver: stage sequencing, artifact
// gating, config overrides, hash checks, and exit codes. Runs against a small
// generated corpus so every stage exercises its real file formats.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "temp_util.hpp"
#include "vidcap/cli.hpp"
#include "vidcap/synth.hpp"

using namespace vidcap;
namespace fs = std::filesystem;

namespace {

// The driver logs to stdout/stderr; capture both so test output stays clean
// and stderr text can be asserted on.
struct StreamCapture {
  StreamCapture()
      : old_out(std::cout.rdbuf(out.rdbuf())), old_err(std::cerr.rdbuf(err.rdbuf())) {}
  ~StreamCapture() {
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
  }
  std::ostringstream out, err;
  std::streambuf* old_out;
  std::streambuf* old_err;
};

struct EnvOut {
  explicit EnvOut(const std::string& dir) { ::setenv("VIDCAP_OUT", dir.c_str(), 1); }
  ~EnvOut() { ::unsetenv("VIDCAP_OUT"); }
};

// One small corpus shared by every test case in this file. The pipeline never
// writes into the corpus directory itself (runs redirect out_dir via
// VIDCAP_OUT), so sharing is safe.
std::string corpus_dir() {
  static testutil::TempDir dir;
  static bool generated = false;
  if (!generated) {
    synth::SynthConfig cfg;
    cfg.train_clips = 96;
    cfg.val_clips = 64;
    cfg.test_clips = 8;
    cfg.dim_per_channel = 8;
    cfg.noise = 0.1;
    cfg.seed = 7;
    synth::generate_corpus(cfg, dir.dir());
    generated = true;
  }
  return dir.dir();
}

// Every stage of one run must see the same semantic config or the artifact
// hash check trips; keep the shared overrides in one place. The 96-clip
// corpus repeats each label 24 times, below the default min_count of 30, and
// the training budget is shrunk to keep the suite fast.
std::vector<std::string> common_sets() {
  return {
      "--set", "labels.min_count=5",
      "--set", "lstm.ensemble_size=1",
      "--set", "lstm.grid.0.hidden_dim=32",
      "--set", "lstm.grid.0.embed_dim=16",
      "--set", "lstm.grid.0.max_iters=1200",
      "--set", "lstm.grid.0.schedule.step_size=600",
  };
}

int run_cli(std::vector<std::string> tail, std::string* err_text = nullptr,
            const std::vector<std::string>& sets = common_sets()) {
  std::vector<std::string> args = {"-c", corpus_dir() + "/config.json"};
  args.insert(args.end(), sets.begin(), sets.end());
  args.insert(args.end(), tail.begin(), tail.end());
  StreamCapture capture;
  const int code = cli::run(args);
  if (err_text) *err_text = capture.err.str();
  return code;
}

std::size_t line_count(const std::string& text) {
  std::size_t n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

}  // namespace

TEST_CASE("all pipeline stages run in order and write their artifacts") {
  testutil::TempDir out;
  EnvOut env(out.dir());

  CHECK(run_cli({"extract-labels"}) == 0);
  CHECK(fs::exists(out.file("vocab.json")));

  CHECK(run_cli({"train-classifiers"}) == 0);
  CHECK(fs::exists(out.file("bank.json")));

  CHECK(run_cli({"select"}) == 0);
  CHECK(fs::exists(out.file("bank_selected.json")));

  CHECK(run_cli({"score"}) == 0);
  for (const char* split : {"train", "val", "test"})
    CHECK(fs::exists(out.file(std::string("scores_") + split + ".json")));

  CHECK(run_cli({"train-lstm"}) == 0);
  CHECK(fs::exists(out.file("net_e0_m0.json")));
  CHECK(fs::exists(out.file("train_log_e0_m0.csv")));
  CHECK_FALSE(fs::exists(out.file("net_e0_m1.json")));  // ensemble_size=1

  // Training log: header plus one row per iteration.
  const std::string log = testutil::read_file(out.file("train_log_e0_m0.csv"));
  CHECK(log.rfind("iter,lr,loss\n", 0) == 0);
  CHECK(line_count(log) == 1201);

  CHECK(run_cli({"generate"}) == 0);
  const std::string gen = testutil::read_file(out.file("generated_test.txt"));
  CHECK(line_count(gen) == 8);  // one line per test clip
  std::istringstream gen_in(gen);
  std::string line;
  int row = 0;
  while (std::getline(gen_in, line)) {
    char expect[32];
    std::snprintf(expect, sizeof(expect), "test_%03d\t", row++);
    CHECK(line.rfind(expect, 0) == 0);
    CHECK(line.size() > std::string(expect).size());  // non-empty sentence
  }

  CHECK(run_cli({"evaluate"}) == 0);
  const std::string report = testutil::read_file(out.file("report_test.csv"));
  CHECK(report.rfind("clip_id,meteor,bleu4_sentence,rouge_l,cider_contrib\n", 0) == 0);
  CHECK(report.find("#summary,meteor_pct,") != std::string::npos);
  CHECK(report.find("#summary,cider,") != std::string::npos);

  CHECK(run_cli({"analyze"}) == 0);
  for (const char* name : {"curve_length.csv", "curve_wordfreq.csv", "curve_textnn.csv",
                           "curve_visknn.csv", "topic_report.csv", "extremes.csv"})
    CHECK(fs::exists(out.file(name)));
  const std::string curve = testutil::read_file(out.file("curve_length.csv"));
  CHECK(curve.rfind("rank,clip_id,key_value,score,smoothed\n", 0) == 0);
  CHECK(line_count(curve) == 9);  // header + 8 clips
}

TEST_CASE("stages demand their upstream artifacts and name the producer") {
  testutil::TempDir out;
  EnvOut env(out.dir());
  std::string err;

  // Empty out dir: the first consumer stage points back at extract-labels.
  CHECK(run_cli({"train-classifiers"}, &err) == 3);
  CHECK(err.find("missing artifact vocab.json") != std::string::npos);
  CHECK(err.find("run `extract-labels` first") != std::string::npos);

  CHECK(run_cli({"extract-labels"}) == 0);
  CHECK(run_cli({"select"}, &err) == 3);
  CHECK(err.find("missing artifact bank.json") != std::string::npos);
  CHECK(err.find("run `train-classifiers` first") != std::string::npos);

  CHECK(run_cli({"train-classifiers"}) == 0);
  CHECK(run_cli({"select"}) == 0);
  CHECK(run_cli({"score"}) == 0);

  // Scores exist but no trained network yet.
  CHECK(run_cli({"generate"}, &err) == 3);
  CHECK(err.find("missing artifact net_e0_m0.json") != std::string::npos);
  CHECK(err.find("run `train-lstm` first") != std::string::npos);

  CHECK(run_cli({"evaluate"}, &err) == 3);
  CHECK(err.find("missing artifact generated_test.txt") != std::string::npos);
  CHECK(err.find("run `generate` first") != std::string::npos);

  CHECK(run_cli({"analyze"}, &err) == 3);
  CHECK(err.find("missing artifact report_test.csv") != std::string::npos);
  CHECK(err.find("run `evaluate` first") != std::string::npos);
}

TEST_CASE("artifacts from a different config are rejected by hash") {
  testutil::TempDir out;
  EnvOut env(out.dir());

  CHECK(run_cli({"extract-labels"}) == 0);

  // Same artifact dir, different semantic config: the stale vocab must not be
  // silently reused.
  auto sets = common_sets();
  sets[1] = "labels.min_count=6";
  std::string err;
  CHECK(run_cli({"train-classifiers"}, &err, sets) == 2);
  CHECK(err.find("vocab.json was produced under a different config") != std::string::npos);
  CHECK(err.find("hash ") != std::string::npos);

  // The original config still matches its own artifact.
  CHECK(run_cli({"train-classifiers"}) == 0);
}

TEST_CASE("invalid configs and arguments exit with code 2") {
  testutil::TempDir out;
  EnvOut env(out.dir());
  std::string err;

  SUBCASE("missing required field names the field") {
    nlohmann::json j =
        nlohmann::json::parse(testutil::read_file(corpus_dir() + "/config.json"));
    j["labels"].erase("min_count");
    const std::string bad = testutil::write_file(out, "bad_config.json", j.dump(2) + "\n");

    StreamCapture capture;
    CHECK(cli::run({"-c", bad, "extract-labels"}) == 2);
    CHECK(capture.err.str().find("min_count") != std::string::npos);
  }

  SUBCASE("rejected enum value names the option") {
    auto sets = common_sets();
    sets.push_back("--set");
    sets.push_back("classifiers.mode=bogus");
    CHECK(run_cli({"extract-labels"}, &err, sets) == 2);
    CHECK(err.find("classifiers.mode must be 'trained' or 'retrieved', got 'bogus'") !=
          std::string::npos);
  }

  SUBCASE("out-of-range grid index in --set") {
    auto sets = common_sets();
    sets.push_back("--set");
    sets.push_back("lstm.grid.5.hidden_dim=8");
    CHECK(run_cli({"extract-labels"}, &err, sets) == 2);
    CHECK(err.find("index 5 out of range") != std::string::npos);
  }

  SUBCASE("unknown subcommand") { CHECK(run_cli({"frobnicate"}, &err) == 2); }

  SUBCASE("missing subcommand") { CHECK(run_cli({}, &err) == 2); }

  SUBCASE("unknown split name") {
    CHECK(run_cli({"generate", "--split", "holdout"}, &err) == 2);
    CHECK(err.find("unknown split 'holdout'") != std::string::npos);
  }

  SUBCASE("--entry out of range") {
    // The entry index is validated once the stage has its inputs.
    for (const char* stage : {"extract-labels", "train-classifiers", "select", "score"})
      REQUIRE(run_cli({stage}) == 0);
    CHECK(run_cli({"train-lstm", "--entry", "3"}, &err) == 2);
    CHECK(err.find("--entry 3 out of range") != std::string::npos);
  }

  SUBCASE("missing config file is a missing artifact") {
    StreamCapture capture;
    CHECK(cli::run({"-c", out.file("nope.json"), "extract-labels"}) == 3);
  }
}

TEST_CASE("--set changes the effective config and its hash") {
  testutil::TempDir out_a;
  testutil::TempDir out_b;

  {
    EnvOut env(out_a.dir());
    CHECK(run_cli({"extract-labels"}) == 0);
  }
  {
    EnvOut env(out_b.dir());
    auto sets = common_sets();
    sets[1] = "labels.min_count=50";
    CHECK(run_cli({"extract-labels"}, nullptr, sets) == 0);
  }

  const auto a = nlohmann::json::parse(testutil::read_file(out_a.file("vocab.json")));
  const auto b = nlohmann::json::parse(testutil::read_file(out_b.file("vocab.json")));

  CHECK(a.at("min_count").get<int>() == 5);
  CHECK(b.at("min_count").get<int>() == 50);
  // 4 verbs + 4 objects + 4 places, each seen 24 times in 96 training clips.
  CHECK(a.at("entries").size() == 12);
  CHECK(b.at("entries").empty());
  CHECK(a.at("config_hash").get<std::string>() != b.at("config_hash").get<std::string>());
}

TEST_CASE("classifier artifacts are byte-identical across reruns") {
  testutil::TempDir out_a;
  testutil::TempDir out_b;

  for (auto* out : {&out_a, &out_b}) {
    EnvOut env(out->dir());
    CHECK(run_cli({"extract-labels"}) == 0);
    CHECK(run_cli({"train-classifiers"}) == 0);
    CHECK(run_cli({"select"}) == 0);
    CHECK(run_cli({"score"}) == 0);
  }

  for (const char* name : {"vocab.json", "bank.json", "bank_selected.json", "scores_test.json"})
    CHECK(testutil::read_file(out_a.file(name)) == testutil::read_file(out_b.file(name)));
}
