#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "vidcap/analysis.hpp"
#include "vidcap/classifiers.hpp"
#include "vidcap/cli.hpp"
#include "vidcap/corpus.hpp"
#include "vidcap/lstm.hpp"
#include "vidcap/metrics.hpp"
#include "vidcap/rng.hpp"
#include "vidcap/synth.hpp"
#include "vidcap/text.hpp"

namespace py = pybind11;
using namespace vidcap;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Movie-description pipeline: visual classifiers, LSTM decoder, caption metrics";

  // text utilities
  m.def("tokenize", &tokenize, py::arg("text"));
  m.def("stem", &stem, py::arg("word"));
  m.def("base_forms", &base_forms, py::arg("phrase"));

  // metrics
  m.def(
      "meteor",
      [](const metrics::Tokens& candidate, const metrics::RefSet& references,
         const std::map<std::string, int>& synonyms) {
        return metrics::meteor(candidate, references, synonyms);
      },
      py::arg("candidate"), py::arg("references"),
      py::arg("synonyms") = std::map<std::string, int>{});
  m.def("bleu4", &metrics::bleu4, py::arg("candidates"), py::arg("references"),
        py::arg("smoothing") = false);
  m.def("sentence_bleu4", &metrics::sentence_bleu4, py::arg("candidate"), py::arg("references"),
        py::arg("smoothing") = false);
  m.def("rouge_l", &metrics::rouge_l, py::arg("candidate"), py::arg("reference"));
  m.def("cider", &metrics::cider, py::arg("candidates"), py::arg("references"));

  // classifiers
  m.def("roc_auc", &cls::roc_auc, py::arg("scores"), py::arg("truth"));
  m.def("logistic", &cls::logistic, py::arg("x"));
  m.def(
      "train_binary_svm",
      [](const std::vector<Eigen::VectorXd>& positives,
         const std::vector<Eigen::VectorXd>& negatives, double reg_lambda, int epochs,
         std::uint64_t seed, double learning_rate) {
        cls::SvmTrainConfig cfg{reg_lambda, epochs, seed, learning_rate};
        cls::LinearClassifier c = cls::train_binary_svm(positives, negatives, cfg);
        return py::make_tuple(c.weights, c.bias);
      },
      py::arg("positives"), py::arg("negatives"), py::arg("reg_lambda") = 1e-4,
      py::arg("epochs") = 20, py::arg("seed") = 1, py::arg("learning_rate") = 0.1);

  // lstm
  py::class_<lstm::Vocabulary>(m, "Vocabulary")
      .def_static("build", &lstm::Vocabulary::build, py::arg("sentences"), py::arg("min_freq") = 1)
      .def_static("from_words", &lstm::Vocabulary::from_words, py::arg("regular_words"))
      .def("size", &lstm::Vocabulary::size)
      .def("id", &lstm::Vocabulary::id, py::arg("word"))
      .def("word", &lstm::Vocabulary::word, py::arg("id"))
      .def("words", &lstm::Vocabulary::words)
      .def("encode", &lstm::Vocabulary::encode, py::arg("tokens"))
      .def("decode", &lstm::Vocabulary::decode, py::arg("ids"));

  py::class_<lstm::LrSchedule>(m, "LrSchedule")
      .def_static("step", &lstm::LrSchedule::step, py::arg("base_lr"), py::arg("step_size"))
      .def_static("poly", &lstm::LrSchedule::poly, py::arg("base_lr"), py::arg("power"),
                  py::arg("max_iter"))
      .def_readwrite("base_lr", &lstm::LrSchedule::base_lr)
      .def_readwrite("step_size", &lstm::LrSchedule::step_size)
      .def_readwrite("power", &lstm::LrSchedule::power)
      .def_readwrite("max_iter", &lstm::LrSchedule::max_iter);
  m.def("lr_at", &lstm::lr_at, py::arg("schedule"), py::arg("iter"));

  py::class_<lstm::NetworkConfig>(m, "NetworkConfig")
      .def(py::init<>())
      .def_property(
          "architecture",
          [](const lstm::NetworkConfig& c) {
            return std::string(lstm::architecture_name(c.architecture));
          },
          [](lstm::NetworkConfig& c, const std::string& s) {
            c.architecture = lstm::architecture_from_name(s);
          })
      .def_property(
          "dropout_site",
          [](const lstm::NetworkConfig& c) {
            return std::string(lstm::dropout_site_name(c.dropout_site));
          },
          [](lstm::NetworkConfig& c, const std::string& s) {
            c.dropout_site = lstm::dropout_site_from_name(s);
          })
      .def_readwrite("hidden_dim", &lstm::NetworkConfig::hidden_dim)
      .def_readwrite("embed_dim", &lstm::NetworkConfig::embed_dim)
      .def_readwrite("dropout_ratio", &lstm::NetworkConfig::dropout_ratio)
      .def_readwrite("schedule", &lstm::NetworkConfig::schedule)
      .def_readwrite("max_iters", &lstm::NetworkConfig::max_iters)
      .def_readwrite("seed", &lstm::NetworkConfig::seed)
      .def_readwrite("visual_dim", &lstm::NetworkConfig::visual_dim)
      .def("validate", &lstm::NetworkConfig::validate);

  py::class_<lstm::Network>(m, "Network")
      .def_static("init", &lstm::Network::init, py::arg("config"), py::arg("vocab"))
      .def_readonly("config", &lstm::Network::config)
      .def_readonly("vocab", &lstm::Network::vocab);

  m.def(
      "train_network",
      [](lstm::Network net,
         const std::vector<std::pair<Eigen::VectorXd, std::vector<int>>>& data) {
        std::vector<lstm::TrainPair> pairs;
        for (const auto& [visual, tokens] : data) pairs.push_back({visual, tokens});
        std::vector<lstm::TrainLogEntry> log;
        net = lstm::train(std::move(net), pairs, &log);
        py::list rows;
        for (const auto& row : log) rows.append(py::make_tuple(row.iter, row.lr, row.loss));
        return py::make_tuple(std::move(net), rows);
      },
      py::arg("network"), py::arg("pairs"));
  m.def("generate", &lstm::generate, py::arg("network"), py::arg("visual"),
        py::arg("max_len") = 30);
  m.def(
      "ensemble_generate",
      [](const std::vector<lstm::Network>& members, const Eigen::VectorXd& visual, int max_len) {
        lstm::Ensemble e{members};
        return lstm::ensemble_generate(e, visual, max_len);
      },
      py::arg("members"), py::arg("visual"), py::arg("max_len") = 30);
  m.def("save_network", &lstm::save_network, py::arg("network"), py::arg("path"),
        py::arg("config_hash") = "");
  m.def(
      "load_network",
      [](const std::string& path) {
        lstm::LoadedNetwork loaded = lstm::load_network(path);
        return py::make_tuple(std::move(loaded.net), loaded.config_hash);
      },
      py::arg("path"));
  m.def(
      "dropout_mask",
      [](Eigen::Index n, double ratio, std::uint64_t seed) {
        Rng rng(seed);
        return lstm::dropout_mask(n, ratio, rng);
      },
      py::arg("n"), py::arg("ratio"), py::arg("seed"));

  // analysis
  m.def("mean_filter", &analysis::mean_filter, py::arg("series"), py::arg("window"));
  m.def(
      "textual_nn",
      [](const analysis::Tokens& test_ref, const std::vector<analysis::Tokens>& train) {
        analysis::NnResult r = analysis::textual_nn(test_ref, train);
        return py::make_tuple(r.score, r.index);
      },
      py::arg("test_ref"), py::arg("train_sentences"));
  m.def(
      "visual_knn",
      [](const Eigen::VectorXd& test_clip,
         const std::vector<std::pair<Eigen::VectorXd, analysis::Tokens>>& train, int k,
         const analysis::Tokens& test_ref) {
        return analysis::visual_knn(test_clip, train, k, test_ref);
      },
      py::arg("test_clip"), py::arg("train"), py::arg("k"), py::arg("test_ref"));

  // pipeline
  m.def(
      "run_cli", [](const std::vector<std::string>& args) { return cli::run(args); },
      py::arg("args"), "Run one pipeline subcommand; returns the exit code.");
  m.def(
      "generate_corpus",
      [](const std::string& out_dir, int train, int val, int test, int dim, double noise,
         std::uint64_t seed, int unparsed_every) {
        synth::SynthConfig cfg;
        cfg.train_clips = train;
        cfg.val_clips = val;
        cfg.test_clips = test;
        cfg.dim_per_channel = dim;
        cfg.noise = noise;
        cfg.seed = seed;
        cfg.unparsed_every = unparsed_every;
        synth::SynthSummary s = synth::generate_corpus(cfg, out_dir);
        return py::make_tuple(s.train_clips, s.val_clips, s.test_clips, s.labels);
      },
      py::arg("out_dir"), py::arg("train") = 200, py::arg("val") = 64, py::arg("test") = 50,
      py::arg("dim") = 8, py::arg("noise") = 0.1, py::arg("seed") = 7,
      py::arg("unparsed_every") = 10);
}
