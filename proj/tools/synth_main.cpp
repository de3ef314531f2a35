#include <iostream>

#include <CLI11.hpp>

#include "vidcap/synth.hpp"

int main(int argc, char** argv) {
  CLI::App app{"generate the bundled synthetic movie-description corpus"};
  vidcap::synth::SynthConfig cfg;
  std::string out_dir = "synth";
  app.add_option("-o,--out", out_dir, "output directory")->capture_default_str();
  app.add_option("--train", cfg.train_clips, "training clips")->capture_default_str();
  app.add_option("--val", cfg.val_clips, "validation clips")->capture_default_str();
  app.add_option("--test", cfg.test_clips, "held-out test clips")->capture_default_str();
  app.add_option("--dim", cfg.dim_per_channel, "dimensions per feature channel")
      ->capture_default_str();
  app.add_option("--noise", cfg.noise, "uniform feature noise amplitude")->capture_default_str();
  app.add_option("--seed", cfg.seed, "rng seed")->capture_default_str();
  app.add_option("--unparsed-every", cfg.unparsed_every,
                 "drop the parse of every n-th training annotation (0 = never)")
      ->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  try {
    auto summary = vidcap::synth::generate_corpus(cfg, out_dir);
    std::cout << "wrote " << summary.train_clips << " train / " << summary.val_clips << " val / "
              << summary.test_clips << " test clips, " << summary.labels << " labels, to "
              << out_dir << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
