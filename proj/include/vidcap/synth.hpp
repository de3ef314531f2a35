#pragma once

#include <cstdint>
#include <string>

namespace vidcap {
namespace synth {

/// Knobs for the bundled synthetic corpus: templated sentences over
/// verb/object/place combinations with separable per-group feature channels.
struct SynthConfig {
  int train_clips = 200;
  int val_clips = 64;   // one clip per combination
  int test_clips = 50;
  int dim_per_channel = 8;  // first four dimensions carry the label signal
  double noise = 0.1;
  std::uint64_t seed = 7;
  int unparsed_every = 10;  // every n-th training annotation loses its parse (0 = never)
};

struct SynthSummary {
  int train_clips = 0;
  int val_clips = 0;
  int test_clips = 0;
  int labels = 0;
};

/// Writes the corpus splits, group lexicon, topic lexicon and a ready-to-run
/// pipeline config into out_dir.
SynthSummary generate_corpus(const SynthConfig& cfg, const std::string& out_dir);

}  // namespace synth
}  // namespace vidcap
