#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace vidcap {

/// Semantic label group. The enum order defines the canonical vocabulary order.
enum class Group { Verb = 0, Object = 1, Place = 2 };

const char* group_name(Group g);
Group group_from_name(const std::string& name);

struct Clip {
  std::string clip_id;
  std::map<std::string, Eigen::VectorXd> features;  // channel name -> vector
};

struct Sentence {
  std::string clip_id;
  std::string raw_text;
  std::vector<std::string> tokens;  // lowercased
};

struct ParsedAnnotation {
  std::string clip_id;
  std::vector<std::string> labels;
  std::vector<bool> verb_flags;  // same length as labels
  bool parse_ok = false;
};

struct GroupLexicon {
  std::set<std::string> places;
  std::set<std::string> objects;
};

struct GroupedLabel {
  std::string text;
  std::optional<Group> group;  // unset until assign_groups
  std::size_t count = 0;       // total occurrences across all roles
  std::size_t verb_count = 0;  // occurrences carrying the parser verb flag
  std::string channel;
};

/// Labels with counts, kept in canonical (group, text) order.
struct LabelVocabulary {
  std::vector<GroupedLabel> entries;
  std::size_t min_count = 1;

  void sort_canonical();
};

/// Maps semantic groups to feature channels. `Uniform` stacks the same
/// channels for every label; `Grouped` routes each group to its own channel.
struct FeatureAssignment {
  enum class Policy { Grouped, Uniform };
  Policy policy = Policy::Grouped;
  std::string verb_channel;
  std::string object_channel;
  std::string place_channel;
  std::vector<std::string> stacked_channels;

  std::string channel_for(Group g) const;
};

/// Aligned clips, sentences and per-sentence annotations for one split.
/// sentences[i] and annotations[i] describe the same sentence.
struct CorpusSplit {
  std::vector<Clip> clips;
  std::vector<Sentence> sentences;
  std::vector<ParsedAnnotation> annotations;
  std::map<std::string, std::size_t> channel_dims;
  std::map<std::string, std::size_t> clip_index;  // clip_id -> index in clips

  const Clip& clip(const std::string& clip_id) const;
};

/// Resolves a channel name against a clip; composite names like "dt+lsda"
/// concatenate the member channels in listed order.
Eigen::VectorXd clip_channel(const Clip& clip, const std::string& channel);
std::size_t channel_dim(const std::map<std::string, std::size_t>& dims, const std::string& channel);

CorpusSplit ingest_corpus(const std::string& clips_path, const std::string& sentences_path,
                          const std::string& annotations_path);

GroupLexicon load_lexicon(const std::string& path);

/// Labels occurring at least min_count times across the annotations, with
/// per-label total and verb-flagged occurrence counts. Groups stay unset.
LabelVocabulary extract_labels(const std::vector<ParsedAnnotation>& annotations,
                               std::size_t min_count);

/// Majority verb role per label text over successfully parsed annotations.
std::map<std::string, bool> known_labels_from_parsed(const std::vector<ParsedAnnotation>& annotations);

/// Fills annotations whose parse failed by matching known label phrases as
/// contiguous stem-normalized token subsequences of the sentence. Annotations
/// with parse_ok=true pass through unchanged.
std::vector<ParsedAnnotation> match_unparsed(const std::vector<Sentence>& sentences,
                                             const std::vector<ParsedAnnotation>& annotations,
                                             const std::map<std::string, bool>& known_labels);

/// Assigns each label to Verb / Place / Object, drops labels matching no
/// group, duplicates labels appearing in both verb and non-verb roles, and
/// sets the feature channel per policy.
LabelVocabulary assign_groups(const LabelVocabulary& vocab, const GroupLexicon& lexicon,
                              const FeatureAssignment& policy);

/// The phrase plus each suffix sub-phrase from dropping leading words.
std::vector<std::string> base_forms(const std::string& phrase);

}  // namespace vidcap
