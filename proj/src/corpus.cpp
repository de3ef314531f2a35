#include "vidcap/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "vidcap/errors.hpp"
#include "vidcap/text.hpp"

namespace vidcap {

const char* group_name(Group g) {
  switch (g) {
    case Group::Verb: return "verb";
    case Group::Object: return "object";
    case Group::Place: return "place";
  }
  return "?";
}

Group group_from_name(const std::string& name) {
  if (name == "verb") return Group::Verb;
  if (name == "object") return Group::Object;
  if (name == "place") return Group::Place;
  throw ConfigError("unknown group name: " + name);
}

namespace {

int group_rank(const std::optional<Group>& g) {
  return g ? static_cast<int>(*g) : -1;
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArtifactError("cannot open file: " + path);
  return in;
}

}  // namespace

void LabelVocabulary::sort_canonical() {
  std::stable_sort(entries.begin(), entries.end(), [](const GroupedLabel& a, const GroupedLabel& b) {
    int ra = group_rank(a.group), rb = group_rank(b.group);
    if (ra != rb) return ra < rb;
    return a.text < b.text;
  });
}

std::string FeatureAssignment::channel_for(Group g) const {
  if (policy == Policy::Uniform) {
    if (stacked_channels.empty()) throw ConfigError("uniform feature assignment needs at least one channel");
    return join(stacked_channels, "+");
  }
  switch (g) {
    case Group::Verb: return verb_channel;
    case Group::Object: return object_channel;
    case Group::Place: return place_channel;
  }
  throw ConfigError("bad group");
}

const Clip& CorpusSplit::clip(const std::string& clip_id) const {
  auto it = clip_index.find(clip_id);
  if (it == clip_index.end()) throw ArtifactError("unknown clip_id: " + clip_id);
  return clips[it->second];
}

Eigen::VectorXd clip_channel(const Clip& clip, const std::string& channel) {
  auto parts = split(channel, '+');
  std::size_t total = 0;
  for (const auto& p : parts) {
    auto it = clip.features.find(p);
    if (it == clip.features.end())
      throw ArtifactError("clip " + clip.clip_id + " is missing channel " + p);
    total += static_cast<std::size_t>(it->second.size());
  }
  Eigen::VectorXd out(total);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const auto& v = clip.features.at(p);
    out.segment(static_cast<Eigen::Index>(off), v.size()) = v;
    off += static_cast<std::size_t>(v.size());
  }
  return out;
}

std::size_t channel_dim(const std::map<std::string, std::size_t>& dims, const std::string& channel) {
  std::size_t total = 0;
  for (const auto& p : split(channel, '+')) {
    auto it = dims.find(p);
    if (it == dims.end()) throw ConfigError("undeclared channel: " + p);
    total += it->second;
  }
  return total;
}

CorpusSplit ingest_corpus(const std::string& clips_path, const std::string& sentences_path,
                          const std::string& annotations_path) {
  CorpusSplit out;

  // Clips file: header lines "#channel:name:dim", then
  // "clip_id<TAB>name=v,v,...;name=v,v,..." records.
  {
    auto in = open_or_throw(clips_path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      if (line[0] == '#') {
        auto fields = split(line, ':');
        if (fields.size() == 3 && fields[0] == "#channel") {
          out.channel_dims[fields[1]] = static_cast<std::size_t>(std::stoul(fields[2]));
          continue;
        }
        continue;  // other comments ignored
      }
      auto tab = line.find('\t');
      if (tab == std::string::npos)
        throw ArtifactError(clips_path + ":" + std::to_string(lineno) + ": expected clip_id<TAB>channels");
      Clip clip;
      clip.clip_id = line.substr(0, tab);
      for (const auto& spec : split(line.substr(tab + 1), ';')) {
        if (spec.empty()) continue;
        auto eq = spec.find('=');
        if (eq == std::string::npos)
          throw ArtifactError(clips_path + ":" + std::to_string(lineno) + ": bad channel spec '" + spec + "'");
        std::string name = spec.substr(0, eq);
        auto vals = split(spec.substr(eq + 1), ',');
        Eigen::VectorXd v(static_cast<Eigen::Index>(vals.size()));
        for (std::size_t i = 0; i < vals.size(); ++i) v[static_cast<Eigen::Index>(i)] = std::stod(vals[i]);
        auto dim_it = out.channel_dims.find(name);
        if (dim_it == out.channel_dims.end())
          throw ArtifactError(clips_path + ":" + std::to_string(lineno) + ": undeclared channel " + name);
        if (dim_it->second != vals.size())
          throw ArtifactError(clips_path + ":" + std::to_string(lineno) + ": channel " + name + " has " +
                              std::to_string(vals.size()) + " values, declared " + std::to_string(dim_it->second));
        clip.features[name] = std::move(v);
      }
      for (const auto& [name, dim] : out.channel_dims) {
        (void)dim;
        if (!clip.features.count(name))
          throw ArtifactError(clips_path + ":" + std::to_string(lineno) + ": clip " + clip.clip_id +
                              " is missing declared channel " + name);
      }
      if (out.clip_index.count(clip.clip_id))
        throw ArtifactError(clips_path + ":" + std::to_string(lineno) + ": duplicate clip_id " + clip.clip_id);
      out.clip_index[clip.clip_id] = out.clips.size();
      out.clips.push_back(std::move(clip));
    }
  }

  // Sentences file: clip_id<TAB>raw_text.
  {
    auto in = open_or_throw(sentences_path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      auto tab = line.find('\t');
      if (tab == std::string::npos)
        throw ArtifactError(sentences_path + ":" + std::to_string(lineno) + ": expected clip_id<TAB>text");
      Sentence s;
      s.clip_id = line.substr(0, tab);
      s.raw_text = line.substr(tab + 1);
      s.tokens = tokenize(s.raw_text);
      if (!out.clip_index.count(s.clip_id))
        throw ArtifactError(sentences_path + ":" + std::to_string(lineno) + ": sentence references unknown clip_id " +
                            s.clip_id);
      out.sentences.push_back(std::move(s));
    }
  }

  // Annotations file: clip_id<TAB>parse_ok(0|1)<TAB>label|flag;label|flag;...
  {
    auto in = open_or_throw(annotations_path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      auto fields = split(line, '\t');
      if (fields.size() < 2)
        throw ArtifactError(annotations_path + ":" + std::to_string(lineno) + ": expected clip_id<TAB>parse_ok<TAB>labels");
      ParsedAnnotation a;
      a.clip_id = fields[0];
      if (fields[1] != "0" && fields[1] != "1")
        throw ArtifactError(annotations_path + ":" + std::to_string(lineno) + ": parse_ok must be 0 or 1");
      a.parse_ok = fields[1] == "1";
      if (fields.size() > 2 && !fields[2].empty()) {
        for (const auto& entry : split(fields[2], ';')) {
          if (entry.empty()) continue;
          auto bar = entry.rfind('|');
          if (bar == std::string::npos)
            throw ArtifactError(annotations_path + ":" + std::to_string(lineno) + ": bad label entry '" + entry + "'");
          a.labels.push_back(normalize_phrase(entry.substr(0, bar)));
          a.verb_flags.push_back(entry.substr(bar + 1) == "1");
        }
      }
      if (!a.parse_ok && !a.labels.empty())
        throw ArtifactError(annotations_path + ":" + std::to_string(lineno) +
                            ": annotation with parse_ok=0 must carry no labels");
      if (!out.clip_index.count(a.clip_id))
        throw ArtifactError(annotations_path + ":" + std::to_string(lineno) +
                            ": annotation references unknown clip_id " + a.clip_id);
      out.annotations.push_back(std::move(a));
    }
  }

  if (out.sentences.size() != out.annotations.size())
    throw ArtifactError("sentence/annotation count mismatch: " + std::to_string(out.sentences.size()) + " vs " +
                        std::to_string(out.annotations.size()));
  for (std::size_t i = 0; i < out.sentences.size(); ++i) {
    if (out.sentences[i].clip_id != out.annotations[i].clip_id)
      throw ArtifactError("sentence/annotation order mismatch at record " + std::to_string(i) + ": " +
                          out.sentences[i].clip_id + " vs " + out.annotations[i].clip_id);
  }
  return out;
}

GroupLexicon load_lexicon(const std::string& path) {
  auto in = open_or_throw(path);
  GroupLexicon lex;
  std::set<std::string>* target = nullptr;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string norm = normalize_phrase(line);
    if (norm.empty() || norm[0] == '#') continue;
    if (norm == "[places]") {
      target = &lex.places;
      continue;
    }
    if (norm == "[objects]") {
      target = &lex.objects;
      continue;
    }
    if (!target)
      throw ArtifactError(path + ":" + std::to_string(lineno) + ": phrase before any [places]/[objects] section");
    target->insert(norm);
  }
  for (const auto& p : lex.places) {
    if (lex.objects.count(p))
      throw ArtifactError(path + ": phrase '" + p + "' appears in both [places] and [objects]");
  }
  return lex;
}

LabelVocabulary extract_labels(const std::vector<ParsedAnnotation>& annotations, std::size_t min_count) {
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
  struct Tally {
    std::size_t total = 0;
    std::size_t verb = 0;
  };
  std::map<std::string, Tally> tally;
  for (const auto& a : annotations) {
    for (std::size_t i = 0; i < a.labels.size(); ++i) {
      auto& t = tally[a.labels[i]];
      ++t.total;
      if (a.verb_flags[i]) ++t.verb;
    }
  }
  LabelVocabulary vocab;
  vocab.min_count = min_count;
  for (const auto& [text, t] : tally) {
    if (t.total < min_count) continue;
    GroupedLabel gl;
    gl.text = text;
    gl.count = t.total;
    gl.verb_count = t.verb;
    vocab.entries.push_back(std::move(gl));
  }
  vocab.sort_canonical();
  return vocab;
}

std::map<std::string, bool> known_labels_from_parsed(const std::vector<ParsedAnnotation>& annotations) {
  std::map<std::string, std::pair<std::size_t, std::size_t>> roles;  // text -> (verb, nonverb)
  for (const auto& a : annotations) {
    if (!a.parse_ok) continue;
    for (std::size_t i = 0; i < a.labels.size(); ++i) {
      auto& r = roles[a.labels[i]];
      if (a.verb_flags[i]) ++r.first; else ++r.second;
    }
  }
  std::map<std::string, bool> known;
  for (const auto& [text, r] : roles) known[text] = r.first > r.second;
  return known;
}

std::vector<ParsedAnnotation> match_unparsed(const std::vector<Sentence>& sentences,
                                             const std::vector<ParsedAnnotation>& annotations,
                                             const std::map<std::string, bool>& known_labels) {
  if (sentences.size() != annotations.size())
    throw ConfigError("match_unparsed: sentences and annotations must be aligned");

  struct Pattern {
    std::string text;
    std::vector<std::string> stems;
    bool verb_flag;
  };
  std::vector<Pattern> patterns;
  for (const auto& [text, flag] : known_labels) {
    patterns.push_back({text, stem_all(tokenize(text)), flag});
  }

  std::vector<ParsedAnnotation> out = annotations;
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    if (out[s].parse_ok) continue;
    auto stems = stem_all(sentences[s].tokens);
    for (const auto& p : patterns) {
      if (p.stems.empty() || p.stems.size() > stems.size()) continue;
      bool found = false;
      for (std::size_t i = 0; i + p.stems.size() <= stems.size() && !found; ++i) {
        found = std::equal(p.stems.begin(), p.stems.end(), stems.begin() + static_cast<std::ptrdiff_t>(i));
      }
      if (found) {
        out[s].labels.push_back(p.text);
        out[s].verb_flags.push_back(p.verb_flag);
      }
    }
  }
  return out;
}

std::vector<std::string> base_forms(const std::string& phrase) {
  auto words = tokenize(phrase);
  std::vector<std::string> forms;
  for (std::size_t drop = 0; drop < words.size(); ++drop) {
    std::string f = join({words.begin() + static_cast<std::ptrdiff_t>(drop), words.end()}, " ");
    if (std::find(forms.begin(), forms.end(), f) == forms.end()) forms.push_back(f);
  }
  return forms;
}

LabelVocabulary assign_groups(const LabelVocabulary& vocab, const GroupLexicon& lexicon,
                              const FeatureAssignment& policy) {
  LabelVocabulary out;
  out.min_count = vocab.min_count;
  for (const auto& entry : vocab.entries) {
    if (entry.verb_count > 0) {
      GroupedLabel verb = entry;
      verb.group = Group::Verb;
      verb.channel = policy.channel_for(Group::Verb);
      out.entries.push_back(std::move(verb));
    }
    // Non-verb role: Place on exact lexicon match, else Object via base forms.
    if (entry.count > entry.verb_count) {
      std::optional<Group> g;
      if (lexicon.places.count(entry.text)) {
        g = Group::Place;
      } else {
        for (const auto& form : base_forms(entry.text)) {
          if (lexicon.objects.count(form)) {
            g = Group::Object;
            break;
          }
        }
      }
      if (g) {
        GroupedLabel gl = entry;
        gl.group = g;
        gl.channel = policy.channel_for(*g);
        out.entries.push_back(std::move(gl));
      }
    }
  }
  out.sort_canonical();
  return out;
}

}  // namespace vidcap
