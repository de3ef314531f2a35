#include <doctest.h>

#include <string>
#include <vector>

#include "temp_util.hpp"
#include "vidcap/corpus.hpp"
#include "vidcap/errors.hpp"

using namespace vidcap;
using testutil::TempDir;
using testutil::write_file;

namespace {

const char* kClips =
    "#channel:dt:3\n"
    "#channel:lsda:2\n"
    "c1\tdt=1,2,3;lsda=4,5\n"
    "c2\tdt=0,0,1;lsda=0,1\n"
    "c3\tdt=0.5,0.5,0;lsda=1,0\n";

const char* kSentences =
    "c1\tSomeone walks away.\n"
    "c2\tSomeone holds the cup.\n"
    "c3\tSomeone looks up slowly.\n";

const char* kAnnotations =
    "c1\t1\twalk|1;street|0\n"
    "c2\t1\thold|1;cup|0\n"
    "c3\t0\t\n";

ParsedAnnotation ann(const std::string& clip_id, std::vector<std::string> labels,
                     std::vector<bool> flags, bool ok = true) {
  ParsedAnnotation a;
  a.clip_id = clip_id;
  a.labels = std::move(labels);
  a.verb_flags = std::move(flags);
  a.parse_ok = ok;
  return a;
}

}  // namespace

TEST_CASE("ingest_corpus aligns clips, sentences and annotations") {
  TempDir dir;
  auto clips = write_file(dir, "clips.tsv", kClips);
  auto sents = write_file(dir, "sentences.tsv", kSentences);
  auto anns = write_file(dir, "annotations.tsv", kAnnotations);

  CorpusSplit split = ingest_corpus(clips, sents, anns);
  CHECK(split.clips.size() == 3);
  CHECK(split.sentences.size() == 3);
  CHECK(split.annotations.size() == 3);
  CHECK(split.channel_dims.at("dt") == 3);
  CHECK(split.channel_dims.at("lsda") == 2);

  const Clip& c1 = split.clip("c1");
  CHECK(c1.features.at("dt")[0] == doctest::Approx(1.0));
  CHECK(split.sentences[1].tokens ==
        std::vector<std::string>{"someone", "holds", "the", "cup"});
  CHECK(split.annotations[0].labels == std::vector<std::string>{"walk", "street"});
  CHECK(split.annotations[2].parse_ok == false);

  // Composite channel names concatenate members in listed order.
  Eigen::VectorXd both = clip_channel(c1, "dt+lsda");
  REQUIRE(both.size() == 5);
  CHECK(both[3] == doctest::Approx(4.0));
  CHECK(channel_dim(split.channel_dims, "lsda+dt") == 5);
}

TEST_CASE("ingest_corpus rejects dangling clip references") {
  TempDir dir;
  auto clips = write_file(dir, "clips.tsv", kClips);
  auto sents = write_file(dir, "sentences.tsv",
                          std::string(kSentences) + "ghost\tSomeone vanishes.\n");
  auto anns = write_file(dir, "annotations.tsv", kAnnotations);
  CHECK_THROWS_AS(ingest_corpus(clips, sents, anns), ArtifactError);
}

TEST_CASE("ingest_corpus rejects channel dimension mismatch") {
  TempDir dir;
  auto clips = write_file(dir, "clips.tsv",
                          "#channel:dt:12\n"
                          "c1\tdt=1,2,3,4,5,6,7,8,9,10\n");
  auto sents = write_file(dir, "sentences.tsv", "c1\tSomeone walks.\n");
  auto anns = write_file(dir, "annotations.tsv", "c1\t1\twalk|1\n");
  CHECK_THROWS_AS(ingest_corpus(clips, sents, anns), ArtifactError);
}

TEST_CASE("ingest_corpus rejects misaligned sentence/annotation records") {
  TempDir dir;
  auto clips = write_file(dir, "clips.tsv", kClips);
  auto sents = write_file(dir, "sentences.tsv", kSentences);
  auto anns = write_file(dir, "annotations.tsv",
                         "c2\t1\thold|1\n"
                         "c1\t1\twalk|1\n"
                         "c3\t0\t\n");
  CHECK_THROWS_AS(ingest_corpus(clips, sents, anns), ArtifactError);
}

TEST_CASE("extract_labels keeps labels at the occurrence threshold") {
  std::vector<ParsedAnnotation> anns;
  for (int i = 0; i < 30; ++i) anns.push_back(ann("c", {"kept"}, {true}));
  for (int i = 0; i < 29; ++i) anns.push_back(ann("c", {"dropped"}, {true}));

  LabelVocabulary vocab = extract_labels(anns, 30);
  REQUIRE(vocab.entries.size() == 1);
  CHECK(vocab.entries[0].text == "kept");
  CHECK(vocab.entries[0].count == 30);
  CHECK(vocab.entries[0].verb_count == 30);
}

TEST_CASE("extract_labels on empty input yields empty vocabulary") {
  CHECK(extract_labels({}, 1).entries.empty());
}

TEST_CASE("extract_labels with known counts {a:5, b:3} and min_count 4") {
  std::vector<ParsedAnnotation> anns;
  for (int i = 0; i < 5; ++i) anns.push_back(ann("c", {"a"}, {false}));
  for (int i = 0; i < 3; ++i) anns.push_back(ann("c", {"b"}, {false}));

  LabelVocabulary vocab = extract_labels(anns, 4);
  REQUIRE(vocab.entries.size() == 1);
  CHECK(vocab.entries[0].text == "a");
  CHECK(vocab.entries[0].count == 5);
}

TEST_CASE("extract_labels is monotone in min_count") {
  std::vector<ParsedAnnotation> anns;
  const std::vector<std::pair<std::string, int>> tally = {
      {"a", 6}, {"b", 4}, {"c", 3}, {"d", 1}};
  for (const auto& [text, n] : tally)
    for (int i = 0; i < n; ++i) anns.push_back(ann("c", {text}, {false}));

  std::size_t prev = anns.size() + 1;
  for (std::size_t mc = 1; mc <= 7; ++mc) {
    std::size_t n = extract_labels(anns, mc).entries.size();
    CHECK(n <= prev);
    prev = n;
  }
  CHECK(extract_labels(anns, 1).entries.size() == 4);
  CHECK(extract_labels(anns, 4).entries.size() == 2);
  CHECK(extract_labels(anns, 7).entries.empty());
}

TEST_CASE("match_unparsed matches stem-normalized phrases in failed parses") {
  Sentence s;
  s.clip_id = "c1";
  s.raw_text = "Someone looks up slowly.";
  s.tokens = {"someone", "looks", "up", "slowly"};

  std::map<std::string, bool> known = {{"look up", true}, {"cup", false}};
  auto out = match_unparsed({s}, {ann("c1", {}, {}, false)}, known);
  REQUIRE(out.size() == 1);
  CHECK(out[0].labels == std::vector<std::string>{"look up"});
  CHECK(out[0].verb_flags == std::vector<bool>{true});
}

TEST_CASE("match_unparsed leaves unmatched and parsed sentences alone") {
  Sentence hit;
  hit.clip_id = "c1";
  hit.tokens = {"someone", "nods"};
  Sentence parsed;
  parsed.clip_id = "c2";
  parsed.tokens = {"someone", "waves"};

  std::map<std::string, bool> known = {{"look up", true}};
  auto original = ann("c2", {"wave"}, {true});
  auto out = match_unparsed({hit, parsed}, {ann("c1", {}, {}, false), original}, known);
  REQUIRE(out.size() == 2);
  CHECK(out[0].labels.empty());  // no phrase in common
  CHECK(out[1].labels == original.labels);
  CHECK(out[1].verb_flags == original.verb_flags);
  CHECK(out[1].parse_ok);
}

TEST_CASE("match_unparsed requires contiguity") {
  Sentence s;
  s.clip_id = "c1";
  s.tokens = {"someone", "looks", "slowly", "up"};  // "look" and "up" not adjacent
  std::map<std::string, bool> known = {{"look up", true}};
  auto out = match_unparsed({s}, {ann("c1", {}, {}, false)}, known);
  CHECK(out[0].labels.empty());
}

TEST_CASE("known_labels_from_parsed takes the majority role") {
  std::vector<ParsedAnnotation> anns;
  for (int i = 0; i < 3; ++i) anns.push_back(ann("c", {"face"}, {true}));
  for (int i = 0; i < 2; ++i) anns.push_back(ann("c", {"face"}, {false}));
  anns.push_back(ann("c", {"ignored"}, {true}, false));  // failed parse carries no vote

  auto known = known_labels_from_parsed(anns);
  REQUIRE(known.size() == 1);
  CHECK(known.at("face") == true);
}

TEST_CASE("base_forms enumerates suffix sub-phrases") {
  CHECK(base_forms("domestic cat") == std::vector<std::string>{"domestic cat", "cat"});
  CHECK(base_forms("cat") == std::vector<std::string>{"cat"});
  CHECK(base_forms("large red car") ==
        std::vector<std::string>{"large red car", "red car", "car"});
}

TEST_CASE("load_lexicon reads sections and rejects collisions") {
  TempDir dir;
  auto path = write_file(dir, "lexicon.txt",
                         "# comment\n"
                         "[places]\n"
                         "Kitchen\n"
                         "living  room\n"
                         "[objects]\n"
                         "cat\n");
  GroupLexicon lex = load_lexicon(path);
  CHECK(lex.places == std::set<std::string>{"kitchen", "living room"});
  CHECK(lex.objects == std::set<std::string>{"cat"});

  auto clash = write_file(dir, "clash.txt",
                          "[places]\ncat\n[objects]\ncat\n");
  CHECK_THROWS_AS(load_lexicon(clash), ArtifactError);
}

TEST_CASE("assign_groups routes labels and duplicates dual roles") {
  GroupLexicon lex;
  lex.places = {"kitchen"};
  lex.objects = {"cat", "face"};

  LabelVocabulary vocab;
  auto add = [&](const std::string& text, std::size_t count, std::size_t verb_count) {
    GroupedLabel gl;
    gl.text = text;
    gl.count = count;
    gl.verb_count = verb_count;
    vocab.entries.push_back(gl);
  };
  add("run", 10, 10);          // pure verb
  add("domestic cat", 5, 0);   // object via base form
  add("mood", 8, 0);           // matches nothing -> removed
  add("face", 6, 4);           // verb- and object-role occurrences
  add("kitchen", 3, 0);        // place

  FeatureAssignment policy;
  policy.verb_channel = "dt";
  policy.object_channel = "lsda";
  policy.place_channel = "places";

  LabelVocabulary out = assign_groups(vocab, lex, policy);
  REQUIRE(out.entries.size() == 5);  // 4 distinct texts survive, "face" twice

  // Canonical order: verbs, then objects, then places; alphabetical within.
  CHECK(out.entries[0].text == "face");
  CHECK(out.entries[0].group == Group::Verb);
  CHECK(out.entries[0].channel == "dt");
  CHECK(out.entries[1].text == "run");
  CHECK(out.entries[1].group == Group::Verb);
  CHECK(out.entries[2].text == "domestic cat");
  CHECK(out.entries[2].group == Group::Object);
  CHECK(out.entries[2].channel == "lsda");
  CHECK(out.entries[3].text == "face");
  CHECK(out.entries[3].group == Group::Object);
  CHECK(out.entries[4].text == "kitchen");
  CHECK(out.entries[4].group == Group::Place);
  CHECK(out.entries[4].channel == "places");
}

TEST_CASE("assign_groups under the uniform policy stacks channels everywhere") {
  GroupLexicon lex;
  lex.places = {"kitchen"};
  lex.objects = {"cat"};

  LabelVocabulary vocab;
  GroupedLabel run;
  run.text = "run";
  run.count = run.verb_count = 5;
  GroupedLabel cat;
  cat.text = "cat";
  cat.count = 5;
  vocab.entries = {run, cat};

  FeatureAssignment policy;
  policy.policy = FeatureAssignment::Policy::Uniform;
  policy.stacked_channels = {"dt", "lsda", "places"};

  LabelVocabulary out = assign_groups(vocab, lex, policy);
  REQUIRE(out.entries.size() == 2);
  for (const auto& e : out.entries) CHECK(e.channel == "dt+lsda+places");
}
