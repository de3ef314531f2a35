#include <doctest.h>

#include "vidcap/text.hpp"

using namespace vidcap;

TEST_CASE("tokenize lowercases and splits on punctuation") {
  CHECK(tokenize("Someone walks, quickly!") ==
        std::vector<std::string>{"someone", "walks", "quickly"});
  CHECK(tokenize("") == std::vector<std::string>{});
  CHECK(tokenize("  --  ") == std::vector<std::string>{});
  CHECK(tokenize("A1 b2") == std::vector<std::string>{"a1", "b2"});
}

TEST_CASE("stem strips plural and inflection suffixes") {
  CHECK(stem("walks") == "walk");
  CHECK(stem("walking") == "walk");
  CHECK(stem("walked") == "walk");
  CHECK(stem("glasses") == "glass");   // sses -> ss
  CHECK(stem("ponies") == "poni");     // ies -> i
  CHECK(stem("grass") == "grass");     // ss kept
  CHECK(stem("cats") == "cat");
  CHECK(stem("is") == "is");           // too short to strip
  CHECK(stem("doing") == "doing");     // stripping would leave < 3 chars
}

TEST_CASE("normalize_phrase collapses case and whitespace") {
  CHECK(normalize_phrase("  Domestic   Cat ") == "domestic cat");
  CHECK(normalize_phrase("cat") == "cat");
}

TEST_CASE("split and join round-trip") {
  CHECK(split("a+b+c", '+') == std::vector<std::string>{"a", "b", "c"});
  CHECK(join({"a", "b", "c"}, "+") == "a+b+c");
  CHECK(join({}, "+") == "");
}
