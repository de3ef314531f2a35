#pragma once

#include <string>
#include <vector>

namespace vidcap {

/// Lowercase, split on whitespace and punctuation, drop empty tokens.
std::vector<std::string> tokenize(const std::string& text);

/// Deterministic suffix-stripping stemmer (sses/ies/ss/s, then ing/ed rules).
/// Shared by the label fallback matcher and the METEOR-lite stem stage.
std::string stem(const std::string& word);

std::vector<std::string> stem_all(const std::vector<std::string>& tokens);

/// Lowercase and collapse runs of whitespace to single spaces.
std::string normalize_phrase(const std::string& phrase);

std::vector<std::string> split(const std::string& s, char sep);

std::string join(const std::vector<std::string>& parts, const std::string& sep);

}  // namespace vidcap
