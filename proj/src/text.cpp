#include "vidcap/text.hpp"

#include <cctype>
#include <sstream>

namespace vidcap {

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

namespace {

bool ends_with(const std::string& w, const char* suffix) {
  std::string s(suffix);
  return w.size() >= s.size() && w.compare(w.size() - s.size(), s.size(), s) == 0;
}

// Strip suffix only when at least three characters remain.
bool try_strip(std::string& w, const char* suffix) {
  std::string s(suffix);
  if (ends_with(w, suffix) && w.size() - s.size() >= 3) {
    w.erase(w.size() - s.size());
    return true;
  }
  return false;
}

}  // namespace

std::string stem(const std::string& word) {
  std::string w = word;
  // Plural handling first: sses -> ss, ies -> i, ss kept, trailing s dropped.
  if (ends_with(w, "sses")) {
    w.erase(w.size() - 2);
  } else if (ends_with(w, "ies")) {
    w.erase(w.size() - 2);
  } else if (ends_with(w, "ss")) {
    // keep
  } else {
    try_strip(w, "s");
  }
  if (!try_strip(w, "ing")) {
    try_strip(w, "ed");
  }
  return w;
}

std::vector<std::string> stem_all(const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(stem(t));
  return out;
}

std::string normalize_phrase(const std::string& phrase) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : phrase) {
    if (std::isspace(c)) {
      if (!out.empty()) pending_space = true;
    } else {
      if (pending_space) {
        out.push_back(' ');
        pending_space = false;
      }
      out.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  return parts;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace vidcap
