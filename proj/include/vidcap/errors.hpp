#pragma once

#include <stdexcept>
#include <string>

namespace vidcap {

/// Bad or inconsistent configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A pipeline stage's input artifact is missing or incompatible (CLI exit code 3).
struct ArtifactError : std::runtime_error {
  explicit ArtifactError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite values or other numeric breakdown during training (CLI exit code 4).
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace vidcap
