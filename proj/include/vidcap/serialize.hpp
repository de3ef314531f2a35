#pragma once

#include <Eigen/Core>
#include <string>

#include <json.hpp>

namespace vidcap {

nlohmann::json matrix_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);
nlohmann::json vector_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const nlohmann::json& j);

/// Write-then-rename so readers never observe partial artifacts.
void write_text_atomic(const std::string& path, const std::string& content);

std::string read_text(const std::string& path);       // ArtifactError when missing
nlohmann::json read_json_file(const std::string& path);

/// FNV-1a 64-bit hex digest; used to tag artifacts with the producing config.
std::string fnv1a_hex(const std::string& data);

}  // namespace vidcap
