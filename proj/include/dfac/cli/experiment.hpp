#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dfac/training/config.hpp"
#include "json.hpp"

namespace dfac::cli {

/// Training fields plus the game file, output directory and seed list.
struct ExperimentConfig {
  training::TrainConfig train;
  std::string env = "data/table1.json";  // as written in the file
  std::filesystem::path env_path;        // resolved against the config's directory
  std::string out = "runs";
  std::vector<std::uint64_t> seeds{0};
};

/// Validates against the schema: training keys plus "env", "out", "seeds".
/// Unknown keys throw FormatError.
ExperimentConfig experiment_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
ExperimentConfig load_experiment(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& config);

/// JSON schema describing the config file.
nlohmann::json experiment_schema();

/// Reads a JSON file, reporting parse errors with their byte offset.
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace dfac::cli
