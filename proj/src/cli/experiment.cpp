#include "dfac/cli/experiment.hpp"

#include <fstream>

#include "dfac/error.hpp"

namespace dfac::cli {

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": cannot open file");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

ExperimentConfig experiment_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw FormatError("experiment config must be a JSON object");
  ExperimentConfig c;
  nlohmann::json train = nlohmann::json::object();
  for (const auto& [key, value] : j.items()) {
    if (key == "env") {
      if (!value.is_string()) throw FormatError("config field 'env' must be a path string");
      c.env = value.get<std::string>();
    } else if (key == "out") {
      if (!value.is_string()) throw FormatError("config field 'out' must be a path string");
      c.out = value.get<std::string>();
    } else if (key == "seeds") {
      if (!value.is_array() || value.empty()) throw FormatError("config field 'seeds' must be a non-empty list");
      c.seeds.clear();
      for (const auto& s : value) {
        if (!(s.is_number_integer() && s.get<long long>() >= 0)) throw FormatError("config field 'seeds' must hold non-negative integers");
        c.seeds.push_back(s.get<std::uint64_t>());
      }
    } else {
      train[key] = value;
    }
  }
  c.train = training::train_config_from_json(train);
  if (!j.contains("seeds")) c.seeds = {c.train.seed};
  const std::filesystem::path env(c.env);
  c.env_path = env.is_absolute() ? env : base_dir / env;
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  return experiment_from_json(read_json_file(path), path.parent_path());
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j = training::to_json(c.train);
  j["env"] = c.env;
  j["out"] = c.out;
  j["seeds"] = c.seeds;
  return j;
}

nlohmann::json experiment_schema() {
  auto count = nlohmann::json{{"type", "integer"}, {"minimum", 0}};
  auto widths = nlohmann::json{{"type", "array"}, {"items", {{"type", "integer"}, {"minimum", 1}}}};
  return {{"$schema", "https://json-schema.org/draft/2020-12/schema"},
          {"title", "dfac experiment"},
          {"type", "object"},
          {"additionalProperties", false},
          {"required", {"method"}},
          {"properties",
           {{"method",
             {{"enum", {"vdn", "qmix", "qplex", "ddn", "dmix", "dplex", "ddn-c51", "dmix-c51", "dplex-c51"}}}},
            {"env", {{"type", "string"}}},
            {"out", {{"type", "string"}}},
            {"seeds", {{"type", "array"}, {"items", count}, {"minItems", 1}}},
            {"seed", count},
            {"learning_rate", {{"type", "number"}, {"exclusiveMinimum", 0}}},
            {"batch_size", count},
            {"episodes", count},
            {"target_update_period", count},
            {"epsilon", {{"type", "number"}, {"minimum", 0}, {"maximum", 1}}},
            {"buffer_episodes", count},
            {"n_quantiles", count},
            {"n_target_quantiles", count},
            {"n_eval_quantiles", count},
            {"kappa", {{"type", "number"}, {"exclusiveMinimum", 0}}},
            {"support",
             {{"type", "object"},
              {"additionalProperties", false},
              {"properties", {{"vmin", {{"type", "number"}}}, {"vmax", {{"type", "number"}}}, {"atoms", count}}}}},
            {"agent_hidden", widths},
            {"cos_features", count},
            {"embed_hidden", widths},
            {"mixer_embed", count},
            {"attention_heads", count},
            {"attention_hidden", count},
            {"gamma", {{"type", {"number", "null"}}, {"minimum", 0}, {"maximum", 1}}},
            {"eval_interval", count},
            {"metric_grid", count}}}};
}

}  // namespace dfac::cli
