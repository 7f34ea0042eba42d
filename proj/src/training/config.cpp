#include "dfac/training/config.hpp"

#include <algorithm>
#include <cmath>

#include "dfac/error.hpp"

namespace dfac::training {

using mixers::Method;

TrainConfig TrainConfig::defaults(Method method) {
  TrainConfig c;
  c.method = method;
  switch (mixers::factorization_of(method)) {
    case mixers::Factorization::Dueling:
      c.batch_size = 2048;
      c.mixer_embed = 16;
      c.agent_hidden = method == Method::Qplex ? std::vector<std::size_t>{32} : std::vector<std::size_t>{64, 32};
      c.learning_rate = method == Method::Dplex ? 1e-4 : 1e-3;
      break;
    default:
      c.batch_size = 512;
      c.mixer_embed = 8;
      c.agent_hidden = {64, 512};
      c.learning_rate = 1e-4;
      break;
  }
  if (method == Method::Dplex) {
    c.n_quantiles = c.n_target_quantiles = c.n_eval_quantiles = 512;
    c.embed_hidden = {256};
  }
  return c;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) -> void {
    throw DomainError("config field '" + field + "' " + why);
  };
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate", "must be positive");
  if (batch_size == 0) fail("batch_size", "must be positive");
  if (target_update_period == 0) fail("target_update_period", "must be positive");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) fail("epsilon", "must lie in [0, 1]");
  if (buffer_episodes == 0) fail("buffer_episodes", "must be positive");
  if (n_quantiles == 0) fail("n_quantiles", "must be positive");
  if (n_target_quantiles == 0) fail("n_target_quantiles", "must be positive");
  if (n_eval_quantiles == 0) fail("n_eval_quantiles", "must be positive");
  if (!(kappa > 0.0)) fail("kappa", "must be positive");
  if (support.n < 2 || !(support.vmax > support.vmin)) fail("support", "needs at least two atoms and vmax > vmin");
  if (agent_hidden.empty() || std::find(agent_hidden.begin(), agent_hidden.end(), 0u) != agent_hidden.end())
    fail("agent_hidden", "needs positive widths");
  if (cos_features == 0) fail("cos_features", "must be positive");
  if (std::find(embed_hidden.begin(), embed_hidden.end(), 0u) != embed_hidden.end()) fail("embed_hidden", "needs positive widths");
  if (mixer_embed == 0) fail("mixer_embed", "must be positive");
  if (attention_heads == 0) fail("attention_heads", "must be positive");
  if (attention_hidden == 0) fail("attention_hidden", "must be positive");
  if (gamma && !(*gamma >= 0.0 && *gamma <= 1.0)) fail("gamma", "must lie in [0, 1]");
  if (eval_interval == 0) fail("eval_interval", "must be positive");
  if (metric_grid == 0) fail("metric_grid", "must be positive");
}

mixers::ModelConfig model_config(const TrainConfig& c, const envs::MatrixGameSpec& spec) {
  mixers::ModelConfig m;
  m.method = c.method;
  m.n_agents = spec.agents;
  const auto counts = spec.action_counts();
  m.n_actions = counts.front();
  for (std::size_t n : counts)
    if (n != m.n_actions) throw DomainError("shared agent parameters need equal action counts");
  m.obs_dim = spec.obs_dim();
  m.state_dim = spec.state_dim();
  m.agent_hidden = c.agent_hidden;
  m.cos_features = c.cos_features;
  m.embed_hidden = c.embed_hidden;
  m.support = c.support;
  m.mixer_embed = c.mixer_embed;
  m.attention_heads = c.attention_heads;
  m.attention_hidden = c.attention_hidden;
  return m;
}

const std::vector<std::string>& train_config_keys() {
  static const std::vector<std::string> keys{
      "method",      "learning_rate",  "batch_size",      "episodes",         "target_update_period",
      "epsilon",     "buffer_episodes", "n_quantiles",    "n_target_quantiles", "n_eval_quantiles",
      "kappa",       "support",         "agent_hidden",   "cos_features",     "embed_hidden",
      "mixer_embed", "attention_heads", "attention_hidden", "gamma",          "seed",
      "eval_interval", "metric_grid"};
  return keys;
}

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j = {{"method", mixers::method_id(c.method)},
                      {"learning_rate", c.learning_rate},
                      {"batch_size", c.batch_size},
                      {"episodes", c.episodes},
                      {"target_update_period", c.target_update_period},
                      {"epsilon", c.epsilon},
                      {"buffer_episodes", c.buffer_episodes},
                      {"n_quantiles", c.n_quantiles},
                      {"n_target_quantiles", c.n_target_quantiles},
                      {"n_eval_quantiles", c.n_eval_quantiles},
                      {"kappa", c.kappa},
                      {"support", {{"vmin", c.support.vmin}, {"vmax", c.support.vmax}, {"atoms", c.support.n}}},
                      {"agent_hidden", c.agent_hidden},
                      {"cos_features", c.cos_features},
                      {"embed_hidden", c.embed_hidden},
                      {"mixer_embed", c.mixer_embed},
                      {"attention_heads", c.attention_heads},
                      {"attention_hidden", c.attention_hidden},
                      {"seed", c.seed},
                      {"eval_interval", c.eval_interval},
                      {"metric_grid", c.metric_grid}};
  j["gamma"] = c.gamma ? nlohmann::json(*c.gamma) : nlohmann::json(nullptr);
  return j;
}

namespace {

template <class T>
T read(const nlohmann::json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw FormatError(std::string("config field '") + key + "' has the wrong type");
  }
}

std::size_t read_count(const nlohmann::json& j, const char* key) {
  if (!(j.at(key).is_number_integer() && j.at(key).get<long long>() >= 0)) throw FormatError(std::string("config field '") + key + "' must be a non-negative integer");
  return j.at(key).get<std::size_t>();
}

}  // namespace

TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("training config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (std::find(train_config_keys().begin(), train_config_keys().end(), key) == train_config_keys().end())
      throw FormatError("unknown config field '" + key + "'");
  if (!j.contains("method")) throw FormatError("config field 'method' is required");
  TrainConfig c = TrainConfig::defaults(mixers::parse_method(read<std::string>(j, "method")));
  if (j.contains("learning_rate")) c.learning_rate = read<double>(j, "learning_rate");
  if (j.contains("batch_size")) c.batch_size = read_count(j, "batch_size");
  if (j.contains("episodes")) c.episodes = read_count(j, "episodes");
  if (j.contains("target_update_period")) c.target_update_period = read_count(j, "target_update_period");
  if (j.contains("epsilon")) c.epsilon = read<double>(j, "epsilon");
  if (j.contains("buffer_episodes")) c.buffer_episodes = read_count(j, "buffer_episodes");
  if (j.contains("n_quantiles")) c.n_quantiles = read_count(j, "n_quantiles");
  if (j.contains("n_target_quantiles")) c.n_target_quantiles = read_count(j, "n_target_quantiles");
  if (j.contains("n_eval_quantiles")) c.n_eval_quantiles = read_count(j, "n_eval_quantiles");
  if (j.contains("kappa")) c.kappa = read<double>(j, "kappa");
  if (j.contains("support")) {
    const auto& s = j.at("support");
    for (const auto& [key, _] : s.items())
      if (key != "vmin" && key != "vmax" && key != "atoms") throw FormatError("unknown support field '" + key + "'");
    if (s.contains("vmin")) c.support.vmin = read<double>(s, "vmin");
    if (s.contains("vmax")) c.support.vmax = read<double>(s, "vmax");
    if (s.contains("atoms")) c.support.n = read_count(s, "atoms");
  }
  if (j.contains("agent_hidden")) c.agent_hidden = read<std::vector<std::size_t>>(j, "agent_hidden");
  if (j.contains("cos_features")) c.cos_features = read_count(j, "cos_features");
  if (j.contains("embed_hidden")) c.embed_hidden = read<std::vector<std::size_t>>(j, "embed_hidden");
  if (j.contains("mixer_embed")) c.mixer_embed = read_count(j, "mixer_embed");
  if (j.contains("attention_heads")) c.attention_heads = read_count(j, "attention_heads");
  if (j.contains("attention_hidden")) c.attention_hidden = read_count(j, "attention_hidden");
  if (j.contains("gamma") && !j.at("gamma").is_null()) c.gamma = read<double>(j, "gamma");
  if (j.contains("seed")) c.seed = read<std::uint64_t>(j, "seed");
  if (j.contains("eval_interval")) c.eval_interval = read_count(j, "eval_interval");
  if (j.contains("metric_grid")) c.metric_grid = read_count(j, "metric_grid");
  c.validate();
  return c;
}

}  // namespace dfac::training
