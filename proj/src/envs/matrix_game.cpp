#include "dfac/envs/matrix_game.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "dfac/error.hpp"

namespace dfac::envs {

std::vector<std::size_t> MatrixGameSpec::action_counts() const {
  std::vector<std::size_t> c;
  for (const auto& a : actions) c.push_back(a.size());
  return c;
}

std::size_t MatrixGameSpec::joint_index(std::span<const std::size_t> joint) const {
  if (joint.size() != agents)
    throw DomainError("joint action has " + std::to_string(joint.size()) + " entries, expected " + std::to_string(agents));
  std::size_t idx = 0;
  for (std::size_t k = 0; k < agents; ++k) {
    if (joint[k] >= actions[k].size())
      throw DomainError("action " + std::to_string(joint[k]) + " out of range for agent " + std::to_string(k + 1));
    idx = idx * actions[k].size() + joint[k];
  }
  return idx;
}

std::vector<std::size_t> MatrixGameSpec::joint_action(std::size_t index) const {
  if (index >= joint_count()) throw DomainError("joint action index out of range");
  std::vector<std::size_t> u(agents);
  for (std::size_t k = agents; k-- > 0;) {
    u[k] = index % actions[k].size();
    index /= actions[k].size();
  }
  return u;
}

std::string MatrixGameSpec::joint_label(std::span<const std::size_t> joint) const {
  joint_index(joint);
  std::string s = "(";
  for (std::size_t k = 0; k < joint.size(); ++k) s += (k ? ", " : "") + actions[k][joint[k]];
  return s + ")";
}

std::vector<std::size_t> MatrixGameSpec::parse_joint_action(const std::string& text) const {
  std::string cleaned;
  for (char c : text) cleaned += (c == ',' || c == '(' || c == ')') ? ' ' : c;
  std::istringstream in(cleaned);
  std::vector<std::size_t> joint;
  std::string name;
  while (in >> name) {
    const std::size_t k = joint.size();
    if (k >= agents) throw DomainError("joint action '" + text + "' names more than " + std::to_string(agents) + " actions");
    std::size_t found = actions[k].size();
    for (std::size_t a = 0; a < actions[k].size(); ++a)
      if (actions[k][a] == name) found = a;
    if (found == actions[k].size())
      throw DomainError("unknown action '" + name + "' for agent " + std::to_string(k + 1));
    joint.push_back(found);
  }
  if (joint.size() != agents) throw DomainError("joint action '" + text + "' needs " + std::to_string(agents) + " names");
  return joint;
}

MatrixGameSpec spec_from_json(const nlohmann::json& j, const std::string& source) {
  auto fail = [&](const std::string& where, const std::string& what) -> void {
    throw FormatError(source + ": " + where + ": " + what);
  };
  if (!j.is_object()) fail("root", "expected an object");
  for (const char* key : {"agents", "actions", "payoff"})
    if (!j.contains(key)) fail("root", std::string("missing field '") + key + "'");
  for (const auto& [key, _] : j.items())
    if (key != "agents" && key != "actions" && key != "payoff" && key != "discount" && key != "horizon")
      fail("root", "unknown field '" + key + "'");

  MatrixGameSpec spec;
  if (!(j["agents"].is_number_integer() && j["agents"].get<long long>() > 0) || j["agents"].get<std::size_t>() == 0) fail("agents", "expected a positive integer");
  spec.agents = j["agents"].get<std::size_t>();
  const auto& acts = j["actions"];
  if (!acts.is_array() || acts.size() != spec.agents) fail("actions", "expected one name list per agent");
  for (std::size_t k = 0; k < spec.agents; ++k) {
    if (!acts[k].is_array() || acts[k].empty()) fail("actions[" + std::to_string(k) + "]", "expected a non-empty list");
    std::vector<std::string> names;
    for (const auto& n : acts[k]) {
      if (!n.is_string()) fail("actions[" + std::to_string(k) + "]", "action names must be strings");
      names.push_back(n.get<std::string>());
    }
    for (std::size_t a = 0; a < names.size(); ++a)
      for (std::size_t b = a + 1; b < names.size(); ++b)
        if (names[a] == names[b]) fail("actions[" + std::to_string(k) + "]", "duplicate name '" + names[a] + "'");
    spec.actions.push_back(std::move(names));
  }
  if (j.contains("discount")) {
    if (!j["discount"].is_number()) fail("discount", "expected a number");
    spec.discount = j["discount"].get<double>();
    if (!(spec.discount >= 0.0 && spec.discount <= 1.0)) fail("discount", "must lie in [0, 1]");
  }
  if (j.contains("horizon")) {
    if (!(j["horizon"].is_number_integer() && j["horizon"].get<long long>() > 0) || j["horizon"].get<std::size_t>() == 0) fail("horizon", "expected a positive integer");
    spec.horizon = j["horizon"].get<std::size_t>();
  }

  std::size_t joint_count = 1;
  for (const auto& a : spec.actions) joint_count *= a.size();
  spec.payoff.assign(joint_count, {});
  std::vector<bool> seen(joint_count, false);
  const auto& pay = j["payoff"];
  if (!pay.is_array() || pay.empty()) fail("payoff", "expected a non-empty list");
  for (std::size_t e = 0; e < pay.size(); ++e) {
    const std::string where = "payoff[" + std::to_string(e) + "]";
    const auto& entry = pay[e];
    if (!entry.is_object() || !entry.contains("action") || !entry.contains("mean") || !entry.contains("std"))
      fail(where, "expected {action, mean, std}");
    if (!entry["action"].is_array() || entry["action"].size() != spec.agents)
      fail(where, "action must list one name per agent");
    std::vector<std::size_t> joint;
    for (std::size_t k = 0; k < spec.agents; ++k) {
      const auto& n = entry["action"][k];
      std::size_t found = spec.actions[k].size();
      if (n.is_string())
        for (std::size_t a = 0; a < spec.actions[k].size(); ++a)
          if (spec.actions[k][a] == n.get<std::string>()) found = a;
      if (found == spec.actions[k].size()) fail(where, "unknown action " + n.dump() + " for agent " + std::to_string(k + 1));
      joint.push_back(found);
    }
    if (!entry["mean"].is_number() || !entry["std"].is_number()) fail(where, "mean and std must be numbers");
    const double mean = entry["mean"].get<double>(), sd = entry["std"].get<double>();
    if (!std::isfinite(mean)) fail(where, "mean must be finite");
    if (!(sd >= 0.0) || !std::isfinite(sd)) fail(where, "std must be finite and non-negative");
    const std::size_t idx = spec.joint_index(joint);
    if (seen[idx]) fail(where, "duplicate entry for " + spec.joint_label(joint));
    seen[idx] = true;
    spec.payoff[idx] = {mean, sd};
  }
  for (std::size_t i = 0; i < joint_count; ++i)
    if (!seen[i]) fail("payoff", "missing entry for " + spec.joint_label(spec.joint_action(i)));
  return spec;
}

nlohmann::json spec_to_json(const MatrixGameSpec& spec) {
  nlohmann::json pay = nlohmann::json::array();
  for (std::size_t i = 0; i < spec.joint_count(); ++i) {
    const auto u = spec.joint_action(i);
    std::vector<std::string> names;
    for (std::size_t k = 0; k < u.size(); ++k) names.push_back(spec.actions[k][u[k]]);
    pay.push_back({{"action", names}, {"mean", spec.payoff[i].mean}, {"std", spec.payoff[i].std}});
  }
  nlohmann::json j = {{"agents", spec.agents}, {"actions", spec.actions}, {"payoff", pay}, {"discount", spec.discount}};
  if (spec.horizon != 1) j["horizon"] = spec.horizon;
  return j;
}

MatrixGameSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": cannot open file");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  return spec_from_json(j, path.string());
}

MatrixGameSpec table1_spec() {
  MatrixGameSpec s;
  s.agents = 2;
  s.actions = {{"A1", "B1", "C1"}, {"A2", "B2", "C2"}};
  const double mean[9] = {8, -12, -12, -12, 6, 0, -12, 0, 6};
  const double var[9] = {8, 6, 4, 6, 4, 2, 4, 2, 0};
  for (int i = 0; i < 9; ++i) s.payoff.push_back({mean[i], std::sqrt(var[i])});
  s.discount = 0.99;
  return s;
}

std::vector<std::vector<double>> reset(const MatrixGameSpec& spec) {
  std::vector<std::vector<double>> obs;
  for (std::size_t k = 0; k < spec.agents; ++k) {
    std::vector<double> o(spec.obs_dim(), 0.0);
    o[0] = 1.0;
    o[1 + k] = 1.0;
    obs.push_back(std::move(o));
  }
  return obs;
}

std::vector<double> state(const MatrixGameSpec&) { return {1.0}; }

Transition step(const MatrixGameSpec& spec, std::span<const std::size_t> joint, Rng& rng) {
  const dist::NormalSpec& r = spec.payoff_at(joint);
  Transition t;
  t.obs = reset(spec);
  t.state = state(spec);
  t.actions.assign(joint.begin(), joint.end());
  t.reward = dist::normal_quantile(r, rng.uniform_open());
  t.done = true;
  t.next_obs = t.obs;
  t.next_state = t.state;
  return t;
}

GroundTruth ground_truth(const MatrixGameSpec& spec) {
  if (spec.horizon != 1) throw DomainError("ground truth is only defined for single-step games");
  GroundTruth g;
  for (const auto& p : spec.payoff) {
    g.q.push_back(p.mean);
    g.z.push_back(p);
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < g.q.size(); ++i)
    if (g.q[i] > g.q[best]) best = i;
  g.optimal = spec.joint_action(best);
  g.optimal_return = g.q[best];
  return g;
}

}  // namespace dfac::envs
