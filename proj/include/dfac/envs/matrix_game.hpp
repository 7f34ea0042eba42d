#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dfac/diff/rng.hpp"
#include "dfac/dist/distributions.hpp"
#include "json.hpp"

namespace dfac::envs {

/// Single-state cooperative game with a normal reward per joint action.
struct MatrixGameSpec {
  std::size_t agents = 0;
  std::vector<std::vector<std::string>> actions;  // action names per agent
  std::vector<dist::NormalSpec> payoff;           // lexicographic joint-action order
  double discount = 0.99;
  std::size_t horizon = 1;

  std::vector<std::size_t> action_counts() const;
  std::size_t joint_count() const { return payoff.size(); }
  /// Flat index of a joint action; throws DomainError when out of range.
  std::size_t joint_index(std::span<const std::size_t> joint) const;
  std::vector<std::size_t> joint_action(std::size_t index) const;
  const dist::NormalSpec& payoff_at(std::span<const std::size_t> joint) const { return payoff[joint_index(joint)]; }
  /// "(A1, A2)"
  std::string joint_label(std::span<const std::size_t> joint) const;
  /// Accepts "A1,B2", "(A1, B2)" or "A1 B2"; throws DomainError for unknown names.
  std::vector<std::size_t> parse_joint_action(const std::string& text) const;
  std::size_t obs_dim() const { return 1 + agents; }
  std::size_t state_dim() const { return 1; }
};

/// Parses and validates a spec; `source` prefixes error messages.
MatrixGameSpec spec_from_json(const nlohmann::json& j, const std::string& source = "spec");
nlohmann::json spec_to_json(const MatrixGameSpec& spec);
MatrixGameSpec load_spec(const std::filesystem::path& path);
/// The two-agent, three-action stochastic game with a deterministic
/// suboptimal cell at (C1, C2) and a risky optimum at (A1, A2).
MatrixGameSpec table1_spec();

/// Agent k observes [1] ++ one_hot(k, K).
std::vector<std::vector<double>> reset(const MatrixGameSpec& spec);
/// Global state feature vector: the constant [1].
std::vector<double> state(const MatrixGameSpec& spec);

struct Transition {
  std::vector<std::vector<double>> obs;
  std::vector<double> state;
  std::vector<std::size_t> actions;
  double reward = 0.0;
  bool done = true;
  std::vector<std::vector<double>> next_obs;
  std::vector<double> next_state;
};

/// Draws the reward by inverse-CDF sampling of one uniform variate.
Transition step(const MatrixGameSpec& spec, std::span<const std::size_t> joint, Rng& rng);

struct GroundTruth {
  std::vector<double> q;                 // per joint action
  std::vector<dist::NormalSpec> z;       // per joint action
  std::vector<std::size_t> optimal;      // lowest lexicographic argmax of q
  double optimal_return = 0.0;
};

GroundTruth ground_truth(const MatrixGameSpec& spec);

}  // namespace dfac::envs
