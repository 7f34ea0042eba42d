#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dfac/diff/graph.hpp"
#include "dfac/diff/nn.hpp"
#include "dfac/diff/rng.hpp"
#include "dfac/dist/distributions.hpp"

namespace dfac::agents {

enum class HeadKind { Expected, Quantile, Categorical };

std::string head_name(HeadKind head);

struct AgentConfig {
  std::size_t obs_dim = 1;
  std::size_t n_actions = 1;
  std::vector<std::size_t> hidden{64, 512};  // torso widths, ReLU after each
  HeadKind head = HeadKind::Expected;
  std::size_t cos_features = 64;              // cosine features feeding the level embedding
  std::vector<std::size_t> embed_hidden;      // intermediate embedding layers (ReLU), may be empty
  bool torso_relu_output = true;              // quantile heads keep the last torso layer linear
  dist::UniformSupport support{-20.0, 20.0, 51};
};

/// Utility network shared by all agents. The torso maps an observation to a
/// feature vector; the head turns it into one value per action, a quantile
/// function per action, or a categorical distribution per action.
class AgentNetwork {
 public:
  AgentNetwork(AgentConfig config, Rng& rng);

  const AgentConfig& config() const { return config_; }
  std::size_t feature_dim() const { return torso_.out(); }
  diff::ParameterSet& params() { return params_; }
  const diff::ParameterSet& params() const { return params_; }

  /// [U x obs_dim] -> [U x H]
  diff::Var torso(diff::Graph& g, diff::Params p, diff::Var obs) const;
  /// [U x A] action values (expected head only).
  diff::Var expected_values(diff::Graph& g, diff::Params p, diff::Var obs) const;
  /// [N x H] embedding ReLU(W cos(pi j level) + b), j = 0..m-1, with the
  /// optional intermediate layers in between.
  diff::Var level_embedding(diff::Graph& g, diff::Params p, std::span<const double> levels) const;
  /// [(U * N) x A], row u * N + i holds the level-i quantile of every action.
  diff::Var quantile_values(diff::Graph& g, diff::Params p, diff::Var obs, std::span<const double> levels) const;
  /// [(U * A) x n], row u * A + a is the probability vector of action a.
  diff::Var categorical_probs(diff::Graph& g, diff::Params p, diff::Var obs) const;

 private:
  AgentConfig config_;
  diff::ParameterSet params_;
  diff::Mlp torso_;
  diff::Mlp embed_;
  diff::Linear out_;
};

/// Observation of agent k out of n_agents: the shared features followed by a
/// one-hot agent id.
std::vector<double> make_observation(std::span<const double> features, std::size_t agent, std::size_t n_agents);

/// Level embedding for a single level.
std::vector<double> quantile_embedding(const AgentNetwork& net, double level);
/// Per-action quantile batches for one observation.
std::vector<dist::QuantileBatch> iqn_forward(const AgentNetwork& net, std::span<const double> obs,
                                             std::span<const double> levels);
/// Per-action categorical distributions for one observation.
std::vector<dist::CategoricalDist> c51_forward(const AgentNetwork& net, std::span<const double> obs);
/// Per-action values of an expected-value network.
std::vector<double> expected_forward(const AgentNetwork& net, std::span<const double> obs);

/// E[Z(u)] for every action; quantile heads average over `levels`.
std::vector<double> action_values(const AgentNetwork& net, std::span<const double> obs, std::span<const double> levels);

inline double head_expectation(double value) { return value; }
inline double head_expectation(const dist::QuantileBatch& batch) { return dist::expectation(batch); }
inline double head_expectation(const dist::CategoricalDist& d) { return dist::expectation(d); }

/// Index of the largest value; ties go to the lowest index. Non-finite values
/// throw DomainError.
std::size_t greedy_action(std::span<const double> values);

}  // namespace dfac::agents
