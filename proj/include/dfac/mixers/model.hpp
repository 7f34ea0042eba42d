#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "dfac/agents/agent.hpp"
#include "dfac/dist/distributions.hpp"
#include "dfac/mixers/method.hpp"
#include "dfac/mixers/mixer.hpp"
#include "json.hpp"

namespace dfac::mixers {

struct ModelConfig {
  Method method = Method::Vdn;
  std::size_t n_agents = 2;
  std::size_t n_actions = 3;
  std::size_t obs_dim = 3;
  std::size_t state_dim = 1;
  std::vector<std::size_t> agent_hidden{64, 512};
  std::size_t cos_features = 64;
  std::vector<std::size_t> embed_hidden{64};
  dist::UniformSupport support{-20.0, 20.0, 51};
  std::size_t mixer_embed = 8;
  std::size_t attention_heads = 10;
  std::size_t attention_hidden = 64;
};

/// Rows of joint inputs. Agent observations are stored once and referenced
/// by index so that a batch with few distinct observations runs the agent
/// network only on those.
struct JointBatch {
  diff::Tensor observations;              // [U x obs_dim]
  std::vector<std::size_t> obs_index;     // R * K, row-major (row, agent)
  diff::Tensor states;                    // [R x S]
  std::vector<std::size_t> actions;       // R * K, row-major (row, agent)

  std::size_t rows() const { return states.rows(); }
};

struct JointForward {
  diff::Var q_jt;            // [R] Psi, the expected joint value
  diff::Var joint;           // [R x N] joint quantiles or [R x n] joint probabilities
  diff::Var agent_values;    // [U x A] expected utility of every action
  diff::Var agent_chosen;    // [R x K] utility of each agent's chosen action
  diff::Var agent_dists;     // [(R * K) x N] quantiles or [(R * K) x n] probabilities
  bool has_joint = false;
  bool clipped = false;      // categorical joint lost mass to clipping
};

/// Plain-value summary of one joint action.
struct JointEstimate {
  double q_jt = 0.0;           // Psi
  double expectation = 0.0;    // estimator mean of Z_jt (q_jt for expected methods)
  std::vector<double> agent_q; // chosen utilities
  std::optional<dist::QuantileBatch> quantiles;
  std::optional<dist::CategoricalDist> pmf;
  std::vector<dist::QuantileBatch> agent_curves;
  std::vector<dist::CategoricalDist> agent_pmfs;
  bool clipped = false;
};

/// Agent utility network plus factorization function, with the additive
/// shape function for the distributional methods.
class FactorizedModel {
 public:
  FactorizedModel(ModelConfig config, Rng& rng);

  const ModelConfig& config() const { return config_; }
  agents::AgentNetwork& agent() { return agent_; }
  const agents::AgentNetwork& agent() const { return agent_; }
  Mixer& mixer() { return mixer_; }
  const Mixer& mixer() const { return mixer_; }

  std::vector<diff::Parameter*> parameters();
  void copy_values_from(const FactorizedModel& other);

  /// Builds the joint computation for every row. `levels` are the quantile
  /// levels shared by all rows (quantile heads only).
  JointForward forward(diff::Graph& g, diff::Params agent_params, diff::Params mixer_params, const JointBatch& batch,
                       std::span<const double> levels) const;

  /// Read-only evaluation of every row.
  std::vector<JointEstimate> evaluate(const JointBatch& batch, std::span<const double> levels) const;

  /// [U x A] expected utilities for distinct observations (quantile heads
  /// average over `levels`).
  diff::Tensor action_values(const diff::Tensor& observations, std::span<const double> levels) const;

  /// {"agent.<name>": {...}, "mixer.<name>": {...}}
  nlohmann::json params_json() const;
  void load_params_json(const nlohmann::json& j);

 private:
  ModelConfig config_;
  agents::AgentNetwork agent_;
  Mixer mixer_;
};

agents::AgentConfig agent_config_of(const ModelConfig& config);
MixerConfig mixer_config_of(const ModelConfig& config);

}  // namespace dfac::mixers
