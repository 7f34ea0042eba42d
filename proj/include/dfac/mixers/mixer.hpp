#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dfac/diff/graph.hpp"
#include "dfac/diff/nn.hpp"
#include "dfac/diff/rng.hpp"
#include "dfac/mixers/method.hpp"

namespace dfac::mixers {

struct MixerConfig {
  Factorization kind = Factorization::Additive;
  std::size_t n_agents = 2;
  std::size_t n_actions = 3;
  std::size_t state_dim = 1;
  std::size_t embed = 8;              // mixing width (monotonic) or transform width (dueling)
  std::size_t attention_heads = 10;
  std::size_t attention_hidden = 64;
  bool elu_hidden = true;             // monotonic mixer hidden activation; identity when false
};

/// Factorization function Psi over per-agent utilities.
///
/// Monotonic: hypernetworks conditioned on the state produce |W1| [K x E], b1,
/// |W2| [E], and b2 = V(s); Q_jt = |W2| . act(q |W1| + b1) + b2.
/// Dueling: Q_jt = sum_k w_k(s) V_k + b_k(s) + sum_k lambda_k(s, u) w_k(s) (Q_k - V_k)
/// with w_k = |.| of a one-hidden-layer net and lambda from multi-head attention.
class Mixer {
 public:
  Mixer(MixerConfig config, Rng& rng);

  const MixerConfig& config() const { return config_; }
  diff::ParameterSet& params() { return params_; }
  const diff::ParameterSet& params() const { return params_; }

  /// chosen, best: [R x K] utilities of the chosen and greedy actions
  /// (best is only read by the dueling mixer); states [R x S]; actions R * K
  /// chosen action indices, row-major. Returns Q_jt as [R].
  diff::Var mix(diff::Graph& g, diff::Params p, diff::Var chosen, diff::Var best, const diff::Tensor& states,
                std::span<const std::size_t> actions) const;

  /// Dueling only: lambda_k(s, u) > 0 as [R x K].
  diff::Var lambda(diff::Graph& g, diff::Params p, const diff::Tensor& states,
                   std::span<const std::size_t> actions) const;
  /// Dueling only: transform weights w_k(s) >= 0 and biases b_k(s), each [R x K].
  diff::Var transform_weights(diff::Graph& g, diff::Params p, diff::Var states) const;
  diff::Var transform_biases(diff::Graph& g, diff::Params p, diff::Var states) const;

 private:
  diff::Var mix_monotonic(diff::Graph& g, diff::Params p, diff::Var chosen, const diff::Tensor& states) const;
  diff::Var mix_dueling(diff::Graph& g, diff::Params p, diff::Var chosen, diff::Var best, const diff::Tensor& states,
                        std::span<const std::size_t> actions) const;

  struct AttentionHead {
    diff::Mlp key;
    diff::Mlp query;
    diff::Mlp value;
  };

  MixerConfig config_;
  diff::ParameterSet params_;
  // monotonic
  diff::Linear hyper_w1_, hyper_b1_, hyper_w2_;
  diff::Mlp hyper_b2_;
  // dueling
  diff::Mlp transform_w_, transform_b_;
  std::vector<AttentionHead> heads_;
};

}  // namespace dfac::mixers
