#include "dfac/mixers/mixer.hpp"

#include "dfac/diff/ops.hpp"
#include "dfac/error.hpp"

namespace dfac::mixers {

using diff::Graph;
using diff::Params;
using diff::Shape;
using diff::Tensor;
using diff::Var;

Mixer::Mixer(MixerConfig config, Rng& rng) : config_(config) {
  const std::size_t k = config_.n_agents, s = config_.state_dim, e = config_.embed;
  if (k == 0 || s == 0 || config_.n_actions == 0) throw ShapeError("mixer needs agents, actions and state features");
  switch (config_.kind) {
    case Factorization::Additive:
      break;
    case Factorization::Monotonic:
      hyper_w1_ = diff::Linear::create(params_, "hyper_w1", s, k * e, rng);
      hyper_b1_ = diff::Linear::create(params_, "hyper_b1", s, e, rng);
      hyper_w2_ = diff::Linear::create(params_, "hyper_w2", s, e, rng);
      hyper_b2_ = diff::Mlp::create(params_, "hyper_b2", s, {e, 1}, false, rng);
      break;
    case Factorization::Dueling: {
      if (config_.attention_heads == 0) throw ShapeError("dueling mixer needs at least one attention head");
      transform_w_ = diff::Mlp::create(params_, "transform_w", s, {e, k}, false, rng);
      transform_b_ = diff::Mlp::create(params_, "transform_b", s, {e, k}, false, rng);
      const std::size_t in = s + k * config_.n_actions, hid = config_.attention_hidden;
      for (std::size_t h = 0; h < config_.attention_heads; ++h) {
        const std::string base = "attention." + std::to_string(h);
        heads_.push_back({diff::Mlp::create(params_, base + ".key", in, {hid, hid, k}, false, rng),
                          diff::Mlp::create(params_, base + ".query", in, {hid, hid, k}, false, rng),
                          diff::Mlp::create(params_, base + ".value", in, {hid, hid, 1}, false, rng)});
      }
      break;
    }
  }
}

Var Mixer::mix(Graph& g, Params p, Var chosen, Var best, const Tensor& states,
               std::span<const std::size_t> actions) const {
  const Tensor& q = chosen.value();
  if (q.rank() != 2 || q.cols() != config_.n_agents)
    throw ShapeError("mixer expects [R x " + std::to_string(config_.n_agents) + "] utilities, got " +
                     diff::shape_string(q.shape()));
  if (config_.kind != Factorization::Additive && (states.rank() != 2 || states.rows() != q.rows() ||
                                                   states.cols() != config_.state_dim))
    throw ShapeError("mixer states " + diff::shape_string(states.shape()) + " do not match " +
                     std::to_string(q.rows()) + " rows of " + std::to_string(config_.state_dim) + " features");
  switch (config_.kind) {
    case Factorization::Additive: return diff::sum_rows(chosen);
    case Factorization::Monotonic: return mix_monotonic(g, p, chosen, states);
    case Factorization::Dueling: return mix_dueling(g, p, chosen, best, states, actions);
  }
  return chosen;
}

Var Mixer::mix_monotonic(Graph& g, Params p, Var chosen, const Tensor& states) const {
  const std::size_t rows = states.rows(), k = config_.n_agents, e = config_.embed;
  Var s = g.constant(states);
  Var w1 = diff::abs(hyper_w1_(g, p, s));  // [R x K*E], entry (k, e) at k * E + e
  Var b1 = hyper_b1_(g, p, s);
  Var w2 = diff::abs(hyper_w2_(g, p, s));
  Var b2 = diff::reshape(hyper_b2_(g, p, s), Shape{rows});

  std::vector<std::size_t> spread(rows * k * e);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t j = 0; j < e; ++j) spread[(r * k + a) * e + j] = r * k + a;
  Var weighted = diff::take(chosen, std::move(spread), Shape{rows, k * e}) * w1;
  // regroup to [(R*E) x K] so the agent sum becomes a row sum
  std::vector<std::size_t> regroup(rows * e * k);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < e; ++j)
      for (std::size_t a = 0; a < k; ++a) regroup[(r * e + j) * k + a] = r * k * e + a * e + j;
  Var pre = diff::reshape(diff::sum_rows(diff::take(weighted, std::move(regroup), Shape{rows * e, k})), Shape{rows, e});
  Var hidden = pre + b1;
  if (config_.elu_hidden) hidden = diff::elu(hidden);
  return diff::sum_rows(hidden * w2) + b2;
}

Var Mixer::transform_weights(Graph& g, Params p, Var states) const {
  if (config_.kind != Factorization::Dueling) throw StateError("transform weights exist only for the dueling mixer");
  return diff::abs(transform_w_(g, p, states));
}

Var Mixer::transform_biases(Graph& g, Params p, Var states) const {
  if (config_.kind != Factorization::Dueling) throw StateError("transform biases exist only for the dueling mixer");
  return transform_b_(g, p, states);
}

Var Mixer::lambda(Graph& g, Params p, const Tensor& states, std::span<const std::size_t> actions) const {
  if (config_.kind != Factorization::Dueling) throw StateError("lambda exists only for the dueling mixer");
  const std::size_t rows = states.rows(), k = config_.n_agents, a_count = config_.n_actions, sd = config_.state_dim;
  if (actions.size() != rows * k) throw ShapeError("lambda needs one action per agent per row");
  const std::size_t in = sd + k * a_count;
  Tensor x(Shape{rows, in});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < sd; ++c) x.at(r, c) = states.at(r, c);
    for (std::size_t a = 0; a < k; ++a) {
      const std::size_t u = actions[r * k + a];
      if (u >= a_count) throw DomainError("action index out of range in mixer input");
      x.at(r, sd + a * a_count + u) = 1.0;
    }
  }
  Var xv = g.constant(std::move(x));
  Var total;
  for (std::size_t h = 0; h < heads_.size(); ++h) {
    const AttentionHead& head = heads_[h];
    Var weights = diff::softmax_rows(head.key(g, p, xv) * head.query(g, p, xv));
    Var scale = diff::repeat_cols(diff::reshape(diff::abs(head.value(g, p, xv)), Shape{rows}), k);
    Var out = weights * scale;
    total = h == 0 ? out : total + out;
  }
  return diff::add_scalar(diff::softplus(total), 1e-6);
}

Var Mixer::mix_dueling(Graph& g, Params p, Var chosen, Var best, const Tensor& states,
                       std::span<const std::size_t> actions) const {
  if (best.value().shape() != chosen.value().shape()) throw ShapeError("dueling mixer needs greedy utilities per agent");
  Var s = g.constant(states);
  Var w = transform_weights(g, p, s);
  Var b = transform_biases(g, p, s);
  Var lam = lambda(g, p, states, actions);
  Var value_part = diff::sum_rows(w * best + b);
  Var advantage_part = diff::sum_rows(lam * w * (chosen - best));
  return value_part + advantage_part;
}

}  // namespace dfac::mixers
