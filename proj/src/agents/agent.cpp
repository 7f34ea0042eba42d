#include "dfac/agents/agent.hpp"

#include <cmath>
#include <numbers>

#include "dfac/diff/ops.hpp"
#include "dfac/error.hpp"

namespace dfac::agents {

using diff::Graph;
using diff::Params;
using diff::Shape;
using diff::Tensor;
using diff::Var;

std::string head_name(HeadKind head) {
  switch (head) {
    case HeadKind::Expected: return "expected";
    case HeadKind::Quantile: return "quantile";
    case HeadKind::Categorical: return "categorical";
  }
  return "?";
}

AgentNetwork::AgentNetwork(AgentConfig config, Rng& rng) : config_(std::move(config)) {
  if (config_.obs_dim == 0 || config_.n_actions == 0) throw ShapeError("agent network needs observations and actions");
  if (config_.hidden.empty()) throw ShapeError("agent network needs at least one hidden layer");
  torso_ = diff::Mlp::create(params_, "torso", config_.obs_dim, config_.hidden, config_.torso_relu_output, rng);
  const std::size_t h = torso_.out();
  switch (config_.head) {
    case HeadKind::Expected:
      out_ = diff::Linear::create(params_, "out", h, config_.n_actions, rng);
      break;
    case HeadKind::Quantile:
      if (config_.cos_features == 0) throw ShapeError("quantile head needs cosine features");
      {
        std::vector<std::size_t> widths = config_.embed_hidden;
        widths.push_back(h);
        embed_ = diff::Mlp::create(params_, "embed", config_.cos_features, widths, true, rng);
      }
      out_ = diff::Linear::create(params_, "out", h, config_.n_actions, rng);
      break;
    case HeadKind::Categorical:
      if (config_.support.n < 2) throw ShapeError("categorical head needs at least two atoms");
      out_ = diff::Linear::create(params_, "out", h, config_.n_actions * config_.support.n, rng);
      break;
  }
}

Var AgentNetwork::torso(Graph& g, Params p, Var obs) const {
  if (obs.value().rank() != 2 || obs.value().cols() != config_.obs_dim)
    throw ShapeError("agent network expects [U x " + std::to_string(config_.obs_dim) + "] observations, got " +
                     diff::shape_string(obs.shape()));
  return torso_(g, p, obs);
}

Var AgentNetwork::expected_values(Graph& g, Params p, Var obs) const {
  if (config_.head != HeadKind::Expected) throw StateError("expected_values on a " + head_name(config_.head) + " head");
  return out_(g, p, torso(g, p, obs));
}

Var AgentNetwork::level_embedding(Graph& g, Params p, std::span<const double> levels) const {
  if (config_.head != HeadKind::Quantile) throw StateError("level_embedding on a " + head_name(config_.head) + " head");
  const std::size_t m = config_.cos_features;
  Tensor features(Shape{levels.size(), m});
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (!(levels[i] >= 0.0 && levels[i] <= 1.0)) throw DomainError("quantile level outside [0, 1]");
    for (std::size_t j = 0; j < m; ++j)
      features.at(i, j) = std::cos(std::numbers::pi * static_cast<double>(j) * levels[i]);
  }
  return embed_(g, p, g.constant(std::move(features)));
}

Var AgentNetwork::quantile_values(Graph& g, Params p, Var obs, std::span<const double> levels) const {
  Var state = torso(g, p, obs);
  Var phi = level_embedding(g, p, levels);
  return diff::modulated_affine(state, phi, p.bind(g, out_.weight), p.bind(g, out_.bias));
}

Var AgentNetwork::categorical_probs(Graph& g, Params p, Var obs) const {
  if (config_.head != HeadKind::Categorical)
    throw StateError("categorical_probs on a " + head_name(config_.head) + " head");
  Var logits = out_(g, p, torso(g, p, obs));
  const std::size_t units = obs.value().rows();
  return diff::softmax_rows(diff::reshape(logits, Shape{units * config_.n_actions, config_.support.n}));
}

std::vector<double> make_observation(std::span<const double> features, std::size_t agent, std::size_t n_agents) {
  if (agent >= n_agents) throw DomainError("agent index out of range");
  std::vector<double> obs(features.begin(), features.end());
  obs.resize(features.size() + n_agents, 0.0);
  obs[features.size() + agent] = 1.0;
  return obs;
}

namespace {

Tensor single_row(const AgentNetwork& net, std::span<const double> obs) {
  if (obs.size() != net.config().obs_dim)
    throw ShapeError("observation has " + std::to_string(obs.size()) + " entries, expected " +
                     std::to_string(net.config().obs_dim));
  return Tensor::matrix(1, obs.size(), std::vector<double>(obs.begin(), obs.end()));
}

}  // namespace

std::vector<double> quantile_embedding(const AgentNetwork& net, double level) {
  Graph g;
  const double lv[] = {level};
  Var phi = net.level_embedding(g, net.params(), lv);
  auto v = phi.value().values();
  return {v.begin(), v.end()};
}

std::vector<dist::QuantileBatch> iqn_forward(const AgentNetwork& net, std::span<const double> obs,
                                             std::span<const double> levels) {
  Graph g;
  Var q = net.quantile_values(g, net.params(), g.constant(single_row(net, obs)), levels);
  const Tensor& v = q.value();
  const std::size_t a_count = net.config().n_actions;
  std::vector<dist::QuantileBatch> out(a_count);
  for (std::size_t a = 0; a < a_count; ++a) {
    out[a].levels.assign(levels.begin(), levels.end());
    out[a].values.resize(levels.size());
    for (std::size_t i = 0; i < levels.size(); ++i) out[a].values[i] = v.at(i, a);
  }
  return out;
}

std::vector<dist::CategoricalDist> c51_forward(const AgentNetwork& net, std::span<const double> obs) {
  Graph g;
  Var probs = net.categorical_probs(g, net.params(), g.constant(single_row(net, obs)));
  const Tensor& v = probs.value();
  const std::vector<double> atoms = net.config().support.atoms();
  std::vector<dist::CategoricalDist> out;
  for (std::size_t a = 0; a < net.config().n_actions; ++a) {
    dist::CategoricalDist d{atoms, std::vector<double>(atoms.size())};
    for (std::size_t i = 0; i < atoms.size(); ++i) d.probs[i] = v.at(a, i);
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<double> expected_forward(const AgentNetwork& net, std::span<const double> obs) {
  Graph g;
  Var q = net.expected_values(g, net.params(), g.constant(single_row(net, obs)));
  auto v = q.value().values();
  return {v.begin(), v.end()};
}

std::vector<double> action_values(const AgentNetwork& net, std::span<const double> obs, std::span<const double> levels) {
  std::vector<double> out;
  switch (net.config().head) {
    case HeadKind::Expected:
      return expected_forward(net, obs);
    case HeadKind::Quantile:
      for (const auto& b : iqn_forward(net, obs, levels)) out.push_back(head_expectation(b));
      return out;
    case HeadKind::Categorical:
      for (const auto& d : c51_forward(net, obs)) out.push_back(head_expectation(d));
      return out;
  }
  return out;
}

std::size_t greedy_action(std::span<const double> values) {
  if (values.empty()) throw ShapeError("greedy_action over no actions");
  for (double v : values)
    if (!std::isfinite(v)) throw DomainError("greedy_action: non-finite action value");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

}  // namespace dfac::agents
