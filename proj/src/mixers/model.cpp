#include "dfac/mixers/model.hpp"

#include "dfac/diff/ops.hpp"
#include "dfac/diff/serialize.hpp"
#include "dfac/dist/graph_ops.hpp"
#include "dfac/error.hpp"

namespace dfac::mixers {

using agents::HeadKind;
using diff::Graph;
using diff::Params;
using diff::Shape;
using diff::Tensor;
using diff::Var;

agents::AgentConfig agent_config_of(const ModelConfig& config) {
  agents::AgentConfig a;
  a.obs_dim = config.obs_dim;
  a.n_actions = config.n_actions;
  a.hidden = config.agent_hidden;
  a.head = head_of(config.method);
  a.cos_features = config.cos_features;
  a.embed_hidden = config.embed_hidden;
  a.torso_relu_output = a.head != HeadKind::Quantile;
  a.support = config.support;
  return a;
}

MixerConfig mixer_config_of(const ModelConfig& config) {
  MixerConfig m;
  m.kind = factorization_of(config.method);
  m.n_agents = config.n_agents;
  m.n_actions = config.n_actions;
  m.state_dim = config.state_dim;
  m.embed = config.mixer_embed;
  m.attention_heads = config.attention_heads;
  m.attention_hidden = config.attention_hidden;
  return m;
}

FactorizedModel::FactorizedModel(ModelConfig config, Rng& rng)
    : config_(std::move(config)), agent_(agent_config_of(config_), rng), mixer_(mixer_config_of(config_), rng) {}

std::vector<diff::Parameter*> FactorizedModel::parameters() {
  std::vector<diff::Parameter*> out = agent_.params().all();
  for (diff::Parameter* p : mixer_.params().all()) out.push_back(p);
  return out;
}

void FactorizedModel::copy_values_from(const FactorizedModel& other) {
  agent_.params().copy_values_from(other.agent_.params());
  mixer_.params().copy_values_from(other.mixer_.params());
}

namespace {

void check_batch(const ModelConfig& c, const JointBatch& b) {
  const std::size_t rows = b.rows(), k = c.n_agents;
  if (b.observations.rank() != 2 || b.observations.cols() != c.obs_dim)
    throw ShapeError("joint batch observations " + diff::shape_string(b.observations.shape()) + " need " +
                     std::to_string(c.obs_dim) + " columns");
  if (b.states.rank() != 2 || b.states.cols() != c.state_dim)
    throw ShapeError("joint batch states " + diff::shape_string(b.states.shape()) + " need " +
                     std::to_string(c.state_dim) + " columns");
  if (b.obs_index.size() != rows * k || b.actions.size() != rows * k)
    throw ShapeError("joint batch needs one observation index and one action per agent per row");
  for (std::size_t i = 0; i < rows * k; ++i) {
    if (b.obs_index[i] >= b.observations.rows()) throw ShapeError("joint batch observation index out of range");
    if (b.actions[i] >= c.n_actions) throw DomainError("joint batch action out of range");
  }
}

}  // namespace

JointForward FactorizedModel::forward(Graph& g, Params ap, Params mp, const JointBatch& batch,
                                      std::span<const double> levels) const {
  check_batch(config_, batch);
  const std::size_t rows = batch.rows(), k = config_.n_agents, a_count = config_.n_actions;
  const std::size_t units = batch.observations.rows();
  const HeadKind head = agent_.config().head;
  Var obs = g.constant(batch.observations);
  JointForward out;

  std::vector<std::size_t> chosen_idx(rows * k);
  for (std::size_t i = 0; i < rows * k; ++i) chosen_idx[i] = batch.obs_index[i] * a_count + batch.actions[i];

  if (head == HeadKind::Expected) {
    out.agent_values = agent_.expected_values(g, ap, obs);
  } else if (head == HeadKind::Quantile) {
    const std::size_t n = levels.size();
    if (n == 0) throw ShapeError("quantile heads need at least one level");
    Var qv = agent_.quantile_values(g, ap, obs, levels);  // [(U*N) x A]
    std::vector<std::size_t> by_action(units * a_count * n);
    for (std::size_t u = 0; u < units; ++u)
      for (std::size_t a = 0; a < a_count; ++a)
        for (std::size_t i = 0; i < n; ++i) by_action[(u * a_count + a) * n + i] = (u * n + i) * a_count + a;
    Var curves = diff::take(qv, std::move(by_action), Shape{units * a_count, n});  // row u * A + a
    out.agent_values = diff::reshape(diff::mean_rows(curves), Shape{units, a_count});
    std::vector<std::size_t> rows_idx(rows * k * n);
    for (std::size_t j = 0; j < rows * k; ++j)
      for (std::size_t i = 0; i < n; ++i) rows_idx[j * n + i] = chosen_idx[j] * n + i;
    out.agent_dists = diff::take(curves, std::move(rows_idx), Shape{rows * k, n});
  } else {
    const std::size_t n = config_.support.n;
    Var probs = agent_.categorical_probs(g, ap, obs);  // [(U*A) x n]
    Tensor z(Shape{n, 1});
    for (std::size_t i = 0; i < n; ++i) z[i] = config_.support.atom(i);
    out.agent_values = diff::reshape(diff::matmul(probs, g.constant(std::move(z))), Shape{units, a_count});
    std::vector<std::size_t> rows_idx(rows * k * n);
    for (std::size_t j = 0; j < rows * k; ++j)
      for (std::size_t i = 0; i < n; ++i) rows_idx[j * n + i] = chosen_idx[j] * n + i;
    out.agent_dists = diff::take(probs, std::move(rows_idx), Shape{rows * k, n});
  }

  out.agent_chosen = diff::take(out.agent_values, chosen_idx, Shape{rows, k});
  Var best_unit = diff::max_rows(out.agent_values);  // [U]
  Var best = diff::take(best_unit, batch.obs_index, Shape{rows, k});
  out.q_jt = mixer_.mix(g, mp, out.agent_chosen, best, batch.states, batch.actions);

  if (head == HeadKind::Quantile) {
    const std::size_t n = levels.size();
    Var centred = out.agent_dists - diff::repeat_cols(diff::reshape(out.agent_chosen, Shape{rows * k}), n);
    std::vector<std::size_t> regroup(rows * n * k);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < k; ++a) regroup[(r * n + i) * k + a] = (r * k + a) * n + i;
    Var shape = diff::reshape(diff::sum_rows(diff::take(centred, std::move(regroup), Shape{rows * n, k})), Shape{rows, n});
    out.joint = diff::repeat_cols(out.q_jt, n) + shape;
    out.has_joint = true;
  } else if (head == HeadKind::Categorical) {
    const std::size_t n = config_.support.n;
    auto agent_rows = [&](std::size_t a) {
      std::vector<std::size_t> idx(rows * n);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < n; ++i) idx[r * n + i] = (r * k + a) * n + i;
      return diff::take(out.agent_dists, std::move(idx), Shape{rows, n});
    };
    Var mass = agent_rows(0);
    for (std::size_t a = 1; a < k; ++a) mass = dist::convolve_rows(mass, agent_rows(a));
    const std::size_t width = mass.value().cols();
    Tensor base(Shape{rows, width});
    const double delta = config_.support.delta();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t i = 0; i < width; ++i)
        base.at(r, i) = static_cast<double>(k) * config_.support.vmin + static_cast<double>(i) * delta;
    Var offset = out.q_jt - diff::sum_rows(out.agent_chosen);
    Var positions = g.constant(std::move(base)) + diff::repeat_cols(offset, width);
    out.joint = dist::project_rows(mass, positions, config_.support, &out.clipped);
    out.has_joint = true;
  }
  return out;
}

std::vector<JointEstimate> FactorizedModel::evaluate(const JointBatch& batch, std::span<const double> levels) const {
  Graph g;
  JointForward f = forward(g, agent_.params(), mixer_.params(), batch, levels);
  const std::size_t rows = batch.rows(), k = config_.n_agents;
  const HeadKind head = agent_.config().head;
  std::vector<JointEstimate> out(rows);
  const std::vector<double> atoms = config_.support.atoms();
  for (std::size_t r = 0; r < rows; ++r) {
    JointEstimate& e = out[r];
    e.q_jt = f.q_jt.value()[r];
    e.expectation = e.q_jt;
    e.clipped = f.clipped;
    for (std::size_t a = 0; a < k; ++a) e.agent_q.push_back(f.agent_chosen.value().at(r, a));
    if (head == HeadKind::Quantile) {
      const Tensor& j = f.joint.value();
      const std::size_t n = j.cols();
      dist::QuantileBatch qb{{levels.begin(), levels.end()}, std::vector<double>(n)};
      for (std::size_t i = 0; i < n; ++i) qb.values[i] = j.at(r, i);
      e.expectation = dist::expectation(qb);
      e.quantiles = std::move(qb);
      for (std::size_t a = 0; a < k; ++a) {
        dist::QuantileBatch c{{levels.begin(), levels.end()}, std::vector<double>(n)};
        for (std::size_t i = 0; i < n; ++i) c.values[i] = f.agent_dists.value().at(r * k + a, i);
        e.agent_curves.push_back(std::move(c));
      }
    } else if (head == HeadKind::Categorical) {
      const Tensor& j = f.joint.value();
      dist::CategoricalDist d{atoms, std::vector<double>(atoms.size())};
      for (std::size_t i = 0; i < atoms.size(); ++i) d.probs[i] = j.at(r, i);
      e.expectation = dist::expectation(d);
      e.pmf = std::move(d);
      for (std::size_t a = 0; a < k; ++a) {
        dist::CategoricalDist c{atoms, std::vector<double>(atoms.size())};
        for (std::size_t i = 0; i < atoms.size(); ++i) c.probs[i] = f.agent_dists.value().at(r * k + a, i);
        e.agent_pmfs.push_back(std::move(c));
      }
    }
  }
  return out;
}

Tensor FactorizedModel::action_values(const Tensor& observations, std::span<const double> levels) const {
  Graph g;
  Var obs = g.constant(observations);
  const std::size_t units = observations.rows(), a_count = config_.n_actions;
  switch (agent_.config().head) {
    case HeadKind::Expected:
      return agent_.expected_values(g, agent_.params(), obs).value();
    case HeadKind::Quantile: {
      const Tensor& qv = agent_.quantile_values(g, agent_.params(), obs, levels).value();
      const std::size_t n = levels.size();
      Tensor out(Shape{units, a_count});
      for (std::size_t u = 0; u < units; ++u)
        for (std::size_t a = 0; a < a_count; ++a) {
          double s = 0.0;
          for (std::size_t i = 0; i < n; ++i) s += qv.at(u * n + i, a);
          out.at(u, a) = s / static_cast<double>(n);
        }
      return out;
    }
    case HeadKind::Categorical: {
      const Tensor& p = agent_.categorical_probs(g, agent_.params(), obs).value();
      Tensor out(Shape{units, a_count});
      for (std::size_t u = 0; u < units; ++u)
        for (std::size_t a = 0; a < a_count; ++a) {
          double s = 0.0;
          for (std::size_t i = 0; i < config_.support.n; ++i) s += p.at(u * a_count + a, i) * config_.support.atom(i);
          out.at(u, a) = s;
        }
      return out;
    }
  }
  return {};
}

nlohmann::json FactorizedModel::params_json() const {
  nlohmann::json j = nlohmann::json::object();
  const nlohmann::json agent = diff::params_to_json(agent_.params());
  const nlohmann::json mixer = diff::params_to_json(mixer_.params());
  for (const auto& [name, v] : agent.items()) j["agent." + name] = v;
  for (const auto& [name, v] : mixer.items()) j["mixer." + name] = v;
  return j;
}

void FactorizedModel::load_params_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("params must be a JSON object");
  const std::size_t expected = agent_.params().size() + mixer_.params().size();
  if (j.size() != expected)
    throw FormatError("checkpoint has " + std::to_string(j.size()) + " parameters, model expects " +
                      std::to_string(expected));
  diff::params_from_json(j, agent_.params(), "agent.");
  diff::params_from_json(j, mixer_.params(), "mixer.");
}

}  // namespace dfac::mixers
