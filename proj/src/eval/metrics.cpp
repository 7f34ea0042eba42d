#include "dfac/eval/metrics.hpp"

#include <cmath>

#include "dfac/agents/agent.hpp"
#include "dfac/error.hpp"

namespace dfac::eval {

using diff::Shape;
using diff::Tensor;

double qdist_from(const std::vector<double>& model_means, const envs::GroundTruth& truth) {
  if (model_means.size() != truth.q.size()) throw ShapeError("qdist needs one model value per joint action");
  double s = 0.0;
  for (std::size_t i = 0; i < model_means.size(); ++i) s += std::fabs(model_means[i] - truth.q[i]);
  return s / static_cast<double>(model_means.size());
}

double wdist_from(const std::vector<dist::QuantileFn>& model_curves, const envs::GroundTruth& truth, std::size_t grid) {
  if (model_curves.size() != truth.z.size()) throw ShapeError("wdist needs one model curve per joint action");
  double s = 0.0;
  for (std::size_t i = 0; i < model_curves.size(); ++i)
    s += dist::wasserstein(model_curves[i], dist::quantile_fn(truth.z[i]), 1.0, grid);
  return s / static_cast<double>(model_curves.size());
}

double return_from(const std::vector<std::size_t>& greedy, const envs::MatrixGameSpec& spec) {
  return spec.payoff_at(greedy).mean;
}

mixers::JointBatch all_joint_actions(const envs::MatrixGameSpec& spec) {
  const auto obs = envs::reset(spec);
  const auto st = envs::state(spec);
  const std::size_t k = spec.agents, rows = spec.joint_count();
  mixers::JointBatch b;
  b.observations = Tensor(Shape{k, spec.obs_dim()});
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t c = 0; c < spec.obs_dim(); ++c) b.observations.at(a, c) = obs[a][c];
  b.states = Tensor(Shape{rows, st.size()});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < st.size(); ++c) b.states.at(r, c) = st[c];
    const auto u = spec.joint_action(r);
    for (std::size_t a = 0; a < k; ++a) {
      b.obs_index.push_back(a);
      b.actions.push_back(u[a]);
    }
  }
  return b;
}

std::vector<std::vector<double>> agent_action_values(const mixers::FactorizedModel& model,
                                                     const envs::MatrixGameSpec& spec, std::size_t levels) {
  const mixers::JointBatch b = all_joint_actions(spec);
  const auto lv = dist::midpoint_levels(levels);
  const Tensor v = model.action_values(b.observations, lv);
  std::vector<std::vector<double>> out(spec.agents);
  for (std::size_t k = 0; k < spec.agents; ++k)
    for (std::size_t a = 0; a < v.cols(); ++a) out[k].push_back(v.at(k, a));
  return out;
}

std::vector<std::size_t> greedy_joint_action(const mixers::FactorizedModel& model, const envs::MatrixGameSpec& spec,
                                             std::size_t levels) {
  std::vector<std::size_t> u;
  for (const auto& q : agent_action_values(model, spec, levels)) u.push_back(agents::greedy_action(q));
  return u;
}

namespace {

struct JointCurves {
  std::vector<double> means;
  std::vector<dist::QuantileFn> curves;
  std::vector<mixers::JointEstimate> estimates;
};

JointCurves joint_curves(const mixers::FactorizedModel& model, const envs::MatrixGameSpec& spec, std::size_t grid) {
  const auto levels = dist::midpoint_levels(grid);
  JointCurves out;
  out.estimates = model.evaluate(all_joint_actions(spec), levels);
  for (const auto& e : out.estimates) {
    out.means.push_back(e.expectation);
    if (e.quantiles)
      out.curves.push_back(dist::quantile_fn(*e.quantiles));
    else if (e.pmf)
      out.curves.push_back(dist::quantile_fn(*e.pmf));
    else
      out.curves.push_back(dist::quantile_fn(dist::CategoricalDist::dirac(e.q_jt)));
  }
  return out;
}

}  // namespace

double metric_qdist(const mixers::FactorizedModel& model, const envs::MatrixGameSpec& spec, std::size_t grid) {
  return qdist_from(joint_curves(model, spec, grid).means, envs::ground_truth(spec));
}

double metric_wdist(const mixers::FactorizedModel& model, const envs::MatrixGameSpec& spec, std::size_t grid) {
  return wdist_from(joint_curves(model, spec, grid).curves, envs::ground_truth(spec), grid);
}

double metric_return(const mixers::FactorizedModel& model, const envs::MatrixGameSpec& spec, std::size_t levels) {
  return return_from(greedy_joint_action(model, spec, levels), spec);
}

MetricsReport evaluate_metrics(const mixers::FactorizedModel& model, const envs::MatrixGameSpec& spec,
                               const EvalOptions& options) {
  const envs::GroundTruth truth = envs::ground_truth(spec);
  const JointCurves jc = joint_curves(model, spec, options.grid);
  MetricsReport r;
  r.qdist = qdist_from(jc.means, truth);
  double wsum = 0.0;
  for (std::size_t i = 0; i < spec.joint_count(); ++i) {
    CellDetail d;
    d.action = spec.joint_action(i);
    d.label = spec.joint_label(d.action);
    d.mu = truth.z[i].mean;
    d.sigma = truth.z[i].std;
    d.q_model = jc.means[i];
    d.psi = jc.estimates[i].q_jt;
    d.clipped = jc.estimates[i].clipped;
    d.w1 = dist::wasserstein(jc.curves[i], dist::quantile_fn(truth.z[i]), 1.0, options.grid);
    wsum += d.w1;
    if (d.action == truth.optimal) r.wdist_optimal = d.w1;
    r.detail.push_back(std::move(d));
  }
  r.wdist = wsum / static_cast<double>(spec.joint_count());
  r.greedy = greedy_joint_action(model, spec, options.greedy_levels);
  r.ret = return_from(r.greedy, spec);
  return r;
}

mixers::DigmVerdict audit_digm(const mixers::FactorizedModel& model, const envs::MatrixGameSpec& spec,
                               std::size_t levels) {
  const auto lv = dist::midpoint_levels(levels);
  const auto estimates = model.evaluate(all_joint_actions(spec), lv);
  const auto agent_q = agent_action_values(model, spec, levels);
  return mixers::check_digm(agent_q, [&](std::span<const std::size_t> u) {
    return estimates[spec.joint_index(u)].expectation;
  });
}

nlohmann::json export_factorization(const mixers::FactorizedModel& model, const envs::MatrixGameSpec& spec,
                                    const std::vector<std::size_t>& joint, std::size_t grid) {
  const std::size_t idx = spec.joint_index(joint);
  const auto levels = dist::midpoint_levels(grid);
  mixers::JointBatch all = all_joint_actions(spec);
  mixers::JointBatch one;
  one.observations = all.observations;
  one.states = Tensor(Shape{1, all.states.cols()});
  for (std::size_t c = 0; c < all.states.cols(); ++c) one.states.at(0, c) = all.states.at(idx, c);
  for (std::size_t k = 0; k < spec.agents; ++k) {
    one.obs_index.push_back(all.obs_index[idx * spec.agents + k]);
    one.actions.push_back(joint[k]);
  }
  const mixers::JointEstimate e = model.evaluate(one, levels).front();
  const dist::NormalSpec& truth = spec.payoff[idx];

  auto curve = [&](const dist::QuantileFn& f) {
    std::vector<double> v;
    v.reserve(grid);
    for (double l : levels) v.push_back(f(l));
    return v;
  };
  std::vector<double> z_jt;
  std::vector<std::vector<double>> z_k;
  if (e.quantiles) {
    z_jt = e.quantiles->values;
    for (const auto& c : e.agent_curves) z_k.push_back(c.values);
  } else if (e.pmf) {
    z_jt = curve(dist::quantile_fn(*e.pmf));
    for (const auto& c : e.agent_pmfs) z_k.push_back(curve(dist::quantile_fn(c)));
  } else {
    z_jt.assign(grid, e.q_jt);
    for (double q : e.agent_q) z_k.emplace_back(grid, q);
  }
  std::vector<std::string> names;
  for (std::size_t k = 0; k < spec.agents; ++k) names.push_back(spec.actions[k][joint[k]]);
  return {{"method", mixers::method_id(model.config().method)},
          {"joint_action", names},
          {"label", spec.joint_label(joint)},
          {"grid_size", grid},
          {"levels", levels},
          {"truth", {{"mean", truth.mean}, {"std", truth.std}}},
          {"Z_GT", curve(dist::quantile_fn(truth))},
          {"Z_jt", z_jt},
          {"Z_k", z_k},
          {"Q_jt", e.q_jt},
          {"E_Z_jt", e.expectation},
          {"agent_q", e.agent_q},
          {"clipped", e.clipped}};
}

nlohmann::json to_json(const MetricsReport& report, const envs::MatrixGameSpec& spec) {
  nlohmann::json detail = nlohmann::json::array();
  for (const auto& d : report.detail)
    detail.push_back({{"action", d.label},
                      {"mu", d.mu},
                      {"sigma", d.sigma},
                      {"expected", d.q_model},
                      {"psi", d.psi},
                      {"w1", d.w1},
                      {"clipped", d.clipped}});
  return {{"qdist", report.qdist},
          {"wdist", report.wdist},
          {"wdist_optimal", report.wdist_optimal},
          {"return", report.ret},
          {"greedy", spec.joint_label(report.greedy)},
          {"detail", detail}};
}

}  // namespace dfac::eval
