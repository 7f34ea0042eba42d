#include "dfac/mixers/mix.hpp"

#include <cmath>
#include <string>

#include "dfac/agents/agent.hpp"
#include "dfac/diff/ops.hpp"
#include "dfac/error.hpp"

namespace dfac::mixers {

using diff::Graph;
using diff::Tensor;
using diff::Var;

double mix_vdn(std::span<const double> q) {
  if (q.empty()) throw ShapeError("mix_vdn needs at least one utility");
  double s = 0.0;
  for (double v : q) s += v;
  return s;
}

double mix_qmix(std::span<const double> q, std::span<const double> state, const Mixer& mixer) {
  Graph g;
  Var chosen = g.constant(Tensor::matrix(1, q.size(), {q.begin(), q.end()}));
  Tensor s = Tensor::matrix(1, state.size(), {state.begin(), state.end()});
  return mixer.mix(g, mixer.params(), chosen, chosen, s, {}).value()[0];
}

double mix_qplex(const std::vector<std::vector<double>>& q_tables, std::span<const std::size_t> actions,
                 std::span<const double> state, const Mixer& mixer) {
  if (q_tables.size() != actions.size()) throw ShapeError("mix_qplex needs one action per agent");
  std::vector<double> chosen, best;
  for (std::size_t k = 0; k < q_tables.size(); ++k) {
    if (actions[k] >= q_tables[k].size()) throw DomainError("mix_qplex: action out of range");
    chosen.push_back(q_tables[k][actions[k]]);
    best.push_back(q_tables[k][agents::greedy_action(q_tables[k])]);
  }
  Graph g;
  const std::size_t k = chosen.size();
  Var c = g.constant(Tensor::matrix(1, k, chosen));
  Var b = g.constant(Tensor::matrix(1, k, best));
  Tensor s = Tensor::matrix(1, state.size(), {state.begin(), state.end()});
  return mixer.mix(g, mixer.params(), c, b, s, actions).value()[0];
}

dist::QuantileBatch shape_sum(std::span<const dist::QuantileBatch> z, std::span<const double> q) {
  if (z.empty() || z.size() != q.size()) throw ShapeError("shape_sum needs one mean per agent curve");
  dist::QuantileBatch out{z[0].levels, std::vector<double>(z[0].values.size(), 0.0)};
  for (std::size_t k = 0; k < z.size(); ++k) {
    if (z[k].levels != z[0].levels || z[k].values.size() != out.values.size())
      throw ShapeError("shape_sum: agent " + std::to_string(k) + " uses different levels");
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += z[k].values[i] - q[k];
  }
  return out;
}

dist::QuantileBatch dfac_mix(double psi, const dist::QuantileBatch& phi) {
  const double m = dist::expectation(phi);
  if (std::fabs(m) > 1e-6) throw DomainError("shape function has mean " + std::to_string(m) + ", expected 0");
  return dist::shifted(phi, psi);
}

namespace {

bool on_lattice(const dist::CategoricalDist& d, double delta) {
  if (d.size() < 2) return true;
  for (std::size_t i = 1; i < d.size(); ++i)
    if (std::fabs(d.atoms[i] - d.atoms[0] - static_cast<double>(i) * delta) > 1e-9 * std::max(1.0, delta)) return false;
  return true;
}

}  // namespace

C51Mix dfac_mix_c51(double psi, std::span<const dist::CategoricalDist> centered, const dist::UniformSupport& support,
                    bool use_fft) {
  if (centered.empty()) throw ShapeError("dfac_mix_c51 needs at least one agent distribution");
  const double delta = support.delta();
  bool lattice = delta > 0.0;
  for (const auto& d : centered) {
    d.validate();
    lattice = lattice && on_lattice(d, delta);
  }
  std::vector<double> atoms, probs;
  if (lattice) {
    double offset = 0.0;
    std::vector<double> mass;
    for (std::size_t k = 0; k < centered.size(); ++k) {
      offset += centered[k].atoms[0];
      if (k == 0)
        mass = centered[k].probs;
      else
        mass = use_fft ? dist::convolve_fft(mass, centered[k].probs) : dist::convolve_direct(mass, centered[k].probs);
    }
    probs = std::move(mass);
    atoms.resize(probs.size());
    for (std::size_t i = 0; i < atoms.size(); ++i) atoms[i] = offset + static_cast<double>(i) * delta + psi;
  } else {
    dist::CategoricalDist acc = centered[0];
    for (std::size_t k = 1; k < centered.size(); ++k) acc = dist::convolve_pmf(acc, centered[k]);
    atoms = std::move(acc.atoms);
    probs = std::move(acc.probs);
    for (double& a : atoms) a += psi;
  }
  C51Mix out;
  out.joint = dist::project_categorical(atoms, probs, support, &out.clipped);
  return out;
}

std::vector<std::vector<std::size_t>> enumerate_joint_actions(std::span<const std::size_t> action_counts) {
  std::vector<std::vector<std::size_t>> out;
  if (action_counts.empty()) return out;
  for (std::size_t c : action_counts)
    if (c == 0) throw ShapeError("every agent needs at least one action");
  std::vector<std::size_t> u(action_counts.size(), 0);
  while (true) {
    out.push_back(u);
    std::size_t k = u.size();
    while (k > 0) {
      --k;
      if (++u[k] < action_counts[k]) break;
      u[k] = 0;
      if (k == 0) return out;
    }
  }
}

DigmVerdict check_digm(const std::vector<std::vector<double>>& agent_q,
                       const std::function<double(std::span<const std::size_t>)>& joint_expectation) {
  DigmVerdict v;
  std::vector<std::size_t> counts;
  for (const auto& q : agent_q) {
    counts.push_back(q.size());
    v.agent_argmax.push_back(agents::greedy_action(q));
  }
  bool first = true;
  for (const auto& u : enumerate_joint_actions(counts)) {
    const double e = joint_expectation(u);
    if (!std::isfinite(e)) throw DomainError("check_digm: non-finite joint expectation");
    if (first || e > v.joint_best) {
      v.joint_best = e;
      v.joint_argmax = u;
      first = false;
    }
    if (u == v.agent_argmax) v.joint_at_agent_argmax = e;
  }
  v.holds = v.joint_argmax == v.agent_argmax;
  return v;
}

}  // namespace dfac::mixers
