#include "dfac/cli/verify.hpp"

#include <cmath>
#include <sstream>

#include "dfac/agents/agent.hpp"
#include "dfac/diff/gradcheck.hpp"
#include "dfac/diff/nn.hpp"
#include "dfac/diff/ops.hpp"
#include "dfac/dist/graph_ops.hpp"
#include "dfac/mixers/mix.hpp"
#include "dfac/mixers/model.hpp"
#include "dfac/training/losses.hpp"

namespace dfac::cli {

using diff::Graph;
using diff::Shape;
using diff::Tensor;
using diff::Var;

namespace {

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Tensor t(Shape{r, c});
  for (double& v : t.values()) v = scale * (2.0 * rng.uniform() - 1.0);
  return t;
}

CheckResult grad_case(const std::string& name, std::span<diff::Parameter* const> params,
                      const std::function<Var(Graph&)>& loss) {
  const auto r = diff::gradient_check(params, loss);
  return {name, r.passed, "max relative error " + fmt(r.max_rel_error) + ", max absolute error " + fmt(r.max_abs_error) + " over " + std::to_string(r.checked) + " entries"};
}

void gradient_checks(std::vector<CheckResult>& out, Rng& rng) {
  for (int i = 0; i < 12; ++i) {
    diff::ParameterSet set;
    auto mlp = diff::Mlp::create(set, "mlp", 3, {16, 4}, false, rng);
    Tensor x = random_matrix(5, 3, rng);
    auto params = set.all();
    out.push_back(grad_case("gradient/mlp/" + std::to_string(i), params, [&](Graph& g) {
      return diff::sum(diff::elu(mlp(g, set, g.constant(x))));
    }));
  }
  for (int i = 0; i < 12; ++i) {
    agents::AgentConfig c;
    c.obs_dim = 3;
    c.n_actions = 3;
    c.hidden = {8, 6};
    c.head = agents::HeadKind::Quantile;
    c.cos_features = 4;
    c.embed_hidden = {5};
    c.torso_relu_output = false;
    agents::AgentNetwork net(c, rng);
    Tensor x = random_matrix(2, 3, rng);
    std::vector<double> levels{rng.uniform(), rng.uniform(), rng.uniform()};
    Tensor w = random_matrix(6, 3, rng);
    auto params = net.params().all();
    out.push_back(grad_case("gradient/iqn_head/" + std::to_string(i), params, [&](Graph& g) {
      Var q = net.quantile_values(g, net.params(), g.constant(x), levels);
      return diff::sum(q * g.constant(w));
    }));
  }
  for (int i = 0; i < 13; ++i) {
    agents::AgentConfig c;
    c.obs_dim = 3;
    c.n_actions = 2;
    c.hidden = {6};
    c.head = agents::HeadKind::Categorical;
    c.support = {-2.0, 2.0, 5};
    agents::AgentNetwork net(c, rng);
    Tensor x = random_matrix(2, 3, rng);
    std::vector<std::vector<double>> targets{{0.1, 0.2, 0.3, 0.2, 0.2}, {0.0, 0.5, 0.5, 0.0, 0.0}};
    std::vector<std::size_t> rows{0, 3};
    auto params = net.params().all();
    out.push_back(grad_case("gradient/c51_head/" + std::to_string(i), params, [&](Graph& g) {
      return training::categorical_kl_batch(net.categorical_probs(g, net.params(), g.constant(x)), rows, targets);
    }));
  }
  for (int rep = 0; rep < 7; ++rep) {
    for (mixers::Method m : mixers::kAllMethods) {
      mixers::ModelConfig mc;
      mc.method = m;
      mc.agent_hidden = {4};
      mc.cos_features = 3;
      mc.embed_hidden = {};
      mc.support = {-4.0, 4.0, 9};
      mc.mixer_embed = 3;
      mc.attention_heads = 2;
      mc.attention_hidden = 4;
      mixers::FactorizedModel model(mc, rng);
      mixers::JointBatch b;
      b.observations = random_matrix(2, 3, rng);
      b.states = random_matrix(3, 1, rng);
      b.obs_index = {0, 1, 0, 1, 0, 1};
      b.actions = {rng.uniform_index(3), rng.uniform_index(3), rng.uniform_index(3),
                   rng.uniform_index(3), rng.uniform_index(3), rng.uniform_index(3)};
      std::vector<double> levels{rng.uniform_open(), rng.uniform_open()};
      std::vector<std::size_t> rows{0, 1, 2, 1};
      std::vector<double> y(4);
      for (double& v : y) v = 4.0 * rng.uniform() - 2.0;
      auto params = model.parameters();
      const auto head = mixers::head_of(m);
      out.push_back(grad_case("gradient/model/" + mixers::method_id(m) + "/" + std::to_string(rep), params,
                              [&](Graph& g) {
        auto f = model.forward(g, model.agent().params(), model.mixer().params(), b, levels);
        if (head == agents::HeadKind::Expected) return training::squared_td_loss(f.q_jt, rows, y);
        if (head == agents::HeadKind::Quantile)
          return training::quantile_huber_batch(f.joint, levels, rows, {{y[0], y[1]}, {y[2]}, {y[3], 0.1}, {-3.0}},
                                                1.0);
        std::vector<double> t(9, 0.0);
        t[3] = 0.6;
        t[6] = 0.4;
        return training::categorical_kl_batch(f.joint, rows, {t, t, t, t});
      }));
    }
  }
}

}  // namespace

std::vector<CheckResult> run_verify(std::uint64_t seed) {
  std::vector<CheckResult> out;
  Rng rng = Rng(seed).derive("verify");

  gradient_checks(out, rng);

  {
    double worst = 0.0;
    for (int c = 0; c < 100; ++c) {
      const std::size_t n = 2 + rng.uniform_index(511), k = 1 + rng.uniform_index(8);
      std::vector<dist::CategoricalDist> ds;
      const dist::UniformSupport s{-10.0, 10.0, n};
      for (std::size_t i = 0; i < k; ++i) {
        dist::CategoricalDist d{s.atoms(), std::vector<double>(n)};
        double total = 0.0;
        for (double& p : d.probs) total += (p = rng.uniform());
        for (double& p : d.probs) p /= total;
        ds.push_back(std::move(d));
      }
      const auto a = dist::convolve_many_projected(ds, false);
      const auto b = dist::convolve_many_projected(ds, true);
      for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::fabs(a.probs[i] - b.probs[i]));
    }
    out.push_back({"convolution/fft_matches_direct", worst <= 1e-9, "max atom difference " + fmt(worst)});
  }
  {
    const dist::CategoricalDist coin{{0.0, 1.0}, {0.5, 0.5}};
    const auto r = dist::convolve_pmf(coin, coin);
    const bool ok = r.atoms == std::vector<double>{0, 1, 2} && r.probs == std::vector<double>{0.25, 0.5, 0.25};
    out.push_back({"convolution/coin_sum", ok, "{0:.5,1:.5} * itself"});
  }
  {
    const dist::UniformSupport s{-20.0, 20.0, 41};
    const double at1[] = {2.5}, at2[] = {3.0}, at3[] = {25.0}, one[] = {1.0};
    const auto a = dist::project_categorical(at1, one, s);
    const auto b = dist::project_categorical(at2, one, s);
    const auto c = dist::project_categorical(at3, one, s);
    const bool ok = std::fabs(a.probs[22] - 0.5) < 1e-12 && std::fabs(a.probs[23] - 0.5) < 1e-12 &&
                    std::fabs(b.probs[23] - 1.0) < 1e-12 && std::fabs(c.probs[40] - 1.0) < 1e-12;
    out.push_back({"projection/hand_cases", ok, "split at 2.5, exact atom 3, clip 25 to 20"});
  }
  {
    const double p[] = {0.0}, l[] = {0.5}, t1[] = {1.0}, t2[] = {-2.0};
    const double a = training::quantile_huber_loss(p, l, t1, 1.0);
    const double b = training::quantile_huber_loss(p, l, t2, 1.0);
    out.push_back({"loss/quantile_huber_hand_cases", std::fabs(a - 0.25) < 1e-12 && std::fabs(b - 0.75) < 1e-12,
                   "delta=1 -> " + fmt(a) + ", delta=-2 -> " + fmt(b)});
  }
  {
    // single agent, utilities are the expectations of the action distributions,
    // joint value E[exp Z]
    const dist::CategoricalDist safe = dist::CategoricalDist::dirac(2.0);
    const dist::CategoricalDist risky{{0.0, 3.0}, {0.5, 0.5}};
    auto exp_mean = [](const dist::CategoricalDist& d) {
      double s = 0.0;
      for (std::size_t i = 0; i < d.size(); ++i) s += d.probs[i] * std::exp(d.atoms[i]);
      return s;
    };
    const double e_safe = exp_mean(safe), e_risky = exp_mean(risky);
    const auto verdict = mixers::check_digm({{dist::expectation(safe), dist::expectation(risky)}},
                                            [&](std::span<const std::size_t> u) { return u[0] == 0 ? e_safe : e_risky; });
    const bool ok = std::fabs(e_safe - 7.389) < 1e-3 && std::fabs(e_risky - 10.543) < 1e-3 && !verdict.holds;
    out.push_back({"digm/exp_mixer_counterexample", ok,
                   "E[exp Z]: " + fmt(e_safe) + " vs " + fmt(e_risky) + ", DIGM " + (verdict.holds ? "holds" : "violated")});
  }
  {
    bool ok = true;
    for (int c = 0; c < 100 && ok; ++c) {
      std::vector<std::vector<double>> q(2, std::vector<double>(3));
      for (auto& row : q)
        for (double& v : row) v = 10.0 * rng.uniform() - 5.0;
      ok = mixers::check_digm(q, [&](std::span<const std::size_t> u) { return q[0][u[0]] + q[1][u[1]]; }).holds;
    }
    out.push_back({"digm/additive_mixer", ok, "100 random utility tables"});
  }
  {
    double worst = 0.0;
    for (int c = 0; c < 1000; ++c) {
      const std::size_t k = 1 + rng.uniform_index(4), n = 1 + rng.uniform_index(16);
      const auto levels = dist::midpoint_levels(n);
      std::vector<dist::QuantileBatch> z;
      std::vector<double> q;
      for (std::size_t a = 0; a < k; ++a) {
        dist::QuantileBatch b{levels, {}};
        for (std::size_t i = 0; i < n; ++i) b.values.push_back(40.0 * rng.uniform() - 20.0);
        q.push_back(dist::expectation(b));
        z.push_back(std::move(b));
      }
      worst = std::max(worst, std::fabs(dist::expectation(mixers::shape_sum(z, q))));
    }
    out.push_back({"dfac/shape_sum_zero_mean", worst < 1e-12, "largest |mean| " + fmt(worst)});
  }
  {
    const dist::CategoricalDist c{{-1.5, 1.5}, {0.5, 0.5}};
    const std::vector<dist::CategoricalDist> cs{c, c};
    const dist::UniformSupport s{0.0, 12.0, 13};
    const auto r = mixers::dfac_mix_c51(6.0, cs, s, false);
    const bool ok = std::fabs(r.joint.probs[3] - 0.25) < 1e-12 && std::fabs(r.joint.probs[6] - 0.5) < 1e-12 &&
                    std::fabs(r.joint.probs[9] - 0.25) < 1e-12;
    out.push_back({"dfac/c51_centred_convolution", ok, "two centred coins shifted to 6"});
  }
  return out;
}

nlohmann::json verify_json(const std::vector<CheckResult>& results) {
  nlohmann::json checks = nlohmann::json::array();
  std::size_t failed = 0;
  for (const auto& r : results) {
    checks.push_back({{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}});
    failed += r.passed ? 0 : 1;
  }
  return {{"passed", failed == 0}, {"failed", failed}, {"total", results.size()}, {"checks", checks}};
}

}  // namespace dfac::cli
