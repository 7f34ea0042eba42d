#include <cmath>

#include "dfac/diff/ops.hpp"
#include "dfac/error.hpp"
#include "dfac/mixers/mix.hpp"
#include "dfac/mixers/model.hpp"
#include "doctest.h"

using namespace dfac;
using namespace dfac::mixers;

namespace {

MixerConfig monotonic(std::size_t embed) {
  MixerConfig c;
  c.kind = Factorization::Monotonic;
  c.embed = embed;
  return c;
}

MixerConfig dueling() {
  MixerConfig c;
  c.kind = Factorization::Dueling;
  c.embed = 4;
  c.attention_heads = 3;
  c.attention_hidden = 8;
  return c;
}

void fill(Mixer& m, const std::string& name, double v) {
  auto* p = m.params().find(name);
  REQUIRE(p != nullptr);
  p->value().fill(v);
}

std::vector<std::vector<double>> random_tables(Rng& rng) {
  std::vector<std::vector<double>> q(2, std::vector<double>(3));
  for (auto& row : q)
    for (double& v : row) v = 10.0 * rng.uniform() - 5.0;
  return q;
}

}  // namespace

TEST_CASE("method ids round trip") {
  for (Method m : kAllMethods) CHECK(parse_method(method_id(m)) == m);
  CHECK(parse_method("dplex-c51") == Method::DplexC51);
  CHECK_THROWS_AS(parse_method("iql"), DomainError);
}

TEST_CASE("mix_vdn") {
  const double a[] = {1, 2}, z[] = {0, 0, 0}, b[] = {1.5, -0.5, 2};
  CHECK(mix_vdn(a) == 3.0);
  CHECK(mix_vdn(z) == 0.0);
  CHECK(mix_vdn(b) == 3.0);
}

TEST_CASE("qmix with unit weights and zero biases reduces to the sum") {
  Rng rng(1);
  MixerConfig c = monotonic(1);
  c.elu_hidden = false;
  Mixer m(c, rng);
  fill(m, "hyper_w1.weight", 0.0);
  fill(m, "hyper_w1.bias", 1.0);
  fill(m, "hyper_b1.weight", 0.0);
  fill(m, "hyper_b1.bias", 0.0);
  fill(m, "hyper_w2.weight", 0.0);
  fill(m, "hyper_w2.bias", 1.0);
  for (const char* n : {"hyper_b2.0.weight", "hyper_b2.0.bias", "hyper_b2.1.weight", "hyper_b2.1.bias"}) fill(m, n, 0.0);
  const double q[] = {1.25, -3.5}, s[] = {1.0};
  CHECK(mix_qmix(q, s, m) == doctest::Approx(-2.25).epsilon(1e-12));
}

TEST_CASE("qmix with zero weights returns the state bias") {
  Rng rng(2);
  Mixer m(monotonic(8), rng);
  for (const char* n : {"hyper_w1.weight", "hyper_w1.bias", "hyper_w2.weight", "hyper_w2.bias"}) fill(m, n, 0.0);
  const double s[] = {1.0}, q1[] = {3, 4}, q2[] = {-10, 7};
  CHECK(mix_qmix(q1, s, m) == mix_qmix(q2, s, m));
}

TEST_CASE("qmix is monotonic in every utility") {
  Rng rng(3);
  for (int t = 0; t < 1000; ++t) {
    Mixer m(monotonic(4), rng);
    double q[] = {6 * rng.uniform() - 3, 6 * rng.uniform() - 3};
    const double s[] = {2 * rng.uniform() - 1};
    const double base = mix_qmix(q, s, m);
    q[rng.uniform_index(2)] += 0.1 + rng.uniform();
    CHECK(mix_qmix(q, s, m) >= base);
  }
}

TEST_CASE("qplex at the greedy actions ignores lambda") {
  Rng rng(4);
  Mixer m(dueling(), rng);
  const std::vector<std::vector<double>> q{{1, 4, 2}, {-1, -3, 0.5}};
  const std::size_t greedy[] = {1, 2};
  const double s[] = {1.0};
  diff::Graph g;
  diff::Var sv = g.constant(diff::Tensor::matrix(1, 1, {1.0}));
  const auto w = m.transform_weights(g, m.params(), sv).value();
  const auto b = m.transform_biases(g, m.params(), sv).value();
  const double expect = w[0] * 4 + b[0] + w[1] * 0.5 + b[1];
  CHECK(mix_qplex(q, greedy, s, m) == doctest::Approx(expect).epsilon(1e-12));
  for (std::size_t h = 0; h < 3; ++h)
    fill(m, "attention." + std::to_string(h) + ".value.2.bias", 5.0 + h);
  CHECK(mix_qplex(q, greedy, s, m) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("qplex matches the advantage form") {
  Rng rng(5);
  Mixer m(dueling(), rng);
  const std::vector<std::vector<double>> q{{1, 4, 2}, {-1, -3, 0.5}};
  const std::size_t chosen[] = {0, 1};
  const double s[] = {1.0};
  diff::Graph g;
  diff::Var sv = g.constant(diff::Tensor::matrix(1, 1, {1.0}));
  const auto w = m.transform_weights(g, m.params(), sv).value();
  const auto b = m.transform_biases(g, m.params(), sv).value();
  const auto lam = m.lambda(g, m.params(), diff::Tensor::matrix(1, 1, {1.0}), chosen).value();
  const double v[] = {4, 0.5}, c[] = {1, -3};
  double expect = 0.0;
  for (int k = 0; k < 2; ++k) expect += w[k] * v[k] + b[k] + lam[k] * w[k] * (c[k] - v[k]);
  CHECK(lam[0] > 0.0);
  CHECK(lam[1] > 0.0);
  CHECK(mix_qplex(q, chosen, s, m) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("qplex joint argmax is the tuple of agent argmaxes") {
  Rng rng(6);
  for (int t = 0; t < 50; ++t) {
    Mixer m(dueling(), rng);
    const auto q = random_tables(rng);
    const double s[] = {1.0};
    const auto v = check_digm(q, [&](std::span<const std::size_t> u) { return mix_qplex(q, u, s, m); });
    CHECK(v.holds);
  }
}

TEST_CASE("shape_sum") {
  const dist::QuantileBatch c{{0.2, 0.5, 0.8}, {3, 3, 3}};
  const dist::QuantileBatch one[] = {c};
  const double q1[] = {3.0};
  CHECK(shape_sum(one, q1).values == std::vector<double>{0, 0, 0});
  const dist::QuantileBatch two[] = {{{0.25, 0.75}, {-1, 1}}, {{0.25, 0.75}, {-2, 2}}};
  const double q2[] = {0.0, 0.0};
  CHECK(shape_sum(two, q2).values == std::vector<double>{-3, 3});
  const dist::QuantileBatch mismatched[] = {{{0.25, 0.75}, {-1, 1}}, {{0.3, 0.75}, {-2, 2}}};
  CHECK_THROWS_AS(shape_sum(mismatched, q2), ShapeError);
}

TEST_CASE("shape_sum has zero estimator mean") {
  Rng rng(7);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t k = 1 + rng.uniform_index(4), n = 1 + rng.uniform_index(64);
    std::vector<double> levels(n);
    for (double& l : levels) l = rng.uniform();
    std::vector<dist::QuantileBatch> z(k, {levels, std::vector<double>(n)});
    std::vector<double> q(k);
    for (std::size_t a = 0; a < k; ++a) {
      for (double& v : z[a].values) v = 40 * rng.uniform() - 20;
      q[a] = dist::expectation(z[a]);
    }
    worst = std::max(worst, std::fabs(dist::expectation(shape_sum(z, q))));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("dfac_mix") {
  const dist::QuantileBatch zeros{{0.1, 0.9}, {0, 0}};
  CHECK(dfac_mix(6.0, zeros).values == std::vector<double>{6, 6});
  const dist::QuantileBatch phi{{0.1, 0.9}, {-1, 1}};
  CHECK(dfac_mix(0.0, phi).values == phi.values);
  CHECK_THROWS_AS(dfac_mix(0.0, dist::QuantileBatch{{0.1, 0.9}, {1, 1}}), DomainError);
}

TEST_CASE("ddn joint curve is the unit-weight quantile mixture of agent curves") {
  Rng rng(8);
  const auto levels = dist::midpoint_levels(50);
  for (int t = 0; t < 20; ++t) {
    std::vector<dist::QuantileBatch> z(2, {levels, std::vector<double>(levels.size())});
    for (auto& b : z) {
      double acc = 10 * rng.uniform() - 5;
      for (double& v : b.values) v = (acc += rng.uniform());
    }
    const double q[] = {dist::expectation(z[0]), dist::expectation(z[1])};
    const auto joint = dfac_mix(q[0] + q[1], shape_sum(z, q));
    const dist::QuantileFn curves[] = {dist::quantile_fn(z[0]), dist::quantile_fn(z[1])};
    const double beta[] = {1.0, 1.0};
    for (std::size_t i = 0; i < levels.size(); ++i)
      CHECK(std::fabs(joint.values[i] - dist::quantile_mixture(curves, beta, levels[i])) <= 1e-12);
  }
}

TEST_CASE("dfac_mix_c51") {
  const dist::UniformSupport s{-20, 20, 41};
  const dist::CategoricalDist dirac0[] = {dist::CategoricalDist::dirac(0.0)};
  const auto a = dfac_mix_c51(6.0, dirac0, s, false);
  CHECK(a.joint.probs[26] == doctest::Approx(1.0).epsilon(1e-12));
  const dist::CategoricalDist coins[] = {{{-1.5, 1.5}, {0.5, 0.5}}, {{-1.5, 1.5}, {0.5, 0.5}}};
  const auto b = dfac_mix_c51(6.0, coins, s, false);
  CHECK(b.joint.probs[23] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(b.joint.probs[26] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(b.joint.probs[29] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK_FALSE(b.clipped);

  Rng rng(9);
  std::vector<dist::CategoricalDist> centred;
  for (int k = 0; k < 3; ++k) {
    dist::CategoricalDist d{s.atoms(), std::vector<double>(41)};
    double total = 0.0;
    for (double& p : d.probs) total += (p = rng.uniform());
    for (double& p : d.probs) p /= total;
    centred.push_back(dist::mean_shape_decompose(d).shape);
  }
  const auto x = dfac_mix_c51(1.0, centred, s, false), y = dfac_mix_c51(1.0, centred, s, true);
  for (std::size_t i = 0; i < x.joint.probs.size(); ++i) CHECK(std::fabs(x.joint.probs[i] - y.joint.probs[i]) <= 1e-9);
}

TEST_CASE("check_digm: additive mixers always hold") {
  Rng rng(10);
  for (int t = 0; t < 100; ++t) {
    const auto q = random_tables(rng);
    CHECK(check_digm(q, [&](std::span<const std::size_t> u) { return q[0][u[0]] + q[1][u[1]]; }).holds);
  }
}

TEST_CASE("check_digm: exponential mixer counterexample") {
  const dist::CategoricalDist safe = dist::CategoricalDist::dirac(2.0), risky{{0, 3}, {0.5, 0.5}};
  const std::vector<std::vector<double>> q{{dist::expectation(safe), dist::expectation(risky)}};
  auto exp_mean = [](const dist::CategoricalDist& d) {
    double s = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) s += d.probs[i] * std::exp(d.atoms[i]);
    return s;
  };
  CHECK(exp_mean(safe) == doctest::Approx(7.389).epsilon(1e-3 / 7.389));
  CHECK(exp_mean(risky) == doctest::Approx(10.543).epsilon(1e-3 / 10.543));
  const auto v = check_digm(q, [&](std::span<const std::size_t> u) { return exp_mean(u[0] == 0 ? safe : risky); });
  CHECK_FALSE(v.holds);
  CHECK(v.agent_argmax == std::vector<std::size_t>{0});
  CHECK(v.joint_argmax == std::vector<std::size_t>{1});
}

TEST_CASE("joint actions enumerate lexicographically") {
  const std::size_t counts[] = {2, 3};
  const auto all = enumerate_joint_actions(counts);
  REQUIRE(all.size() == 6);
  CHECK(all[0] == std::vector<std::size_t>{0, 0});
  CHECK(all[1] == std::vector<std::size_t>{0, 1});
  CHECK(all[5] == std::vector<std::size_t>{1, 2});
}

TEST_CASE("every method's psi satisfies IGM at initialisation") {
  Rng rng(11);
  for (Method m : kAllMethods) {
    ModelConfig c;
    c.method = m;
    c.agent_hidden = {8, 8};
    c.cos_features = 8;
    c.embed_hidden = {8};
    c.mixer_embed = 4;
    c.attention_heads = 2;
    c.attention_hidden = 8;
    FactorizedModel model(c, rng);
    mixers::JointBatch b;
    b.observations = diff::Tensor::matrix(2, 3, {1, 1, 0, 1, 0, 1});
    b.states = diff::Tensor(diff::Shape{9, 1}, 1.0);
    for (std::size_t u = 0; u < 9; ++u) {
      b.obs_index.insert(b.obs_index.end(), {0, 1});
      b.actions.insert(b.actions.end(), {u / 3, u % 3});
    }
    const auto levels = dist::midpoint_levels(32);
    const auto est = model.evaluate(b, levels);
    const auto av = model.action_values(b.observations, levels);
    std::vector<std::vector<double>> q(2, std::vector<double>(3));
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t a = 0; a < 3; ++a) q[k][a] = av.at(k, a);
    INFO(method_id(m));
    CHECK(check_digm(q, [&](std::span<const std::size_t> u) { return est[u[0] * 3 + u[1]].q_jt; }).holds);
    // the shape term has zero mean unless the categorical projection clipped
    if (is_distributional(m))
      for (const auto& e : est)
        if (!e.clipped) CHECK(e.expectation == doctest::Approx(e.q_jt).epsilon(1e-9));
  }
}
