#include <cmath>

#include "dfac/agents/agent.hpp"
#include "dfac/error.hpp"
#include "doctest.h"

using namespace dfac;
using namespace dfac::agents;

namespace {

AgentConfig iqn_config(std::size_t m, std::vector<std::size_t> hidden) {
  AgentConfig c;
  c.obs_dim = 3;
  c.n_actions = 3;
  c.hidden = std::move(hidden);
  c.head = HeadKind::Quantile;
  c.cos_features = m;
  c.embed_hidden = {};
  c.torso_relu_output = false;
  return c;
}

void set_all(diff::ParameterSet& set, const std::string& name, double v) {
  auto* p = set.find(name);
  REQUIRE(p != nullptr);
  p->value().fill(v);
}

}  // namespace

TEST_CASE("observation is a bias feature plus the agent one-hot") {
  const double one[] = {1.0};
  CHECK(make_observation(one, 0, 2) == std::vector<double>{1, 1, 0});
  CHECK(make_observation(one, 1, 2) == std::vector<double>{1, 0, 1});
  CHECK(make_observation(one, 2, 3) == std::vector<double>{1, 0, 0, 1});
  CHECK_THROWS_AS(make_observation(one, 2, 2), DomainError);
}

TEST_CASE("level embedding at zero sums the weights") {
  Rng rng(1);
  AgentNetwork net(iqn_config(4, {5}), rng);
  const auto phi = quantile_embedding(net, 0.0);
  const auto& w = net.params().find("embed.0.weight")->value();
  const auto& b = net.params().find("embed.0.bias")->value();
  REQUIRE(phi.size() == 5);
  for (std::size_t j = 0; j < 5; ++j) {
    double s = b[j];
    for (std::size_t i = 0; i < 4; ++i) s += w.at(i, j);
    CHECK(phi[j] == doctest::Approx(std::max(s, 0.0)).epsilon(1e-12));
  }
}

TEST_CASE("level embedding with zero parameters is zero") {
  Rng rng(2);
  AgentNetwork net(iqn_config(8, {6}), rng);
  set_all(net.params(), "embed.0.weight", 0.0);
  set_all(net.params(), "embed.0.bias", 0.0);
  for (double level : {0.0, 0.3, 1.0})
    for (double v : quantile_embedding(net, level)) CHECK(v == 0.0);
}

TEST_CASE("level embedding hand case: m = 2, unit weights, level 1") {
  Rng rng(3);
  AgentNetwork net(iqn_config(2, {1}), rng);
  set_all(net.params(), "embed.0.weight", 1.0);
  set_all(net.params(), "embed.0.bias", 0.0);
  const auto phi = quantile_embedding(net, 1.0);
  CHECK(std::fabs(phi[0]) <= 1e-12);
}

TEST_CASE("iqn forward is deterministic") {
  Rng rng(4);
  AgentConfig c = iqn_config(16, {8, 4});
  c.embed_hidden = {12};
  AgentNetwork net(c, rng);
  const double obs[] = {1, 1, 0};
  const double levels[] = {0.3, 0.3, 0.8};
  const auto a = iqn_forward(net, obs, levels), b = iqn_forward(net, obs, levels);
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].values[0] == a[k].values[1]);
    CHECK(a[k].values == b[k].values);
  }
}

TEST_CASE("iqn with a zero torso output returns the output bias") {
  Rng rng(5);
  AgentNetwork net(iqn_config(8, {6}), rng);
  set_all(net.params(), "torso.0.weight", 0.0);
  set_all(net.params(), "torso.0.bias", 0.0);
  const auto& bias = net.params().find("out.bias")->value();
  const double obs[] = {1, 0, 1};
  const double levels[] = {0.1, 0.6, 0.95};
  const auto z = iqn_forward(net, obs, levels);
  for (std::size_t a = 0; a < 3; ++a)
    for (double v : z[a].values) CHECK(v == bias[a]);
}

TEST_CASE("c51 head") {
  Rng rng(6);
  AgentConfig c;
  c.obs_dim = 3;
  c.n_actions = 2;
  c.hidden = {4};
  c.head = HeadKind::Categorical;
  c.support = {-20, 20, 41};
  AgentNetwork net(c, rng);
  const double obs[] = {1, 1, 0};
  for (const auto& d : c51_forward(net, obs)) {
    double s = 0.0;
    for (double p : d.probs) s += p;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  set_all(net.params(), "out.weight", 0.0);
  set_all(net.params(), "out.bias", 0.0);
  for (const auto& d : c51_forward(net, obs))
    for (double p : d.probs) CHECK(p == doctest::Approx(1.0 / 41).epsilon(1e-12));
  net.params().find("out.bias")->value()[28] = 1000.0;  // action 0, atom 8
  const auto d = c51_forward(net, obs);
  CHECK(d[0].probs[28] == doctest::Approx(1.0));
  CHECK(head_expectation(d[0]) == doctest::Approx(8.0));
}

TEST_CASE("head expectations") {
  CHECK(head_expectation(3.2) == 3.2);
  CHECK(head_expectation(dist::QuantileBatch{{0.2, 0.9}, {5, 5}}) == 5.0);
}

TEST_CASE("greedy action") {
  const double a[] = {1, 5, 3};
  CHECK(greedy_action(a) == 1);
  const double tie[] = {2, 2};
  CHECK(greedy_action(tie) == 0);
  const double table1_means[] = {8, -12, -12, -12, 6, 0, -12, 0, 6};
  CHECK(greedy_action(table1_means) == 0);
  CHECK_THROWS(greedy_action(std::span<const double>{}));
}

TEST_CASE("agents share parameters; outputs differ only through the one-hot") {
  Rng rng(7);
  AgentConfig c;
  c.obs_dim = 3;
  c.n_actions = 3;
  c.hidden = {8};
  AgentNetwork net(c, rng);
  const double obs0[] = {1, 1, 0}, obs1[] = {1, 0, 1};
  const auto v0 = expected_forward(net, obs0), v1 = expected_forward(net, obs1);
  CHECK(v0 != v1);
  // swapping the one-hot columns of the first layer swaps the agents
  auto& w = net.params().find("torso.0.weight")->value();
  for (std::size_t j = 0; j < 8; ++j) std::swap(w.at(1, j), w.at(2, j));
  CHECK(expected_forward(net, obs1) == v0);
  CHECK(expected_forward(net, obs0) == v1);
}

TEST_CASE("wrong observation size is rejected") {
  Rng rng(8);
  AgentConfig c;
  c.obs_dim = 3;
  c.n_actions = 3;
  c.hidden = {4};
  AgentNetwork net(c, rng);
  const double bad[] = {1, 0};
  CHECK_THROWS_AS(expected_forward(net, bad), ShapeError);
}
