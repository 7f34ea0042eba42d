#include <cmath>

#include "dfac/diff/gradcheck.hpp"
#include "dfac/diff/ops.hpp"
#include "dfac/diff/rng.hpp"
#include "dfac/dist/dist_json.hpp"
#include "dfac/dist/distributions.hpp"
#include "dfac/dist/graph_ops.hpp"
#include "dfac/error.hpp"
#include "doctest.h"

using namespace dfac;
using namespace dfac::dist;

namespace {

CategoricalDist random_pmf(const UniformSupport& s, Rng& rng) {
  CategoricalDist d{s.atoms(), std::vector<double>(s.n)};
  double total = 0.0;
  for (double& p : d.probs) total += (p = rng.uniform());
  for (double& p : d.probs) p /= total;
  return d;
}

}  // namespace

TEST_CASE("quantile_eval of categorical distributions") {
  CHECK(quantile_eval(CategoricalDist::dirac(2.0), 0.3) == 2.0);
  const CategoricalDist two{{0, 3}, {0.5, 0.5}};
  CHECK(quantile_eval(two, 0.5) == 0.0);
  CHECK(quantile_eval(two, 0.51) == 3.0);
  const CategoricalDist three{{1, 2, 3}, {1.0 / 3, 1.0 / 3, 1.0 / 3}};
  CHECK(quantile_eval(three, 1.0) == 3.0);
}

TEST_CASE("quantile_eval is non-decreasing") {
  Rng rng(1);
  const UniformSupport s{-5, 5, 11};
  for (int t = 0; t < 20; ++t) {
    const auto d = random_pmf(s, rng);
    double prev = -1e300;
    for (int i = 0; i <= 200; ++i) {
      const double q = quantile_eval(d, i / 200.0);
      CHECK(q >= prev);
      prev = q;
    }
  }
}

TEST_CASE("expectation") {
  CHECK(expectation(CategoricalDist{{0, 3}, {0.5, 0.5}}) == 1.5);
  CHECK(expectation(QuantileBatch{{0.1, 0.5, 0.9}, {4, 4, 4}}) == 4.0);
  const auto levels = midpoint_levels(10000);
  QuantileBatch b{levels, {}};
  for (double w : levels) b.values.push_back(normal_quantile({6.0, 2.0}, w));
  CHECK(expectation(b) == doctest::Approx(6.0).epsilon(0.01 / 6.0));
}

TEST_CASE("wasserstein") {
  const auto n = quantile_fn(NormalSpec{1.0, 2.0});
  CHECK(wasserstein(n, n, 1.0) == 0.0);
  const auto d2 = quantile_fn(CategoricalDist::dirac(2.0)), d5 = quantile_fn(CategoricalDist::dirac(5.0));
  CHECK(wasserstein(d2, d5, 1.0) == doctest::Approx(3.0));
  CHECK(wasserstein(d2, d5, 2.0) == doctest::Approx(3.0));
  const auto two = quantile_fn(CategoricalDist{{0, 3}, {0.5, 0.5}});
  CHECK(wasserstein(two, quantile_fn(CategoricalDist::dirac(1.5)), 1.0) == doctest::Approx(1.5));
  // Dirac(mu) against N(mu, 8): sigma * sqrt(2 / pi)
  const double w = wasserstein(quantile_fn(CategoricalDist::dirac(8.0)), quantile_fn(NormalSpec{8.0, std::sqrt(8.0)}), 1.0);
  CHECK(w == doctest::Approx(std::sqrt(8.0) * std::sqrt(2.0 / M_PI)).epsilon(1e-3));
}

TEST_CASE("quantile_mixture") {
  const QuantileFn n01 = quantile_fn(NormalSpec{0.0, 1.0});
  const QuantileFn one[] = {n01};
  const double w1[] = {1.0};
  CHECK(quantile_mixture(one, w1, 0.3) == n01(0.3));
  const QuantileFn diracs[] = {quantile_fn(CategoricalDist::dirac(2.0)), quantile_fn(CategoricalDist::dirac(3.0))};
  const double w2[] = {1.0, 1.0};
  CHECK(quantile_mixture(diracs, w2, 0.7) == 5.0);
  const QuantileFn normals[] = {n01, n01};
  CHECK(quantile_mixture(normals, w2, 0.5) == doctest::Approx(0.0));
  CHECK(quantile_mixture(normals, w2, 0.9) == doctest::Approx(normal_quantile({0.0, 2.0}, 0.9)));
  const double neg[] = {1.0, -1.0};
  CHECK_THROWS_AS(quantile_mixture(normals, neg, 0.5), DomainError);
}

TEST_CASE("project_categorical hand cases") {
  const UniformSupport s{-20, 20, 41};
  const double on[] = {3.0}, mid[] = {2.5}, far[] = {25.0}, one[] = {1.0};
  auto a = project_categorical(on, one, s);
  CHECK(a.probs[23] == 1.0);
  auto b = project_categorical(mid, one, s);
  CHECK(std::fabs(b.probs[22] - 0.5) <= 1e-12);
  CHECK(std::fabs(b.probs[23] - 0.5) <= 1e-12);
  bool clipped = false;
  auto c = project_categorical(far, one, s, &clipped);
  CHECK(c.probs[40] == 1.0);
  CHECK(clipped);
}

TEST_CASE("projection preserves mass and the mean inside the support") {
  Rng rng(2);
  const UniformSupport s{-10, 10, 21};
  for (int t = 0; t < 50; ++t) {
    std::vector<double> atoms, probs;
    double total = 0.0;
    for (int i = 0; i < 7; ++i) {
      atoms.push_back(18.0 * rng.uniform() - 9.0);
      probs.push_back(rng.uniform());
      total += probs.back();
    }
    double mean = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) mean += atoms[i] * (probs[i] /= total);
    const auto p = project_categorical(atoms, probs, s);
    double mass = 0.0;
    for (double v : p.probs) mass += v;
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(expectation(p) == doctest::Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("convolve_pmf") {
  const CategoricalDist coin{{0, 1}, {0.5, 0.5}};
  const auto r = convolve_pmf(coin, coin);
  CHECK(r.atoms == std::vector<double>{0, 1, 2});
  CHECK(r.probs == std::vector<double>{0.25, 0.5, 0.25});
  const CategoricalDist x{{-1, 0.5, 4}, {0.2, 0.3, 0.5}};
  const auto shifted_x = convolve_pmf(x, CategoricalDist::dirac(2.0));
  CHECK(shifted_x.atoms == std::vector<double>{1, 2.5, 6});
  CHECK(shifted_x.probs == x.probs);
  const CategoricalDist centred{{-1.5, 1.5}, {0.5, 0.5}};
  const auto c = convolve_pmf(centred, centred);
  CHECK(c.atoms == std::vector<double>{-3, 0, 3});
  CHECK(c.probs == std::vector<double>{0.25, 0.5, 0.25});
  CHECK(expectation(c) == 0.0);
}

TEST_CASE("convolve_many_projected") {
  const UniformSupport s{-20, 20, 41};
  Rng rng(3);
  const auto d = random_pmf(s, rng);
  const CategoricalDist single[] = {d};
  CHECK(convolve_many_projected(single, false).probs == d.probs);

  std::vector<double> pa(41, 0.0), pb(41, 0.0);
  pa[22] = 1.0;  // atom 2
  pb[25] = 1.0;  // atom 5
  const CategoricalDist diracs[] = {{s.atoms(), pa}, {s.atoms(), pb}};
  const auto sum = convolve_many_projected(diracs, false);
  CHECK(sum.probs[27] == doctest::Approx(1.0).epsilon(1e-12));

  const UniformSupport s51{-20, 20, 51};
  std::vector<CategoricalDist> many;
  for (int k = 0; k < 4; ++k) many.push_back(random_pmf(s51, rng));
  const auto direct = convolve_many_projected(many, false), fft = convolve_many_projected(many, true);
  for (std::size_t i = 0; i < direct.probs.size(); ++i) CHECK(std::fabs(direct.probs[i] - fft.probs[i]) <= 1e-9);
}

TEST_CASE("fft and direct index convolution agree") {
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> a(1 + rng.uniform_index(300)), b(1 + rng.uniform_index(300));
    for (double& v : a) v = rng.uniform();
    for (double& v : b) v = rng.uniform();
    const auto x = convolve_direct(a, b), y = convolve_fft(a, b);
    REQUIRE(x.size() == y.size());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::fabs(x[i] - y[i]) <= 1e-9);
  }
}

TEST_CASE("mean_shape_decompose") {
  const auto d = mean_shape_decompose(CategoricalDist::dirac(4.0));
  CHECK(d.mean == 4.0);
  CHECK(d.shape.atoms == std::vector<double>{0.0});
  const auto two = mean_shape_decompose(CategoricalDist{{0, 3}, {0.5, 0.5}});
  CHECK(two.mean == 1.5);
  CHECK(two.shape.atoms == std::vector<double>{-1.5, 1.5});
  const auto q = mean_shape_decompose(QuantileBatch{{0.25, 0.5, 0.75}, {1, 2, 3}});
  CHECK(q.mean == 2.0);
  CHECK(q.shape.values == std::vector<double>{-1, 0, 1});
}

TEST_CASE("normal_quantile") {
  CHECK(normal_quantile({3.0, 2.0}, 0.5) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(normal_quantile({0.0, 1.0}, standard_normal_cdf(1.0)) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(normal_quantile({0.0, 1.0}, 0.8413) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(normal_quantile({6.0, 0.0}, 0.01) == 6.0);
  CHECK_THROWS_AS(normal_quantile({0.0, 1.0}, 0.0), DomainError);
  for (double p : {1e-10, 0.001, 0.2, 0.7, 0.999, 1 - 1e-10})
    CHECK(standard_normal_cdf(standard_normal_quantile(p)) == doctest::Approx(p).epsilon(1e-9));
}

TEST_CASE("invalid distributions are rejected") {
  CHECK_THROWS_AS((CategoricalDist{{1, 0}, {0.5, 0.5}}.validate()), DomainError);
  CHECK_THROWS_AS((CategoricalDist{{0, 1}, {0.7, 0.5}}.validate()), DomainError);
  CHECK_THROWS_AS((CategoricalDist{{0, 1}, {1.0}}.validate()), ShapeError);
}

TEST_CASE("distribution json round trip") {
  const CategoricalDist d{{-1, 2}, {0.25, 0.75}};
  nlohmann::json j = d;
  const auto back = j.get<CategoricalDist>();
  CHECK(back.atoms == d.atoms);
  CHECK(back.probs == d.probs);
}

TEST_CASE("project_rows and convolve_rows gradients") {
  using namespace dfac::diff;
  Rng rng(9);
  ParameterSet set;
  Tensor mass(Shape{2, 3});
  for (double& v : mass.values()) v = rng.uniform();
  set.add("mass", mass);
  set.add("pos", Tensor::matrix(2, 3, {-1.3, 0.4, 2.2, -0.6, 1.7, 3.1}));
  set.add("other", Tensor::matrix(2, 2, {0.3, 0.7, 0.6, 0.4}));
  const UniformSupport s{-3, 3, 7};
  const Tensor weights = Tensor::matrix(2, 7, {1, 2, 3, 4, 5, 6, 7, -1, 0, 2, 1, 0, 3, 1});
  auto params = set.all();
  auto r = gradient_check(params, [&](Graph& g) {
    return sum(project_rows(g.param(set[0]), g.param(set[1]), s) * g.constant(weights));
  });
  CHECK(r.passed);
  auto c = gradient_check(params, [&](Graph& g) {
    Var conv = dist::convolve_rows(g.param(set[0]), g.param(set[2]));
    return sum(conv * conv);
  });
  CHECK(c.passed);
}
