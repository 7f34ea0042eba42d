#include "dfac/diff/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace dfac::diff {

GradCheckResult gradient_check(std::span<Parameter* const> params, const std::function<Var(Graph&)>& loss, double step,
                               double rel_tol, double abs_floor) {
  for (Parameter* p : params) p->zero_grad();
  {
    Graph g;
    g.backward(loss(g));
  }
  std::vector<Tensor> analytic;
  for (Parameter* p : params) analytic.push_back(p->grad());
  for (Parameter* p : params) p->zero_grad();

  auto eval = [&]() {
    Graph g;
    return loss(g).value().item();
  };
  GradCheckResult r;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& v = params[k]->value();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double saved = v[i];
      v[i] = saved + step;
      const double up = eval();
      v[i] = saved - step;
      const double down = eval();
      v[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[k][i];
      const double abs_err = std::fabs(a - numeric);
      const double rel = abs_err / std::max({std::fabs(a), std::fabs(numeric), 1e-300});
      r.max_abs_error = std::max(r.max_abs_error, abs_err);
      const double score = abs_err <= abs_floor ? 0.0 : rel;
      if (score > r.max_rel_error) {
        r.max_rel_error = score;
        r.worst = params[k]->name() + "[" + std::to_string(i) + "]";
      }
      if (score >= rel_tol) r.passed = false;
      ++r.checked;
    }
  }
  for (Parameter* p : params) p->zero_grad();
  return r;
}

}  // namespace dfac::diff
