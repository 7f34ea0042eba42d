#include "dfac/diff/adam.hpp"

#include <cmath>

#include "dfac/error.hpp"

namespace dfac::diff {

Adam::Adam(double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
  if (!(learning_rate > 0.0)) throw DomainError("adam: learning rate must be positive");
}

void Adam::step(std::span<Parameter* const> params) {
  for (const Parameter* p : params)
    if (!p->grad().all_finite()) throw DomainError("adam: non-finite gradient in parameter '" + p->name() + "'");

  ++step_;
  const double t = static_cast<double>(step_);
  const double correction1 = 1.0 - std::pow(beta1_, t);
  const double correction2 = 1.0 - std::pow(beta2_, t);
  for (Parameter* p : params) {
    auto [it, inserted] = moments_.try_emplace(p->id());
    Moments& m = it->second;
    if (inserted) {
      m.first = Tensor(p->value().shape(), 0.0);
      m.second = Tensor(p->value().shape(), 0.0);
    }
    Tensor& value = p->value();
    Tensor& grad = p->grad();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double gi = grad[i];
      m.first[i] = beta1_ * m.first[i] + (1.0 - beta1_) * gi;
      m.second[i] = beta2_ * m.second[i] + (1.0 - beta2_) * gi * gi;
      const double mhat = m.first[i] / correction1;
      const double vhat = m.second[i] / correction2;
      value[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
    grad.fill(0.0);
  }
}

}  // namespace dfac::diff
