#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>

#include "dfac/diff/graph.hpp"

namespace dfac::diff {

/// Bias-corrected Adam.
class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

  /// Applies one update to every parameter, then zeroes the gradients.
  /// Throws DomainError naming the first parameter with a non-finite gradient;
  /// nothing is modified in that case.
  void step(std::span<Parameter* const> params);

  std::uint64_t steps() const { return step_; }
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

 private:
  struct Moments {
    Tensor first;
    Tensor second;
  };

  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  std::uint64_t step_ = 0;
  std::unordered_map<std::uint64_t, Moments> moments_;
};

}  // namespace dfac::diff
