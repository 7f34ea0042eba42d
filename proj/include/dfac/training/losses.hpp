#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dfac/diff/graph.hpp"
#include "dfac/dist/distributions.hpp"

namespace dfac::training {

/// rho^kappa_level(delta) = |level - 1{delta < 0}| * Huber_kappa(delta) / kappa.
double quantile_huber(double delta, double level, double kappa);

/// (1 / N') sum_i sum_j rho^kappa_{levels[i]}(targets[j] - predicted[i]).
double quantile_huber_loss(std::span<const double> predicted, std::span<const double> levels,
                           std::span<const double> targets, double kappa);

/// sum_i t_i (log t_i - log max(p_i, 1e-12)) with 0 log 0 = 0. Throws
/// ShapeError when the supports differ.
double kl_loss(const dist::CategoricalDist& target, const dist::CategoricalDist& predicted);

// Batched graph losses: sample b reads row rows[b] of the prediction, and the
// result is the mean over samples.

/// predicted [R] against scalar targets: mean of (y_b - q[rows[b]])^2.
diff::Var squared_td_loss(diff::Var predicted, std::span<const std::size_t> rows, std::span<const double> targets);

/// predicted [R x N] quantiles at `levels`; targets[b] holds N'_b values.
diff::Var quantile_huber_batch(diff::Var predicted, std::span<const double> levels, std::span<const std::size_t> rows,
                               const std::vector<std::vector<double>>& targets, double kappa);

/// predicted [R x n] probabilities; targets[b] holds n target probabilities.
diff::Var categorical_kl_batch(diff::Var predicted, std::span<const std::size_t> rows,
                               const std::vector<std::vector<double>>& targets);

}  // namespace dfac::training
