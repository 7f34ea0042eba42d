#include "dfac/training/losses.hpp"

#include <algorithm>
#include <functional>
#include <cmath>
#include <string>

#include "dfac/error.hpp"

namespace dfac::training {

using diff::Graph;
using diff::Shape;
using diff::Tensor;
using diff::Var;

namespace {

constexpr double kProbFloor = 1e-12;

void check_rows(std::span<const std::size_t> rows, std::size_t n_rows, std::size_t n_targets, const char* op) {
  if (rows.empty()) throw ShapeError(std::string(op) + ": empty batch");
  if (rows.size() != n_targets) throw ShapeError(std::string(op) + ": one target per sample required");
  for (std::size_t r : rows)
    if (r >= n_rows) throw ShapeError(std::string(op) + ": sample row out of range");
}

}  // namespace

double quantile_huber(double delta, double level, double kappa) {
  if (!(kappa > 0.0)) throw DomainError("kappa must be positive");
  const double w = std::fabs(level - (delta < 0.0 ? 1.0 : 0.0));
  const double a = std::fabs(delta);
  const double h = a <= kappa ? 0.5 * delta * delta : kappa * (a - 0.5 * kappa);
  return w * h / kappa;
}

double quantile_huber_loss(std::span<const double> predicted, std::span<const double> levels,
                           std::span<const double> targets, double kappa) {
  if (predicted.size() != levels.size()) throw ShapeError("one level per predicted quantile required");
  if (targets.empty()) throw ShapeError("quantile loss needs targets");
  double s = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    for (double t : targets) s += quantile_huber(t - predicted[i], levels[i], kappa);
  return s / static_cast<double>(targets.size());
}

double kl_loss(const dist::CategoricalDist& target, const dist::CategoricalDist& predicted) {
  if (target.atoms.size() != predicted.atoms.size()) throw ShapeError("kl_loss: supports differ in size");
  for (std::size_t i = 0; i < target.atoms.size(); ++i)
    if (std::fabs(target.atoms[i] - predicted.atoms[i]) > 1e-9) throw ShapeError("kl_loss: supports differ");
  double s = 0.0;
  for (std::size_t i = 0; i < target.probs.size(); ++i) {
    const double t = target.probs[i];
    if (t > 0.0) s += t * (std::log(t) - std::log(std::max(predicted.probs[i], kProbFloor)));
  }
  return s;
}

Var squared_td_loss(Var predicted, std::span<const std::size_t> rows, std::span<const double> targets) {
  Graph& g = *predicted.graph;
  const Tensor& q = predicted.value();
  check_rows(rows, q.size(), targets.size(), "squared_td_loss");
  const double inv_b = 1.0 / static_cast<double>(rows.size());
  std::vector<double> residual_sum(q.size(), 0.0);
  double loss = 0.0;
  for (std::size_t b = 0; b < rows.size(); ++b) {
    const double d = targets[b] - q[rows[b]];
    loss += d * d;
    residual_sum[rows[b]] += d;
  }
  return g.record("squared_td_loss", Tensor::scalar(loss * inv_b), {predicted},
                  [residual_sum = std::move(residual_sum), inv_b](const Tensor&, const Tensor& og,
                                                                 std::vector<Tensor*>& in) {
                    if (!in[0]) return;
                    for (std::size_t r = 0; r < residual_sum.size(); ++r)
                      (*in[0])[r] += -2.0 * inv_b * residual_sum[r] * og[0];
                  });
}

Var quantile_huber_batch(Var predicted, std::span<const double> levels, std::span<const std::size_t> rows,
                         const std::vector<std::vector<double>>& targets, double kappa) {
  Graph& g = *predicted.graph;
  const Tensor& p = predicted.value();
  if (p.rank() != 2 || p.cols() != levels.size()) throw ShapeError("quantile_huber_batch: one level per column required");
  if (!(kappa > 0.0)) throw DomainError("kappa must be positive");
  check_rows(rows, p.rows(), targets.size(), "quantile_huber_batch");
  const std::size_t n = levels.size();
  const double inv_b = 1.0 / static_cast<double>(rows.size());

  // Pool the weighted targets of every sample reading the same row. Once they
  // are sorted, prefix sums of w, w*v and w*v^2 give the summed loss and slope
  // of each predicted quantile in closed form on the four Huber regions.
  std::vector<std::vector<std::pair<double, double>>> pooled(p.rows());
  for (std::size_t b = 0; b < rows.size(); ++b) {
    const auto& t = targets[b];
    if (t.empty()) throw ShapeError("quantile_huber_batch: sample without targets");
    const double w = inv_b / static_cast<double>(t.size());
    auto& dst = pooled[rows[b]];
    if (std::adjacent_find(t.begin(), t.end(), std::not_equal_to<>()) == t.end()) {
      dst.emplace_back(t.front(), w * static_cast<double>(t.size()));
      continue;
    }
    for (double v : t) dst.emplace_back(v, w);
  }

  Tensor grad(p.shape());
  double loss = 0.0;
  std::vector<double> vals, cw, c1, c2;
  for (std::size_t r = 0; r < pooled.size(); ++r) {
    auto& pool = pooled[r];
    if (pool.empty()) continue;
    std::sort(pool.begin(), pool.end());
    vals.clear();
    cw.assign(1, 0.0);
    c1.assign(1, 0.0);
    c2.assign(1, 0.0);
    for (const auto& [v, w] : pool) {
      if (!vals.empty() && vals.back() == v) {
        cw.back() += w;
        c1.back() += w * v;
        c2.back() += w * v * v;
        continue;
      }
      vals.push_back(v);
      cw.push_back(cw.back() + w);
      c1.push_back(c1.back() + w * v);
      c2.push_back(c2.back() + w * v * v);
    }
    const double* theta = p.data() + r * n;
    double* gr = grad.data() + r * n;
    for (std::size_t i = 0; i < n; ++i) {
      const double th = theta[i], tau = levels[i];
      const auto at = [&](auto it) { return static_cast<std::size_t>(it - vals.begin()); };
      const std::size_t a = at(std::lower_bound(vals.begin(), vals.end(), th - kappa));
      const std::size_t m = at(std::lower_bound(vals.begin(), vals.end(), th));
      const std::size_t c = at(std::upper_bound(vals.begin(), vals.end(), th + kappa));
      const std::size_t e = vals.size();
      auto W = [&](std::size_t lo, std::size_t hi) { return cw[hi] - cw[lo]; };
      auto S1 = [&](std::size_t lo, std::size_t hi) { return c1[hi] - c1[lo]; };
      auto S2 = [&](std::size_t lo, std::size_t hi) { return c2[hi] - c2[lo]; };
      auto quad = [&](std::size_t lo, std::size_t hi) {
        return S2(lo, hi) - 2.0 * th * S1(lo, hi) + th * th * W(lo, hi);
      };
      // v < th - kappa: linear, weight 1 - tau
      loss += (1.0 - tau) * (W(0, a) * (th - 0.5 * kappa) - S1(0, a));
      double gi = (1.0 - tau) * W(0, a);
      // th - kappa <= v < th: quadratic, weight 1 - tau
      loss += (1.0 - tau) / (2.0 * kappa) * quad(a, m);
      gi += (1.0 - tau) / kappa * (th * W(a, m) - S1(a, m));
      // th <= v <= th + kappa: quadratic, weight tau
      loss += tau / (2.0 * kappa) * quad(m, c);
      gi += tau / kappa * (th * W(m, c) - S1(m, c));
      // v > th + kappa: linear, weight tau
      loss += tau * (S1(c, e) - W(c, e) * (th + 0.5 * kappa));
      gi -= tau * W(c, e);
      gr[i] += gi;
    }
  }
  return g.record("quantile_huber_batch", Tensor::scalar(loss), {predicted},
                  [grad = std::move(grad)](const Tensor&, const Tensor& og, std::vector<Tensor*>& in) {
                    if (!in[0]) return;
                    for (std::size_t i = 0; i < grad.size(); ++i) (*in[0])[i] += grad[i] * og[0];
                  });
}

Var categorical_kl_batch(Var predicted, std::span<const std::size_t> rows,
                         const std::vector<std::vector<double>>& targets) {
  Graph& g = *predicted.graph;
  const Tensor& p = predicted.value();
  if (p.rank() != 2) throw ShapeError("categorical_kl_batch: predictions must be [R x n]");
  check_rows(rows, p.rows(), targets.size(), "categorical_kl_batch");
  const std::size_t n = p.cols();
  const double inv_b = 1.0 / static_cast<double>(rows.size());
  Tensor weight(p.shape());
  double entropy_term = 0.0;
  for (std::size_t b = 0; b < rows.size(); ++b) {
    if (targets[b].size() != n) throw ShapeError("categorical_kl_batch: target support size mismatch");
    for (std::size_t i = 0; i < n; ++i) {
      const double t = targets[b][i];
      if (t <= 0.0) continue;
      entropy_term += t * std::log(t);
      weight[rows[b] * n + i] += t;
    }
  }
  double cross = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (weight[i] > 0.0) cross += weight[i] * std::log(std::max(p[i], kProbFloor));
  const double loss = inv_b * (entropy_term - cross);
  return g.record("categorical_kl_batch", Tensor::scalar(loss), {predicted},
                  [predicted, weight = std::move(weight), inv_b](const Tensor&, const Tensor& og,
                                                                 std::vector<Tensor*>& in) {
                    if (!in[0]) return;
                    const Tensor& p = predicted.value();
                    for (std::size_t i = 0; i < p.size(); ++i)
                      if (weight[i] > 0.0 && p[i] > kProbFloor) (*in[0])[i] -= inv_b * weight[i] / p[i] * og[0];
                  });
}

}  // namespace dfac::training
