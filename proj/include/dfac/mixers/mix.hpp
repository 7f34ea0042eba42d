#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "dfac/dist/distributions.hpp"
#include "dfac/mixers/mixer.hpp"

namespace dfac::mixers {

double mix_vdn(std::span<const double> q);
double mix_qmix(std::span<const double> q, std::span<const double> state, const Mixer& mixer);
/// q_tables[k][u] are agent k's utilities; the chosen utilities and greedy
/// values are read from them.
double mix_qplex(const std::vector<std::vector<double>>& q_tables, std::span<const std::size_t> actions,
                 std::span<const double> state, const Mixer& mixer);

/// values_out[i] = sum_k (z[k].values[i] - q[k]).
dist::QuantileBatch shape_sum(std::span<const dist::QuantileBatch> z, std::span<const double> q);

/// Shifts a zero-mean shape by psi. Throws DomainError when the shape's
/// estimator mean exceeds 1e-6 in magnitude.
dist::QuantileBatch dfac_mix(double psi, const dist::QuantileBatch& phi);

struct C51Mix {
  dist::CategoricalDist joint;
  bool clipped = false;  // some mass fell outside the support before projection
};

/// Convolves the mean-centred agent distributions, shifts the result by psi
/// and projects it onto the support. Inputs whose atoms share the support's
/// spacing are convolved in index space (directly or by FFT); the sum of such
/// translated lattices is again a translated lattice, so the only projection
/// is the final one. Other inputs use the exact pairwise sum.
C51Mix dfac_mix_c51(double psi, std::span<const dist::CategoricalDist> centered, const dist::UniformSupport& support,
                    bool use_fft);

struct DigmVerdict {
  bool holds = false;
  std::vector<std::size_t> joint_argmax;
  std::vector<std::size_t> agent_argmax;
  double joint_best = 0.0;
  double joint_at_agent_argmax = 0.0;
};

/// Compares the argmax of the joint expectation over every joint action with
/// the tuple of per-agent argmaxes. Joint actions are enumerated
/// lexicographically and both sides break ties towards the lowest index.
DigmVerdict check_digm(const std::vector<std::vector<double>>& agent_q,
                       const std::function<double(std::span<const std::size_t>)>& joint_expectation);

/// All joint actions for the given per-agent action counts, lexicographic.
std::vector<std::vector<std::size_t>> enumerate_joint_actions(std::span<const std::size_t> action_counts);

}  // namespace dfac::mixers
