#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dfac/dist/distributions.hpp"
#include "dfac/envs/matrix_game.hpp"
#include "dfac/mixers/mix.hpp"
#include "dfac/mixers/model.hpp"
#include "json.hpp"

namespace dfac::eval {

struct CellDetail {
  std::vector<std::size_t> action;
  std::string label;
  double mu = 0.0;
  double sigma = 0.0;
  double q_model = 0.0;  // E[Z_jt] (Q_jt for expected methods)
  double psi = 0.0;      // Psi before the shape function
  double w1 = 0.0;
  bool clipped = false;
};

struct MetricsReport {
  double qdist = 0.0;
  double wdist = 0.0;          // averaged over every joint action
  double wdist_optimal = 0.0;  // at the optimal joint action only
  double ret = 0.0;
  std::vector<std::size_t> greedy;
  std::vector<CellDetail> detail;
};

struct EvalOptions {
  std::size_t grid = 10000;         // levels for Q-dist, W-dist and exports
  std::size_t greedy_levels = 32;   // N-hat: levels behind greedy actions and the DIGM audit
};

// Metric kernels on plain per-joint-action values (lexicographic order).
double qdist_from(const std::vector<double>& model_means, const envs::GroundTruth& truth);
double wdist_from(const std::vector<dist::QuantileFn>& model_curves, const envs::GroundTruth& truth, std::size_t grid);
double return_from(const std::vector<std::size_t>& greedy, const envs::MatrixGameSpec& spec);

/// One row per joint action, every agent seeing its reset observation.
mixers::JointBatch all_joint_actions(const envs::MatrixGameSpec& spec);

/// Per-agent expected utilities [agent][action] at the reset observation.
std::vector<std::vector<double>> agent_action_values(const mixers::FactorizedModel& model,
                                                     const envs::MatrixGameSpec& spec, std::size_t levels);
std::vector<std::size_t> greedy_joint_action(const mixers::FactorizedModel& model, const envs::MatrixGameSpec& spec,
                                             std::size_t levels);

double metric_qdist(const mixers::FactorizedModel& model, const envs::MatrixGameSpec& spec, std::size_t grid = 10000);
double metric_wdist(const mixers::FactorizedModel& model, const envs::MatrixGameSpec& spec, std::size_t grid = 10000);
double metric_return(const mixers::FactorizedModel& model, const envs::MatrixGameSpec& spec, std::size_t levels);

MetricsReport evaluate_metrics(const mixers::FactorizedModel& model, const envs::MatrixGameSpec& spec,
                               const EvalOptions& options);

/// DIGM on the enumerable joint action space, both sides estimated with
/// `levels` midpoint levels.
mixers::DigmVerdict audit_digm(const mixers::FactorizedModel& model, const envs::MatrixGameSpec& spec,
                               std::size_t levels);

/// Z_GT, Z_jt and every Z_k for one joint action on the midpoint grid.
nlohmann::json export_factorization(const mixers::FactorizedModel& model, const envs::MatrixGameSpec& spec,
                                    const std::vector<std::size_t>& joint, std::size_t grid);

nlohmann::json to_json(const MetricsReport& report, const envs::MatrixGameSpec& spec);

}  // namespace dfac::eval
