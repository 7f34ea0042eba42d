#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "dfac/diff/adam.hpp"
#include "dfac/diff/rng.hpp"
#include "dfac/envs/matrix_game.hpp"
#include "dfac/eval/metrics.hpp"
#include "dfac/mixers/model.hpp"
#include "dfac/training/config.hpp"
#include "dfac/training/replay.hpp"
#include "json.hpp"

namespace dfac::training {

/// Collects joint rows, storing each distinct agent observation and each
/// distinct (observations, state, actions) row once.
class JointBatchBuilder {
 public:
  JointBatchBuilder(std::size_t n_agents, std::size_t obs_dim, std::size_t state_dim);
  std::size_t add(const std::vector<std::vector<double>>& obs, std::span<const double> state,
                  std::span<const std::size_t> actions);
  /// Index of an agent observation in the observation table.
  std::size_t observation(std::span<const double> obs);
  mixers::JointBatch build() const;
  std::size_t rows() const { return row_keys_.size(); }

 private:
  std::size_t n_agents_, obs_dim_, state_dim_;
  std::map<std::vector<double>, std::size_t> obs_ids_;
  std::vector<std::vector<double>> obs_table_;
  std::map<std::vector<double>, std::size_t> row_ids_;
  std::vector<std::vector<double>> row_keys_;  // obs ids, actions, then state
};

/// Independent epsilon-greedy episode. Every agent draws one uniform to
/// decide whether to explore and, if so, one uniform action index; rewards
/// come from `env_rng`. Greedy actions use `greedy_levels` midpoint levels.
Episode collect_episode(const envs::MatrixGameSpec& spec, const mixers::FactorizedModel& model, double epsilon,
                        Rng& explore_rng, Rng& env_rng, std::size_t greedy_levels);

/// y = r + gamma Q_jt(s', u'*) with u'* the per-agent greedy actions of the
/// target model; terminal samples give y = r.
std::vector<double> td_target_expected(std::span<const envs::Transition* const> batch,
                                       const mixers::FactorizedModel& target, double gamma);
/// One row of N' values per sample: r + gamma Z_jt(s', u'* | level_j).
std::vector<std::vector<double>> td_target_quantile(std::span<const envs::Transition* const> batch,
                                                    const mixers::FactorizedModel& target, double gamma,
                                                    std::span<const double> target_levels);
/// Projection of r + gamma Z_jt(s', u'*) onto the support.
std::vector<dist::CategoricalDist> td_target_c51(std::span<const envs::Transition* const> batch,
                                                 const mixers::FactorizedModel& target, double gamma,
                                                 const dist::UniformSupport& support);

struct LogRow {
  std::size_t episode = 0;
  double loss = 0.0;  // mean training loss since the previous row (NaN before training starts)
  double ret = 0.0;
  double qdist = 0.0;
  double wdist = 0.0;
};

struct DigmRecord {
  std::size_t episode = 0;
  bool holds = false;
  std::vector<std::size_t> joint_argmax;
  std::vector<std::size_t> agent_argmax;
};

/// Owns the live model, its target snapshot, the replay buffer and the
/// optimizer of one run. RNG streams: "init" (weights), "explore" (epsilon
/// draws), "env" (rewards), "learner" (batches and quantile levels).
class Learner {
 public:
  Learner(TrainConfig config, envs::MatrixGameSpec spec);

  const TrainConfig& config() const { return config_; }
  const envs::MatrixGameSpec& spec() const { return spec_; }
  mixers::FactorizedModel& model() { return model_; }
  const mixers::FactorizedModel& model() const { return model_; }
  const mixers::FactorizedModel& target() const { return target_; }
  ReplayBuffer& buffer() { return buffer_; }
  double gamma() const { return gamma_; }

  Episode collect_episode();
  void observe(Episode episode) { buffer_.add(std::move(episode)); }
  /// Training starts once the buffer holds min(batch size, capacity) transitions.
  bool ready() const;
  /// One gradient step on a freshly sampled batch; returns the loss.
  double train_step();
  void update_target();
  std::size_t steps() const { return steps_; }

 private:
  double step_on(std::span<const envs::Transition* const> batch);

  TrainConfig config_;
  envs::MatrixGameSpec spec_;
  double gamma_;
  Rng root_, explore_, env_, learner_;
  mixers::FactorizedModel model_;
  mixers::FactorizedModel target_;
  ReplayBuffer buffer_;
  diff::Adam adam_;
  std::size_t steps_ = 0;
};

struct TrainResult {
  mixers::FactorizedModel model;
  std::vector<LogRow> log;
  std::vector<DigmRecord> digm;
  eval::MetricsReport final_metrics;
  std::size_t steps = 0;
};

using ProgressFn = std::function<void(const LogRow&, const DigmRecord&)>;

/// Collect, store, learn, refresh the target every period, and evaluate every
/// `eval_interval` episodes and at the last episode. Throws Error naming the
/// episode when the loss becomes non-finite.
TrainResult train(const TrainConfig& config, const envs::MatrixGameSpec& spec, const ProgressFn& progress = {});

void write_log_csv(const std::vector<LogRow>& log, std::ostream& out);

/// {"method", "seed", "config", "params"}
nlohmann::json checkpoint_json(const TrainConfig& config, const mixers::FactorizedModel& model);
/// Rebuilds the model of a checkpoint for `spec`; dimension mismatches throw
/// FormatError naming the field.
mixers::FactorizedModel load_checkpoint(const nlohmann::json& j, const envs::MatrixGameSpec& spec,
                                        TrainConfig* config_out = nullptr);

}  // namespace dfac::training
