#include "dfac/training/learner.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "dfac/agents/agent.hpp"
#include "dfac/diff/ops.hpp"
#include "dfac/error.hpp"
#include "dfac/training/losses.hpp"

namespace dfac::training {

using agents::HeadKind;
using diff::Shape;
using diff::Tensor;
using mixers::FactorizedModel;
using mixers::JointBatch;

// --- batching -------------------------------------------------------------------

JointBatchBuilder::JointBatchBuilder(std::size_t n_agents, std::size_t obs_dim, std::size_t state_dim)
    : n_agents_(n_agents), obs_dim_(obs_dim), state_dim_(state_dim) {}

std::size_t JointBatchBuilder::observation(std::span<const double> obs) {
  if (obs.size() != obs_dim_)
    throw ShapeError("observation has " + std::to_string(obs.size()) + " features, expected " + std::to_string(obs_dim_));
  std::vector<double> key(obs.begin(), obs.end());
  auto [it, inserted] = obs_ids_.try_emplace(key, obs_table_.size());
  if (inserted) obs_table_.push_back(std::move(key));
  return it->second;
}

std::size_t JointBatchBuilder::add(const std::vector<std::vector<double>>& obs, std::span<const double> state,
                                   std::span<const std::size_t> actions) {
  if (obs.size() != n_agents_ || actions.size() != n_agents_) throw ShapeError("joint row needs one entry per agent");
  if (state.size() != state_dim_) throw ShapeError("joint row state has the wrong size");
  std::vector<double> key;
  key.reserve(2 * n_agents_ + state_dim_);
  for (const auto& o : obs) key.push_back(static_cast<double>(observation(o)));
  for (std::size_t a : actions) key.push_back(static_cast<double>(a));
  key.insert(key.end(), state.begin(), state.end());
  auto [it, inserted] = row_ids_.try_emplace(key, row_keys_.size());
  if (inserted) row_keys_.push_back(std::move(key));
  return it->second;
}

JointBatch JointBatchBuilder::build() const {
  JointBatch b;
  b.observations = Tensor(Shape{obs_table_.size(), obs_dim_});
  for (std::size_t u = 0; u < obs_table_.size(); ++u)
    for (std::size_t c = 0; c < obs_dim_; ++c) b.observations.at(u, c) = obs_table_[u][c];
  b.states = Tensor(Shape{row_keys_.size(), state_dim_});
  for (std::size_t r = 0; r < row_keys_.size(); ++r) {
    const auto& key = row_keys_[r];
    for (std::size_t a = 0; a < n_agents_; ++a) {
      b.obs_index.push_back(static_cast<std::size_t>(key[a]));
      b.actions.push_back(static_cast<std::size_t>(key[n_agents_ + a]));
    }
    for (std::size_t c = 0; c < state_dim_; ++c) b.states.at(r, c) = key[2 * n_agents_ + c];
  }
  return b;
}

// --- acting -----------------------------------------------------------------------

Episode collect_episode(const envs::MatrixGameSpec& spec, const FactorizedModel& model, double epsilon,
                        Rng& explore_rng, Rng& env_rng, std::size_t greedy_levels) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw DomainError("epsilon must lie in [0, 1]");
  const auto obs = envs::reset(spec);
  const std::size_t k = spec.agents, a_count = spec.actions.front().size();
  std::vector<std::size_t> joint(k);
  Tensor values;
  bool have_values = false;
  for (std::size_t a = 0; a < k; ++a) {
    if (explore_rng.uniform() < epsilon) {
      joint[a] = static_cast<std::size_t>(explore_rng.uniform_index(spec.actions[a].size()));
      continue;
    }
    if (!have_values) {
      Tensor o(Shape{k, spec.obs_dim()});
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t c = 0; c < spec.obs_dim(); ++c) o.at(i, c) = obs[i][c];
      values = model.action_values(o, dist::midpoint_levels(greedy_levels));
      have_values = true;
    }
    std::vector<double> q(a_count);
    for (std::size_t u = 0; u < a_count; ++u) q[u] = values.at(a, u);
    joint[a] = agents::greedy_action(q);
  }
  Episode ep;
  ep.push_back(envs::step(spec, joint, env_rng));
  return ep;
}

// --- targets ----------------------------------------------------------------------

namespace {

struct NextValues {
  std::vector<std::size_t> row;                  // per sample; unused for terminal samples
  std::vector<mixers::JointEstimate> estimates;  // per distinct next row
};

NextValues evaluate_next(std::span<const envs::Transition* const> batch, const FactorizedModel& target,
                         std::span<const double> levels) {
  const auto& c = target.config();
  NextValues nv;
  nv.row.assign(batch.size(), 0);
  JointBatchBuilder obs_builder(c.n_agents, c.obs_dim, c.state_dim);
  bool any = false;
  for (const auto* t : batch)
    if (!t->done) {
      any = true;
      for (const auto& o : t->next_obs) obs_builder.observation(o);
    }
  if (!any) return nv;
  const JointBatch obs_only = obs_builder.build();
  const Tensor values = target.action_values(obs_only.observations, levels);
  JointBatchBuilder rows(c.n_agents, c.obs_dim, c.state_dim);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto* t = batch[b];
    if (t->done) continue;
    std::vector<std::size_t> greedy;
    for (const auto& o : t->next_obs) {
      const std::size_t u = obs_builder.observation(o);
      std::vector<double> q(values.cols());
      for (std::size_t a = 0; a < q.size(); ++a) q[a] = values.at(u, a);
      greedy.push_back(agents::greedy_action(q));
    }
    nv.row[b] = rows.add(t->next_obs, t->next_state, greedy);
  }
  nv.estimates = target.evaluate(rows.build(), levels);
  return nv;
}

}  // namespace

std::vector<double> td_target_expected(std::span<const envs::Transition* const> batch, const FactorizedModel& target,
                                       double gamma) {
  const NextValues nv = evaluate_next(batch, target, {});
  std::vector<double> y(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b)
    y[b] = batch[b]->reward + (batch[b]->done ? 0.0 : gamma * nv.estimates[nv.row[b]].expectation);
  return y;
}

std::vector<std::vector<double>> td_target_quantile(std::span<const envs::Transition* const> batch,
                                                    const FactorizedModel& target, double gamma,
                                                    std::span<const double> target_levels) {
  if (target_levels.empty()) throw ShapeError("quantile targets need at least one level");
  const NextValues nv = evaluate_next(batch, target, target_levels);
  std::vector<std::vector<double>> out(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const double r = batch[b]->reward;
    if (batch[b]->done) {
      out[b].assign(target_levels.size(), r);
      continue;
    }
    const auto& e = nv.estimates[nv.row[b]];
    if (!e.quantiles) throw StateError("quantile targets need a quantile model");
    for (double v : e.quantiles->values) out[b].push_back(r + gamma * v);
  }
  return out;
}

std::vector<dist::CategoricalDist> td_target_c51(std::span<const envs::Transition* const> batch,
                                                 const FactorizedModel& target, double gamma,
                                                 const dist::UniformSupport& support) {
  const NextValues nv = evaluate_next(batch, target, {});
  std::vector<dist::CategoricalDist> out;
  out.reserve(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const double r = batch[b]->reward;
    if (batch[b]->done) {
      const double at[] = {r};
      const double one[] = {1.0};
      out.push_back(dist::project_categorical(at, one, support));
      continue;
    }
    const auto& e = nv.estimates[nv.row[b]];
    if (!e.pmf) throw StateError("categorical targets need a categorical model");
    std::vector<double> atoms = e.pmf->atoms;
    for (double& a : atoms) a = r + gamma * a;
    out.push_back(dist::project_categorical(atoms, e.pmf->probs, support));
  }
  return out;
}

// --- learner ----------------------------------------------------------------------

namespace {

FactorizedModel make_model(const TrainConfig& config, const envs::MatrixGameSpec& spec, const Rng& root) {
  Rng init = root.derive("init");
  return FactorizedModel(model_config(config, spec), init);
}

}  // namespace

Learner::Learner(TrainConfig config, envs::MatrixGameSpec spec)
    : config_((config.validate(), std::move(config))),
      spec_(std::move(spec)),
      gamma_(config_.gamma.value_or(spec_.discount)),
      root_(config_.seed),
      explore_(root_.derive("explore")),
      env_(root_.derive("env")),
      learner_(root_.derive("learner")),
      model_(make_model(config_, spec_, root_)),
      target_(model_),
      buffer_(config_.buffer_episodes),
      adam_(config_.learning_rate) {}

Episode Learner::collect_episode() {
  return training::collect_episode(spec_, model_, config_.epsilon, explore_, env_, config_.n_eval_quantiles);
}

bool Learner::ready() const {
  return buffer_.transitions() > 0 && buffer_.transitions() >= std::min(config_.batch_size, buffer_.capacity());
}

double Learner::train_step() {
  const auto batch = buffer_.sample(config_.batch_size, learner_);
  return step_on(batch);
}

void Learner::update_target() { target_.copy_values_from(model_); }

double Learner::step_on(std::span<const envs::Transition* const> batch) {
  const auto& mc = model_.config();
  JointBatchBuilder builder(mc.n_agents, mc.obs_dim, mc.state_dim);
  std::vector<std::size_t> rows;
  rows.reserve(batch.size());
  for (const auto* t : batch) rows.push_back(builder.add(t->obs, t->state, t->actions));
  const JointBatch jb = builder.build();

  const HeadKind head = model_.agent().config().head;
  std::vector<double> levels;
  if (head == HeadKind::Quantile)
    for (std::size_t i = 0; i < config_.n_quantiles; ++i) levels.push_back(learner_.uniform());

  diff::Graph g;
  const mixers::JointForward f = model_.forward(g, model_.agent().params(), model_.mixer().params(), jb, levels);
  diff::Var loss;
  if (head == HeadKind::Expected) {
    loss = squared_td_loss(f.q_jt, rows, td_target_expected(batch, target_, gamma_));
  } else if (head == HeadKind::Quantile) {
    std::vector<double> target_levels;
    for (std::size_t j = 0; j < config_.n_target_quantiles; ++j) target_levels.push_back(learner_.uniform());
    loss = quantile_huber_batch(f.joint, levels, rows, td_target_quantile(batch, target_, gamma_, target_levels),
                                config_.kappa);
  } else {
    std::vector<std::vector<double>> targets;
    for (auto& d : td_target_c51(batch, target_, gamma_, mc.support)) targets.push_back(std::move(d.probs));
    loss = categorical_kl_batch(f.joint, rows, targets);
  }
  const double value = loss.value().item();
  if (!std::isfinite(value)) throw Error("non-finite loss");
  g.backward(loss);
  const auto params = model_.parameters();
  adam_.step(params);
  ++steps_;
  return value;
}

// --- loop -------------------------------------------------------------------------

TrainResult train(const TrainConfig& config, const envs::MatrixGameSpec& spec, const ProgressFn& progress) {
  Learner learner(config, spec);
  const eval::EvalOptions options{config.metric_grid, config.n_eval_quantiles};
  std::vector<LogRow> log;
  std::vector<DigmRecord> digm;
  double loss_sum = 0.0;
  std::size_t loss_count = 0;
  eval::MetricsReport last;
  bool have_last = false;
  for (std::size_t e = 1; e <= config.episodes; ++e) {
    learner.observe(learner.collect_episode());
    if (learner.ready()) {
      double loss = 0.0;
      try {
        loss = learner.train_step();
      } catch (const Error& err) {
        throw Error("training diverged at episode " + std::to_string(e) + ": " + err.what());
      }
      loss_sum += loss;
      ++loss_count;
    }
    if (e % config.target_update_period == 0) learner.update_target();
    if (e % config.eval_interval == 0 || e == config.episodes) {
      last = eval::evaluate_metrics(learner.model(), spec, options);
      have_last = e == config.episodes;
      LogRow row{e, loss_count ? loss_sum / static_cast<double>(loss_count) : std::numeric_limits<double>::quiet_NaN(),
                 last.ret, last.qdist, last.wdist};
      const auto verdict = eval::audit_digm(learner.model(), spec, config.n_eval_quantiles);
      DigmRecord rec{e, verdict.holds, verdict.joint_argmax, verdict.agent_argmax};
      log.push_back(row);
      digm.push_back(rec);
      if (progress) progress(row, rec);
      loss_sum = 0.0;
      loss_count = 0;
    }
  }
  if (!have_last) last = eval::evaluate_metrics(learner.model(), spec, options);
  return TrainResult{learner.model(), std::move(log), std::move(digm), std::move(last), learner.steps()};
}

void write_log_csv(const std::vector<LogRow>& log, std::ostream& out) {
  out << "episode,loss,return,qdist,wdist\n";
  char buf[256];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%.10g,%.10g\n", r.episode, r.loss, r.ret, r.qdist, r.wdist);
    out << buf;
  }
}

// --- checkpoints ------------------------------------------------------------------

nlohmann::json checkpoint_json(const TrainConfig& config, const FactorizedModel& model) {
  const auto& c = model.config();
  return {{"method", mixers::method_id(config.method)},
          {"seed", config.seed},
          {"dims", {{"agents", c.n_agents}, {"actions", c.n_actions}, {"obs_dim", c.obs_dim}, {"state_dim", c.state_dim}}},
          {"config", to_json(config)},
          {"params", model.params_json()}};
}

FactorizedModel load_checkpoint(const nlohmann::json& j, const envs::MatrixGameSpec& spec, TrainConfig* config_out) {
  for (const char* key : {"method", "config", "params", "dims"})
    if (!j.is_object() || !j.contains(key)) throw FormatError(std::string("checkpoint field '") + key + "' missing");
  const TrainConfig config = train_config_from_json(j.at("config"));
  if (mixers::method_id(config.method) != j.at("method").get<std::string>())
    throw FormatError("checkpoint field 'method' disagrees with its config");
  const mixers::ModelConfig mc = model_config(config, spec);
  const auto& dims = j.at("dims");
  const std::pair<const char*, std::size_t> expected[] = {
      {"agents", mc.n_agents}, {"actions", mc.n_actions}, {"obs_dim", mc.obs_dim}, {"state_dim", mc.state_dim}};
  for (const auto& [name, value] : expected) {
    if (!dims.contains(name) || !(dims.at(name).is_number_integer() && dims.at(name).get<long long>() >= 0))
      throw FormatError(std::string("checkpoint field 'dims.") + name + "' missing");
    if (dims.at(name).get<std::size_t>() != value)
      throw FormatError(std::string("checkpoint field 'dims.") + name + "' is " +
                        std::to_string(dims.at(name).get<std::size_t>()) + " but the game needs " + std::to_string(value));
  }
  Rng init(0);
  FactorizedModel model(mc, init);
  model.load_params_json(j.at("params"));
  if (config_out) *config_out = config;
  return model;
}

}  // namespace dfac::training
