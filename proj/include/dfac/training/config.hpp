#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "dfac/dist/distributions.hpp"
#include "dfac/envs/matrix_game.hpp"
#include "dfac/mixers/method.hpp"
#include "dfac/mixers/model.hpp"
#include "json.hpp"

namespace dfac::training {

struct TrainConfig {
  mixers::Method method = mixers::Method::Vdn;
  double learning_rate = 1e-4;
  std::size_t batch_size = 512;
  std::size_t episodes = 20000;
  std::size_t target_update_period = 100;  // episodes
  double epsilon = 1.0;
  std::size_t buffer_episodes = 2000;
  std::size_t n_quantiles = 32;            // N, levels per prediction
  std::size_t n_target_quantiles = 32;     // N', levels per target
  std::size_t n_eval_quantiles = 32;       // N-hat, levels behind greedy actions
  double kappa = 1.0;
  dist::UniformSupport support{-20.0, 20.0, 51};
  std::vector<std::size_t> agent_hidden{64, 512};
  std::size_t cos_features = 64;
  std::vector<std::size_t> embed_hidden{64};
  std::size_t mixer_embed = 8;
  std::size_t attention_heads = 10;
  std::size_t attention_hidden = 64;
  std::optional<double> gamma;             // defaults to the game's discount
  std::uint64_t seed = 0;
  std::size_t eval_interval = 200;         // episodes between logged evaluations
  std::size_t metric_grid = 10000;

  /// Per-method hyperparameters for the matrix game.
  static TrainConfig defaults(mixers::Method method);
  /// Throws DomainError naming the offending field.
  void validate() const;
};

mixers::ModelConfig model_config(const TrainConfig& config, const envs::MatrixGameSpec& spec);

nlohmann::json to_json(const TrainConfig& config);
/// Starts from the method defaults and applies the given fields. Unknown keys
/// throw FormatError.
TrainConfig train_config_from_json(const nlohmann::json& j);
/// Field names accepted by train_config_from_json.
const std::vector<std::string>& train_config_keys();

}  // namespace dfac::training
