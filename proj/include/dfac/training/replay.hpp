#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <vector>

#include "dfac/diff/rng.hpp"
#include "dfac/envs/matrix_game.hpp"

namespace dfac::training {

using Episode = std::vector<envs::Transition>;

/// Ring buffer of whole episodes; sampling is uniform over the stored
/// transitions, with replacement.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity_episodes);

  void add(Episode episode);
  std::size_t capacity() const { return capacity_; }
  std::size_t episodes() const { return episodes_.size(); }
  std::size_t transitions() const { return transitions_; }
  /// Id of the oldest stored episode; ids count every episode ever added.
  std::uint64_t first_episode_id() const { return first_id_; }

  /// Throws StateError when empty.
  std::vector<const envs::Transition*> sample(std::size_t n, Rng& rng) const;
  /// Same draw as sample() but reporting (episode id, step) pairs.
  std::vector<std::pair<std::uint64_t, std::size_t>> sample_ids(std::size_t n, Rng& rng) const;

 private:
  std::pair<std::size_t, std::size_t> locate(std::uint64_t flat) const;

  std::size_t capacity_;
  std::deque<Episode> episodes_;
  std::uint64_t first_id_ = 0;
  std::size_t transitions_ = 0;
  bool uniform_length_ = true;
  mutable std::vector<std::size_t> cumulative_;
  mutable bool dirty_ = true;
};

}  // namespace dfac::training
