#include "dfac/training/replay.hpp"

#include <algorithm>

#include "dfac/error.hpp"

namespace dfac::training {

ReplayBuffer::ReplayBuffer(std::size_t capacity_episodes) : capacity_(capacity_episodes) {
  if (capacity_ == 0) throw DomainError("replay buffer capacity must be positive");
}

void ReplayBuffer::add(Episode episode) {
  if (episode.empty()) throw DomainError("cannot store an empty episode");
  if (!episodes_.empty() && episode.size() != episodes_.front().size()) uniform_length_ = false;
  transitions_ += episode.size();
  episodes_.push_back(std::move(episode));
  if (episodes_.size() > capacity_) {
    transitions_ -= episodes_.front().size();
    episodes_.pop_front();
    ++first_id_;
  }
  dirty_ = true;
}

std::pair<std::size_t, std::size_t> ReplayBuffer::locate(std::uint64_t flat) const {
  if (uniform_length_) {
    const std::size_t len = episodes_.front().size();
    return {flat / len, flat % len};
  }
  if (dirty_) {
    cumulative_.clear();
    std::size_t total = 0;
    for (const auto& e : episodes_) cumulative_.push_back(total += e.size());
    dirty_ = false;
  }
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), flat);
  const std::size_t ep = static_cast<std::size_t>(it - cumulative_.begin());
  const std::size_t start = ep == 0 ? 0 : cumulative_[ep - 1];
  return {ep, flat - start};
}

std::vector<const envs::Transition*> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  if (transitions_ == 0) throw StateError("cannot sample from an empty replay buffer");
  std::vector<const envs::Transition*> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto [ep, step] = locate(rng.uniform_index(transitions_));
    out.push_back(&episodes_[ep][step]);
  }
  return out;
}

std::vector<std::pair<std::uint64_t, std::size_t>> ReplayBuffer::sample_ids(std::size_t n, Rng& rng) const {
  if (transitions_ == 0) throw StateError("cannot sample from an empty replay buffer");
  std::vector<std::pair<std::uint64_t, std::size_t>> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto [ep, step] = locate(rng.uniform_index(transitions_));
    out.emplace_back(first_id_ + ep, step);
  }
  return out;
}

}  // namespace dfac::training
