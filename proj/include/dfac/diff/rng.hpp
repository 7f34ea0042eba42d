#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace dfac {

/// Splittable xoshiro256** generator. Every stochastic draw in a run comes
/// from streams derived by name from one root seed, so draws are identical
/// across platforms and independent of the order in which streams are made.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  /// Child stream keyed by `name`; does not advance this stream.
  Rng derive(std::string_view name) const;

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on the open interval (0, 1).
  double uniform_open();
  /// Uniform integer on [0, n); n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace dfac
