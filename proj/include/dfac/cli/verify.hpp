#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace dfac::cli {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Oracle suite: finite-difference gradients, FFT against direct convolution,
/// projection and loss hand cases, the exponential-mixer counterexample and
/// DIGM checks.
std::vector<CheckResult> run_verify(std::uint64_t seed = 0);

nlohmann::json verify_json(const std::vector<CheckResult>& results);

}  // namespace dfac::cli
