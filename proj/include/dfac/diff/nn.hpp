#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dfac/diff/graph.hpp"
#include "dfac/diff/rng.hpp"

namespace dfac::diff {

/// Binds parameters of a set into a graph. Built from a mutable set the
/// parameters receive gradients; built from a const set they are read-only.
class Params {
 public:
  Params(ParameterSet& set) : mutable_(&set), const_(&set) {}  // NOLINT(google-explicit-constructor)
  Params(const ParameterSet& set) : const_(&set) {}            // NOLINT(google-explicit-constructor)

  Var bind(Graph& g, std::size_t index) const {
    return mutable_ ? g.param((*mutable_)[index]) : g.param((*const_)[index]);
  }
  const ParameterSet& set() const { return *const_; }

 private:
  ParameterSet* mutable_ = nullptr;
  const ParameterSet* const_ = nullptr;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialized dense layer.
struct Linear {
  std::size_t weight = 0;
  std::size_t bias = 0;
  std::size_t in = 0;
  std::size_t out = 0;

  static Linear create(ParameterSet& set, const std::string& name, std::size_t in, std::size_t out, Rng& rng);
  Var operator()(Graph& g, Params p, Var x) const;
};

/// Stack of Linear layers with ReLU between them. `relu_output` also applies
/// ReLU after the final layer.
struct Mlp {
  std::vector<Linear> layers;
  bool relu_output = false;

  static Mlp create(ParameterSet& set, const std::string& name, std::size_t in, const std::vector<std::size_t>& widths,
                    bool relu_output, Rng& rng);
  Var operator()(Graph& g, Params p, Var x) const;
  std::size_t out() const { return layers.back().out; }
};

}  // namespace dfac::diff
