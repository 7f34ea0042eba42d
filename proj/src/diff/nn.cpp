#include "dfac/diff/nn.hpp"

#include <cmath>

#include "dfac/diff/ops.hpp"
#include "dfac/error.hpp"

namespace dfac::diff {

Linear Linear::create(ParameterSet& set, const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  if (in == 0 || out == 0) throw ShapeError("layer '" + name + "' needs positive sizes");
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Tensor w(Shape{in, out});
  for (double& v : w.values()) v = bound * (2.0 * rng.uniform() - 1.0);
  Tensor b(Shape{out});
  for (double& v : b.values()) v = bound * (2.0 * rng.uniform() - 1.0);
  Linear layer;
  layer.weight = set.add(name + ".weight", std::move(w));
  layer.bias = set.add(name + ".bias", std::move(b));
  layer.in = in;
  layer.out = out;
  return layer;
}

Var Linear::operator()(Graph& g, Params p, Var x) const {
  return affine(x, p.bind(g, weight), p.bind(g, bias));
}

Mlp Mlp::create(ParameterSet& set, const std::string& name, std::size_t in, const std::vector<std::size_t>& widths,
                bool relu_output, Rng& rng) {
  if (widths.empty()) throw ShapeError("mlp '" + name + "' needs at least one layer");
  Mlp mlp;
  mlp.relu_output = relu_output;
  std::size_t fan_in = in;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    mlp.layers.push_back(Linear::create(set, name + "." + std::to_string(i), fan_in, widths[i], rng));
    fan_in = widths[i];
  }
  return mlp;
}

Var Mlp::operator()(Graph& g, Params p, Var x) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = layers[i](g, p, x);
    if (i + 1 < layers.size() || relu_output) x = relu(x);
  }
  return x;
}

}  // namespace dfac::diff
