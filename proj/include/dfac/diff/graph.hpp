#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "dfac/diff/tensor.hpp"

namespace dfac::diff {

/// A trainable array with its accumulated gradient.
class Parameter {
 public:
  Parameter(std::string name, Tensor value);

  const std::string& name() const { return name_; }
  std::uint64_t id() const { return id_; }
  Tensor& value() { return value_; }
  const Tensor& value() const { return value_; }
  Tensor& grad() { return grad_; }
  const Tensor& grad() const { return grad_; }
  void zero_grad() { grad_.fill(0.0); }

 private:
  std::string name_;
  std::uint64_t id_;
  Tensor value_;
  Tensor grad_;
};

/// Ordered, owning collection of named parameters. Copies are deep and get
/// fresh parameter ids, which is what target-network snapshots need.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet& other);
  ParameterSet& operator=(const ParameterSet& other);
  ParameterSet(ParameterSet&&) noexcept = default;
  ParameterSet& operator=(ParameterSet&&) noexcept = default;

  /// Adds a parameter and returns its index.
  std::size_t add(std::string name, Tensor value);

  Parameter& operator[](std::size_t index) { return *params_[index]; }
  const Parameter& operator[](std::size_t index) const { return *params_[index]; }
  Parameter* find(std::string_view name);
  const Parameter* find(std::string_view name) const;

  std::size_t size() const { return params_.size(); }
  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;

  void zero_grad();
  /// Hard copy of every value; names and shapes must match.
  void copy_values_from(const ParameterSet& other);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

class Graph;

/// Handle to a node of a Graph.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Define-by-run reverse-mode tape. Nodes are appended in evaluation order, so
/// the node list is always topologically sorted and acyclic.
class Graph {
 public:
  /// Receives the node's output value and gradient, and one slot per input;
  /// slots of inputs that need no gradient are null.
  using BackwardFn = std::function<void(const Tensor& out, const Tensor& out_grad, std::vector<Tensor*>& in_grads)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  /// Leaf whose gradient is accumulated into `p.grad()` by backward().
  Var param(Parameter& p);
  /// Read-only leaf: no gradient flows to the parameter.
  Var param(const Parameter& p);

  /// Appends an operation node. `backward` may be empty for non-differentiable
  /// operations.
  Var record(std::string op, Tensor value, std::vector<Var> inputs, BackwardFn backward);

  const Tensor& value(Var v) const;
  const std::string& op(Var v) const;
  std::size_t size() const { return nodes_.size(); }
  std::size_t next_id() const { return nodes_.size(); }
  bool requires_grad(Var v) const;

  /// Backpropagates from a scalar output.
  void backward(Var output);
  /// Backpropagates with an explicit output gradient of the output's shape.
  void backward(Var output, const Tensor& output_grad);

  /// Releases cached activations; later backward() calls are rejected.
  void clear();

 private:
  struct Node {
    std::string op;
    Tensor value;
    const Tensor* external = nullptr;
    Parameter* param = nullptr;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };

  void check_owned(Var v, std::string_view what) const;

  std::vector<Node> nodes_;
};

}  // namespace dfac::diff
