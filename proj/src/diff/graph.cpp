#include "dfac/diff/graph.hpp"

#include <atomic>

#include "dfac/error.hpp"

namespace dfac::diff {
namespace {

std::uint64_t next_parameter_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

}  // namespace

Parameter::Parameter(std::string name, Tensor value)
    : name_(std::move(name)), id_(next_parameter_id()), value_(std::move(value)), grad_(value_.shape(), 0.0) {}

ParameterSet::ParameterSet(const ParameterSet& other) {
  params_.reserve(other.params_.size());
  for (const auto& p : other.params_) params_.push_back(std::make_unique<Parameter>(p->name(), p->value()));
}

ParameterSet& ParameterSet::operator=(const ParameterSet& other) {
  if (this != &other) {
    ParameterSet copy(other);
    *this = std::move(copy);
  }
  return *this;
}

std::size_t ParameterSet::add(std::string name, Tensor value) {
  if (find(name) != nullptr) throw Error("duplicate parameter name '" + name + "'");
  params_.push_back(std::make_unique<Parameter>(std::move(name), std::move(value)));
  return params_.size() - 1;
}

Parameter* ParameterSet::find(std::string_view name) {
  for (auto& p : params_)
    if (p->name() == name) return p.get();
  return nullptr;
}

const Parameter* ParameterSet::find(std::string_view name) const {
  for (const auto& p : params_)
    if (p->name() == name) return p.get();
  return nullptr;
}

std::vector<Parameter*> ParameterSet::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterSet::all() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

void ParameterSet::copy_values_from(const ParameterSet& other) {
  if (other.size() != size()) throw ShapeError("parameter set sizes differ");
  for (std::size_t i = 0; i < size(); ++i) {
    const Parameter& src = other[i];
    Parameter& dst = *params_[i];
    if (src.name() != dst.name() || src.value().shape() != dst.value().shape())
      throw ShapeError("parameter '" + dst.name() + "' does not match '" + src.name() + "'");
    dst.value() = src.value();
  }
}

const Tensor& Var::value() const {
  if (graph == nullptr) throw StateError("unbound variable");
  return graph->value(*this);
}

void Graph::check_owned(Var v, std::string_view what) const {
  if (v.graph != this) throw StateError(std::string(what) + ": variable belongs to another graph");
  if (v.id >= nodes_.size()) throw StateError(std::string(what) + ": node " + std::to_string(v.id) + " has no forward value");
}

Var Graph::constant(Tensor value) {
  Node n;
  n.op = "constant";
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Graph::param(Parameter& p) {
  Node n;
  n.op = "param:" + p.name();
  n.external = &p.value();
  n.param = &p;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Graph::param(const Parameter& p) {
  Node n;
  n.op = "param:" + p.name();
  n.external = &p.value();
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Graph::record(std::string op, Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  Node n;
  n.op = std::move(op);
  n.value = std::move(value);
  n.inputs.reserve(inputs.size());
  for (const Var& v : inputs) {
    check_owned(v, n.op);
    n.inputs.push_back(v.id);
    n.requires_grad = n.requires_grad || nodes_[v.id].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  if (!n.backward) n.requires_grad = false;
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

const Tensor& Graph::value(Var v) const {
  check_owned(v, "value");
  const Node& n = nodes_[v.id];
  return n.external ? *n.external : n.value;
}

const std::string& Graph::op(Var v) const {
  check_owned(v, "op");
  return nodes_[v.id].op;
}

bool Graph::requires_grad(Var v) const {
  check_owned(v, "requires_grad");
  return nodes_[v.id].requires_grad;
}

void Graph::backward(Var output) {
  check_owned(output, "backward before forward");
  const Tensor& out = value(output);
  if (out.size() != 1)
    throw ShapeError("backward: node " + std::to_string(output.id) + " is not scalar (" + shape_string(out.shape()) +
                     "); pass an output gradient");
  backward(output, Tensor(out.shape(), 1.0));
}

void Graph::backward(Var output, const Tensor& output_grad) {
  check_owned(output, "backward before forward");
  if (output_grad.shape() != value(output).shape())
    throw ShapeError("backward: output gradient shape " + shape_string(output_grad.shape()) + " differs from node " +
                     std::to_string(output.id) + " shape " + shape_string(value(output).shape()));
  std::vector<Tensor> grads(output.id + 1);
  std::vector<bool> has(output.id + 1, false);
  grads[output.id] = output_grad;
  has[output.id] = true;

  std::vector<Tensor*> slots;
  for (std::size_t i = output.id + 1; i-- > 0;) {
    if (!has[i]) continue;
    Node& n = nodes_[i];
    if (!n.requires_grad) continue;
    if (n.param != nullptr) {
      Tensor& g = n.param->grad();
      const Tensor& gi = grads[i];
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += gi[k];
      continue;
    }
    if (!n.backward) continue;
    slots.assign(n.inputs.size(), nullptr);
    for (std::size_t k = 0; k < n.inputs.size(); ++k) {
      const std::size_t in = n.inputs[k];
      if (!nodes_[in].requires_grad) continue;
      if (!has[in]) {
        grads[in] = Tensor(value(Var{this, in}).shape(), 0.0);
        has[in] = true;
      }
      slots[k] = &grads[in];
    }
    // Two inputs referring to the same node share one slot; backward
    // functions accumulate with +=, so that is safe.
    n.backward(n.external ? *n.external : n.value, grads[i], slots);
    grads[i] = Tensor();
  }
}

void Graph::clear() { nodes_.clear(); }

}  // namespace dfac::diff
