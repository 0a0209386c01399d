#pragma once

#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "omnilab/numcore/tensor.hpp"

namespace omnilab::num {

/// A trainable tensor together with its accumulated gradient.
template <class T>
struct BasicParameter {
  std::string name;
  BasicTensor<T> value;
  BasicTensor<T> grad;

  BasicParameter(std::string n, BasicTensor<T> v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape(), T(0)) {}
};

/// Owns parameters in declaration order. Addresses are stable for the
/// lifetime of the set, so graphs and optimizers may hold references.
template <class T>
class BasicParameterSet {
 public:
  BasicParameterSet() = default;
  BasicParameterSet(const BasicParameterSet&) = delete;
  BasicParameterSet& operator=(const BasicParameterSet&) = delete;
  BasicParameterSet(BasicParameterSet&&) noexcept = default;
  BasicParameterSet& operator=(BasicParameterSet&&) noexcept = default;

  BasicParameter<T>& add(std::string name, BasicTensor<T> value) {
    if (index_.count(name)) {
      throw std::invalid_argument("duplicate parameter name: " + name);
    }
    index_[name] = params_.size();
    params_.push_back(
        std::make_unique<BasicParameter<T>>(std::move(name), std::move(value)));
    return *params_.back();
  }

  BasicParameter<T>& at(const std::string& name) {
    return *params_.at(lookup(name));
  }
  const BasicParameter<T>& at(const std::string& name) const {
    return *params_.at(lookup(name));
  }
  bool contains(const std::string& name) const { return index_.count(name); }

  std::size_t size() const noexcept { return params_.size(); }
  BasicParameter<T>& operator[](std::size_t i) { return *params_[i]; }
  const BasicParameter<T>& operator[](std::size_t i) const {
    return *params_[i];
  }

  std::int64_t element_count() const {
    std::int64_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p->grad.fill(T(0));
  }

  /// Deep copy with element type converted (used by finite-difference
  /// checks that evaluate the same model in double precision).
  template <class U>
  BasicParameterSet<U> cast() const {
    BasicParameterSet<U> out;
    for (const auto& p : params_) out.add(p->name, p->value.template cast<U>());
    return out;
  }

 private:
  std::size_t lookup(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
      throw std::out_of_range("unknown parameter: " + name);
    }
    return it->second;
  }

  std::vector<std::unique_ptr<BasicParameter<T>>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

template <class T>
class BasicGraph;

/// Handle to a node in a graph.
template <class T>
struct BasicVar {
  BasicGraph<T>* graph = nullptr;
  int id = -1;

  const BasicTensor<T>& value() const { return graph->value(*this); }
  const Shape& shape() const { return value().shape(); }
  std::int64_t dim(int axis) const { return value().dim(axis); }
};

/// Define-by-run tape. Nodes are appended in evaluation order, which is a
/// valid topological order; `backward` walks it once in reverse.
template <class T>
class BasicGraph {
 public:
  using TensorT = BasicTensor<T>;
  using Var = BasicVar<T>;
  using BackwardFn = std::function<void(BasicGraph&, int)>;

  BasicGraph() = default;
  BasicGraph(const BasicGraph&) = delete;
  BasicGraph& operator=(const BasicGraph&) = delete;

  Var constant(TensorT value, std::string label = {}) {
    return record("constant", {}, std::move(value), nullptr, std::move(label));
  }

  /// Leaf bound to a parameter; backward accumulates into `p.grad`. With
  /// gradients disabled the parameter is recorded as a plain constant.
  Var param(BasicParameter<T>& p) {
    Var v = record("param", {}, p.value, nullptr, p.name);
    Node& n = nodes_[static_cast<std::size_t>(v.id)];
    n.param = &p;
    n.requires_grad = grad_enabled_;
    return v;
  }

  const TensorT& value(Var v) const { return node(v.id).value; }

  /// Gradient of the last `backward` root with respect to `v`.
  const TensorT& grad(Var v) const {
    const Node& n = node(v.id);
    if (!n.has_grad) {
      throw std::logic_error("no gradient recorded for node " + name(v.id));
    }
    return n.grad;
  }

  bool has_grad(Var v) const { return node(v.id).has_grad; }

  void backward(Var root) {
    Node& r = node_mut(root.id);
    if (r.value.size() != 1) {
      throw ShapeError(name(root.id),
                       "backward root must hold one element, got shape " +
                           shape_str(r.value.shape()));
    }
    for (auto& n : nodes_) {
      n.has_grad = false;
    }
    accum_grad(root.id).fill(T(1));
    for (int id = root.id; id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (!n.has_grad || !n.requires_grad) continue;
      if (n.param) {
        auto dst = n.param->grad.data();
        auto src = n.grad.data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
      } else if (n.backward) {
        n.backward(*this, id);
      }
    }
  }

  std::size_t size() const noexcept { return nodes_.size(); }
  void set_check_finite(bool on) noexcept { check_finite_ = on; }
  /// Inference graphs skip recording backward closures entirely.
  void set_grad_enabled(bool on) noexcept { grad_enabled_ = on; }

  // -- op authoring interface ---------------------------------------------

  /// Name used in errors for the node that would be created next.
  std::string next_name(std::string_view op) const {
    return std::string(op) + "#" + std::to_string(nodes_.size());
  }

  std::string name(int id) const {
    const Node& n = node(id);
    std::string s = n.op + "#" + std::to_string(id);
    if (!n.label.empty()) s += " (" + n.label + ")";
    return s;
  }

  Var record(std::string_view op, std::vector<int> inputs, TensorT value,
             BackwardFn backward, std::string label = {}) {
    const int id = static_cast<int>(nodes_.size());
    if (check_finite_ && !value.all_finite()) {
      std::string who = std::string(op) + "#" + std::to_string(id);
      if (!label.empty()) who += " (" + label + ")";
      throw NumericError(who, "non-finite value in forward output");
    }
    Node n;
    n.op = std::string(op);
    n.label = std::move(label);
    n.value = std::move(value);
    for (int in : inputs) {
      if (nodes_[static_cast<std::size_t>(in)].requires_grad) {
        n.requires_grad = true;
      }
    }
    n.inputs = std::move(inputs);
    if (n.requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var{this, id};
  }

  bool requires_grad(int id) const { return node(id).requires_grad; }

  /// Gradient buffer of node `id`, zero-initialised on first access
  /// within a backward pass.
  TensorT& accum_grad(int id) {
    Node& n = node_mut(id);
    if (!n.has_grad) {
      if (n.grad.shape() != n.value.shape()) {
        n.grad = TensorT(n.value.shape());
      } else {
        n.grad.fill(T(0));
      }
      n.has_grad = true;
    }
    return n.grad;
  }

  const TensorT& grad_of(int id) const { return node(id).grad; }
  const TensorT& value_of(int id) const { return node(id).value; }
  int input(int id, std::size_t k) const {
    return node(id).inputs.at(k);
  }

 private:
  struct Node {
    std::string op;
    std::string label;
    std::vector<int> inputs;
    TensorT value;
    TensorT grad;
    BackwardFn backward;
    BasicParameter<T>* param = nullptr;
    bool requires_grad = false;
    bool has_grad = false;
  };

  const Node& node(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
      throw std::out_of_range("invalid node id " + std::to_string(id));
    }
    return nodes_[static_cast<std::size_t>(id)];
  }
  Node& node_mut(int id) {
    return const_cast<Node&>(static_cast<const BasicGraph&>(*this).node(id));
  }

  std::vector<Node> nodes_;
  bool check_finite_ = true;
  bool grad_enabled_ = true;
};

using Parameter = BasicParameter<float>;
using ParameterSet = BasicParameterSet<float>;
using Graph = BasicGraph<float>;
using Var = BasicVar<float>;

}  // namespace omnilab::num
