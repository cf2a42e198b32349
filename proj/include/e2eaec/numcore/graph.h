#pragma once

#include <deque>
#include <functional>
#include <vector>

#include "e2eaec/numcore/tensor.h"

namespace e2eaec::numcore {

template <typename T>
class Graph;

// Handle to a value recorded on a Graph. Cheap to copy; valid as long as the
// owning graph is alive.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Graph<T>* graph, int id) : graph_(graph), id_(id) {}

  Graph<T>& graph() const { return *graph_; }
  int id() const { return id_; }
  bool valid() const { return graph_ != nullptr && id_ >= 0; }

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t dim(std::size_t axis) const { return value().dim(axis); }

 private:
  Graph<T>* graph_ = nullptr;
  int id_ = -1;
};

// Tape for reverse-mode differentiation. Nodes are appended in execution
// order, so the tape is topologically sorted by construction.
//
// A graph built with record=false evaluates ops without keeping backward
// closures; this is the inference path.
template <typename T>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Tensor<T>& grad_out)>;

  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<T> constant(Tensor<T> value) {
    return push(std::move(value), false, false, {}, nullptr);
  }

  // Trainable leaf. Always receives a gradient buffer after backward().
  Var<T> parameter(Tensor<T> value) {
    return push(std::move(value), record_, record_, {}, nullptr);
  }

  // Called by op implementations. `fn` is dropped when no input needs a
  // gradient or the graph is not recording.
  Var<T> record(Tensor<T> value, std::vector<int> inputs, BackwardFn fn) {
    bool needs = false;
    if (record_) {
      for (int id : inputs) needs = needs || nodes_[id].requires_grad;
    }
    if (!needs) return push(std::move(value), false, false, {}, nullptr);
    return push(std::move(value), true, false, std::move(inputs),
                std::move(fn));
  }

  const Tensor<T>& value(int id) const { return nodes_.at(id).value; }
  bool requires_grad(int id) const { return nodes_.at(id).requires_grad; }
  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  // Drops every node recorded after the first `n`. Vars referring to dropped
  // nodes become dangling. Used to reuse one graph across streaming steps.
  void truncate(std::size_t n) {
    while (nodes_.size() > n) nodes_.pop_back();
  }

  // Gradient accumulator for node `id`, zero-initialised on first use.
  Tensor<T>& grad_buffer(int id) {
    Node& n = nodes_.at(id);
    if (!n.has_grad) {
      n.grad = Tensor<T>(n.value.shape());
      n.has_grad = true;
    }
    return n.grad;
  }

  // nullptr when no gradient reached the node. After backward() only leaf
  // nodes (parameters) retain gradients.
  const Tensor<T>* grad(const Var<T>& v) const {
    const Node& n = nodes_.at(v.id());
    return n.has_grad ? &n.grad : nullptr;
  }

  void backward(const Var<T>& loss) {
    const Node& root = nodes_.at(loss.id());
    if (root.value.size() != 1) {
      throw ContractError("backward() needs a scalar loss, got shape " +
                          shape_str(root.value.shape()));
    }
    for (auto& n : nodes_) {
      n.has_grad = false;
      n.grad = Tensor<T>();
    }
    grad_buffer(loss.id())[0] = T(1);
    for (int id = loss.id(); id >= 0; --id) {
      Node& n = nodes_[id];
      if (n.has_grad && n.backward) {
        n.backward(*this, n.grad);
        // Interior gradients are consumed; only leaves keep theirs.
        n.grad = Tensor<T>();
        n.has_grad = false;
      }
    }
    for (std::size_t id = 0; id < nodes_.size(); ++id) {
      if (nodes_[id].trainable) grad_buffer(static_cast<int>(id));
    }
  }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool has_grad = false;
    bool requires_grad = false;
    bool trainable = false;
    std::vector<int> inputs;
    BackwardFn backward;
  };

  Var<T> push(Tensor<T> value, bool requires_grad, bool trainable,
              std::vector<int> inputs, BackwardFn fn) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.trainable = trainable;
    n.inputs = std::move(inputs);
    n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return Var<T>(this, static_cast<int>(nodes_.size()) - 1);
  }

  bool record_;
  // deque keeps references to existing nodes stable across push_back.
  std::deque<Node> nodes_;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return graph_->value(id_);
}

}  // namespace e2eaec::numcore
