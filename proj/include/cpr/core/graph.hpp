#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "cpr/core/tensor.hpp"

namespace cpr::core {

template <typename T>
class Graph;

/// Handle to a node recorded on a Graph. Cheap to copy; valid while the
/// owning graph lives.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Graph<T>* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph<T>& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  Graph<T>* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so the node
/// vector is already a topological order and backward() walks it in reverse.
template <typename T>
class Graph {
 public:
  /// Receives the gradient and value of the node's output and accumulates
  /// into its parents through grad_of().
  using BackwardFn =
      std::function<void(const Tensor<T>& grad_out, const Tensor<T>& out, Graph& graph)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<T> constant(Tensor<T> value);
  Var<T> leaf(Tensor<T> value, bool requires_grad = true);

  /// Records an op result. The backward closure is dropped when no parent
  /// requires a gradient.
  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> parents, BackwardFn backward,
                std::string_view op);
  Var<T> record(Tensor<T> value, const std::vector<Var<T>>& parents, BackwardFn backward,
                std::string_view op);

  const Tensor<T>& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::string_view op(std::size_t id) const { return nodes_[id].op; }

  /// Names a node (parameters get their dotted name) for error messages.
  void set_label(std::size_t id, std::string label) { nodes_[id].label = std::move(label); }
  /// "'name' [shape]" when labelled, otherwise "<op> [shape]".
  std::string describe(std::size_t id) const;

  /// Mutable gradient buffer of a node, zero-initialised on first access.
  Tensor<T>& grad_of(std::size_t id);

  /// Gradient accumulated for a node by the last backward(), or nullptr.
  const Tensor<T>* grad(Var<T> v) const;

  /// Seeds d(output)/d(output) = 1 and propagates. Output must be a scalar.
  void backward(Var<T> output);

  std::size_t size() const { return nodes_.size(); }

  /// Non-smooth ops (relu, max, nearest-neighbour min) fold the identity of
  /// their winners in here. Two evaluations with equal signatures took the
  /// same branches, so a finite difference between them is not across a kink.
  void note_branches(const std::size_t* winners, std::size_t count);
  std::uint64_t branch_signature() const { return branch_signature_; }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    bool has_grad = false;
    std::string_view op;
    std::string label;
    BackwardFn backward;
  };
  std::deque<Node> nodes_;
  std::uint64_t branch_signature_ = 14695981039346656037ull;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return graph_->value(id_);
}

template <typename T>
bool Var<T>::requires_grad() const {
  return graph_->requires_grad(id_);
}

namespace testing {

/// Scales the incoming gradient of every node recorded under `op` by 1.5
/// during backward(). Empty string disables. Used to prove the gradient
/// checker catches a broken backward rule.
void set_corrupted_op(std::string op);
const std::string& corrupted_op();

}  // namespace testing

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace cpr::core
