#include "cpr/core/graph.hpp"

#include <algorithm>

namespace cpr::core {

namespace testing {
namespace {
std::string& corrupted_op_storage() {
  static std::string op;
  return op;
}
}  // namespace

void set_corrupted_op(std::string op) { corrupted_op_storage() = std::move(op); }
const std::string& corrupted_op() { return corrupted_op_storage(); }
}  // namespace testing

template <typename T>
Var<T> Graph<T>::constant(Tensor<T> value) {
  Node node;
  node.value = std::move(value);
  node.op = "constant";
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Graph<T>::leaf(Tensor<T> value, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  node.op = "leaf";
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Graph<T>::record(Tensor<T> value, std::initializer_list<Var<T>> parents,
                        BackwardFn backward, std::string_view op) {
  return record(std::move(value), std::vector<Var<T>>(parents), std::move(backward), op);
}

template <typename T>
Var<T> Graph<T>::record(Tensor<T> value, const std::vector<Var<T>>& parents, BackwardFn backward,
                        std::string_view op) {
  Node node;
  node.value = std::move(value);
  node.op = op;
  node.requires_grad = std::any_of(parents.begin(), parents.end(), [this](const Var<T>& p) {
    if (&p.graph() != this) throw Error("op '" + std::string(p.graph().op(p.id())) + "' mixes graphs");
    return nodes_[p.id()].requires_grad;
  });
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
void Graph<T>::note_branches(const std::size_t* winners, std::size_t count) {
  std::uint64_t h = branch_signature_;
  for (std::size_t i = 0; i < count; ++i) {
    h ^= winners[i];
    h *= 1099511628211ull;
  }
  branch_signature_ = h;
}

template <typename T>
std::string Graph<T>::describe(std::size_t id) const {
  const auto& node = nodes_[id];
  std::string who = node.label.empty() ? "<" + std::string(node.op) + ">" : "'" + node.label + "'";
  return who + " " + shape_str(node.value.shape());
}

template <typename T>
Tensor<T>& Graph<T>::grad_of(std::size_t id) {
  auto& node = nodes_[id];
  if (!node.has_grad) {
    node.grad = Tensor<T>(node.value.shape());
    node.has_grad = true;
  }
  return node.grad;
}

template <typename T>
const Tensor<T>* Graph<T>::grad(Var<T> v) const {
  const auto& node = nodes_[v.id()];
  return node.has_grad ? &node.grad : nullptr;
}

template <typename T>
void Graph<T>::backward(Var<T> output) {
  if (output.value().size() != 1) {
    throw NonScalarError("backward() needs a scalar output, got " + describe(output.id()));
  }
  for (auto& node : nodes_) {
    node.grad = Tensor<T>();
    node.has_grad = false;
  }
  if (!nodes_[output.id()].requires_grad) return;
  grad_of(output.id())[0] = T(1);

  const std::string& corrupted = testing::corrupted_op();
  for (std::size_t i = output.id() + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (!node.has_grad || !node.backward) continue;
    if (!corrupted.empty() && node.op == corrupted) {
      Tensor<T> bent = node.grad;
      for (auto& g : bent.values()) g *= T(1.5);
      node.backward(bent, node.value, *this);
    } else {
      node.backward(node.grad, node.value, *this);
    }
  }
}

template class Graph<float>;
template class Graph<double>;
template class Graph<long double>;

}  // namespace cpr::core
