#pragma once

#include <map>
#include <string>
#include <vector>

#include "cpr/core/graph.hpp"

namespace cpr::core {

/// Named parameter tensors. std::map keeps iteration lexicographic, which
/// is the order used everywhere (optimizer, checkpoints, grad checks).
template <typename T>
class ParamSet {
 public:
  struct Entry {
    Tensor<T> value;
    bool trainable = true;
  };

  void add(const std::string& name, Tensor<T> value, bool trainable = true) {
    if (!entries_.emplace(name, Entry{std::move(value), trainable}).second) {
      throw Error("duplicate parameter name '" + name + "'");
    }
  }

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  const Tensor<T>& at(const std::string& name) const { return entry(name).value; }
  Tensor<T>& at(const std::string& name) { return entry(name).value; }

  bool trainable(const std::string& name) const { return entry(name).trainable; }
  void set_trainable(const std::string& name, bool on) { entry(name).trainable = on; }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [name, e] : entries_) out.push_back(name);
    return out;
  }

  std::vector<std::string> trainable_names() const {
    std::vector<std::string> out;
    for (const auto& [name, e] : entries_) {
      if (e.trainable) out.push_back(name);
    }
    return out;
  }

  std::size_t size() const { return entries_.size(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, e] : entries_) n += e.value.size();
    return n;
  }

  const std::map<std::string, Entry>& entries() const { return entries_; }
  std::map<std::string, Entry>& entries() { return entries_; }

  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (const auto& [name, e] : entries_) out.add(name, e.value.template cast<U>(), e.trainable);
    return out;
  }

 private:
  Entry& entry(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw UnknownNameError("unknown parameter '" + name + "'");
    return it->second;
  }
  const Entry& entry(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw UnknownNameError("unknown parameter '" + name + "'");
    return it->second;
  }

  std::map<std::string, Entry> entries_;
};

/// Binds a ParamSet into a Graph on demand. Trainable entries become
/// gradient-carrying leaves; frozen entries become constants.
template <typename T>
class ParamScope {
 public:
  ParamScope(Graph<T>& graph, const ParamSet<T>& params) : graph_(graph), params_(params) {}

  Var<T> operator()(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    if (!params_.contains(name)) throw UnknownNameError("expression references unknown name '" + name + "'");
    Var<T> v = params_.trainable(name) ? graph_.leaf(params_.at(name), true)
                                       : graph_.constant(params_.at(name));
    graph_.set_label(v.id(), name);
    bound_.emplace(name, v);
    return v;
  }

  Graph<T>& graph() { return graph_; }
  const ParamSet<T>& params() const { return params_; }
  const std::map<std::string, Var<T>>& bound() const { return bound_; }

  Var<T> constant(Tensor<T> value) { return graph_.constant(std::move(value)); }

 private:
  Graph<T>& graph_;
  const ParamSet<T>& params_;
  std::map<std::string, Var<T>> bound_;
};

}  // namespace cpr::core
