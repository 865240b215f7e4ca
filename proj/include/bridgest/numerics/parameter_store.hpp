#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "bridgest/numerics/tensor.hpp"

namespace bridgest {

struct AdamMoments {
  Tensor m, v;
  long step = 0;
};

/// Named parameters with per-parameter trainable flags and optimizer state.
/// std::map keeps iteration lexicographic by name.
class ParameterStore {
 public:
  struct Entry {
    Tensor value;
    bool trainable = true;
  };

  void add(const std::string& name, Tensor value, bool trainable = true) {
    if (entries_.count(name)) throw ConfigError("parameter '" + name + "' already exists");
    entries_.emplace(name, Entry{std::move(value), trainable});
  }

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  std::size_t size() const { return entries_.size(); }

  Tensor& at(const std::string& name) { return entry(name).value; }
  const Tensor& at(const std::string& name) const { return entry(name).value; }

  bool trainable(const std::string& name) const { return entry(name).trainable; }

  void set_trainable(const std::string& name, bool on) {
    entry(name).trainable = on;
    if (!on) optimizer_state_.erase(name);
  }

  /// Adds `g` into the gradient buffer of `name`, allocating it on first use.
  void accumulate(const std::string& name, const Tensor& g) {
    Tensor& t = at(name);
    if (g.numel() != t.numel()) {
      throw DimensionError("gradient for '" + name + "' has shape " + shape_str(g.shape) + ", parameter is " +
                           shape_str(t.shape));
    }
    auto& buf = t.ensure_grad();
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += g.data[i];
  }

  /// True when backward passes should spend time computing this gradient.
  bool wants_grad(const std::string& name) const { return entry(name).trainable; }

  void zero_grads() {
    for (auto& [_, e] : entries_) e.value.zero_grad();
  }

  void clear_grads() {
    for (auto& [_, e] : entries_) e.value.grad.reset();
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [n, _] : entries_) out.push_back(n);
    return out;
  }

  std::size_t trainable_count() const {
    std::size_t n = 0;
    for (const auto& [_, e] : entries_) n += e.trainable ? e.value.numel() : 0;
    return n;
  }

  std::map<std::string, Entry>& entries() { return entries_; }
  const std::map<std::string, Entry>& entries() const { return entries_; }
  std::map<std::string, AdamMoments>& optimizer_state() { return optimizer_state_; }
  const std::map<std::string, AdamMoments>& optimizer_state() const { return optimizer_state_; }

  void reset_optimizer() { optimizer_state_.clear(); }

  /// Copies values and flags only (no gradients, no optimizer state).
  ParameterStore values_only() const {
    ParameterStore out;
    for (const auto& [n, e] : entries_) {
      Tensor t(e.value.shape, e.value.data);
      out.entries_.emplace(n, Entry{std::move(t), e.trainable});
    }
    return out;
  }

  /// Overwrites values of every parameter present in `src`; shapes must agree.
  void load_values(const ParameterStore& src) {
    for (const auto& [n, e] : src.entries_) {
      Tensor& dst = at(n);
      if (dst.shape != e.value.shape) throw DimensionError("load_values: shape mismatch for '" + n + "'");
      dst.data = e.value.data;
    }
  }

 private:
  Entry& entry(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw IndexError("unknown parameter '" + name + "'");
    return it->second;
  }
  const Entry& entry(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw IndexError("unknown parameter '" + name + "'");
    return it->second;
  }

  std::map<std::string, Entry> entries_;
  std::map<std::string, AdamMoments> optimizer_state_;
};

/// Bitwise equality of parameter values (and names/shapes).
inline bool same_values(const ParameterStore& a, const ParameterStore& b) {
  if (a.size() != b.size()) return false;
  auto ia = a.entries().begin();
  auto ib = b.entries().begin();
  for (; ia != a.entries().end(); ++ia, ++ib) {
    if (ia->first != ib->first || ia->second.value.shape != ib->second.value.shape) return false;
    if (ia->second.value.data != ib->second.value.data) return false;
  }
  return true;
}

inline Real max_param_diff(const ParameterStore& a, const ParameterStore& b) {
  Real m = 0;
  for (const auto& [n, e] : a.entries()) m = std::max(m, max_abs_diff(e.value, b.at(n)));
  return m;
}

}  // namespace bridgest
