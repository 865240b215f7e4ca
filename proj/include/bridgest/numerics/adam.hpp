#pragma once

#include <cmath>

#include "bridgest/numerics/parameter_store.hpp"

namespace bridgest {

struct AdamConfig {
  Real beta1 = Real(0.9);
  Real beta2 = Real(0.999);
  Real eps = Real(1e-8);
};

/// One bias-corrected Adam update on every trainable parameter. Frozen
/// parameters are not touched. All gradient buffers are zeroed afterwards.
inline void adam_step(ParameterStore& store, Real lr, const AdamConfig& cfg = {}) {
  for (auto& [name, e] : store.entries()) {
    if (e.trainable && !e.value.has_grad()) {
      throw StateError("adam_step: trainable parameter '" + name + "' has no gradient");
    }
  }
  auto& state = store.optimizer_state();
  for (auto& [name, e] : store.entries()) {
    if (!e.trainable) continue;
    auto it = state.find(name);
    if (it == state.end()) {
      it = state.emplace(name, AdamMoments{Tensor(e.value.shape), Tensor(e.value.shape), 0}).first;
    }
    AdamMoments& mom = it->second;
    ++mom.step;
    const Real bc1 = Real(1) - std::pow(cfg.beta1, Real(mom.step));
    const Real bc2 = Real(1) - std::pow(cfg.beta2, Real(mom.step));
    const auto& g = *e.value.grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      mom.m.data[i] = cfg.beta1 * mom.m.data[i] + (Real(1) - cfg.beta1) * g[i];
      mom.v.data[i] = cfg.beta2 * mom.v.data[i] + (Real(1) - cfg.beta2) * g[i] * g[i];
      const Real mhat = mom.m.data[i] / bc1;
      const Real vhat = mom.v.data[i] / bc2;
      e.value.data[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
  store.zero_grads();
}

}  // namespace bridgest
