#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "bridgest/numerics/parameter_store.hpp"

namespace bridgest {

/// Scalar objective over a parameter store. When `with_grad` is true it must
/// also accumulate dL/dθ into the store's gradient buffers.
using Objective = std::function<Real(ParameterStore&, bool with_grad)>;

struct GradCheckResult {
  Real max_rel_error = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
  Real worst_analytic = 0;
  Real worst_numeric = 0;
  std::size_t checked = 0;
};

/// Central-difference check of every trainable parameter element.
/// Relative error per element: |a - n| / max(|a|, |n|, 1e-8).
inline GradCheckResult grad_check(const Objective& f, ParameterStore& store, Real h = Real(1e-5)) {
  store.clear_grads();
  const Real f0 = f(store, true);
  if (!std::isfinite(f0)) throw NumericError("grad_check: objective is not finite");
  GradCheckResult res;
  for (auto& [name, e] : store.entries()) {
    if (!e.trainable) continue;
    const std::vector<Real> analytic = e.value.grad ? *e.value.grad : std::vector<Real>(e.value.numel(), Real(0));
    for (std::size_t i = 0; i < e.value.numel(); ++i) {
      const Real saved = e.value.data[i];
      e.value.data[i] = saved + h;
      const Real fp = f(store, false);
      e.value.data[i] = saved - h;
      const Real fm = f(store, false);
      e.value.data[i] = saved;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        throw NumericError("grad_check: objective not finite while perturbing '" + name + "'");
      }
      const Real numeric = (fp - fm) / (Real(2) * h);
      const Real a = analytic[i];
      const Real denom = std::max({std::abs(a), std::abs(numeric), Real(1e-8)});
      const Real rel = std::abs(a - numeric) / denom;
      ++res.checked;
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst_param = name;
        res.worst_index = i;
        res.worst_analytic = a;
        res.worst_numeric = numeric;
      }
    }
  }
  store.clear_grads();
  return res;
}

}  // namespace bridgest
