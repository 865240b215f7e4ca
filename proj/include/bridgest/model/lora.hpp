#pragma once

// Low-rank adapter on a frozen linear map: y = xW + b + (alpha/r) * x A^T B^T.
// B starts at zero, so a fresh adapter leaves the base map unchanged.

#include <string>

#include "bridgest/model/config.hpp"
#include "bridgest/model/layers.hpp"

namespace bridgest::model {

struct LoRALayer {
  Tensor W;  // [in, out], frozen
  Tensor b;  // [out], frozen
  Tensor A;  // [r, in]
  Tensor B;  // [out, r], zero at init
  Real scaling = 1;

  static LoRALayer make(std::size_t in, std::size_t out, const LoRAConfig& cfg, std::uint64_t base_seed) {
    cfg.validate();
    LoRALayer l;
    l.W = init_normal(base_seed, "W", {in, out}, Real(1) / std::sqrt(Real(in)));
    l.b = Tensor({out});
    l.A = init_normal(cfg.init_seed, "A", {cfg.rank, in}, Real(1) / std::sqrt(Real(in)));
    l.B = Tensor({out, cfg.rank});
    l.scaling = cfg.scaling();
    return l;
  }
};

struct LoRAGrads {
  Tensor dx, dA, dB;
};

inline Tensor lora_forward(const Tensor& x, const LoRALayer& l) {
  if (l.A.cols() != l.W.shape[0] || l.B.rows() != l.W.shape[1] || l.B.cols() != l.A.rows()) {
    throw DimensionError("lora_forward: adapter shapes do not match the base weight");
  }
  Tensor y = linear(x, l.W, l.b);
  Tensor delta = matmul_nt(matmul_nt(x, l.A), l.B);
  for (std::size_t i = 0; i < y.numel(); ++i) y.data[i] += l.scaling * delta.data[i];
  return y;
}

/// Gradients for the input and the adapter factors; the base weight is frozen.
inline LoRAGrads lora_backward(const Tensor& x, const LoRALayer& l, const Tensor& dy) {
  LoRAGrads g;
  const Tensor u = matmul_nt(x, l.A);
  const Tensor sdy = scaled(dy, l.scaling);
  g.dB = matmul_tn(sdy, u);
  const Tensor du = matmul(sdy, l.B);
  g.dA = matmul_tn(du, x);
  g.dx = matmul_nt(dy, l.W);
  add_inplace(g.dx, matmul(du, l.A));
  return g;
}

/// Attaches an adapter to the store-backed projection `p` (which must exist).
inline void add_lora(ParameterStore& s, const std::string& p, const LoRAConfig& cfg) {
  const Tensor& W = s.at(p + ".W");
  const std::size_t in = W.shape[0], out = W.shape[1];
  s.add(p + ".lora.A", init_normal(cfg.init_seed, p + ".lora.A", {cfg.rank, in}, Real(1) / std::sqrt(Real(in))), true);
  s.add(p + ".lora.B", Tensor({out, cfg.rank}), true);
}

}  // namespace bridgest::model
