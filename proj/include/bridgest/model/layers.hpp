#pragma once

// Store-backed building blocks. Each block reads its parameters from a
// ParameterStore under a name prefix, records what its backward pass needs in
// a cache, and on backward accumulates gradients only for parameters the store
// marks as wanting them.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bridgest/numerics/ops.hpp"
#include "bridgest/numerics/parameter_store.hpp"
#include "bridgest/numerics/random.hpp"

namespace bridgest::model {

inline std::uint64_t name_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

/// Gaussian init whose stream depends only on (seed, name).
inline Tensor init_normal(std::uint64_t seed, const std::string& name, Shape shape, Real stddev) {
  Rng rng(derive_seed(seed, name_hash(name)));
  return normal_tensor(std::move(shape), stddev, rng);
}

inline void add_linear(ParameterStore& s, const std::string& p, std::size_t in, std::size_t out, std::uint64_t seed,
                       bool trainable, Real gain = Real(1), bool bias = true) {
  s.add(p + ".W", init_normal(seed, p + ".W", {in, out}, gain / std::sqrt(Real(in))), trainable);
  if (bias) s.add(p + ".b", Tensor({out}), trainable);
}

inline void add_layer_norm(ParameterStore& s, const std::string& p, std::size_t n, bool trainable) {
  s.add(p + ".gamma", Tensor({n}, Real(1)), trainable);
  s.add(p + ".beta", Tensor({n}), trainable);
}

inline void accumulate_if_wanted(ParameterStore& s, const std::string& name, const Tensor& g) {
  if (s.wants_grad(name)) s.accumulate(name, g);
}

inline Tensor column_sums(const Tensor& dy) {
  Tensor out({dy.cols()});
  for (std::size_t r = 0; r < dy.rows(); ++r) {
    for (std::size_t j = 0; j < dy.cols(); ++j) out.data[j] += dy(r, j);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Linear projection with an optional low-rank adapter (p.lora.A, p.lora.B).

struct ProjCache {
  Tensor x;
  Tensor u;  // x A^T, only when an adapter is present
  bool adapted = false;
};

inline bool has_lora(const ParameterStore& s, const std::string& p) { return s.contains(p + ".lora.A"); }

inline Tensor proj_forward(const ParameterStore& s, const std::string& p, const Tensor& x, Real lora_scaling,
                           ProjCache* cache) {
  const Tensor& W = s.at(p + ".W");
  Tensor y = s.contains(p + ".b") ? linear(x, W, s.at(p + ".b")) : linear(x, W, Tensor({W.shape[1]}));
  const bool adapted = has_lora(s, p);
  Tensor u;
  if (adapted) {
    u = matmul_nt(x, s.at(p + ".lora.A"));
    Tensor delta = matmul_nt(u, s.at(p + ".lora.B"));
    for (std::size_t i = 0; i < y.numel(); ++i) y.data[i] += lora_scaling * delta.data[i];
  }
  if (cache) {
    cache->x = x;
    cache->u = std::move(u);
    cache->adapted = adapted;
  }
  return y;
}

inline Tensor proj_backward(ParameterStore& s, const std::string& p, const ProjCache& c, const Tensor& dy,
                            Real lora_scaling) {
  const Tensor& W = s.at(p + ".W");
  if (s.wants_grad(p + ".W")) s.accumulate(p + ".W", matmul_tn(c.x, dy));
  if (s.contains(p + ".b") && s.wants_grad(p + ".b")) s.accumulate(p + ".b", column_sums(dy));
  Tensor dx = matmul_nt(dy, W);
  if (c.adapted) {
    const Tensor& A = s.at(p + ".lora.A");
    const Tensor& B = s.at(p + ".lora.B");
    Tensor sdy = scaled(dy, lora_scaling);
    if (s.wants_grad(p + ".lora.B")) s.accumulate(p + ".lora.B", matmul_tn(sdy, c.u));
    Tensor du = matmul(sdy, B);
    if (s.wants_grad(p + ".lora.A")) s.accumulate(p + ".lora.A", matmul_tn(du, c.x));
    add_inplace(dx, matmul(du, A));
  }
  return dx;
}

// ---------------------------------------------------------------------------

inline Tensor ln_forward(const ParameterStore& s, const std::string& p, const Tensor& x, LayerNormCache* cache) {
  return layer_norm(x, s.at(p + ".gamma"), s.at(p + ".beta"), kLayerNormEps, cache);
}

inline Tensor ln_backward(ParameterStore& s, const std::string& p, const LayerNormCache& c, const Tensor& dy) {
  auto g = layer_norm_backward(c, s.at(p + ".gamma"), dy);
  accumulate_if_wanted(s, p + ".gamma", g.dgamma);
  accumulate_if_wanted(s, p + ".beta", g.dbeta);
  return std::move(g.dx);
}

// ---------------------------------------------------------------------------
// Position-wise feed-forward: fc2(gelu(fc1(x))).

struct FfnCache {
  ProjCache fc1, fc2;
  Tensor pre;
};

inline void add_ffn(ParameterStore& s, const std::string& p, std::size_t d, std::uint64_t seed, bool trainable) {
  add_linear(s, p + ".fc1", d, 2 * d, seed, trainable);
  add_linear(s, p + ".fc2", 2 * d, d, seed, trainable);
}

inline Tensor ffn_forward(const ParameterStore& s, const std::string& p, const Tensor& x, FfnCache* c) {
  Tensor pre = proj_forward(s, p + ".fc1", x, 0, c ? &c->fc1 : nullptr);
  Tensor y = proj_forward(s, p + ".fc2", gelu(pre), 0, c ? &c->fc2 : nullptr);
  if (c) c->pre = std::move(pre);
  return y;
}

inline Tensor ffn_backward(ParameterStore& s, const std::string& p, const FfnCache& c, const Tensor& dy) {
  Tensor da = proj_backward(s, p + ".fc2", c.fc2, dy, 0);
  return proj_backward(s, p + ".fc1", c.fc1, gelu_backward(c.pre, da), 0);
}

// ---------------------------------------------------------------------------
// Multi-head attention with q/k/v/o projections. Heads split the model
// dimension into contiguous column blocks.

struct MhaCache {
  ProjCache q, k, v, o;
  Tensor Q, K, V;
  std::vector<Tensor> probs;
};

inline void add_mha(ParameterStore& s, const std::string& p, std::size_t d, std::uint64_t seed, bool trainable) {
  // Key projection has no bias: it shifts every score in a row equally.
  for (const char* n : {"q", "k", "v", "o"}) {
    add_linear(s, p + "." + n, d, d, seed, trainable, Real(1), std::string_view(n) != "k");
  }
}

inline Tensor mha_forward(const ParameterStore& s, const std::string& p, const Tensor& xq, const Tensor& xkv,
                          std::size_t n_heads, const std::optional<AttentionMask>& mask, Real lora_scaling,
                          MhaCache* c) {
  Tensor Q = proj_forward(s, p + ".q", xq, lora_scaling, c ? &c->q : nullptr);
  Tensor K = proj_forward(s, p + ".k", xkv, lora_scaling, c ? &c->k : nullptr);
  Tensor V = proj_forward(s, p + ".v", xkv, lora_scaling, c ? &c->v : nullptr);
  const std::size_t d = Q.cols();
  if (d % n_heads) throw DimensionError("mha: model dimension not divisible by head count");
  const std::size_t dh = d / n_heads;
  Tensor merged({Q.rows(), d});
  if (c) c->probs.clear();
  for (std::size_t h = 0; h < n_heads; ++h) {
    auto r = attention(slice_cols(Q, h * dh, dh), slice_cols(K, h * dh, dh), slice_cols(V, h * dh, dh), mask);
    add_into_cols(merged, r.out, h * dh);
    if (c) c->probs.push_back(std::move(r.probs));
  }
  Tensor y = proj_forward(s, p + ".o", merged, lora_scaling, c ? &c->o : nullptr);
  if (c) {
    c->Q = std::move(Q);
    c->K = std::move(K);
    c->V = std::move(V);
  }
  return y;
}

struct MhaGrads {
  Tensor dxq, dxkv;
};

inline MhaGrads mha_backward(ParameterStore& s, const std::string& p, const MhaCache& c, const Tensor& dy,
                             std::size_t n_heads, Real lora_scaling) {
  Tensor dmerged = proj_backward(s, p + ".o", c.o, dy, lora_scaling);
  const std::size_t d = c.Q.cols(), dh = d / n_heads;
  Tensor dQ(c.Q.shape), dK(c.K.shape), dV(c.V.shape);
  for (std::size_t h = 0; h < n_heads; ++h) {
    auto g = attention_backward(slice_cols(c.Q, h * dh, dh), slice_cols(c.K, h * dh, dh), slice_cols(c.V, h * dh, dh),
                                c.probs[h], slice_cols(dmerged, h * dh, dh));
    add_into_cols(dQ, g.dQ, h * dh);
    add_into_cols(dK, g.dK, h * dh);
    add_into_cols(dV, g.dV, h * dh);
  }
  MhaGrads out;
  out.dxq = proj_backward(s, p + ".q", c.q, dQ, lora_scaling);
  out.dxkv = proj_backward(s, p + ".k", c.k, dK, lora_scaling);
  add_inplace(out.dxkv, proj_backward(s, p + ".v", c.v, dV, lora_scaling));
  return out;
}

}  // namespace bridgest::model
