#pragma once

// Dense layer primitives with hand-written backward passes. Every forward is a
// pure function of its inputs; backwards return fresh gradient tensors and
// leave accumulation to the caller.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "bridgest/numerics/tensor.hpp"

namespace bridgest {

// ---------------------------------------------------------------------------
// Matrix products on [rows, cols] views.

/// A[m,k] * B[k,n]
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner dimensions differ (" + std::to_string(k) + " vs " + std::to_string(b.rows()) +
                         ")");
  }
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    Real* o = out.data.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const Real av = a.data[i * k + p];
      if (av == Real(0)) continue;
      const Real* br = b.data.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += av * br[j];
    }
  }
  return out;
}

/// A[k,m]^T * B[k,n]
inline Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
  if (b.rows() != k) throw DimensionError("matmul_tn: row counts differ");
  Tensor out({m, n});
  for (std::size_t p = 0; p < k; ++p) {
    const Real* ar = a.data.data() + p * m;
    const Real* br = b.data.data() + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const Real av = ar[i];
      if (av == Real(0)) continue;
      Real* o = out.data.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += av * br[j];
    }
  }
  return out;
}

/// A[m,k] * B[n,k]^T
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) throw DimensionError("matmul_nt: column counts differ");
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const Real* ar = a.data.data() + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const Real* br = b.data.data() + j * k;
      Real s = 0;
      for (std::size_t p = 0; p < k; ++p) s += ar[p] * br[p];
      out.data[i * n + j] = s;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// linear: y = xW + b

struct LinearGrads {
  Tensor dx, dW, db;
};

inline Tensor linear(const Tensor& x, const Tensor& W, const Tensor& b) {
  if (W.rank() != 2) throw DimensionError("linear: operand W must be 2-D, got " + shape_str(W.shape));
  if (x.last_dim() != W.shape[0]) {
    throw DimensionError("linear: operand x last dimension " + std::to_string(x.last_dim()) +
                         " does not match W rows " + std::to_string(W.shape[0]));
  }
  if (b.numel() != W.shape[1]) {
    throw DimensionError("linear: operand b length " + std::to_string(b.numel()) + " does not match W columns " +
                         std::to_string(W.shape[1]));
  }
  Tensor y = matmul(x, W);
  const std::size_t n = W.shape[1];
  for (std::size_t r = 0; r < y.rows(); ++r) {
    for (std::size_t j = 0; j < n; ++j) y.data[r * n + j] += b.data[j];
  }
  Shape s = x.shape.empty() ? Shape{1} : x.shape;
  s.back() = n;
  y.shape = s;
  return y;
}

inline LinearGrads linear_backward(const Tensor& x, const Tensor& W, const Tensor& dy) {
  if (dy.rows() != x.rows() || dy.cols() != W.shape[1]) throw DimensionError("linear_backward: dy shape mismatch");
  LinearGrads g;
  g.dx = matmul_nt(dy, W);
  g.dx.shape = x.shape;
  g.dW = matmul_tn(x, dy);
  g.dW.shape = W.shape;
  g.db = Tensor({W.shape[1]});
  for (std::size_t r = 0; r < dy.rows(); ++r) {
    for (std::size_t j = 0; j < dy.cols(); ++j) g.db.data[j] += dy(r, j);
  }
  return g;
}

// ---------------------------------------------------------------------------
// layer_norm over the last dimension.

struct LayerNormCache {
  Tensor xhat;
  std::vector<Real> inv_std;
};

struct LayerNormGrads {
  Tensor dx, dgamma, dbeta;
};

inline constexpr Real kLayerNormEps = Real(1e-5);

inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Real eps = kLayerNormEps,
                         LayerNormCache* cache = nullptr) {
  if (x.numel() == 0 || x.last_dim() == 0) throw DimensionError("layer_norm: zero-length last dimension");
  const std::size_t n = x.cols();
  if (gamma.numel() != n || beta.numel() != n) throw DimensionError("layer_norm: gamma/beta must match last dimension");
  if (!(eps > 0)) throw ArgumentError("layer_norm: eps must be positive");
  Tensor y(x.shape);
  Tensor xhat(x.shape);
  std::vector<Real> inv(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto xr = x.row(r);
    Real mean = 0;
    for (Real v : xr) mean += v;
    mean /= Real(n);
    Real var = 0;
    for (Real v : xr) var += (v - mean) * (v - mean);
    var /= Real(n);
    const Real is = Real(1) / std::sqrt(var + eps);
    inv[r] = is;
    for (std::size_t j = 0; j < n; ++j) {
      const Real h = (xr[j] - mean) * is;
      xhat(r, j) = h;
      y(r, j) = h * gamma.data[j] + beta.data[j];
    }
  }
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv);
  }
  return y;
}

inline LayerNormGrads layer_norm_backward(const LayerNormCache& cache, const Tensor& gamma, const Tensor& dy) {
  const std::size_t n = cache.xhat.cols();
  LayerNormGrads g{Tensor(cache.xhat.shape), Tensor({n}), Tensor({n})};
  std::vector<Real> dxhat(n);
  for (std::size_t r = 0; r < cache.xhat.rows(); ++r) {
    Real mean_d = 0, mean_dx = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const Real d = dy(r, j);
      g.dgamma.data[j] += d * cache.xhat(r, j);
      g.dbeta.data[j] += d;
      dxhat[j] = d * gamma.data[j];
      mean_d += dxhat[j];
      mean_dx += dxhat[j] * cache.xhat(r, j);
    }
    mean_d /= Real(n);
    mean_dx /= Real(n);
    for (std::size_t j = 0; j < n; ++j) {
      g.dx(r, j) = cache.inv_std[r] * (dxhat[j] - mean_d - cache.xhat(r, j) * mean_dx);
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// GELU (tanh approximation).

inline Tensor gelu(const Tensor& x) {
  constexpr Real c = Real(0.7978845608028654);  // sqrt(2/pi)
  Tensor y(x.shape);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const Real v = x.data[i];
    y.data[i] = Real(0.5) * v * (Real(1) + std::tanh(c * (v + Real(0.044715) * v * v * v)));
  }
  return y;
}

inline Tensor gelu_backward(const Tensor& x, const Tensor& dy) {
  constexpr Real c = Real(0.7978845608028654);
  Tensor dx(x.shape);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const Real v = x.data[i];
    const Real u = c * (v + Real(0.044715) * v * v * v);
    const Real t = std::tanh(u);
    const Real du = c * (Real(1) + Real(3) * Real(0.044715) * v * v);
    dx.data[i] = dy.data[i] * (Real(0.5) * (Real(1) + t) + Real(0.5) * v * (Real(1) - t * t) * du);
  }
  return dx;
}

// ---------------------------------------------------------------------------
// softmax / cross-entropy

inline Tensor softmax(const Tensor& x) {
  Tensor y(x.shape);
  const std::size_t n = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto xr = x.row(r);
    const Real m = *std::max_element(xr.begin(), xr.end());
    Real s = 0;
    for (std::size_t j = 0; j < n; ++j) {
      y(r, j) = std::exp(xr[j] - m);
      s += y(r, j);
    }
    for (std::size_t j = 0; j < n; ++j) y(r, j) /= s;
  }
  return y;
}

/// Given y = softmax(x) and dL/dy, returns dL/dx.
inline Tensor softmax_backward(const Tensor& y, const Tensor& dy) {
  Tensor dx(y.shape);
  for (std::size_t r = 0; r < y.rows(); ++r) {
    Real dot = 0;
    for (std::size_t j = 0; j < y.cols(); ++j) dot += dy(r, j) * y(r, j);
    for (std::size_t j = 0; j < y.cols(); ++j) dx(r, j) = y(r, j) * (dy(r, j) - dot);
  }
  return dx;
}

using TokenId = std::int64_t;

struct CrossEntropyResult {
  Real loss = 0;
  Tensor probs;
  std::size_t count = 0;  // number of scored (unmasked) rows
};

/// Mean negative log-likelihood over the rows whose mask entry is non-zero.
/// An empty mask scores every row.
inline CrossEntropyResult cross_entropy(const Tensor& logits, const std::vector<TokenId>& targets,
                                        const std::vector<std::uint8_t>& mask = {}) {
  const std::size_t rows = logits.rows(), v = logits.cols();
  if (targets.size() != rows) throw DimensionError("cross_entropy: one target per logits row required");
  if (!mask.empty() && mask.size() != rows) throw DimensionError("cross_entropy: mask length mismatch");
  CrossEntropyResult res;
  res.probs = softmax(logits);
  Real total = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!mask.empty() && !mask[r]) continue;
    const TokenId t = targets[r];
    if (t < 0 || static_cast<std::size_t>(t) >= v) {
      throw IndexError("cross_entropy: target id " + std::to_string(t) + " out of range [0," + std::to_string(v) + ")");
    }
    auto lr = logits.row(r);
    const Real m = *std::max_element(lr.begin(), lr.end());
    Real s = 0;
    for (Real z : lr) s += std::exp(z - m);
    total += (m + std::log(s)) - lr[static_cast<std::size_t>(t)];
    ++res.count;
  }
  if (res.count == 0) throw ArgumentError("cross_entropy: no unmasked positions to score");
  res.loss = total / Real(res.count);
  return res;
}

inline Tensor cross_entropy_backward(const CrossEntropyResult& ce, const std::vector<TokenId>& targets,
                                     const std::vector<std::uint8_t>& mask = {}, Real upstream = Real(1)) {
  Tensor d(ce.probs.shape);
  const Real scale = upstream / Real(ce.count);
  for (std::size_t r = 0; r < ce.probs.rows(); ++r) {
    if (!mask.empty() && !mask[r]) continue;
    for (std::size_t j = 0; j < ce.probs.cols(); ++j) d(r, j) = ce.probs(r, j) * scale;
    d(r, static_cast<std::size_t>(targets[r])) -= scale;
  }
  return d;
}

// ---------------------------------------------------------------------------
// Scaled dot-product attention (single head).

/// Boolean q-by-k matrix; a zero entry removes that key for that query.
struct AttentionMask {
  std::size_t queries = 0, keys = 0;
  std::vector<std::uint8_t> allowed;

  bool ok(std::size_t i, std::size_t j) const { return allowed[i * keys + j] != 0; }
};

/// Query i sees keys j <= i + (keys - queries), i.e. a right-aligned causal mask.
inline AttentionMask causal_mask(std::size_t queries, std::size_t keys) {
  if (keys < queries) throw DimensionError("causal_mask: fewer keys than queries");
  AttentionMask m{queries, keys, std::vector<std::uint8_t>(queries * keys, 0)};
  const std::size_t shift = keys - queries;
  for (std::size_t i = 0; i < queries; ++i) {
    for (std::size_t j = 0; j <= i + shift; ++j) m.allowed[i * keys + j] = 1;
  }
  return m;
}

struct AttentionResult {
  Tensor out;
  Tensor probs;  // [q, k]
};

struct AttentionGrads {
  Tensor dQ, dK, dV;
};

inline AttentionResult attention(const Tensor& Q, const Tensor& K, const Tensor& V,
                                 const std::optional<AttentionMask>& mask = std::nullopt) {
  const std::size_t q = Q.rows(), k = K.rows(), d = Q.cols();
  if (K.cols() != d) throw DimensionError("attention: Q and K head dimensions differ");
  if (V.rows() != k) throw DimensionError("attention: K and V must have the same number of rows");
  if (mask && (mask->queries != q || mask->keys != k)) throw DimensionError("attention: mask must be q x k");
  const Real scale = Real(1) / std::sqrt(Real(d));
  Tensor scores = matmul_nt(Q, K);
  Tensor probs({q, k});
  for (std::size_t i = 0; i < q; ++i) {
    Real m = -std::numeric_limits<Real>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < k; ++j) {
      if (mask && !mask->ok(i, j)) continue;
      any = true;
      m = std::max(m, scores(i, j) * scale);
    }
    if (!any) throw NumericError("attention: query row " + std::to_string(i) + " has every key masked");
    Real s = 0;
    for (std::size_t j = 0; j < k; ++j) {
      if (mask && !mask->ok(i, j)) continue;
      probs(i, j) = std::exp(scores(i, j) * scale - m);
      s += probs(i, j);
    }
    for (std::size_t j = 0; j < k; ++j) probs(i, j) /= s;
  }
  AttentionResult res;
  res.out = matmul(probs, V);
  res.probs = std::move(probs);
  return res;
}

inline AttentionGrads attention_backward(const Tensor& Q, const Tensor& K, const Tensor& V, const Tensor& probs,
                                         const Tensor& dout) {
  const Real scale = Real(1) / std::sqrt(Real(Q.cols()));
  AttentionGrads g;
  g.dV = matmul_tn(probs, dout);
  Tensor dP = matmul_nt(dout, V);
  Tensor dS = softmax_backward(probs, dP);
  for (auto& v : dS.data) v *= scale;
  g.dQ = matmul(dS, K);
  g.dK = matmul_tn(dS, Q);
  return g;
}

}  // namespace bridgest
