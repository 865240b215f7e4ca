#pragma once

// Window-level query transformer. The fused frame sequence is cut into
// windows of W frames; in every window the same Q learnable queries attend to
// that window's frames only, so each window yields Q output tokens. Frames
// carry no position inside a window and window order is kept by concatenation.

#include <string>
#include <vector>

#include "bridgest/model/config.hpp"
#include "bridgest/model/fusion.hpp"
#include "bridgest/model/layers.hpp"

namespace bridgest::model {

inline const std::string kQFormer = "qformer";

inline void add_qformer_params(ParameterStore& s, const QFormerConfig& cfg, std::size_t d_in, std::size_t d_out,
                               bool trainable = true) {
  cfg.validate();
  const std::size_t d = cfg.d_model;
  add_linear(s, kQFormer + ".in_proj", d_in, d, cfg.seed, trainable);
  s.add(kQFormer + ".queries", init_normal(cfg.seed, kQFormer + ".queries", {cfg.queries_per_window, d}, Real(1)),
        trainable);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string lp = kQFormer + ".layer" + std::to_string(l);
    add_layer_norm(s, lp + ".ln_self", d, trainable);
    add_mha(s, lp + ".self_attn", d, cfg.seed, trainable);
    add_layer_norm(s, lp + ".ln_cross", d, trainable);
    add_layer_norm(s, lp + ".ln_kv", d, trainable);
    add_mha(s, lp + ".cross_attn", d, cfg.seed, trainable);
    add_layer_norm(s, lp + ".ln_ffn", d, trainable);
    add_ffn(s, lp + ".ffn", d, cfg.seed, trainable);
  }
  add_layer_norm(s, kQFormer + ".ln_out", d, trainable);
  add_linear(s, kQFormer + ".out_proj", d, d_out, cfg.seed, trainable);
}

struct QFormerLayerCache {
  LayerNormCache ln_self, ln_cross, ln_kv, ln_ffn;
  MhaCache self_attn, cross_attn;
  FfnCache ffn;
};

struct QFormerCache {
  ProjCache in_proj;
  std::vector<Window> windows;
  std::vector<std::vector<QFormerLayerCache>> layers;  // [window][layer]
  LayerNormCache ln_out;
  ProjCache out_proj;
  std::size_t fused_rows = 0;
};

namespace detail {

inline Tensor qformer_window(const ParameterStore& s, const QFormerConfig& cfg, const Tensor& frames,
                             std::vector<QFormerLayerCache>* caches) {
  Tensor h = s.at(kQFormer + ".queries");
  h.grad.reset();
  if (caches) caches->assign(cfg.n_layers, {});
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string lp = kQFormer + ".layer" + std::to_string(l);
    QFormerLayerCache* c = caches ? &(*caches)[l] : nullptr;
    Tensor a = ln_forward(s, lp + ".ln_self", h, c ? &c->ln_self : nullptr);
    add_inplace(h, mha_forward(s, lp + ".self_attn", a, a, cfg.n_heads, std::nullopt, 0, c ? &c->self_attn : nullptr));
    Tensor q = ln_forward(s, lp + ".ln_cross", h, c ? &c->ln_cross : nullptr);
    Tensor kv = ln_forward(s, lp + ".ln_kv", frames, c ? &c->ln_kv : nullptr);
    add_inplace(h, mha_forward(s, lp + ".cross_attn", q, kv, cfg.n_heads, std::nullopt, 0, c ? &c->cross_attn : nullptr));
    Tensor f = ln_forward(s, lp + ".ln_ffn", h, c ? &c->ln_ffn : nullptr);
    add_inplace(h, ffn_forward(s, lp + ".ffn", f, c ? &c->ffn : nullptr));
  }
  return h;
}

/// Returns d(window frames); accumulates the query gradient into the store.
inline Tensor qformer_window_backward(ParameterStore& s, const QFormerConfig& cfg,
                                      const std::vector<QFormerLayerCache>& caches, Tensor dh, std::size_t frames) {
  Tensor dframes({frames, cfg.d_model});
  for (std::size_t l = cfg.n_layers; l-- > 0;) {
    const std::string lp = kQFormer + ".layer" + std::to_string(l);
    const QFormerLayerCache& c = caches[l];
    add_inplace(dh, ln_backward(s, lp + ".ln_ffn", c.ln_ffn, ffn_backward(s, lp + ".ffn", c.ffn, dh)));
    auto cg = mha_backward(s, lp + ".cross_attn", c.cross_attn, dh, cfg.n_heads, 0);
    add_inplace(dh, ln_backward(s, lp + ".ln_cross", c.ln_cross, cg.dxq));
    add_inplace(dframes, ln_backward(s, lp + ".ln_kv", c.ln_kv, cg.dxkv));
    auto sg = mha_backward(s, lp + ".self_attn", c.self_attn, dh, cfg.n_heads, 0);
    add_inplace(sg.dxq, sg.dxkv);
    add_inplace(dh, ln_backward(s, lp + ".ln_self", c.ln_self, sg.dxq));
  }
  accumulate_if_wanted(s, kQFormer + ".queries", dh);
  return dframes;
}

}  // namespace detail

/// [T, d_in] fused frames -> [ceil(T/W) * Q, d_out] bridge tokens.
inline Tensor qformer_forward(const Tensor& fused, const QFormerConfig& cfg, const ParameterStore& s,
                              QFormerCache* c = nullptr) {
  const auto windows = window_bounds(fused.rows(), cfg.window_len_frames);
  Tensor x = proj_forward(s, kQFormer + ".in_proj", fused, 0, c ? &c->in_proj : nullptr);
  if (c) {
    c->windows = windows;
    c->layers.assign(windows.size(), {});
    c->fused_rows = fused.rows();
  }
  std::vector<Tensor> outs;
  outs.reserve(windows.size());
  for (std::size_t w = 0; w < windows.size(); ++w) {
    outs.push_back(detail::qformer_window(s, cfg, slice_rows(x, windows[w].begin, windows[w].end),
                                          c ? &c->layers[w] : nullptr));
  }
  Tensor h = concat_rows(outs);
  Tensor n = ln_forward(s, kQFormer + ".ln_out", h, c ? &c->ln_out : nullptr);
  return proj_forward(s, kQFormer + ".out_proj", n, 0, c ? &c->out_proj : nullptr);
}

/// Returns d(fused frames).
inline Tensor qformer_backward(ParameterStore& s, const QFormerConfig& cfg, const QFormerCache& c, const Tensor& dy) {
  Tensor dh = ln_backward(s, kQFormer + ".ln_out", c.ln_out, proj_backward(s, kQFormer + ".out_proj", c.out_proj, dy, 0));
  const std::size_t Q = cfg.queries_per_window;
  Tensor dx({c.fused_rows, cfg.d_model});
  for (std::size_t w = 0; w < c.windows.size(); ++w) {
    Tensor dframes = detail::qformer_window_backward(s, cfg, c.layers[w], slice_rows(dh, w * Q, (w + 1) * Q),
                                                     c.windows[w].size());
    add_into_rows(dx, dframes, c.windows[w].begin);
  }
  return proj_backward(s, kQFormer + ".in_proj", c.in_proj, dx, 0);
}

}  // namespace bridgest::model
