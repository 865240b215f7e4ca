#pragma once

// Frozen toy audio encoder: average-pool `hop` input frames, project to
// d_model, then residual position-wise MLP layers. Used for both the speech
// stream and the optional audio-event stream.

#include <string>
#include <vector>

#include "bridgest/model/config.hpp"
#include "bridgest/model/layers.hpp"

namespace bridgest::model {

inline Tensor avg_pool(const Tensor& x, std::size_t hop) {
  const std::size_t T = x.rows(), F = x.cols();
  const std::size_t out_T = (T + hop - 1) / hop;
  Tensor y({out_T, F});
  for (std::size_t t = 0; t < out_T; ++t) {
    const std::size_t b = t * hop, e = std::min(T, b + hop);
    for (std::size_t i = b; i < e; ++i) {
      for (std::size_t f = 0; f < F; ++f) y(t, f) += x(i, f);
    }
    for (std::size_t f = 0; f < F; ++f) y(t, f) /= Real(e - b);
  }
  return y;
}

inline Tensor avg_pool_backward(const Tensor& dy, std::size_t T, std::size_t hop) {
  Tensor dx({T, dy.cols()});
  for (std::size_t t = 0; t < dy.rows(); ++t) {
    const std::size_t b = t * hop, e = std::min(T, b + hop);
    for (std::size_t i = b; i < e; ++i) {
      for (std::size_t f = 0; f < dy.cols(); ++f) dx(i, f) = dy(t, f) / Real(e - b);
    }
  }
  return dx;
}

inline void add_encoder_params(ParameterStore& s, const std::string& p, const EncoderConfig& cfg, bool trainable) {
  cfg.validate();
  add_linear(s, p + ".proj", cfg.feature_dim_in, cfg.d_model, cfg.seed, trainable);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string lp = p + ".layer" + std::to_string(l);
    add_layer_norm(s, lp + ".ln", cfg.d_model, trainable);
    add_ffn(s, lp, cfg.d_model, cfg.seed, trainable);
  }
}

struct EncoderCache {
  std::size_t in_frames = 0;
  ProjCache proj;
  std::vector<LayerNormCache> ln;
  std::vector<FfnCache> ffn;
};

inline Tensor encoder_forward(const ParameterStore& s, const std::string& p, const EncoderConfig& cfg,
                              const Tensor& features, EncoderCache* c = nullptr) {
  if (features.rank() != 2 || features.rows() == 0) throw DimensionError(p + ": features must be a [T, F] matrix, T >= 1");
  if (features.cols() != cfg.feature_dim_in) {
    throw DimensionError(p + ": feature dimension " + std::to_string(features.cols()) + " does not match configured " +
                         std::to_string(cfg.feature_dim_in));
  }
  Tensor h = proj_forward(s, p + ".proj", avg_pool(features, cfg.hop), 0, c ? &c->proj : nullptr);
  if (c) {
    c->in_frames = features.rows();
    c->ln.assign(cfg.n_layers, {});
    c->ffn.assign(cfg.n_layers, {});
  }
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string lp = p + ".layer" + std::to_string(l);
    Tensor a = ln_forward(s, lp + ".ln", h, c ? &c->ln[l] : nullptr);
    add_inplace(h, ffn_forward(s, lp, a, c ? &c->ffn[l] : nullptr));
  }
  return h;
}

/// Accumulates parameter gradients; the raw features need no gradient.
inline void encoder_backward(ParameterStore& s, const std::string& p, const EncoderConfig& cfg, const EncoderCache& c,
                             Tensor dh) {
  for (std::size_t l = cfg.n_layers; l-- > 0;) {
    const std::string lp = p + ".layer" + std::to_string(l);
    Tensor da = ffn_backward(s, lp, c.ffn[l], dh);
    add_inplace(dh, ln_backward(s, lp + ".ln", c.ln[l], da));
  }
  proj_backward(s, p + ".proj", c.proj, dh, 0);
}

/// Output frame count for T input frames: ceil(T / hop).
inline std::size_t encoded_length(std::size_t T, const EncoderConfig& cfg) { return (T + cfg.hop - 1) / cfg.hop; }

/// Stand-alone speech encoding with weights drawn from cfg.seed.
inline Tensor encode_speech(const Tensor& features, const EncoderConfig& cfg) {
  ParameterStore s;
  add_encoder_params(s, "speech_encoder", cfg, false);
  return encoder_forward(s, "speech_encoder", cfg, features);
}

}  // namespace bridgest::model
