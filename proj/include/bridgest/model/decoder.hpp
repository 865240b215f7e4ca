#pragma once

// Tiny causal decoder LM standing in for the frozen text model. The input is
// [bridge tokens] ++ [prompt embeddings] ++ [target embeddings]. Positions are
// counted from zero within each segment (audio, text) and a learned segment
// embedding tells the two apart. Adapters sit on the configured self-attention
// projections.

#include <string>
#include <vector>

#include "bridgest/model/config.hpp"
#include "bridgest/model/layers.hpp"
#include "bridgest/model/lora.hpp"

namespace bridgest::model {

inline const std::string kDecoder = "decoder";

inline void add_decoder_params(ParameterStore& s, const DecoderConfig& cfg, const LoRAConfig& lora) {
  cfg.validate();
  lora.validate();
  const std::size_t d = cfg.d_model;
  s.add(kDecoder + ".tok_emb", init_normal(cfg.seed, kDecoder + ".tok_emb", {cfg.vocab_size, d}, Real(1)), false);
  s.add(kDecoder + ".pos_emb", init_normal(cfg.seed, kDecoder + ".pos_emb", {cfg.max_seq_len, d}, Real(1)), false);
  s.add(kDecoder + ".seg_emb", init_normal(cfg.seed, kDecoder + ".seg_emb", {2, d}, Real(1)), false);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string lp = kDecoder + ".layer" + std::to_string(l);
    add_layer_norm(s, lp + ".ln1", d, false);
    add_mha(s, lp + ".attn", d, cfg.seed, false);
    for (const auto& t : lora.targets) add_lora(s, lp + ".attn." + t, lora);
    add_layer_norm(s, lp + ".ln2", d, false);
    add_ffn(s, lp + ".ffn", d, cfg.seed, false);
  }
  add_layer_norm(s, kDecoder + ".ln_f", d, false);
  // Half-scale head: untrained next-token distributions stay close to uniform.
  add_linear(s, kDecoder + ".head", d, cfg.vocab_size, cfg.seed, false, Real(0.75));
}

struct DecoderLayerCache {
  LayerNormCache ln1, ln2;
  MhaCache attn;
  FfnCache ffn;
};

struct DecoderCache {
  std::size_t audio_len = 0;
  std::vector<TokenId> text_ids;
  std::vector<DecoderLayerCache> layers;
  LayerNormCache ln_f;
  ProjCache head;
};

/// Logits for every position of [audio ++ text_ids].
inline Tensor decoder_logits(const ParameterStore& s, const DecoderConfig& cfg, Real lora_scaling,
                             const Tensor& audio_tokens, const std::vector<TokenId>& text_ids,
                             DecoderCache* c = nullptr) {
  const std::size_t d = cfg.d_model;
  const std::size_t A = audio_tokens.numel() ? audio_tokens.rows() : 0;
  const std::size_t S = A + text_ids.size();
  if (S == 0) throw ArgumentError("decoder: empty input sequence");
  if (S > cfg.max_seq_len) {
    throw CapacityError("decoder: sequence length " + std::to_string(S) + " exceeds max_seq_len " +
                        std::to_string(cfg.max_seq_len));
  }
  if (A && audio_tokens.cols() != d) throw DimensionError("decoder: bridge tokens must have width d_model");
  const Tensor& tok = s.at(kDecoder + ".tok_emb");
  const Tensor& pos = s.at(kDecoder + ".pos_emb");
  const Tensor& seg = s.at(kDecoder + ".seg_emb");
  Tensor h({S, d});
  for (std::size_t i = 0; i < S; ++i) {
    const bool audio = i < A;
    const std::size_t p = audio ? i : i - A;
    for (std::size_t j = 0; j < d; ++j) h(i, j) = pos(p, j) + seg(audio ? 0 : 1, j);
    if (audio) {
      for (std::size_t j = 0; j < d; ++j) h(i, j) += audio_tokens(i, j);
    } else {
      const TokenId t = text_ids[i - A];
      if (t < 0 || static_cast<std::size_t>(t) >= cfg.vocab_size) {
        throw IndexError("decoder: token id " + std::to_string(t) + " out of range");
      }
      for (std::size_t j = 0; j < d; ++j) h(i, j) += tok(static_cast<std::size_t>(t), j);
    }
  }
  const auto mask = causal_mask(S, S);
  if (c) {
    c->audio_len = A;
    c->text_ids = text_ids;
    c->layers.assign(cfg.n_layers, {});
  }
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string lp = kDecoder + ".layer" + std::to_string(l);
    DecoderLayerCache* lc = c ? &c->layers[l] : nullptr;
    Tensor a = ln_forward(s, lp + ".ln1", h, lc ? &lc->ln1 : nullptr);
    add_inplace(h, mha_forward(s, lp + ".attn", a, a, cfg.n_heads, mask, lora_scaling, lc ? &lc->attn : nullptr));
    Tensor f = ln_forward(s, lp + ".ln2", h, lc ? &lc->ln2 : nullptr);
    add_inplace(h, ffn_forward(s, lp + ".ffn", f, lc ? &lc->ffn : nullptr));
  }
  Tensor n = ln_forward(s, kDecoder + ".ln_f", h, c ? &c->ln_f : nullptr);
  return proj_forward(s, kDecoder + ".head", n, 0, c ? &c->head : nullptr);
}

/// Backward from d(logits); returns d(bridge tokens).
inline Tensor decoder_logits_backward(ParameterStore& s, const DecoderConfig& cfg, Real lora_scaling,
                                      const DecoderCache& c, const Tensor& dlogits) {
  Tensor dh = ln_backward(s, kDecoder + ".ln_f", c.ln_f, proj_backward(s, kDecoder + ".head", c.head, dlogits, 0));
  for (std::size_t l = cfg.n_layers; l-- > 0;) {
    const std::string lp = kDecoder + ".layer" + std::to_string(l);
    const DecoderLayerCache& lc = c.layers[l];
    add_inplace(dh, ln_backward(s, lp + ".ln2", lc.ln2, ffn_backward(s, lp + ".ffn", lc.ffn, dh)));
    auto g = mha_backward(s, lp + ".attn", lc.attn, dh, cfg.n_heads, lora_scaling);
    add_inplace(g.dxq, g.dxkv);
    add_inplace(dh, ln_backward(s, lp + ".ln1", lc.ln1, g.dxq));
  }
  const std::size_t A = c.audio_len, d = cfg.d_model;
  const bool want_tok = s.wants_grad(kDecoder + ".tok_emb");
  const bool want_pos = s.wants_grad(kDecoder + ".pos_emb");
  const bool want_seg = s.wants_grad(kDecoder + ".seg_emb");
  if (want_tok || want_pos || want_seg) {
    Tensor dtok(s.at(kDecoder + ".tok_emb").shape), dpos(s.at(kDecoder + ".pos_emb").shape), dseg({2, d});
    for (std::size_t i = 0; i < dh.rows(); ++i) {
      const bool audio = i < A;
      const std::size_t p = audio ? i : i - A;
      for (std::size_t j = 0; j < d; ++j) {
        dpos(p, j) += dh(i, j);
        dseg(audio ? 0 : 1, j) += dh(i, j);
        if (!audio) dtok(static_cast<std::size_t>(c.text_ids[i - A]), j) += dh(i, j);
      }
    }
    if (want_tok) s.accumulate(kDecoder + ".tok_emb", dtok);
    if (want_pos) s.accumulate(kDecoder + ".pos_emb", dpos);
    if (want_seg) s.accumulate(kDecoder + ".seg_emb", dseg);
  }
  if (A == 0) return Tensor();
  return slice_rows(dh, 0, A);
}

struct DecoderOutput {
  Real loss = 0;
  Tensor logits;
  CrossEntropyResult ce;
  std::vector<TokenId> next_ids;       // target for every row (0 where unscored)
  std::vector<std::uint8_t> scored;    // rows that predict a target token
};

/// Teacher-forced loss: the row just before each target token predicts it.
inline DecoderOutput decoder_forward(const Tensor& audio_tokens, const std::vector<TokenId>& prompt_ids,
                                     const std::vector<TokenId>& target_ids, const DecoderConfig& cfg,
                                     Real lora_scaling, const ParameterStore& s, DecoderCache* c = nullptr) {
  if (target_ids.empty()) throw ArgumentError("decoder_forward: empty target, nothing to score");
  const std::size_t A = audio_tokens.numel() ? audio_tokens.rows() : 0;
  if (A + prompt_ids.size() == 0) throw ArgumentError("decoder_forward: no context before the first target token");
  std::vector<TokenId> text = prompt_ids;
  text.insert(text.end(), target_ids.begin(), target_ids.end());
  DecoderOutput out;
  out.logits = decoder_logits(s, cfg, lora_scaling, audio_tokens, text, c);
  const std::size_t S = out.logits.rows();
  const std::size_t first = A + prompt_ids.size() - 1;
  out.next_ids.assign(S, 0);
  out.scored.assign(S, 0);
  for (std::size_t t = 0; t < target_ids.size(); ++t) {
    out.next_ids[first + t] = target_ids[t];
    out.scored[first + t] = 1;
  }
  out.ce = cross_entropy(out.logits, out.next_ids, out.scored);
  out.loss = out.ce.loss;
  return out;
}

}  // namespace bridgest::model
