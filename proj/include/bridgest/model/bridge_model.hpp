#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bridgest/model/config.hpp"
#include "bridgest/model/decoder.hpp"
#include "bridgest/model/encoder.hpp"
#include "bridgest/model/fusion.hpp"
#include "bridgest/model/lora.hpp"
#include "bridgest/model/qformer.hpp"
#include "bridgest/textkit/vocab.hpp"

namespace bridgest::model {

inline const std::string kSpeechEncoder = "speech_encoder";
inline const std::string kAudioEncoder = "audio_encoder";

/// One training/eval example in id space.
struct Example {
  std::string id;
  Tensor features;               // [frames, feature_dim]
  std::vector<TokenId> prompt;   // ends with BOS
  std::vector<TokenId> target;   // ends with EOS
};

/// Parameter group of a name: "lora" for adapter factors, otherwise the
/// top-level prefix (speech_encoder, audio_encoder, qformer, decoder).
inline std::string param_group(const std::string& name) {
  if (name.find(".lora.") != std::string::npos) return "lora";
  return name.substr(0, name.find('.'));
}

/// Index of the highest logit in row `r`; ties go to the lowest id.
inline TokenId argmax_row(const Tensor& logits, std::size_t r) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < logits.cols(); ++j) {
    if (logits(r, j) > logits(r, best)) best = j;
  }
  return static_cast<TokenId>(best);
}

/// Greedy decoding from [audio ++ prompt]; stops at EOS (not emitted) or
/// after max_new_tokens.
inline std::vector<TokenId> generate(const Tensor& audio_tokens, const std::vector<TokenId>& prompt_ids,
                                     const DecoderConfig& cfg, Real lora_scaling, const ParameterStore& s,
                                     std::size_t max_new_tokens) {
  if (max_new_tokens < 1) throw ArgumentError("generate: max_new_tokens must be >= 1");
  const std::size_t A = audio_tokens.numel() ? audio_tokens.rows() : 0;
  if (A + prompt_ids.size() == 0) throw ArgumentError("generate: empty context");
  if (A + prompt_ids.size() + max_new_tokens - 1 > cfg.max_seq_len) {
    throw CapacityError("generate: context " + std::to_string(A + prompt_ids.size()) + " plus " +
                        std::to_string(max_new_tokens) + " new tokens exceeds max_seq_len " +
                        std::to_string(cfg.max_seq_len));
  }
  std::vector<TokenId> text = prompt_ids;
  std::vector<TokenId> out;
  for (std::size_t k = 0; k < max_new_tokens; ++k) {
    Tensor logits = decoder_logits(s, cfg, lora_scaling, audio_tokens, text);
    const TokenId next = argmax_row(logits, logits.rows() - 1);
    if (next == text::kEos) break;
    out.push_back(next);
    text.push_back(next);
  }
  return out;
}

struct BridgeCache {
  Tensor features;
  EncoderCache speech, audio;
  std::size_t speech_rows = 0, audio_rows = 0;
  QFormerCache qformer;
};

/// Speech encoder (+ optional audio-event encoder) -> fusion -> Q-Former ->
/// decoder LM with adapters.
class BridgeModel {
 public:
  explicit BridgeModel(ModelConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  const ModelConfig& config() const { return cfg_; }
  Real lora_scaling() const { return cfg_.lora.scaling(); }

  /// Encoders and decoder frozen; Q-Former and adapters trainable.
  ParameterStore init_params() const {
    ParameterStore s;
    add_encoder_params(s, kSpeechEncoder, cfg_.speech, false);
    if (cfg_.use_audio_events) add_encoder_params(s, kAudioEncoder, cfg_.audio_events, false);
    add_qformer_params(s, cfg_.qformer, cfg_.fused_dim(), cfg_.decoder.d_model, true);
    add_decoder_params(s, cfg_.decoder, cfg_.lora);
    return s;
  }

  Tensor bridge_tokens(const ParameterStore& s, const Tensor& features, BridgeCache* c = nullptr) const {
    Tensor speech = encoder_forward(s, kSpeechEncoder, cfg_.speech, features, c ? &c->speech : nullptr);
    std::optional<Tensor> events;
    if (cfg_.use_audio_events) {
      events = encoder_forward(s, kAudioEncoder, cfg_.audio_events, features, c ? &c->audio : nullptr);
    }
    if (c) {
      c->speech_rows = speech.rows();
      c->audio_rows = events ? events->rows() : 0;
    }
    Tensor fused = fuse_features(speech, events);
    return qformer_forward(fused, cfg_.qformer, s, c ? &c->qformer : nullptr);
  }

  void bridge_backward(ParameterStore& s, const BridgeCache& c, const Tensor& dtokens) const {
    Tensor dfused = qformer_backward(s, cfg_.qformer, c.qformer, dtokens);
    const bool speech_grad = s.wants_grad(kSpeechEncoder + ".proj.W");
    const bool audio_grad = cfg_.use_audio_events && s.wants_grad(kAudioEncoder + ".proj.W");
    if (!speech_grad && !audio_grad) return;
    if (!cfg_.use_audio_events) {
      encoder_backward(s, kSpeechEncoder, cfg_.speech, c.speech, dfused);
      return;
    }
    auto [ds, da] = fuse_backward(dfused, c.speech_rows, cfg_.speech.d_model, c.audio_rows, cfg_.audio_events.d_model);
    if (speech_grad) encoder_backward(s, kSpeechEncoder, cfg_.speech, c.speech, ds);
    if (audio_grad) encoder_backward(s, kAudioEncoder, cfg_.audio_events, c.audio, da);
  }

  /// Mean target-token cross-entropy. With `with_grad`, accumulates
  /// grad_scale * dLoss/dθ into the store.
  Real loss(ParameterStore& s, const Example& ex, bool with_grad, Real grad_scale = Real(1)) const {
    if (!with_grad) return loss(static_cast<const ParameterStore&>(s), ex);
    BridgeCache bc;
    Tensor audio = bridge_tokens(s, ex.features, &bc);
    DecoderCache dc;
    auto out = decoder_forward(audio, ex.prompt, ex.target, cfg_.decoder, lora_scaling(), s, &dc);
    Tensor dlogits = cross_entropy_backward(out.ce, out.next_ids, out.scored, grad_scale);
    Tensor daudio = decoder_logits_backward(s, cfg_.decoder, lora_scaling(), dc, dlogits);
    bridge_backward(s, bc, daudio);
    return out.loss;
  }

  Real loss(const ParameterStore& s, const Example& ex) const {
    Tensor audio = bridge_tokens(s, ex.features);
    return decoder_forward(audio, ex.prompt, ex.target, cfg_.decoder, lora_scaling(), s).loss;
  }

  std::vector<TokenId> generate(const ParameterStore& s, const Tensor& features, const std::vector<TokenId>& prompt,
                                std::size_t max_new_tokens) const {
    Tensor audio = bridge_tokens(s, features);
    return model::generate(audio, prompt, cfg_.decoder, lora_scaling(), s, max_new_tokens);
  }

  /// Number of bridge tokens produced for `frames` input frames.
  std::size_t bridge_length(std::size_t frames) const {
    std::size_t T = encoded_length(frames, cfg_.speech);
    if (cfg_.use_audio_events) T = std::min(T, encoded_length(frames, cfg_.audio_events));
    return (T + cfg_.qformer.window_len_frames - 1) / cfg_.qformer.window_len_frames * cfg_.qformer.queries_per_window;
  }

 private:
  ModelConfig cfg_;
};

/// Same configuration with every adapter removed.
inline ParameterStore strip_lora(const ParameterStore& s) {
  ParameterStore out;
  for (const auto& [n, e] : s.entries()) {
    if (param_group(n) == "lora") continue;
    out.add(n, Tensor(e.value.shape, e.value.data), e.trainable);
  }
  return out;
}

}  // namespace bridgest::model
