#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "bridgest/errors.hpp"
#include "bridgest/numerics/tensor.hpp"

namespace bridgest::model {

struct EncoderConfig {
  std::size_t feature_dim_in = 8;
  std::size_t d_model = 16;
  std::size_t n_layers = 1;
  std::uint64_t seed = 11;
  std::size_t hop = 2;  // input frames per output frame

  void validate() const {
    if (!feature_dim_in || !d_model || !n_layers || !hop) throw ConfigError("encoder: all sizes must be positive");
  }
};

struct QFormerConfig {
  std::size_t window_len_frames = 17;
  std::size_t queries_per_window = 1;
  std::size_t d_model = 16;
  std::size_t n_layers = 1;
  std::size_t n_heads = 1;
  std::uint64_t seed = 23;

  void validate() const {
    if (!window_len_frames || !queries_per_window) throw ConfigError("qformer: window and query counts must be >= 1");
    if (!d_model || !n_layers || !n_heads) throw ConfigError("qformer: sizes must be positive");
    if (d_model % n_heads) throw ConfigError("qformer: d_model must be divisible by n_heads");
  }
};

struct LoRAConfig {
  std::size_t rank = 8;
  double alpha = 32;
  std::set<std::string> targets{"q", "v"};  // decoder self-attention projections
  std::uint64_t init_seed = 31;

  Real scaling() const { return static_cast<Real>(alpha / double(rank)); }

  void validate() const {
    if (rank < 1) throw ConfigError("lora: rank must be >= 1");
    if (!(alpha > 0)) throw ConfigError("lora: alpha must be positive");
    for (const auto& t : targets) {
      if (t != "q" && t != "k" && t != "v" && t != "o") throw ConfigError("lora: unknown target projection '" + t + "'");
    }
  }
};

struct DecoderConfig {
  std::size_t vocab_size = 64;
  std::size_t d_model = 16;
  std::size_t n_layers = 1;
  std::size_t n_heads = 1;
  std::size_t max_seq_len = 64;
  std::uint64_t seed = 41;

  void validate() const {
    if (!vocab_size || !d_model || !n_layers || !n_heads || !max_seq_len) {
      throw ConfigError("decoder: all sizes must be positive");
    }
    if (d_model % n_heads) throw ConfigError("decoder: d_model must be divisible by n_heads");
  }
};

struct ModelConfig {
  EncoderConfig speech;
  EncoderConfig audio_events{8, 8, 1, 13, 4};
  bool use_audio_events = false;
  QFormerConfig qformer;
  LoRAConfig lora;
  DecoderConfig decoder;

  std::size_t fused_dim() const { return speech.d_model + (use_audio_events ? audio_events.d_model : 0); }

  void validate() const {
    speech.validate();
    if (use_audio_events) {
      audio_events.validate();
      if (audio_events.feature_dim_in != speech.feature_dim_in) {
        throw ConfigError("audio_events encoder must read the same feature dimension as the speech encoder");
      }
    }
    qformer.validate();
    lora.validate();
    decoder.validate();
  }
};

// ---------------------------------------------------------------------------
// JSON. Unknown keys are rejected; missing keys keep their defaults.

namespace detail {

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, _] : j.items()) {
    bool known = false;
    for (const char* s : keys) known = known || k == s;
    if (!known) throw ConfigError(where + ": unknown key '" + k + "'");
  }
}

}  // namespace detail

inline nlohmann::json to_json(const EncoderConfig& c) {
  return {{"feature_dim_in", c.feature_dim_in}, {"d_model", c.d_model}, {"n_layers", c.n_layers},
          {"seed", c.seed}, {"hop", c.hop}};
}
inline void from_json(const nlohmann::json& j, EncoderConfig& c, const std::string& where = "encoder") {
  detail::reject_unknown(j, {"feature_dim_in", "d_model", "n_layers", "seed", "hop"}, where);
  detail::read(j, "feature_dim_in", c.feature_dim_in);
  detail::read(j, "d_model", c.d_model);
  detail::read(j, "n_layers", c.n_layers);
  detail::read(j, "seed", c.seed);
  detail::read(j, "hop", c.hop);
}

inline nlohmann::json to_json(const QFormerConfig& c) {
  return {{"window_len_frames", c.window_len_frames}, {"queries_per_window", c.queries_per_window},
          {"d_model", c.d_model}, {"n_layers", c.n_layers}, {"n_heads", c.n_heads}, {"seed", c.seed}};
}
inline void from_json(const nlohmann::json& j, QFormerConfig& c) {
  detail::reject_unknown(j, {"window_len_frames", "queries_per_window", "d_model", "n_layers", "n_heads", "seed"},
                         "qformer");
  detail::read(j, "window_len_frames", c.window_len_frames);
  detail::read(j, "queries_per_window", c.queries_per_window);
  detail::read(j, "d_model", c.d_model);
  detail::read(j, "n_layers", c.n_layers);
  detail::read(j, "n_heads", c.n_heads);
  detail::read(j, "seed", c.seed);
}

inline nlohmann::json to_json(const LoRAConfig& c) {
  return {{"rank", c.rank}, {"alpha", c.alpha}, {"targets", c.targets}, {"init_seed", c.init_seed}};
}
inline void from_json(const nlohmann::json& j, LoRAConfig& c) {
  detail::reject_unknown(j, {"rank", "alpha", "targets", "init_seed"}, "lora");
  detail::read(j, "rank", c.rank);
  detail::read(j, "alpha", c.alpha);
  detail::read(j, "targets", c.targets);
  detail::read(j, "init_seed", c.init_seed);
}

inline nlohmann::json to_json(const DecoderConfig& c) {
  return {{"vocab_size", c.vocab_size}, {"d_model", c.d_model},         {"n_layers", c.n_layers},
          {"n_heads", c.n_heads},       {"max_seq_len", c.max_seq_len}, {"seed", c.seed}};
}
inline void from_json(const nlohmann::json& j, DecoderConfig& c) {
  detail::reject_unknown(j, {"vocab_size", "d_model", "n_layers", "n_heads", "max_seq_len", "seed"}, "decoder");
  detail::read(j, "vocab_size", c.vocab_size);
  detail::read(j, "d_model", c.d_model);
  detail::read(j, "n_layers", c.n_layers);
  detail::read(j, "n_heads", c.n_heads);
  detail::read(j, "max_seq_len", c.max_seq_len);
  detail::read(j, "seed", c.seed);
}

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"speech_encoder", to_json(c.speech)}, {"audio_encoder", to_json(c.audio_events)},
          {"use_audio_events", c.use_audio_events}, {"qformer", to_json(c.qformer)},
          {"lora", to_json(c.lora)}, {"decoder", to_json(c.decoder)}};
}
inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  detail::reject_unknown(j, {"speech_encoder", "audio_encoder", "use_audio_events", "qformer", "lora", "decoder"},
                         "model");
  if (j.contains("speech_encoder")) from_json(j.at("speech_encoder"), c.speech, "speech_encoder");
  if (j.contains("audio_encoder")) from_json(j.at("audio_encoder"), c.audio_events, "audio_encoder");
  detail::read(j, "use_audio_events", c.use_audio_events);
  if (j.contains("qformer")) from_json(j.at("qformer"), c.qformer);
  if (j.contains("lora")) from_json(j.at("lora"), c.lora);
  if (j.contains("decoder")) from_json(j.at("decoder"), c.decoder);
}

}  // namespace bridgest::model
