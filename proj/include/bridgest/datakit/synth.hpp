#pragma once

// Seeded synthetic corpus standing in for real speech-translation data. Each
// source token owns a fixed feature-codebook row; an utterance's features are
// those rows repeated `frames_per_token` times plus Gaussian noise, and its
// translation is the token-wise image under a bijective mapping.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "bridgest/datakit/utterance.hpp"
#include "bridgest/numerics/random.hpp"

namespace bridgest::data {

struct SynthSpec {
  std::uint64_t seed = 0;
  std::size_t vocab_size = 50;
  std::size_t min_len = 3;
  std::size_t max_len = 8;
  std::vector<std::size_t> mapping;  // empty = identity
  std::size_t frames_per_token = 4;
  std::size_t feature_dim = 8;
  double noise_std = 0.1;
  double frame_shift_s = 0.02;
  Direction direction{"en", "hi"};
  std::string id_prefix = "synth";

  void validate() const {
    if (vocab_size < 2) throw ConfigError("synth: vocab_size must be at least 2");
    if (min_len < 1 || min_len > max_len) throw ConfigError("synth: sentence_length_range must satisfy 1 <= min <= max");
    if (frames_per_token < 1) throw ConfigError("synth: frames_per_token must be positive");
    if (feature_dim < 1) throw ConfigError("synth: feature_dim must be positive");
    if (!(noise_std >= 0)) throw ConfigError("synth: noise_std must be non-negative");
    if (!(frame_shift_s > 0)) throw ConfigError("synth: frame_shift_s must be positive");
    if (!mapping.empty()) {
      if (mapping.size() != vocab_size) throw ConfigError("synth: mapping_rule must cover the whole vocabulary");
      std::vector<bool> seen(vocab_size, false);
      for (auto m : mapping) {
        if (m >= vocab_size || seen[m]) throw ConfigError("synth: mapping_rule is not a bijection");
        seen[m] = true;
      }
    }
  }

  std::size_t map_token(std::size_t t) const { return mapping.empty() ? t : mapping[t]; }
};

/// Seeded permutation of [0, n).
inline std::vector<std::size_t> permutation_mapping(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0x6d617070ULL));
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> d(0, i - 1);
    std::swap(p[i - 1], p[d(rng)]);
  }
  return p;
}

/// Distinct lowercase pseudo-words of 2..7 letters, a function of (seed, n) only.
inline std::vector<std::string> synth_words(std::size_t n, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x776f7264ULL));
  std::uniform_int_distribution<int> len(2, 7), letter(0, 25);
  std::set<std::string> seen;
  std::vector<std::string> out;
  out.reserve(n);
  while (out.size() < n) {
    std::string w(static_cast<std::size_t>(len(rng)), 'a');
    for (auto& c : w) c = static_cast<char>('a' + letter(rng));
    if (seen.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

inline Tensor synth_codebook(const SynthSpec& spec) {
  Rng rng(derive_seed(spec.seed, 0x636f6465ULL));
  return normal_tensor({spec.vocab_size, spec.feature_dim}, Real(1), rng);
}

/// Records [first_index, first_index + n). Record i draws only from its own
/// stream derive_seed(seed, i), so any prefix of a run equals a shorter run.
inline std::vector<UtteranceRecord> synth_generate(const SynthSpec& spec, std::size_t n, std::size_t first_index = 0) {
  spec.validate();
  const auto words = synth_words(spec.vocab_size, spec.seed);
  const Tensor codebook = synth_codebook(spec);
  std::vector<UtteranceRecord> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = first_index + k;
    Rng rng(derive_seed(spec.seed, 0x7265636fULL + i));
    std::uniform_int_distribution<std::size_t> len_d(spec.min_len, spec.max_len), tok_d(0, spec.vocab_size - 1);
    std::normal_distribution<double> noise(0.0, spec.noise_std);
    const std::size_t len = len_d(rng);
    std::vector<std::size_t> toks(len);
    for (auto& t : toks) t = tok_d(rng);
    Tensor feats({len * spec.frames_per_token, spec.feature_dim});
    for (std::size_t p = 0; p < len; ++p) {
      for (std::size_t f = 0; f < spec.frames_per_token; ++f) {
        const std::size_t row = p * spec.frames_per_token + f;
        for (std::size_t d = 0; d < spec.feature_dim; ++d) {
          const double eps = spec.noise_std > 0 ? noise(rng) : 0.0;
          feats(row, d) = codebook(toks[p], d) + static_cast<Real>(eps);
        }
      }
    }
    UtteranceRecord r;
    r.id = spec.id_prefix + "-" + std::to_string(i);
    r.offset_s = 0.0;
    r.duration_s = double(feats.rows()) * spec.frame_shift_s;
    for (std::size_t p = 0; p < len; ++p) {
      r.transcript += (p ? " " : "") + words[toks[p]];
      r.translation += (p ? " " : "") + words[spec.map_token(toks[p])];
    }
    r.direction = spec.direction;
    r.audio_source = std::move(feats);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace bridgest::data
