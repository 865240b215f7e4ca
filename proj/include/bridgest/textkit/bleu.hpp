#pragma once

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "bridgest/errors.hpp"
#include "bridgest/textkit/tokenize.hpp"

namespace bridgest::text {

inline constexpr int kBleuOrder = 4;

struct BleuReport {
  double score = 0;                       // [0, 100]
  std::array<double, kBleuOrder> precisions{};
  double brevity_penalty = 1;
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
};

enum class BleuSmoothing { kNone, kExp };

/// Pooled clipped n-gram statistics; adding sentences is order-free.
struct BleuStats {
  std::array<std::size_t, kBleuOrder> matches{};
  std::array<std::size_t, kBleuOrder> totals{};
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;

  void add(const Tokens& hyp, const Tokens& ref) {
    hyp_len += hyp.size();
    ref_len += ref.size();
    for (int n = 1; n <= kBleuOrder; ++n) {
      auto hc = ngram_counts(hyp, n);
      auto rc = ngram_counts(ref, n);
      for (const auto& [g, c] : hc) {
        auto it = rc.find(g);
        if (it != rc.end()) matches[n - 1] += std::min(c, it->second);
        totals[n - 1] += c;
      }
    }
  }

  static std::map<Tokens, std::size_t> ngram_counts(const Tokens& toks, int n) {
    std::map<Tokens, std::size_t> out;
    const auto un = static_cast<std::size_t>(n);
    if (toks.size() < un) return out;
    for (std::size_t i = 0; i + un <= toks.size(); ++i) ++out[Tokens(toks.begin() + i, toks.begin() + i + un)];
    return out;
  }

  BleuReport report(BleuSmoothing smoothing = BleuSmoothing::kNone) const {
    BleuReport r;
    r.hyp_len = hyp_len;
    r.ref_len = ref_len;
    double log_sum = 0;
    bool zero = false;
    double invcnt = 1;
    for (int n = 0; n < kBleuOrder; ++n) {
      double p = 0;
      if (totals[n] == 0) {
        // no n-grams of this order anywhere in the hypotheses: vacuously precise
        p = hyp_len == 0 && ref_len > 0 ? 0.0 : 1.0;
      } else if (matches[n] > 0) {
        p = double(matches[n]) / double(totals[n]);
      } else if (smoothing == BleuSmoothing::kExp && totals[n] > 0) {
        invcnt *= 2;
        p = 1.0 / (invcnt * double(totals[n]));
      }
      r.precisions[n] = p;
      if (p > 0) {
        log_sum += std::log(p);
      } else {
        zero = true;
      }
    }
    const double hl = double(std::max<std::size_t>(hyp_len, 1));
    r.brevity_penalty = hyp_len < ref_len ? std::exp(1.0 - double(ref_len) / hl) : 1.0;
    r.score = zero ? 0.0 : 100.0 * r.brevity_penalty * std::exp(log_sum / kBleuOrder);
    return r;
  }
};

/// Corpus-level 4-gram BLEU with a single reference per hypothesis.
inline BleuReport bleu_corpus(const std::vector<Tokens>& hyps, const std::vector<Tokens>& refs,
                              BleuSmoothing smoothing = BleuSmoothing::kNone) {
  if (hyps.size() != refs.size()) {
    throw ArgumentError("bleu_corpus: " + std::to_string(hyps.size()) + " hypotheses vs " +
                        std::to_string(refs.size()) + " references");
  }
  if (hyps.empty()) throw ArgumentError("bleu_corpus: empty corpus");
  BleuStats s;
  for (std::size_t i = 0; i < hyps.size(); ++i) s.add(hyps[i], refs[i]);
  return s.report(smoothing);
}

inline BleuReport bleu_corpus(const std::vector<std::string>& hyps, const std::vector<std::string>& refs,
                              BleuSmoothing smoothing = BleuSmoothing::kNone) {
  std::vector<Tokens> h, r;
  h.reserve(hyps.size());
  r.reserve(refs.size());
  for (const auto& s : hyps) h.push_back(tokenize(s));
  for (const auto& s : refs) r.push_back(tokenize(s));
  return bleu_corpus(h, r, smoothing);
}

}  // namespace bridgest::text
