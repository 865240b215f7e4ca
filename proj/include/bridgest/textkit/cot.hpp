#pragma once

// Chain-of-thought response format: the model first writes the source-language
// transcription, then the translation.
//
//   Transcription: <source text>
//   Translation: <target text>

#include <algorithm>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bridgest/errors.hpp"
#include "bridgest/textkit/bleu.hpp"
#include "bridgest/textkit/utf8.hpp"

namespace bridgest::text {

inline constexpr std::string_view kTranscriptionMarker = "Transcription:";
inline constexpr std::string_view kTranslationMarker = "Translation:";

enum class ParseStatus { kParsed, kMalformed };

struct CoTResponse {
  std::string raw;
  ParseStatus status = ParseStatus::kMalformed;
  std::optional<std::string> transcription;
  std::optional<std::string> translation;

  bool parsed() const { return status == ParseStatus::kParsed; }
};

namespace detail {

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline bool has_marker_line(std::string_view field) {
  const std::string low = ascii_lower(field);
  const std::string m1 = ascii_lower(kTranscriptionMarker), m2 = ascii_lower(kTranslationMarker);
  std::size_t start = 0;
  while (start <= low.size()) {
    std::size_t end = low.find('\n', start);
    if (end == std::string::npos) end = low.size();
    std::string line = trim(std::string_view(low).substr(start, end - start));
    if (line.rfind(m1, 0) == 0 || line.rfind(m2, 0) == 0) return true;
    start = end + 1;
  }
  return false;
}

}  // namespace detail

/// Renders the canonical two-line target. Throws FormatError when a field is
/// empty or would confuse the parser.
inline std::string format_cot_target(std::string_view transcription, std::string_view translation) {
  if (trim(transcription).empty()) throw FormatError("cot: transcription is empty");
  if (trim(translation).empty()) throw FormatError("cot: translation is empty");
  if (detail::has_marker_line(transcription) || detail::has_marker_line(translation)) {
    throw FormatError("cot: field contains a line starting with a marker");
  }
  // the parser keys on the last translation marker
  if (detail::ascii_lower(translation).find(detail::ascii_lower(kTranslationMarker)) != std::string::npos) {
    throw FormatError("cot: translation contains the translation marker");
  }
  std::string out;
  out.reserve(transcription.size() + translation.size() + 32);
  out += kTranscriptionMarker;
  out += ' ';
  out += transcription;
  out += '\n';
  out += kTranslationMarker;
  out += ' ';
  out += translation;
  return out;
}

/// Tolerant parse of arbitrary model output. Markers match case-insensitively
/// anywhere in the text; the transcription runs from the first transcription
/// marker to the last translation marker, the translation from there to the
/// end. Never throws on malformed input.
inline CoTResponse parse_cot_response(std::string_view raw) {
  CoTResponse r;
  r.raw = std::string(raw);
  const std::string low = detail::ascii_lower(raw);
  const std::string m1 = detail::ascii_lower(kTranscriptionMarker), m2 = detail::ascii_lower(kTranslationMarker);
  const std::size_t p1 = low.find(m1);
  const std::size_t p2 = low.rfind(m2);
  if (p1 == std::string::npos || p2 == std::string::npos || p2 < p1 + m1.size()) return r;
  std::string src = trim(raw.substr(p1 + m1.size(), p2 - (p1 + m1.size())));
  std::string tgt = trim(raw.substr(p2 + m2.size()));
  if (src.empty() || tgt.empty()) return r;
  r.transcription = std::move(src);
  r.translation = std::move(tgt);
  r.status = ParseStatus::kParsed;
  return r;
}

/// Which baseline the delta column compares against.
enum class DeltaBaseline {
  kParsedSubset,  // baseline restricted to the utterances whose CoT output parsed
  kFullSet,       // baseline over every utterance
};

struct CotMetrics {
  std::size_t total = 0;
  std::size_t parsed = 0;
  double success_rate_pct = 0;
  std::optional<BleuReport> bleu_parsed;
  std::optional<BleuReport> bleu_baseline;
  std::optional<double> delta;
};

inline CotMetrics cot_metrics(const std::vector<CoTResponse>& responses, const std::vector<std::string>& refs,
                              const std::vector<std::string>& baseline_hyps,
                              DeltaBaseline mode = DeltaBaseline::kParsedSubset) {
  if (responses.size() != refs.size() || responses.size() != baseline_hyps.size()) {
    throw ArgumentError("cot_metrics: responses, references and baseline hypotheses must be index-aligned");
  }
  CotMetrics m;
  m.total = responses.size();
  std::vector<std::string> hyp, ref, base;
  for (std::size_t i = 0; i < responses.size(); ++i) {
    if (!responses[i].parsed()) continue;
    hyp.push_back(*responses[i].translation);
    ref.push_back(refs[i]);
    base.push_back(baseline_hyps[i]);
  }
  m.parsed = hyp.size();
  m.success_rate_pct = m.total ? 100.0 * double(m.parsed) / double(m.total) : 0.0;
  if (m.parsed == 0) return m;
  m.bleu_parsed = bleu_corpus(hyp, ref);
  m.bleu_baseline = mode == DeltaBaseline::kParsedSubset ? bleu_corpus(base, ref) : bleu_corpus(baseline_hyps, refs);
  m.delta = m.bleu_parsed->score - m.bleu_baseline->score;
  return m;
}

}  // namespace bridgest::text
