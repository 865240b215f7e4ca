#pragma once

// Glue between manifest records and id-space examples.

#include <string>
#include <vector>

#include "bridgest/datakit/utterance.hpp"
#include "bridgest/model/bridge_model.hpp"
#include "bridgest/textkit/cot.hpp"
#include "bridgest/textkit/vocab.hpp"
#include "bridgest/training/trainer.hpp"

namespace bridgest::train {

struct TextSetup {
  std::string prompt = "translate";  // per-direction prompt text
  bool cot = false;                  // targets are transcription-then-translation
};

/// Vocabulary over every transcript, translation and prompt word, plus the CoT
/// markers when CoT targets are used.
inline text::Vocab build_vocab(const std::vector<const std::vector<data::UtteranceRecord>*>& sets,
                               const TextSetup& setup) {
  std::vector<std::string> texts{setup.prompt};
  if (setup.cot) {
    texts.emplace_back(text::kTranscriptionMarker);
    texts.emplace_back(text::kTranslationMarker);
  }
  for (const auto* s : sets) {
    for (const auto& r : *s) {
      texts.push_back(r.transcript);
      texts.push_back(r.translation);
    }
  }
  return text::Vocab::from_texts(texts);
}

inline std::vector<TokenId> prompt_ids(const text::Vocab& v, const TextSetup& setup) {
  auto ids = v.encode(setup.prompt);
  ids.push_back(text::kBos);
  return ids;
}

inline std::string target_text(const data::UtteranceRecord& r, const TextSetup& setup) {
  return setup.cot ? text::format_cot_target(text::normalize_whitespace(r.transcript),
                                             text::normalize_whitespace(r.translation))
                   : r.translation;
}

inline Example make_example(const data::UtteranceRecord& r, const text::Vocab& v, const TextSetup& setup) {
  Example ex;
  ex.id = r.id;
  ex.features = r.features();
  ex.prompt = prompt_ids(v, setup);
  ex.target = v.encode(target_text(r, setup));
  ex.target.push_back(text::kEos);
  return ex;
}

inline std::vector<Example> make_examples(const std::vector<data::UtteranceRecord>& rs, const text::Vocab& v,
                                          const TextSetup& setup) {
  std::vector<Example> out;
  out.reserve(rs.size());
  for (const auto& r : rs) out.push_back(make_example(r, v, setup));
  return out;
}

inline EvalSet make_eval_set(const std::vector<data::UtteranceRecord>& rs, const text::Vocab& v,
                             const TextSetup& setup) {
  EvalSet e;
  e.examples = make_examples(rs, v, setup);
  for (const auto& r : rs) e.references.push_back(text::normalize_whitespace(r.translation));
  return e;
}

}  // namespace bridgest::train
