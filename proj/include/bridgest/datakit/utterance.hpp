#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "bridgest/errors.hpp"
#include "bridgest/numerics/tensor.hpp"
#include "bridgest/textkit/utf8.hpp"

namespace bridgest::data {

/// Ordered language pair, written as "src-tgt" (e.g. "en-hi").
struct Direction {
  std::string src;
  std::string tgt;

  static Direction parse(std::string_view tag) {
    std::string s(tag);
    std::size_t pos = s.find("->");
    std::size_t skip = 2;
    if (pos == std::string::npos) {
      pos = s.find("\xE2\x86\x92");  // U+2192 RIGHTWARDS ARROW
      skip = 3;
    }
    if (pos == std::string::npos) {
      pos = s.find('-');
      skip = 1;
    }
    if (pos == std::string::npos || pos == 0 || pos + skip >= s.size()) {
      throw ValidationError("direction tag '" + s + "' is not of the form src-tgt");
    }
    return {s.substr(0, pos), s.substr(pos + skip)};
  }

  std::string tag() const { return src + "-" + tgt; }
  bool operator==(const Direction&) const = default;
  auto operator<=>(const Direction&) const = default;
};

struct AudioFile {
  std::string path;
};

/// Frames x feature_dim matrix carried inline in the manifest.
using InlineFeatures = Tensor;

struct UtteranceRecord {
  std::string id;
  std::variant<AudioFile, InlineFeatures> audio_source;
  double offset_s = 0;
  double duration_s = 0;
  std::string transcript;
  std::string translation;
  Direction direction;

  bool has_features() const { return std::holds_alternative<InlineFeatures>(audio_source); }
  const Tensor& features() const {
    if (!has_features()) throw ValidationError("utterance '" + id + "' has no inline features");
    return std::get<InlineFeatures>(audio_source);
  }
};

inline void validate(const UtteranceRecord& r) {
  if (r.id.empty()) throw ValidationError("utterance: field 'id' is empty");
  if (!(r.offset_s >= 0)) throw ValidationError("utterance '" + r.id + "': field 'offset_s' must be >= 0");
  if (!(r.duration_s > 0)) throw ValidationError("utterance '" + r.id + "': field 'duration_s' must be > 0");
  if (text::trim(r.transcript).empty()) throw ValidationError("utterance '" + r.id + "': field 'transcript' is empty");
  if (text::trim(r.translation).empty()) {
    throw ValidationError("utterance '" + r.id + "': field 'translation' is empty");
  }
}

}  // namespace bridgest::data
