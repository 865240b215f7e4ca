#pragma once

#include <string>
#include <vector>

#include "bridgest/datakit/utterance.hpp"
#include "bridgest/textkit/utf8.hpp"

namespace bridgest::data {

inline constexpr std::size_t kDefaultLengthThreshold = 400;

enum class BucketLabel { kShort, kLong };

inline const char* to_string(BucketLabel l) { return l == BucketLabel::kShort ? "short" : "long"; }

struct Bucket {
  BucketLabel label;
  std::vector<UtteranceRecord> records;
};

/// Short: transcript has fewer than `threshold_chars` scalar values. Long: at
/// least that many (the boundary itself goes to long). Order is preserved.
inline std::pair<Bucket, Bucket> split_by_transcript_length(const std::vector<UtteranceRecord>& records,
                                                            std::size_t threshold_chars = kDefaultLengthThreshold) {
  Bucket s{BucketLabel::kShort, {}}, l{BucketLabel::kLong, {}};
  for (const auto& r : records) {
    (text::char_count(r.transcript) < threshold_chars ? s : l).records.push_back(r);
  }
  return {std::move(s), std::move(l)};
}

}  // namespace bridgest::data
