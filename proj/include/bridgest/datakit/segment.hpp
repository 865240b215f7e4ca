#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "bridgest/errors.hpp"

namespace bridgest::data {

/// Half-open sample range [start, end).
struct SampleRange {
  std::int64_t start = 0;
  std::int64_t end = 0;

  std::int64_t length() const { return end - start; }
  bool operator==(const SampleRange&) const = default;
};

/// Maps an (offset, duration) pair in seconds onto sample indices of the
/// source recording. `source_samples`, when known, bounds the range.
inline SampleRange extract_segment(double offset_s, double duration_s, double sample_rate,
                                   std::optional<std::int64_t> source_samples = std::nullopt) {
  if (!(sample_rate > 0)) throw ArgumentError("extract_segment: sample_rate must be positive");
  if (!(offset_s >= 0)) throw ArgumentError("extract_segment: offset must be non-negative");
  if (!(duration_s > 0)) throw ArgumentError("extract_segment: duration must be positive");
  SampleRange r{std::llround(offset_s * sample_rate), std::llround((offset_s + duration_s) * sample_rate)};
  if (r.end <= r.start) throw RangeError("extract_segment: duration rounds to an empty range");
  if (source_samples && r.end > *source_samples) {
    throw RangeError("extract_segment: range [" + std::to_string(r.start) + "," + std::to_string(r.end) +
                     ") exceeds source length " + std::to_string(*source_samples));
  }
  return r;
}

}  // namespace bridgest::data
