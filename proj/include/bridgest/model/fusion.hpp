#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "bridgest/numerics/tensor.hpp"

namespace bridgest::model {

/// Frame-wise concatenation [speech | audio_events] after truncating both
/// streams to the shorter length. Without a second stream the speech frames
/// pass through unchanged.
inline Tensor fuse_features(const Tensor& speech, const std::optional<Tensor>& audio_events) {
  if (speech.numel() == 0 || speech.rows() == 0) throw DimensionError("fuse_features: speech stream is empty");
  if (!audio_events) return speech;
  if (audio_events->numel() == 0) throw DimensionError("fuse_features: audio-event stream is empty");
  const std::size_t T = std::min(speech.rows(), audio_events->rows());
  const std::size_t d1 = speech.cols(), d2 = audio_events->cols();
  Tensor out({T, d1 + d2});
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < d1; ++j) out(t, j) = speech(t, j);
    for (std::size_t j = 0; j < d2; ++j) out(t, d1 + j) = (*audio_events)(t, j);
  }
  return out;
}

/// Routes d(fused) back to each stream; truncated frames get zero gradient.
inline std::pair<Tensor, Tensor> fuse_backward(const Tensor& dfused, std::size_t speech_rows, std::size_t d1,
                                               std::size_t audio_rows, std::size_t d2) {
  Tensor ds({speech_rows, d1}), da({audio_rows, d2});
  for (std::size_t t = 0; t < dfused.rows(); ++t) {
    for (std::size_t j = 0; j < d1; ++j) ds(t, j) = dfused(t, j);
    for (std::size_t j = 0; j < d2; ++j) da(t, j) = dfused(t, d1 + j);
  }
  return {std::move(ds), std::move(da)};
}

struct Window {
  std::size_t begin = 0, end = 0;  // frame range [begin, end)
  std::size_t size() const { return end - begin; }
};

/// ceil(T/W) contiguous windows; the last one holds the remainder, unpadded.
inline std::vector<Window> window_bounds(std::size_t T, std::size_t W) {
  if (T == 0) throw DimensionError("window_partition: no frames");
  if (W == 0) throw DimensionError("window_partition: window length must be >= 1");
  std::vector<Window> out;
  for (std::size_t b = 0; b < T; b += W) out.push_back({b, std::min(T, b + W)});
  return out;
}

inline std::vector<Tensor> window_partition(const Tensor& frames, std::size_t W) {
  std::vector<Tensor> out;
  for (const auto& w : window_bounds(frames.rows(), W)) out.push_back(slice_rows(frames, w.begin, w.end));
  return out;
}

}  // namespace bridgest::model
