#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "bridgest/errors.hpp"

namespace bridgest {

#ifdef BRIDGEST_FP32
using Real = float;
#else
using Real = double;
#endif

inline constexpr bool kDoublePrecision = sizeof(Real) == sizeof(double);

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

/// Dense row-major array. `grad`, when engaged, has the same length as `data`.
/// Most layers treat a tensor as a matrix of shape [rows, last_dim] where
/// rows is the product of all leading dimensions.
struct Tensor {
  Shape shape;
  std::vector<Real> data;
  std::optional<std::vector<Real>> grad;

  Tensor() = default;
  explicit Tensor(Shape s, Real fill = Real(0)) : shape(std::move(s)), data(shape_numel(shape), fill) {
    for (auto d : shape) {
      if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
    }
  }
  Tensor(Shape s, std::vector<Real> values) : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != shape_numel(shape)) {
      throw DimensionError("tensor data length " + std::to_string(data.size()) + " does not match shape " +
                           shape_str(shape));
    }
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<Real> values) {
    return Tensor({rows, cols}, std::move(values));
  }

  std::size_t numel() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t last_dim() const { return shape.empty() ? 1 : shape.back(); }
  std::size_t rows() const { return shape.empty() ? 1 : numel() / last_dim(); }
  std::size_t cols() const { return last_dim(); }

  Real& operator()(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  Real operator()(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  std::span<Real> row(std::size_t r) { return {data.data() + r * cols(), cols()}; }
  std::span<const Real> row(std::size_t r) const { return {data.data() + r * cols(), cols()}; }

  bool has_grad() const { return grad.has_value(); }
  std::vector<Real>& ensure_grad() {
    if (!grad) grad.emplace(data.size(), Real(0));
    return *grad;
  }
  void zero_grad() {
    if (grad) std::fill(grad->begin(), grad->end(), Real(0));
  }

  bool all_finite() const {
    for (Real v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

// Row slice [begin, end) of a matrix-shaped tensor.
inline Tensor slice_rows(const Tensor& t, std::size_t begin, std::size_t end) {
  if (begin >= end || end > t.rows()) {
    throw DimensionError("slice_rows: invalid range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") for " + std::to_string(t.rows()) + " rows");
  }
  const std::size_t c = t.cols();
  Tensor out({end - begin, c});
  std::copy(t.data.begin() + static_cast<std::ptrdiff_t>(begin * c),
            t.data.begin() + static_cast<std::ptrdiff_t>(end * c), out.data.begin());
  return out;
}

// Column slice [begin, begin+width) of a matrix-shaped tensor.
inline Tensor slice_cols(const Tensor& t, std::size_t begin, std::size_t width) {
  if (width == 0 || begin + width > t.cols()) throw DimensionError("slice_cols: invalid column range");
  Tensor out({t.rows(), width});
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < width; ++c) out(r, c) = t(r, begin + c);
  }
  return out;
}

inline void add_into_cols(Tensor& dst, const Tensor& src, std::size_t begin) {
  for (std::size_t r = 0; r < src.rows(); ++r) {
    for (std::size_t c = 0; c < src.cols(); ++c) dst(r, begin + c) += src(r, c);
  }
}

inline void add_into_rows(Tensor& dst, const Tensor& src, std::size_t begin) {
  const std::size_t c = dst.cols();
  if (src.cols() != c || begin + src.rows() > dst.rows()) throw DimensionError("add_into_rows: shape mismatch");
  for (std::size_t i = 0; i < src.numel(); ++i) dst.data[begin * c + i] += src.data[i];
}

inline Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no parts");
  const std::size_t c = parts.front().cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != c) throw DimensionError("concat_rows: column mismatch");
    rows += p.rows();
  }
  Tensor out({rows, c});
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.data.begin(), p.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(off));
    off += p.numel();
  }
  return out;
}

inline void add_inplace(Tensor& a, const Tensor& b) {
  if (a.numel() != b.numel()) {
    throw DimensionError("add_inplace: shape mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  }
  for (std::size_t i = 0; i < a.numel(); ++i) a.data[i] += b.data[i];
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  out.grad.reset();
  add_inplace(out, b);
  return out;
}

inline Tensor scaled(const Tensor& a, Real s) {
  Tensor out = a;
  out.grad.reset();
  for (auto& v : out.data) v *= s;
  return out;
}

inline Real max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.numel() != b.numel()) throw DimensionError("max_abs_diff: shape mismatch");
  Real m = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace bridgest
