#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vsr/tensor.hpp"

namespace vsr {

// Elementwise ops require equal shapes and dtypes; the only broadcast supported is
// scalar * tensor through scalar_mul.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& a, double s);

// Concatenates along axis 1 (channels); all other extents must agree.
Tensor concat_channels(std::span<const Tensor> parts);
Tensor concat_channels(std::initializer_list<Tensor> parts);

// Contiguous sub-range [start, start+length) along `axis`.
Tensor slice(const Tensor& x, int axis, std::int64_t start, std::int64_t length);

Tensor reshape(const Tensor& x, Shape shape);

// Reductions run strictly left to right over the row-major payload.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Elementwise clamp to [lo, hi]; gradient passes only where the value was inside.
Tensor clamp(const Tensor& x, double lo, double hi);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(double s, const Tensor& a) { return scalar_mul(a, s); }

}  // namespace vsr
