#include "vsr/ops.hpp"

#include <algorithm>

namespace vsr {

namespace {

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  if (a.dtype() != b.dtype()) {
    throw Error(std::string(op) + ": dtype mismatch " + dtype_name(a.dtype()) + " vs " +
                dtype_name(b.dtype()));
  }
}

template <typename T>
void accumulate(Tensor input, std::span<const T> g, T factor = T(1)) {
  if (!wants_grad(input)) return;
  auto dst = input.mutable_grad<T>();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += factor * g[i];
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  return dispatch(a.dtype(), [&]<typename T>() {
    auto out = Tensor::zeros(a.shape(), a.dtype());
    auto x = a.data<T>(), y = b.data<T>();
    auto o = out.data<T>();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] + y[i];
    record(out, "add", {a, b}, [a, b](const Tensor& g) {
      accumulate<T>(a, g.data<T>());
      accumulate<T>(b, g.data<T>());
    });
    return out;
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same(a, b, "sub");
  return dispatch(a.dtype(), [&]<typename T>() {
    auto out = Tensor::zeros(a.shape(), a.dtype());
    auto x = a.data<T>(), y = b.data<T>();
    auto o = out.data<T>();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] - y[i];
    record(out, "sub", {a, b}, [a, b](const Tensor& g) {
      accumulate<T>(a, g.data<T>());
      accumulate<T>(b, g.data<T>(), T(-1));
    });
    return out;
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mul");
  return dispatch(a.dtype(), [&]<typename T>() {
    auto out = Tensor::zeros(a.shape(), a.dtype());
    auto x = a.data<T>(), y = b.data<T>();
    auto o = out.data<T>();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
    record(out, "mul", {a, b}, [a, b](const Tensor& g) {
      auto go = g.data<T>();
      if (wants_grad(a)) {
        Tensor ta = a;
        auto da = ta.mutable_grad<T>();
        auto yb = b.data<T>();
        for (std::size_t i = 0; i < da.size(); ++i) da[i] += go[i] * yb[i];
      }
      if (wants_grad(b)) {
        Tensor tb = b;
        auto db = tb.mutable_grad<T>();
        auto xa = a.data<T>();
        for (std::size_t i = 0; i < db.size(); ++i) db[i] += go[i] * xa[i];
      }
    });
    return out;
  });
}

Tensor scalar_mul(const Tensor& a, double s) {
  return dispatch(a.dtype(), [&]<typename T>() {
    auto out = Tensor::zeros(a.shape(), a.dtype());
    auto x = a.data<T>();
    auto o = out.data<T>();
    const T f = static_cast<T>(s);
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = f * x[i];
    record(out, "scalar_mul", {a}, [a, f](const Tensor& g) { accumulate<T>(a, g.data<T>(), f); });
    return out;
  });
}

Tensor concat_channels(std::initializer_list<Tensor> parts) {
  return concat_channels(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor concat_channels(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  const auto& first = parts[0];
  if (first.ndim() < 2) throw ShapeError("concat_channels: need at least 2 axes, got " + shape_str(first.shape()));
  Shape out_shape = first.shape();
  out_shape[1] = 0;
  for (const auto& p : parts) {
    Shape a = p.shape(), b = first.shape();
    if (a.size() != b.size()) {
      throw ShapeError("concat_channels: shape mismatch " + shape_str(b) + " vs " + shape_str(a));
    }
    a[1] = b[1] = 0;
    if (a != b) {
      throw ShapeError("concat_channels: shape mismatch " + shape_str(first.shape()) + " vs " +
                       shape_str(p.shape()));
    }
    if (p.dtype() != first.dtype()) throw Error("concat_channels: dtype mismatch");
    out_shape[1] += p.dim(1);
  }
  const std::int64_t outer = first.dim(0);
  const std::int64_t inner = numel_of(first.shape()) / (first.dim(0) * first.dim(1));
  return dispatch(first.dtype(), [&]<typename T>() {
    auto out = Tensor::zeros(out_shape, first.dtype());
    auto o = out.data<T>();
    const std::int64_t out_block = out_shape[1] * inner;
    std::int64_t offset = 0;
    std::vector<std::int64_t> offsets;
    for (const auto& p : parts) {
      offsets.push_back(offset);
      auto src = p.data<T>();
      const std::int64_t block = p.dim(1) * inner;
      for (std::int64_t n = 0; n < outer; ++n) {
        std::copy_n(src.begin() + n * block, block, o.begin() + n * out_block + offset);
      }
      offset += block;
    }
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    record(out, "concat_channels", inputs, [inputs, offsets, outer, out_block, inner](const Tensor& g) {
      auto go = g.data<T>();
      for (std::size_t k = 0; k < inputs.size(); ++k) {
        if (!wants_grad(inputs[k])) continue;
        Tensor t = inputs[k];
        auto dst = t.mutable_grad<T>();
        const std::int64_t block = t.dim(1) * inner;
        for (std::int64_t n = 0; n < outer; ++n) {
          for (std::int64_t i = 0; i < block; ++i) dst[n * block + i] += go[n * out_block + offsets[k] + i];
        }
      }
    });
    return out;
  });
}

Tensor slice(const Tensor& x, int axis, std::int64_t start, std::int64_t length) {
  const auto& s = x.shape();
  if (axis < 0) axis += x.ndim();
  if (axis < 0 || axis >= x.ndim()) throw ShapeError("slice: axis out of range for " + shape_str(s));
  if (start < 0 || length < 1 || start + length > s[axis]) {
    throw ShapeError("slice: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                     ") outside axis " + std::to_string(axis) + " of " + shape_str(s));
  }
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[i];
  for (int i = axis + 1; i < x.ndim(); ++i) inner *= s[i];
  Shape out_shape = s;
  out_shape[axis] = length;
  const std::int64_t src_block = s[axis] * inner, dst_block = length * inner, off = start * inner;
  return dispatch(x.dtype(), [&]<typename T>() {
    auto out = Tensor::zeros(out_shape, x.dtype());
    auto src = x.data<T>();
    auto o = out.data<T>();
    for (std::int64_t n = 0; n < outer; ++n) {
      std::copy_n(src.begin() + n * src_block + off, dst_block, o.begin() + n * dst_block);
    }
    record(out, "slice", {x}, [x, outer, src_block, dst_block, off](const Tensor& g) {
      Tensor t = x;
      auto dst = t.mutable_grad<T>();
      auto go = g.data<T>();
      for (std::int64_t n = 0; n < outer; ++n) {
        for (std::int64_t i = 0; i < dst_block; ++i) dst[n * src_block + off + i] += go[n * dst_block + i];
      }
    });
    return out;
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel_of(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  return dispatch(x.dtype(), [&]<typename T>() {
    auto src = x.data<T>();
    auto out = Tensor::from_data(std::move(shape), std::vector<T>(src.begin(), src.end()));
    record(out, "reshape", {x}, [x](const Tensor& g) { accumulate<T>(x, g.data<T>()); });
    return out;
  });
}

Tensor sum(const Tensor& x) {
  return dispatch(x.dtype(), [&]<typename T>() {
    T acc = 0;
    for (T v : x.data<T>()) acc += v;
    auto out = Tensor::from_data({1}, std::vector<T>{acc});
    record(out, "sum", {x}, [x](const Tensor& g) {
      Tensor t = x;
      const T go = g.data<T>()[0];
      for (auto& d : t.mutable_grad<T>()) d += go;
    });
    return out;
  });
}

Tensor mean(const Tensor& x) {
  return dispatch(x.dtype(), [&]<typename T>() {
    T acc = 0;
    for (T v : x.data<T>()) acc += v;
    const T n = static_cast<T>(x.numel());
    auto out = Tensor::from_data({1}, std::vector<T>{acc / n});
    record(out, "mean", {x}, [x, n](const Tensor& g) {
      Tensor t = x;
      const T go = g.data<T>()[0] / n;
      for (auto& d : t.mutable_grad<T>()) d += go;
    });
    return out;
  });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  return dispatch(x.dtype(), [&]<typename T>() {
    auto out = Tensor::zeros(x.shape(), x.dtype());
    auto src = x.data<T>();
    auto o = out.data<T>();
    const T l = static_cast<T>(lo), h = static_cast<T>(hi);
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::clamp(src[i], l, h);
    record(out, "clamp", {x}, [x, l, h](const Tensor& g) {
      Tensor t = x;
      auto dst = t.mutable_grad<T>();
      auto go = g.data<T>();
      auto v = x.data<T>();
      for (std::size_t i = 0; i < dst.size(); ++i) {
        if (v[i] >= l && v[i] <= h) dst[i] += go[i];
      }
    });
    return out;
  });
}

}  // namespace vsr
