#include "vsr/nn.hpp"

#include "vsr/ops.hpp"

#include <algorithm>
#include <cmath>

namespace vsr {

namespace {

// C[M,N] += A[M,K] * B[K,N]
template <typename T>
void gemm_nn(std::int64_t M, std::int64_t N, std::int64_t K, const T* A, const T* B, T* C) {
  for (std::int64_t i = 0; i < M; ++i) {
    T* c = C + i * N;
    const T* a = A + i * K;
    for (std::int64_t k = 0; k < K; ++k) {
      const T av = a[k];
      const T* b = B + k * N;
      for (std::int64_t j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

// C[K,N] += A[M,K]^T * B[M,N]
template <typename T>
void gemm_tn(std::int64_t M, std::int64_t N, std::int64_t K, const T* A, const T* B, T* C) {
  for (std::int64_t i = 0; i < M; ++i) {
    const T* a = A + i * K;
    const T* b = B + i * N;
    for (std::int64_t k = 0; k < K; ++k) {
      const T av = a[k];
      T* c = C + k * N;
      for (std::int64_t j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

// Dot product with eight fixed lanes folded in a fixed order, so the result does not
// depend on how the compiler vectorizes.
template <typename T>
T dot(const T* a, const T* b, std::int64_t n) {
  T lane[8] = {};
  std::int64_t j = 0;
  for (; j + 8 <= n; j += 8) {
    for (int l = 0; l < 8; ++l) lane[l] += a[j + l] * b[j + l];
  }
  for (; j < n; ++j) lane[0] += a[j] * b[j];
  return ((lane[0] + lane[1]) + (lane[2] + lane[3])) + ((lane[4] + lane[5]) + (lane[6] + lane[7]));
}

struct ConvGeometry {
  std::int64_t n, cin, h, w, cout, k, stride, pad, ho, wo;
  std::int64_t patch() const { return cin * k * k; }
  std::int64_t pixels() const { return ho * wo; }
};

template <typename T>
void im2col(const ConvGeometry& g, const T* x, T* col) {
  const std::int64_t P = g.pixels();
  for (std::int64_t c = 0; c < g.cin; ++c) {
    for (std::int64_t ky = 0; ky < g.k; ++ky) {
      for (std::int64_t kx = 0; kx < g.k; ++kx) {
        T* row = col + ((c * g.k + ky) * g.k + kx) * P;
        for (std::int64_t oy = 0; oy < g.ho; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + ky;
          T* dst = row + oy * g.wo;
          if (iy < 0 || iy >= g.h) {
            std::fill_n(dst, g.wo, T(0));
            continue;
          }
          const T* src = x + (c * g.h + iy) * g.w;
          for (std::int64_t ox = 0; ox < g.wo; ++ox) {
            const std::int64_t ix = ox * g.stride - g.pad + kx;
            dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const ConvGeometry& g, const T* col, T* dx) {
  const std::int64_t P = g.pixels();
  for (std::int64_t c = 0; c < g.cin; ++c) {
    for (std::int64_t ky = 0; ky < g.k; ++ky) {
      for (std::int64_t kx = 0; kx < g.k; ++kx) {
        const T* row = col + ((c * g.k + ky) * g.k + kx) * P;
        for (std::int64_t oy = 0; oy < g.ho; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          T* dst = dx + (c * g.h + iy) * g.w;
          const T* src = row + oy * g.wo;
          for (std::int64_t ox = 0; ox < g.wo; ++ox) {
            const std::int64_t ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

Tensor activation(const Tensor& x, double slope, const char* op) {
  return dispatch(x.dtype(), [&]<typename T>() {
    auto out = Tensor::zeros(x.shape(), x.dtype());
    auto in = x.data<T>();
    auto o = out.data<T>();
    const T s = static_cast<T>(slope);
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = in[i] >= T(0) ? in[i] : s * in[i];
    record(out, op, {x}, [x, s](const Tensor& g) {
      Tensor t = x;
      auto dst = t.mutable_grad<T>();
      auto go = g.data<T>();
      auto v = x.data<T>();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += v[i] >= T(0) ? go[i] : s * go[i];
    });
    return out;
  });
}

void require_rank4(const Tensor& x, const char* op) {
  if (x.ndim() != 4) throw ShapeError(std::string(op) + ": expected (N,C,H,W), got " + shape_str(x.shape()));
}

}  // namespace

std::int64_t count_parameters(const ParameterList& params) {
  std::int64_t n = 0;
  for (const auto& p : params) n += p.tensor.numel();
  return n;
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride, int padding) {
  require_rank4(x, "conv2d");
  if (weight.ndim() != 4 || weight.dim(2) != weight.dim(3)) {
    throw ShapeError("conv2d: weight must be (C_out,C_in,k,k), got " + shape_str(weight.shape()));
  }
  if (x.dim(1) != weight.dim(1)) {
    throw ShapeError("conv2d: channel mismatch, input " + shape_str(x.shape()) + " vs weight " +
                     shape_str(weight.shape()));
  }
  if (bias.ndim() != 1 || bias.dim(0) != weight.dim(0)) {
    throw ShapeError("conv2d: bias " + shape_str(bias.shape()) + " does not match weight " + shape_str(weight.shape()));
  }
  if (x.dtype() != weight.dtype() || x.dtype() != bias.dtype()) throw Error("conv2d: dtype mismatch");
  if (stride < 1 || padding < 0) throw ShapeError("conv2d: invalid stride/padding");
  ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), weight.dim(0), weight.dim(2), stride, padding, 0, 0};
  const std::int64_t hn = g.h + 2 * g.pad - g.k, wn = g.w + 2 * g.pad - g.k;
  if (hn < 0 || wn < 0) {
    throw ShapeError("conv2d: non-positive output extent for input " + shape_str(x.shape()) + " and kernel " +
                     std::to_string(g.k));
  }
  g.ho = hn / g.stride + 1;
  g.wo = wn / g.stride + 1;

  return dispatch(x.dtype(), [&]<typename T>() {
    auto out = Tensor::zeros({g.n, g.cout, g.ho, g.wo}, x.dtype());
    const std::int64_t K = g.patch(), P = g.pixels();
    std::vector<T> col(static_cast<std::size_t>(K * P));
    auto xd = x.data<T>();
    auto wd = weight.data<T>();
    auto bd = bias.data<T>();
    auto od = out.data<T>();
    for (std::int64_t n = 0; n < g.n; ++n) {
      im2col(g, xd.data() + n * g.cin * g.h * g.w, col.data());
      T* o = od.data() + n * g.cout * P;
      for (std::int64_t c = 0; c < g.cout; ++c) std::fill_n(o + c * P, P, bd[c]);
      gemm_nn(g.cout, P, K, wd.data(), col.data(), o);
    }
    record(out, "conv2d", {x, weight, bias}, [x, weight, bias, g](const Tensor& grad) {
      const std::int64_t K = g.patch(), P = g.pixels();
      auto go = grad.data<T>();
      std::vector<T> col(static_cast<std::size_t>(K * P));
      std::vector<T> dcol;
      const bool gx = wants_grad(x), gw = wants_grad(weight), gb = wants_grad(bias);
      Tensor xt = x, wt = weight, bt = bias;
      std::span<T> dx, dw, db;
      if (gx) {
        dx = xt.mutable_grad<T>();
        dcol.resize(static_cast<std::size_t>(K * P));
      }
      if (gw) dw = wt.mutable_grad<T>();
      if (gb) db = bt.mutable_grad<T>();
      auto xd = x.data<T>();
      auto wd = weight.data<T>();
      for (std::int64_t n = 0; n < g.n; ++n) {
        const T* gn = go.data() + n * g.cout * P;
        if (gb) {
          for (std::int64_t c = 0; c < g.cout; ++c) {
            T acc = 0;
            for (std::int64_t j = 0; j < P; ++j) acc += gn[c * P + j];
            db[c] += acc;
          }
        }
        if (gw) {
          im2col(g, xd.data() + n * g.cin * g.h * g.w, col.data());
          for (std::int64_t c = 0; c < g.cout; ++c) {
            for (std::int64_t k = 0; k < K; ++k) dw[c * K + k] += dot(gn + c * P, col.data() + k * P, P);
          }
        }
        if (gx) {
          std::fill(dcol.begin(), dcol.end(), T(0));
          gemm_tn(g.cout, P, K, wd.data(), gn, dcol.data());
          col2im(g, dcol.data(), dx.data() + n * g.cin * g.h * g.w);
        }
      }
    });
    return out;
  });
}

Conv2d Conv2d::create(int in_channels, int out_channels, int kernel, Rng& rng, DType dtype, double gain) {
  if (kernel % 2 == 0) throw ShapeError("conv kernels must be odd, got " + std::to_string(kernel));
  Conv2d layer;
  const std::int64_t fan_in = static_cast<std::int64_t>(in_channels) * kernel * kernel;
  const double std_dev = gain * std::sqrt(2.0 / static_cast<double>(fan_in));
  std::vector<double> w(static_cast<std::size_t>(out_channels * fan_in));
  for (auto& v : w) v = std_dev * rng.normal();
  layer.weight = Tensor::from_values({out_channels, in_channels, kernel, kernel}, w, dtype);
  layer.bias = Tensor::zeros({out_channels}, dtype);
  layer.weight.set_requires_grad(true);
  layer.bias.set_requires_grad(true);
  layer.stride = 1;
  layer.padding = (kernel - 1) / 2;
  return layer;
}

void Conv2d::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

Tensor leaky_relu(const Tensor& x, double slope) { return activation(x, slope, "leaky_relu"); }
Tensor relu(const Tensor& x) { return activation(x, 0.0, "relu"); }

Tensor pixel_shuffle(const Tensor& x, int r) {
  require_rank4(x, "pixel_shuffle");
  if (r < 1) throw ShapeError("pixel_shuffle: factor must be >= 1");
  const std::int64_t N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (Cin % (r * r) != 0) {
    throw ShapeError("pixel_shuffle: channels " + std::to_string(Cin) + " not divisible by " + std::to_string(r * r));
  }
  const std::int64_t C = Cin / (r * r), Ho = H * r, Wo = W * r;
  return dispatch(x.dtype(), [&]<typename T>() {
    auto out = Tensor::zeros({N, C, Ho, Wo}, x.dtype());
    auto in = x.data<T>();
    auto o = out.data<T>();
    // Flat source index for every output position; shared by the backward rule.
    auto source = [=](std::int64_t n, std::int64_t c, std::int64_t oy, std::int64_t ox) {
      const std::int64_t a = oy % r, b = ox % r;
      return ((n * Cin + c * r * r + a * r + b) * H + oy / r) * W + ox / r;
    };
    for (std::int64_t n = 0; n < N; ++n)
      for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t oy = 0; oy < Ho; ++oy)
          for (std::int64_t ox = 0; ox < Wo; ++ox) o[((n * C + c) * Ho + oy) * Wo + ox] = in[source(n, c, oy, ox)];
    record(out, "pixel_shuffle", {x}, [x, source, N, C, Ho, Wo](const Tensor& g) {
      Tensor t = x;
      auto dst = t.mutable_grad<T>();
      auto go = g.data<T>();
      for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t c = 0; c < C; ++c)
          for (std::int64_t oy = 0; oy < Ho; ++oy)
            for (std::int64_t ox = 0; ox < Wo; ++ox) dst[source(n, c, oy, ox)] += go[((n * C + c) * Ho + oy) * Wo + ox];
    });
    return out;
  });
}

Tensor pixel_unshuffle(const Tensor& x, int r) {
  require_rank4(x, "pixel_unshuffle");
  if (r < 1) throw ShapeError("pixel_unshuffle: factor must be >= 1");
  const std::int64_t N = x.dim(0), C = x.dim(1), Hi = x.dim(2), Wi = x.dim(3);
  if (Hi % r != 0 || Wi % r != 0) {
    throw ShapeError("pixel_unshuffle: extents of " + shape_str(x.shape()) + " not divisible by " + std::to_string(r));
  }
  const std::int64_t H = Hi / r, W = Wi / r, Co = C * r * r;
  return dispatch(x.dtype(), [&]<typename T>() {
    auto out = Tensor::zeros({N, Co, H, W}, x.dtype());
    auto in = x.data<T>();
    auto o = out.data<T>();
    auto source = [=](std::int64_t n, std::int64_t co, std::int64_t y, std::int64_t xx) {
      const std::int64_t c = co / (r * r), a = (co / r) % r, b = co % r;
      return ((n * C + c) * Hi + y * r + a) * Wi + xx * r + b;
    };
    for (std::int64_t n = 0; n < N; ++n)
      for (std::int64_t co = 0; co < Co; ++co)
        for (std::int64_t y = 0; y < H; ++y)
          for (std::int64_t xx = 0; xx < W; ++xx) o[((n * Co + co) * H + y) * W + xx] = in[source(n, co, y, xx)];
    record(out, "pixel_unshuffle", {x}, [x, source, N, Co, H, W](const Tensor& g) {
      Tensor t = x;
      auto dst = t.mutable_grad<T>();
      auto go = g.data<T>();
      for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t co = 0; co < Co; ++co)
          for (std::int64_t y = 0; y < H; ++y)
            for (std::int64_t xx = 0; xx < W; ++xx) dst[source(n, co, y, xx)] += go[((n * Co + co) * H + y) * W + xx];
    });
    return out;
  });
}

namespace {

struct LinearTap {
  std::int64_t i0, i1;
  double w0, w1;
};

std::vector<LinearTap> linear_taps(std::int64_t in_size, std::int64_t out_size, double scale) {
  std::vector<LinearTap> taps(static_cast<std::size_t>(out_size));
  for (std::int64_t d = 0; d < out_size; ++d) {
    double src = (static_cast<double>(d) + 0.5) / scale - 0.5;
    if (src < 0) src = 0;
    std::int64_t i0 = static_cast<std::int64_t>(std::floor(src));
    if (i0 > in_size - 1) i0 = in_size - 1;
    const std::int64_t i1 = std::min(i0 + 1, in_size - 1);
    const double l = std::min(src - static_cast<double>(i0), 1.0);
    taps[static_cast<std::size_t>(d)] = {i0, i1, 1.0 - l, l};
  }
  return taps;
}

}  // namespace

Tensor bilinear_resize(const Tensor& x, double scale) {
  require_rank4(x, "bilinear_resize");
  if (!(scale > 0)) throw ShapeError("bilinear_resize: scale must be positive");
  const std::int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const auto Ho = static_cast<std::int64_t>(std::floor(static_cast<double>(H) * scale + 1e-9));
  const auto Wo = static_cast<std::int64_t>(std::floor(static_cast<double>(W) * scale + 1e-9));
  if (Ho < 1 || Wo < 1) throw ShapeError("bilinear_resize: empty output for " + shape_str(x.shape()));
  if (Ho == H && Wo == W) {
    // Half-pixel mapping at scale 1 is the identity; skip the arithmetic so it is exact.
    return reshape(x, x.shape());
  }
  const auto ty = linear_taps(H, Ho, scale), tx = linear_taps(W, Wo, scale);
  return dispatch(x.dtype(), [&]<typename T>() {
    auto out = Tensor::zeros({N, C, Ho, Wo}, x.dtype());
    auto in = x.data<T>();
    auto o = out.data<T>();
    for (std::int64_t p = 0; p < N * C; ++p) {
      const T* src = in.data() + p * H * W;
      T* dst = o.data() + p * Ho * Wo;
      for (std::int64_t y = 0; y < Ho; ++y) {
        const auto& a = ty[static_cast<std::size_t>(y)];
        const T* r0 = src + a.i0 * W;
        const T* r1 = src + a.i1 * W;
        for (std::int64_t xx = 0; xx < Wo; ++xx) {
          const auto& b = tx[static_cast<std::size_t>(xx)];
          const T top = static_cast<T>(b.w0) * r0[b.i0] + static_cast<T>(b.w1) * r0[b.i1];
          const T bot = static_cast<T>(b.w0) * r1[b.i0] + static_cast<T>(b.w1) * r1[b.i1];
          dst[y * Wo + xx] = static_cast<T>(a.w0) * top + static_cast<T>(a.w1) * bot;
        }
      }
    }
    record(out, "bilinear_resize", {x}, [x, ty, tx, N, C, H, W, Ho, Wo](const Tensor& g) {
      Tensor t = x;
      auto dst = t.mutable_grad<T>();
      auto go = g.data<T>();
      for (std::int64_t p = 0; p < N * C; ++p) {
        T* d = dst.data() + p * H * W;
        const T* gp = go.data() + p * Ho * Wo;
        for (std::int64_t y = 0; y < Ho; ++y) {
          const auto& a = ty[static_cast<std::size_t>(y)];
          for (std::int64_t xx = 0; xx < Wo; ++xx) {
            const auto& b = tx[static_cast<std::size_t>(xx)];
            const T gv = gp[y * Wo + xx];
            d[a.i0 * W + b.i0] += static_cast<T>(a.w0 * b.w0) * gv;
            d[a.i0 * W + b.i1] += static_cast<T>(a.w0 * b.w1) * gv;
            d[a.i1 * W + b.i0] += static_cast<T>(a.w1 * b.w0) * gv;
            d[a.i1 * W + b.i1] += static_cast<T>(a.w1 * b.w1) * gv;
          }
        }
      }
    });
    return out;
  });
}

Tensor flow_warp(const Tensor& feat, const Tensor& flow) {
  require_rank4(feat, "flow_warp");
  require_rank4(flow, "flow_warp");
  if (flow.dim(1) != 2 || flow.dim(0) != feat.dim(0) || flow.dim(2) != feat.dim(2) || flow.dim(3) != feat.dim(3)) {
    throw ShapeError("flow_warp: feature " + shape_str(feat.shape()) + " and flow " + shape_str(flow.shape()) +
                     " are not spatially aligned");
  }
  if (feat.dtype() != flow.dtype()) throw Error("flow_warp: dtype mismatch");
  const std::int64_t N = feat.dim(0), C = feat.dim(1), H = feat.dim(2), W = feat.dim(3);
  return dispatch(feat.dtype(), [&]<typename T>() {
    auto out = Tensor::zeros(feat.shape(), feat.dtype());
    auto f = feat.data<T>();
    auto fl = flow.data<T>();
    auto o = out.data<T>();
    const std::int64_t HW = H * W;
    for (std::int64_t n = 0; n < N; ++n) {
      const T* u = fl.data() + n * 2 * HW;
      const T* v = u + HW;
      for (std::int64_t y = 0; y < H; ++y) {
        for (std::int64_t x = 0; x < W; ++x) {
          const std::int64_t p = y * W + x;
          const T sx = static_cast<T>(x) + u[p], sy = static_cast<T>(y) + v[p];
          const T fx = std::floor(sx), fy = std::floor(sy);
          const auto x0 = static_cast<std::int64_t>(fx), y0 = static_cast<std::int64_t>(fy);
          const T ax = sx - fx, ay = sy - fy;
          const T wts[4] = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
          const std::int64_t cx[4] = {x0, x0 + 1, x0, x0 + 1}, cy[4] = {y0, y0, y0 + 1, y0 + 1};
          for (std::int64_t c = 0; c < C; ++c) {
            const T* fc = f.data() + (n * C + c) * HW;
            T acc = 0;
            bool first = true;
            for (int k = 0; k < 4; ++k) {
              // Zero-weight taps are skipped so integer flows copy values bit-exactly.
              if (wts[k] == T(0) || cx[k] < 0 || cx[k] >= W || cy[k] < 0 || cy[k] >= H) continue;
              const T term = wts[k] * fc[cy[k] * W + cx[k]];
              acc = first ? term : acc + term;
              first = false;
            }
            o[(n * C + c) * HW + p] = acc;
          }
        }
      }
    }
    record(out, "flow_warp", {feat, flow}, [feat, flow, N, C, H, W](const Tensor& g) {
      const bool gf = wants_grad(feat), gfl = wants_grad(flow);
      Tensor ft = feat, flt = flow;
      std::span<T> dfeat, dflow;
      if (gf) dfeat = ft.mutable_grad<T>();
      if (gfl) dflow = flt.mutable_grad<T>();
      auto f = feat.data<T>();
      auto fl = flow.data<T>();
      auto go = g.data<T>();
      const std::int64_t HW = H * W;
      for (std::int64_t n = 0; n < N; ++n) {
        const T* u = fl.data() + n * 2 * HW;
        const T* v = u + HW;
        for (std::int64_t y = 0; y < H; ++y) {
          for (std::int64_t x = 0; x < W; ++x) {
            const std::int64_t p = y * W + x;
            const T sx = static_cast<T>(x) + u[p], sy = static_cast<T>(y) + v[p];
            const T fx = std::floor(sx), fy = std::floor(sy);
            const auto x0 = static_cast<std::int64_t>(fx), y0 = static_cast<std::int64_t>(fy);
            const T ax = sx - fx, ay = sy - fy;
            const bool in_x0 = x0 >= 0 && x0 < W, in_x1 = x0 + 1 >= 0 && x0 + 1 < W;
            const bool in_y0 = y0 >= 0 && y0 < H, in_y1 = y0 + 1 >= 0 && y0 + 1 < H;
            T du = 0, dv = 0;
            for (std::int64_t c = 0; c < C; ++c) {
              const std::int64_t base = (n * C + c) * HW;
              const T gv = go[base + p];
              const T* fc = f.data() + base;
              const T f00 = (in_y0 && in_x0) ? fc[y0 * W + x0] : T(0);
              const T f01 = (in_y0 && in_x1) ? fc[y0 * W + x0 + 1] : T(0);
              const T f10 = (in_y1 && in_x0) ? fc[(y0 + 1) * W + x0] : T(0);
              const T f11 = (in_y1 && in_x1) ? fc[(y0 + 1) * W + x0 + 1] : T(0);
              if (gfl) {
                du += gv * ((1 - ay) * (f01 - f00) + ay * (f11 - f10));
                dv += gv * ((1 - ax) * (f10 - f00) + ax * (f11 - f01));
              }
              if (gf) {
                T* d = dfeat.data() + base;
                if (in_y0 && in_x0) d[y0 * W + x0] += (1 - ax) * (1 - ay) * gv;
                if (in_y0 && in_x1) d[y0 * W + x0 + 1] += ax * (1 - ay) * gv;
                if (in_y1 && in_x0) d[(y0 + 1) * W + x0] += (1 - ax) * ay * gv;
                if (in_y1 && in_x1) d[(y0 + 1) * W + x0 + 1] += ax * ay * gv;
              }
            }
            if (gfl) {
              dflow[n * 2 * HW + p] += du;
              dflow[n * 2 * HW + HW + p] += dv;
            }
          }
        }
      }
    });
    return out;
  });
}

ResidualBlock ResidualBlock::create(int channels, Rng& rng, DType dtype) {
  ResidualBlock block;
  block.conv1 = Conv2d::create(channels, channels, 3, rng, dtype);
  block.conv2 = Conv2d::create(channels, channels, 3, rng, dtype, 0.1);
  return block;
}

Tensor ResidualBlock::operator()(const Tensor& x) const {
  if (x.ndim() != 4 || x.dim(1) != conv1.in_channels()) {
    throw ShapeError("residual block expects " + std::to_string(conv1.in_channels()) + " channels, got " +
                     shape_str(x.shape()));
  }
  return add(x, conv2(relu(conv1(x))));
}

void ResidualBlock::collect(const std::string& prefix, ParameterList& out) const {
  conv1.collect(prefix + ".conv1", out);
  conv2.collect(prefix + ".conv2", out);
}

Tensor residual_block_forward(const Tensor& x, const ResidualBlock& block) { return block(x); }

}  // namespace vsr
