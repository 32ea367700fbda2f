#include <cmath>

#include "vsr/data.hpp"

namespace vsr {

namespace {

struct Taps {
  std::vector<std::int64_t> index;  // out_size * width
  std::vector<double> weight;
  int width = 0;
};

// Applies per-output-index taps along one axis of a plane stack.
// `axis` 0 = rows (H), 1 = columns (W).
std::vector<double> apply_axis(const std::vector<double>& src, std::int64_t planes, std::int64_t h, std::int64_t w,
                               const Taps& taps, std::int64_t out_len, int axis) {
  const std::int64_t oh = axis == 0 ? out_len : h, ow = axis == 0 ? w : out_len;
  std::vector<double> dst(static_cast<std::size_t>(planes * oh * ow), 0.0);
  for (std::int64_t p = 0; p < planes; ++p) {
    const double* s = src.data() + p * h * w;
    double* d = dst.data() + p * oh * ow;
    for (std::int64_t y = 0; y < oh; ++y) {
      for (std::int64_t x = 0; x < ow; ++x) {
        const std::int64_t o = axis == 0 ? y : x;
        double acc = 0;
        for (int k = 0; k < taps.width; ++k) {
          const auto idx = taps.index[static_cast<std::size_t>(o * taps.width + k)];
          const double wt = taps.weight[static_cast<std::size_t>(o * taps.width + k)];
          acc += wt * (axis == 0 ? s[idx * w + x] : s[y * w + idx]);
        }
        d[y * ow + x] = acc;
      }
    }
  }
  return dst;
}

std::int64_t plane_count(const Tensor& x) {
  if (x.ndim() < 2) throw ShapeError("expected at least 2 axes, got " + shape_str(x.shape()));
  return x.numel() / (x.dim(-2) * x.dim(-1));
}

Tensor with_plane_extents(const Tensor& like, std::int64_t h, std::int64_t w, const std::vector<double>& values) {
  Shape s = like.shape();
  s[s.size() - 2] = h;
  s[s.size() - 1] = w;
  return Tensor::from_values(std::move(s), values, like.dtype());
}

double cubic(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x <= 1) return ((a + 2) * x - (a + 3)) * x * x + 1;
  if (x < 2) return ((a * x - 5 * a) * x + 8 * a) * x - 4 * a;
  return 0;
}

Taps bicubic_taps(std::int64_t in_len, std::int64_t out_len, double scale) {
  const bool shrink = scale < 1.0;
  const double kernel_width = shrink ? 4.0 / scale : 4.0;
  Taps t;
  t.width = static_cast<int>(std::ceil(kernel_width)) + 2;
  t.index.resize(static_cast<std::size_t>(out_len * t.width));
  t.weight.resize(t.index.size());
  for (std::int64_t o = 0; o < out_len; ++o) {
    const double u = (static_cast<double>(o) + 0.5) / scale - 0.5;
    const auto left = static_cast<std::int64_t>(std::floor(u - kernel_width / 2));
    double total = 0;
    for (int k = 0; k < t.width; ++k) {
      const std::int64_t j = left + k;
      const double d = u - static_cast<double>(j);
      const double wt = shrink ? scale * cubic(scale * d) : cubic(d);
      t.index[static_cast<std::size_t>(o * t.width + k)] = reflect_index(j, in_len);
      t.weight[static_cast<std::size_t>(o * t.width + k)] = wt;
      total += wt;
    }
    for (int k = 0; k < t.width; ++k) t.weight[static_cast<std::size_t>(o * t.width + k)] /= total;
  }
  return t;
}

}  // namespace

std::string to_string(DegradationKind kind) { return kind == DegradationKind::BI ? "bi" : "bd"; }

DegradationKind parse_degradation(const std::string& text) {
  if (text == "bi" || text == "BI") return DegradationKind::BI;
  if (text == "bd" || text == "BD") return DegradationKind::BD;
  throw ConfigError("unknown degradation '" + text + "' (expected bi or bd)");
}

std::vector<double> gaussian_kernel(double sigma, int size) {
  if (size < 1 || size % 2 == 0) throw ConfigError("Gaussian kernel size must be odd and positive");
  if (!(sigma > 0)) throw ConfigError("Gaussian sigma must be positive");
  std::vector<double> k(static_cast<std::size_t>(size));
  const int r = size / 2;
  double total = 0;
  for (int i = -r; i <= r; ++i) {
    const double v = std::exp(-0.5 * i * i / (sigma * sigma));
    k[static_cast<std::size_t>(i + r)] = v;
    total += v;
  }
  for (auto& v : k) v /= total;
  return k;
}

std::int64_t reflect_index(std::int64_t i, std::int64_t n) {
  if (n == 1) return 0;
  const std::int64_t period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

Tensor gaussian_blur(const Tensor& x, double sigma, int kernel_size) {
  const auto kernel = gaussian_kernel(sigma, kernel_size);
  const std::int64_t planes = plane_count(x), h = x.dim(-2), w = x.dim(-1);
  const int r = kernel_size / 2;
  auto make = [&](std::int64_t len) {
    Taps t;
    t.width = kernel_size;
    for (std::int64_t o = 0; o < len; ++o) {
      for (int k = 0; k < kernel_size; ++k) {
        t.index.push_back(reflect_index(o + k - r, len));
        t.weight.push_back(kernel[static_cast<std::size_t>(k)]);
      }
    }
    return t;
  };
  auto rows = apply_axis(x.to_vector(), planes, h, w, make(h), h, 0);
  auto both = apply_axis(rows, planes, h, w, make(w), w, 1);
  return with_plane_extents(x, h, w, both);
}

Tensor bicubic_resize(const Tensor& x, double scale) {
  if (!(scale > 0)) throw ConfigError("bicubic_resize: scale must be positive");
  const std::int64_t planes = plane_count(x), h = x.dim(-2), w = x.dim(-1);
  const auto oh = static_cast<std::int64_t>(std::llround(static_cast<double>(h) * scale));
  const auto ow = static_cast<std::int64_t>(std::llround(static_cast<double>(w) * scale));
  if (oh < 1 || ow < 1) throw ShapeError("bicubic_resize: empty output for " + shape_str(x.shape()));
  if (oh == h && ow == w) return x.detach();
  auto rows = apply_axis(x.to_vector(), planes, h, w, bicubic_taps(h, oh, scale), oh, 0);
  auto both = apply_axis(rows, planes, oh, w, bicubic_taps(w, ow, scale), ow, 1);
  return with_plane_extents(x, oh, ow, both);
}

Tensor degrade_frame(const Tensor& hr, const DegradationSpec& spec) {
  if (spec.scale < 1) throw ConfigError("degradation scale must be >= 1");
  const std::int64_t h = hr.dim(-2), w = hr.dim(-1);
  if (h % spec.scale != 0 || w % spec.scale != 0) {
    throw ShapeError("degrade: extents " + shape_str(hr.shape()) + " not divisible by " + std::to_string(spec.scale));
  }
  if (spec.kind == DegradationKind::BI) return bicubic_resize(hr, 1.0 / spec.scale);
  const Tensor blurred = gaussian_blur(hr, spec.sigma, spec.kernel_size);
  const std::int64_t planes = plane_count(hr), oh = h / spec.scale, ow = w / spec.scale;
  const auto src = blurred.to_vector();
  std::vector<double> out(static_cast<std::size_t>(planes * oh * ow));
  for (std::int64_t p = 0; p < planes; ++p) {
    for (std::int64_t y = 0; y < oh; ++y) {
      for (std::int64_t x = 0; x < ow; ++x) {
        out[static_cast<std::size_t>((p * oh + y) * ow + x)] =
            src[static_cast<std::size_t>((p * h + y * spec.scale) * w + x * spec.scale)];
      }
    }
  }
  return with_plane_extents(hr, oh, ow, out);
}

VideoSequence degrade(const VideoSequence& hr, const DegradationSpec& spec) {
  hr.validate();
  VideoSequence lr;
  for (const auto& f : hr.frames) lr.frames.push_back(degrade_frame(f, spec));
  for (const auto& o : hr.offsets) {
    lr.offsets.push_back({o[0] / spec.scale, o[1] / spec.scale});
  }
  return lr;
}

void VideoSequence::validate() const {
  if (frames.empty()) throw ShapeError("video sequence has no frames");
  const auto& s0 = frames[0].shape();
  if (s0.size() != 3 || s0[0] != 3) throw ShapeError("frames must be (3,H,W), got " + shape_str(s0));
  for (const auto& f : frames) {
    if (f.shape() != s0) throw ShapeError("frame extents differ: " + shape_str(s0) + " vs " + shape_str(f.shape()));
  }
  if (!offsets.empty() && offsets.size() != frames.size()) throw ShapeError("motion metadata length mismatch");
}

}  // namespace vsr
