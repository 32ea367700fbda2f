#include <cmath>

#include "vsr/data.hpp"

namespace vsr {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

// Channel planes to compare, as (planes, H, W) doubles.
std::vector<double> metric_planes(const Tensor& x, MetricMode mode) {
  return mode == MetricMode::Y ? rgb_to_y(x).to_vector() : x.to_vector();
}

// Valid-mode separable filtering of one plane.
std::vector<double> filter_valid(const double* src, std::int64_t h, std::int64_t w, const std::vector<double>& k) {
  const auto n = static_cast<std::int64_t>(k.size());
  const std::int64_t oh = h - n + 1, ow = w - n + 1;
  std::vector<double> rows(static_cast<std::size_t>(oh * w), 0.0), out(static_cast<std::size_t>(oh * ow), 0.0);
  for (std::int64_t y = 0; y < oh; ++y)
    for (std::int64_t x = 0; x < w; ++x) {
      double acc = 0;
      for (std::int64_t i = 0; i < n; ++i) acc += k[static_cast<std::size_t>(i)] * src[(y + i) * w + x];
      rows[static_cast<std::size_t>(y * w + x)] = acc;
    }
  for (std::int64_t y = 0; y < oh; ++y)
    for (std::int64_t x = 0; x < ow; ++x) {
      double acc = 0;
      for (std::int64_t i = 0; i < n; ++i) acc += k[static_cast<std::size_t>(i)] * rows[static_cast<std::size_t>(y * w + x + i)];
      out[static_cast<std::size_t>(y * ow + x)] = acc;
    }
  return out;
}

}  // namespace

std::string to_string(MetricMode mode) { return mode == MetricMode::Y ? "y" : "rgb"; }

MetricMode parse_metric_mode(const std::string& text) {
  if (text == "rgb" || text == "RGB") return MetricMode::RGB;
  if (text == "y" || text == "Y") return MetricMode::Y;
  throw ConfigError("unknown metric mode '" + text + "' (expected rgb or y)");
}

Tensor rgb_to_y(const Tensor& rgb) {
  if (rgb.ndim() != 3 || rgb.dim(0) != 3) throw ShapeError("rgb_to_y: expected (3,H,W), got " + shape_str(rgb.shape()));
  const std::int64_t hw = rgb.dim(1) * rgb.dim(2);
  const auto v = rgb.to_vector();
  std::vector<double> y(static_cast<std::size_t>(hw));
  for (std::int64_t i = 0; i < hw; ++i) {
    const double r = v[static_cast<std::size_t>(i)], g = v[static_cast<std::size_t>(hw + i)],
                 b = v[static_cast<std::size_t>(2 * hw + i)];
    y[static_cast<std::size_t>(i)] = (65.481 * r + 128.553 * g + 24.966 * b + 16.0) / 255.0;
  }
  return Tensor::from_data({1, rgb.dim(1), rgb.dim(2)}, std::move(y));
}

double psnr(const Tensor& a, const Tensor& b, MetricMode mode) {
  require_same_shape(a, b, "psnr");
  const auto pa = metric_planes(a, mode), pb = metric_planes(b, mode);
  double se = 0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double d = pa[i] - pb[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(pa.size());
  if (mse == 0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Tensor& a, const Tensor& b, MetricMode mode) {
  require_same_shape(a, b, "ssim");
  if (a.ndim() != 3) throw ShapeError("ssim: expected (C,H,W), got " + shape_str(a.shape()));
  constexpr int kWindow = 11;
  const std::int64_t h = a.dim(1), w = a.dim(2);
  if (h < kWindow || w < kWindow) throw ShapeError("ssim: images must be at least 11x11, got " + shape_str(a.shape()));
  std::vector<double> k(kWindow);
  double total = 0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    k[static_cast<std::size_t>(i)] = std::exp(-d * d / (2 * 1.5 * 1.5));
    total += k[static_cast<std::size_t>(i)];
  }
  for (auto& v : k) v /= total;
  constexpr double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;

  const auto pa = metric_planes(a, mode), pb = metric_planes(b, mode);
  const auto planes = static_cast<std::int64_t>(pa.size()) / (h * w);
  double sum = 0;
  std::int64_t count = 0;
  std::vector<double> aa(static_cast<std::size_t>(h * w)), bb(aa.size()), ab(aa.size());
  for (std::int64_t p = 0; p < planes; ++p) {
    const double* x = pa.data() + p * h * w;
    const double* y = pb.data() + p * h * w;
    for (std::int64_t i = 0; i < h * w; ++i) {
      aa[static_cast<std::size_t>(i)] = x[i] * x[i];
      bb[static_cast<std::size_t>(i)] = y[i] * y[i];
      ab[static_cast<std::size_t>(i)] = x[i] * y[i];
    }
    const auto mu_a = filter_valid(x, h, w, k), mu_b = filter_valid(y, h, w, k);
    const auto e_aa = filter_valid(aa.data(), h, w, k), e_bb = filter_valid(bb.data(), h, w, k),
               e_ab = filter_valid(ab.data(), h, w, k);
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double ma = mu_a[i], mb = mu_b[i];
      const double va = e_aa[i] - ma * ma, vb = e_bb[i] - mb * mb, cov = e_ab[i] - ma * mb;
      sum += ((2 * ma * mb + C1) * (2 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

}  // namespace vsr
