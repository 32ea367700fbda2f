#include "vsr/flow.hpp"

#include <cmath>
#include <numbers>

#include "vsr/ops.hpp"

namespace vsr {

PyramidFlowNet PyramidFlowNet::create(const PyramidFlowConfig& config, Rng& rng, DType dtype) {
  if (config.levels < 1) throw ConfigError("flow pyramid needs at least one level");
  if (config.widths.empty()) throw ConfigError("flow pyramid needs at least one hidden width");
  PyramidFlowNet net;
  for (int level = 0; level < config.levels; ++level) {
    std::vector<Conv2d> stage;
    int in = 8;
    for (int w : config.widths) {
      stage.push_back(Conv2d::create(in, w, 3, rng, dtype));
      in = w;
    }
    // Zero final layer: an untrained level contributes no residual.
    auto last = Conv2d::create(in, 2, 3, rng, dtype, 0.0);
    stage.push_back(std::move(last));
    net.stages_.push_back(std::move(stage));
  }
  return net;
}

Tensor PyramidFlowNet::refine(int level, const Tensor& a, const Tensor& b, const Tensor& flow) const {
  const auto& stage = stages_[static_cast<std::size_t>(level)];
  Tensor h = concat_channels({a, flow_warp(b, flow), flow});
  for (std::size_t i = 0; i + 1 < stage.size(); ++i) h = leaky_relu(stage[i](h), 0.1);
  return add(flow, stage.back()(h));
}

Tensor PyramidFlowNet::estimate(const Tensor& a, const Tensor& b) const {
  if (a.shape() != b.shape()) {
    throw ShapeError("estimate_flow: frame shapes differ " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  if (a.ndim() != 4 || a.dim(1) != 3) throw ShapeError("estimate_flow: expected (N,3,H,W), got " + shape_str(a.shape()));
  const int m = extent_multiple();
  if (a.dim(2) % m != 0 || a.dim(3) % m != 0) {
    throw ShapeError("estimate_flow: extents " + shape_str(a.shape()) + " must be divisible by " + std::to_string(m) +
                     "; pad the frames first");
  }
  std::vector<Tensor> pa{a}, pb{b};
  for (int l = 1; l < levels(); ++l) {
    pa.push_back(bilinear_resize(pa.back(), 0.5));
    pb.push_back(bilinear_resize(pb.back(), 0.5));
  }
  Tensor flow;
  for (int l = levels() - 1; l >= 0; --l) {
    const auto& al = pa[static_cast<std::size_t>(l)];
    if (!flow.defined()) {
      flow = Tensor::zeros({al.dim(0), 2, al.dim(2), al.dim(3)}, a.dtype());
    } else {
      flow = scalar_mul(bilinear_resize(flow, 2.0), 2.0);
    }
    flow = refine(l, al, pb[static_cast<std::size_t>(l)], flow);
  }
  return flow;
}

void PyramidFlowNet::collect(const std::string& prefix, ParameterList& out) const {
  for (std::size_t l = 0; l < stages_.size(); ++l) {
    for (std::size_t i = 0; i < stages_[l].size(); ++i) {
      stages_[l][i].collect(prefix + ".level" + std::to_string(l) + ".conv" + std::to_string(i), out);
    }
  }
}

Tensor estimate_flow(const PyramidFlowNet& net, const Tensor& a, const Tensor& b) { return net.estimate(a, b); }

Tensor GroundTruthFlow::flow(int i, int j, std::int64_t height, std::int64_t width, DType dtype) const {
  if (offsets.empty()) throw Error("ground-truth flow requested without motion metadata");
  const auto n = static_cast<std::int64_t>(offsets.size());
  const std::int64_t hw = height * width;
  std::vector<double> values(static_cast<std::size_t>(n * 2 * hw));
  for (std::int64_t s = 0; s < n; ++s) {
    const auto& seq = offsets[static_cast<std::size_t>(s)];
    const int t = static_cast<int>(seq.size());
    if (i < 0 || j < 0 || i >= t || j >= t) {
      throw Error("unknown frame pair (" + std::to_string(i) + ", " + std::to_string(j) + ") for a " +
                  std::to_string(t) + "-frame clip");
    }
    const double u = seq[static_cast<std::size_t>(j)][0] - seq[static_cast<std::size_t>(i)][0];
    const double v = seq[static_cast<std::size_t>(j)][1] - seq[static_cast<std::size_t>(i)][1];
    std::fill_n(values.begin() + s * 2 * hw, hw, u);
    std::fill_n(values.begin() + s * 2 * hw + hw, hw, v);
  }
  return Tensor::from_values({n, 2, height, width}, values, dtype);
}

Tensor ground_truth_flow(const GroundTruthFlow& provider, int i, int j, std::int64_t height, std::int64_t width,
                         DType dtype) {
  return provider.flow(i, j, height, width, dtype);
}

Tensor flow_to_color(const Tensor& flow, double max_magnitude) {
  const bool batched = flow.ndim() == 4;
  if (!((flow.ndim() == 3 && flow.dim(0) == 2) || (batched && flow.dim(0) == 1 && flow.dim(1) == 2)))
    throw ShapeError("flow_to_color: expected (2,H,W) or (1,2,H,W), got " + shape_str(flow.shape()));
  const std::int64_t H = flow.dim(batched ? 2 : 1), W = flow.dim(batched ? 3 : 2), hw = H * W;
  const auto f = flow.to_vector();
  double peak = max_magnitude;
  if (peak <= 0) {
    for (std::int64_t i = 0; i < hw; ++i) peak = std::max(peak, std::hypot(f[i], f[hw + i]));
  }
  std::vector<double> rgb(static_cast<std::size_t>(3 * hw));
  for (std::int64_t i = 0; i < hw; ++i) {
    const double u = f[i], v = f[hw + i];
    const double sat = peak > 0 ? std::min(1.0, std::hypot(u, v) / peak) : 0.0;
    double hue = std::atan2(v, u) / (2 * std::numbers::pi);
    if (hue < 0) hue += 1;
    // HSV to RGB with V = 1.
    const double h6 = hue * 6;
    const int sector = static_cast<int>(h6) % 6;
    const double frac = h6 - std::floor(h6);
    const double p = 1 - sat, q = 1 - sat * frac, t = 1 - sat * (1 - frac);
    double r = 1, g = 1, b = 1;
    switch (sector) {
      case 0: r = 1, g = t, b = p; break;
      case 1: r = q, g = 1, b = p; break;
      case 2: r = p, g = 1, b = t; break;
      case 3: r = p, g = q, b = 1; break;
      case 4: r = t, g = p, b = 1; break;
      default: r = 1, g = p, b = q; break;
    }
    rgb[static_cast<std::size_t>(i)] = r;
    rgb[static_cast<std::size_t>(hw + i)] = g;
    rgb[static_cast<std::size_t>(2 * hw + i)] = b;
  }
  return Tensor::from_data({3, H, W}, std::move(rgb));
}

}  // namespace vsr
