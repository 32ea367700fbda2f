#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vsr/rng.hpp"
#include "vsr/tensor.hpp"

namespace vsr {

struct Parameter {
  std::string name;
  Tensor tensor;
};
using ParameterList = std::vector<Parameter>;

std::int64_t count_parameters(const ParameterList& params);

// Cross-correlation (no kernel flip) with zero padding.
// x: (N, C_in, H, W), weight: (C_out, C_in, k, k), bias: (C_out).
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride, int padding);

struct Conv2d {
  Tensor weight;
  Tensor bias;
  int stride = 1;
  int padding = 1;

  // Fan-in scaled normal weights (He init, multiplied by `gain`), zero bias.
  static Conv2d create(int in_channels, int out_channels, int kernel, Rng& rng, DType dtype, double gain = 1.0);

  std::int64_t in_channels() const { return weight.dim(1); }
  std::int64_t out_channels() const { return weight.dim(0); }
  int kernel() const { return static_cast<int>(weight.dim(2)); }

  Tensor operator()(const Tensor& x) const { return conv2d(x, weight, bias, stride, padding); }
  void collect(const std::string& prefix, ParameterList& out) const;
};

// max(x, slope * x); the subgradient at 0 takes the positive branch.
Tensor leaky_relu(const Tensor& x, double slope = 0.1);
Tensor relu(const Tensor& x);

// (N, C*r*r, H, W) -> (N, C, r*H, r*W) with out[n,c,h*r+a,w*r+b] = in[n, c*r*r + a*r + b, h, w].
Tensor pixel_shuffle(const Tensor& x, int r);
// Exact inverse of pixel_shuffle.
Tensor pixel_unshuffle(const Tensor& x, int r);

// Bilinear resampling with half-pixel centers (align_corners = false); output extents
// are floor(scale * input). Source coordinates below 0 clamp to 0, indices past the
// far edge clamp to the last pixel.
Tensor bilinear_resize(const Tensor& x, double scale);

// Backward warp: out(y, x) = bilinear sample of feat at (x + u, y + v), where
// flow channel 0 is u (horizontal) and channel 1 is v (vertical), in pixels.
// Out-of-frame taps read zero. Differentiable in both feat and flow.
Tensor flow_warp(const Tensor& feat, const Tensor& flow);

// x + conv2(relu(conv1(x))), no normalization.
struct ResidualBlock {
  Conv2d conv1;
  Conv2d conv2;

  // The second conv starts scaled by 0.1 so deep recurrent stacks start close to identity.
  static ResidualBlock create(int channels, Rng& rng, DType dtype);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;
};

Tensor residual_block_forward(const Tensor& x, const ResidualBlock& block);

}  // namespace vsr
