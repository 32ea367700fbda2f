#pragma once

#include <array>
#include <string>
#include <vector>

#include "vsr/nn.hpp"

namespace vsr {

// Coarse-to-fine flow network. Level l runs at 1/2^l resolution; each level maps
// (frame A, frame B warped by the current flow, current flow) = 8 channels to a
// 2-channel residual that is added to the upsampled coarser estimate.
struct PyramidFlowConfig {
  int levels = 3;
  std::vector<int> widths{16, 16, 8};
};

class PyramidFlowNet {
 public:
  PyramidFlowNet() = default;
  static PyramidFlowNet create(const PyramidFlowConfig& config, Rng& rng, DType dtype);

  // Flow (N,2,H,W) with warp(b, flow) ~ a. Requires H and W divisible by 2^(levels-1).
  Tensor estimate(const Tensor& a, const Tensor& b) const;

  int levels() const { return static_cast<int>(stages_.size()); }
  // Multiple that input extents must respect.
  int extent_multiple() const { return 1 << (levels() - 1); }
  void collect(const std::string& prefix, ParameterList& out) const;

 private:
  Tensor refine(int level, const Tensor& a, const Tensor& b, const Tensor& flow) const;

  std::vector<std::vector<Conv2d>> stages_;
};

Tensor estimate_flow(const PyramidFlowNet& net, const Tensor& a, const Tensor& b);

// Exact flows for synthetic clips whose content is a global translation per frame.
// offsets[n][t] is the content displacement of frame t (in the pixel units of the
// frames being aligned) for batch item n; frame_t(p) = canvas(p - offsets[n][t]).
struct GroundTruthFlow {
  std::vector<std::vector<std::array<double, 2>>> offsets;

  bool empty() const { return offsets.empty(); }
  int frames() const { return offsets.empty() ? 0 : static_cast<int>(offsets[0].size()); }
  // Flow mapping frame-i coordinates onto frame-j content: warp(frame_j, flow) ~ frame_i.
  Tensor flow(int i, int j, std::int64_t height, std::int64_t width, DType dtype) const;
};

// Provider call with the naming used by the tools.
Tensor ground_truth_flow(const GroundTruthFlow& provider, int i, int j, std::int64_t height, std::int64_t width,
                         DType dtype = DType::F32);

// Color-wheel rendering of a (2,H,W) or (1,2,H,W) flow as (3,H,W) RGB in [0,1].
// Hue is the direction (0 deg = +x, red; 90 deg = +y, yellow-green), saturation is
// magnitude / max_magnitude clipped to 1, value is 1, so zero flow is white.
// max_magnitude <= 0 uses the largest magnitude in the field.
Tensor flow_to_color(const Tensor& flow, double max_magnitude = 0);

}  // namespace vsr
