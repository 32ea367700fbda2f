#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vsr/flow.hpp"
#include "vsr/nn.hpp"

namespace vsr {

enum class PropagationMode { Local, Unidirectional, Bidirectional, Coupled };
enum class AlignmentMode { None, Image, Feature };
enum class FlowSourceKind { Network, GroundTruth };
enum class Direction { Forward, Backward };

std::string to_string(PropagationMode mode);
std::string to_string(AlignmentMode mode);
std::string to_string(FlowSourceKind kind);
PropagationMode parse_propagation(const std::string& text);
AlignmentMode parse_alignment(const std::string& text);
FlowSourceKind parse_flow_source(const std::string& text);

struct ModelConfig {
  int channels = 16;
  int blocks_per_branch = 4;
  int scale = 4;
  PropagationMode propagation = PropagationMode::Bidirectional;
  // K for PropagationMode::Local.
  int segments = 1;
  AlignmentMode alignment = AlignmentMode::Feature;
  bool refill = false;
  int keyframe_interval = 5;
  int extractor_blocks = 3;
  FlowSourceKind flow_source = FlowSourceKind::Network;
  PyramidFlowConfig flow;
  DType dtype = DType::F32;
  std::uint64_t seed = 0;

  // C=16, 4 blocks per branch, 3-level flow net.
  static ModelConfig desk();
  // C=64, 30 blocks per branch.
  static ModelConfig paper_scale();

  void validate() const;
  bool uses_flow() const { return alignment != AlignmentMode::None; }
  bool needs_flow_net() const { return uses_flow() && flow_source == FlowSourceKind::Network; }
  // Backward branch present (everything except Unidirectional).
  bool has_backward_branch() const { return propagation != PropagationMode::Unidirectional; }
  // The upsampler reads h^b only for the plain bidirectional head.
  bool head_reads_backward() const {
    return propagation == PropagationMode::Bidirectional || propagation == PropagationMode::Local;
  }

  std::map<std::string, std::string> to_map() const;
  static ModelConfig from_map(const std::map<std::string, std::string>& values);
};

// Evenly spaced keyframes from index 0: {0, interval, 2*interval, ...} below `frames`.
std::vector<int> keyframes_by_interval(int frames, int interval);
// `count` evenly spaced keyframes: floor(k * frames / count) for k < count.
std::vector<int> keyframes_by_count(int frames, int count);

struct ForwardOptions {
  // Overrides the configured keyframe set (refill models only). Empty = no keyframes.
  std::optional<std::vector<int>> keyframes;
  // Required when the model's flow source is GroundTruth.
  const GroundTruthFlow* ground_truth = nullptr;
};

// Inputs to one recurrent step of a propagation branch. Undefined tensors mean "absent".
struct BranchStep {
  Tensor x;           // (N,3,H,W) current LR frame
  Tensor x_neighbor;  // previous frame in propagation order
  Tensor h_neighbor;  // hidden state carried from the neighbor, zeros at sequence ends
  Tensor flow;        // neighbor flow; estimated from (x, x_neighbor) when undefined
  Tensor backward_feature;  // h_i^b consumed by the coupled forward branch
  Tensor refill_feature;    // e_i at keyframes
};

struct BranchOutput {
  Tensor aligned;  // h-bar
  Tensor refined;  // h-hat (identical handle to `aligned` off keyframes)
  Tensor h;
};

struct ComponentCounts {
  std::int64_t flow = 0;
  std::int64_t main = 0;
  std::int64_t extractor = 0;
  std::int64_t total() const { return flow + main + extractor; }
};

enum class ParamGroupKind { Main, Flow, Extractor };

class VsrModel {
 public:
  static VsrModel create(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }

  // T frames of (N,3,H,W) -> T frames of (N,3,4H,4W); outputs are not clamped.
  std::vector<Tensor> forward(std::span<const Tensor> frames, const ForwardOptions& options = {}) const;
  // forward() under NoGradGuard with outputs clamped to [0, 1].
  std::vector<Tensor> infer(std::span<const Tensor> frames, const ForwardOptions& options = {}) const;

  BranchOutput propagate_branch(Direction direction, const BranchStep& step, const GroundTruthFlow* gt = nullptr,
                                int index = 0, int neighbor_index = 0) const;
  Tensor upsample(const Tensor& h_forward, const Tensor& h_backward, const Tensor& x) const;
  Tensor extract_features(const Tensor& prev, const Tensor& cur, const Tensor& next) const;
  Tensor estimate_flow(const Tensor& a, const Tensor& b) const;

  std::vector<int> default_keyframes(int frames) const;

  ParameterList parameters() const;
  ParameterList parameters(ParamGroupKind group) const;
  ComponentCounts parameter_counts() const;

  // Copies values (not handles) from a named tensor list; names and shapes must match.
  void load_parameters(const std::vector<std::pair<std::string, Tensor>>& named);

 private:
  struct Branch {
    Conv2d embed;
    Conv2d image_embed;
    Conv2d fuse;
    std::vector<ResidualBlock> blocks;
    Conv2d refill_fusion;
  };
  struct Upsampler {
    Conv2d fuse;
    Conv2d up1;
    Conv2d up2;
    Conv2d out;
  };
  struct Extractor {
    Conv2d in;
    std::vector<ResidualBlock> blocks;
  };

  std::vector<Tensor> run_segment(std::span<const Tensor> x, const ForwardOptions& options, int offset) const;
  const Branch& branch(Direction d) const { return d == Direction::Forward ? forward_ : backward_; }
  void collect_main(ParameterList& out) const;

  ModelConfig config_;
  PyramidFlowNet flow_net_;
  Branch forward_;
  Branch backward_;
  Upsampler upsampler_;
  Extractor extractor_;
};

// Contiguous near-equal segments; the first T % K segments get one extra frame.
std::vector<std::pair<int, int>> split_segments(int frames, int segments);

}  // namespace vsr
