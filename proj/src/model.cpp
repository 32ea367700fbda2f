#include "vsr/model.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "vsr/ops.hpp"

namespace vsr {

namespace {

constexpr double kSlope = 0.1;

template <typename Enum, std::size_t N>
Enum parse_enum(const std::string& text, const std::pair<const char*, Enum> (&table)[N], const char* what) {
  for (const auto& [name, value] : table) {
    if (text == name) return value;
  }
  throw ConfigError(std::string("unknown ") + what + " '" + text + "'");
}

constexpr std::pair<const char*, PropagationMode> kPropagation[] = {
    {"local", PropagationMode::Local},
    {"unidirectional", PropagationMode::Unidirectional},
    {"bidirectional", PropagationMode::Bidirectional},
    {"coupled", PropagationMode::Coupled}};
constexpr std::pair<const char*, AlignmentMode> kAlignment[] = {
    {"none", AlignmentMode::None}, {"image", AlignmentMode::Image}, {"feature", AlignmentMode::Feature}};
constexpr std::pair<const char*, FlowSourceKind> kFlowSource[] = {{"network", FlowSourceKind::Network},
                                                                   {"ground_truth", FlowSourceKind::GroundTruth}};

int parse_int(const std::string& key, const std::string& text) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return static_cast<int>(v);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects an integer, got '" + text + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "on") return true;
  if (text == "false" || text == "0" || text == "off") return false;
  throw ConfigError("config key '" + key + "' expects a boolean, got '" + text + "'");
}

}  // namespace

std::string to_string(PropagationMode mode) {
  for (const auto& [name, value] : kPropagation) {
    if (value == mode) return name;
  }
  return "?";
}
std::string to_string(AlignmentMode mode) {
  for (const auto& [name, value] : kAlignment) {
    if (value == mode) return name;
  }
  return "?";
}
std::string to_string(FlowSourceKind kind) {
  for (const auto& [name, value] : kFlowSource) {
    if (value == kind) return name;
  }
  return "?";
}
PropagationMode parse_propagation(const std::string& text) { return parse_enum(text, kPropagation, "propagation mode"); }
AlignmentMode parse_alignment(const std::string& text) { return parse_enum(text, kAlignment, "alignment mode"); }
FlowSourceKind parse_flow_source(const std::string& text) { return parse_enum(text, kFlowSource, "flow source"); }

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::paper_scale() {
  ModelConfig c;
  c.channels = 64;
  c.blocks_per_branch = 30;
  return c;
}

void ModelConfig::validate() const {
  if (channels < 1) throw ConfigError("channels must be >= 1");
  if (blocks_per_branch < 0) throw ConfigError("blocks_per_branch must be >= 0");
  if (scale != 4) throw ConfigError("only x4 upsampling is supported");
  if (segments < 1) throw ConfigError("segments (K) must be >= 1");
  if (keyframe_interval < 1) throw ConfigError("keyframe_interval must be >= 1");
  if (extractor_blocks < 0) throw ConfigError("extractor_blocks must be >= 0");
  if (refill && propagation == PropagationMode::Unidirectional) {
    throw ConfigError("information refill needs a bidirectional structure");
  }
  if (flow.levels < 1) throw ConfigError("flow_levels must be >= 1");
}

std::map<std::string, std::string> ModelConfig::to_map() const {
  std::ostringstream widths;
  for (std::size_t i = 0; i < flow.widths.size(); ++i) widths << (i ? "," : "") << flow.widths[i];
  return {{"channels", std::to_string(channels)},
          {"blocks_per_branch", std::to_string(blocks_per_branch)},
          {"scale", std::to_string(scale)},
          {"propagation", to_string(propagation)},
          {"segments", std::to_string(segments)},
          {"alignment", to_string(alignment)},
          {"refill", refill ? "true" : "false"},
          {"keyframe_interval", std::to_string(keyframe_interval)},
          {"extractor_blocks", std::to_string(extractor_blocks)},
          {"flow_source", to_string(flow_source)},
          {"flow_levels", std::to_string(flow.levels)},
          {"flow_widths", widths.str()},
          {"dtype", dtype_name(dtype)},
          {"seed", std::to_string(seed)}};
}

ModelConfig ModelConfig::from_map(const std::map<std::string, std::string>& values) {
  ModelConfig c;
  for (const auto& [key, text] : values) {
    if (key == "channels") c.channels = parse_int(key, text);
    else if (key == "blocks_per_branch") c.blocks_per_branch = parse_int(key, text);
    else if (key == "scale") c.scale = parse_int(key, text);
    else if (key == "propagation") c.propagation = parse_propagation(text);
    else if (key == "segments") c.segments = parse_int(key, text);
    else if (key == "alignment") c.alignment = parse_alignment(text);
    else if (key == "refill") c.refill = parse_bool(key, text);
    else if (key == "keyframe_interval") c.keyframe_interval = parse_int(key, text);
    else if (key == "extractor_blocks") c.extractor_blocks = parse_int(key, text);
    else if (key == "flow_source") c.flow_source = parse_flow_source(text);
    else if (key == "flow_levels") c.flow.levels = parse_int(key, text);
    else if (key == "flow_widths") {
      c.flow.widths.clear();
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) c.flow.widths.push_back(parse_int(key, item));
    } else if (key == "dtype") {
      if (text == "f32") c.dtype = DType::F32;
      else if (text == "f64") c.dtype = DType::F64;
      else throw ConfigError("config key 'dtype' expects f32 or f64, got '" + text + "'");
    } else if (key == "seed") {
      c.seed = static_cast<std::uint64_t>(parse_int(key, text));
    } else {
      throw ConfigError("unknown model config key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

std::vector<int> keyframes_by_interval(int frames, int interval) {
  std::vector<int> keys;
  if (interval < 1) return keys;
  for (int i = 0; i < frames; i += interval) keys.push_back(i);
  return keys;
}

std::vector<int> keyframes_by_count(int frames, int count) {
  std::vector<int> keys;
  for (int k = 0; k < count && k < frames; ++k) {
    keys.push_back(static_cast<int>(static_cast<long>(k) * frames / count));
  }
  return keys;
}

std::vector<std::pair<int, int>> split_segments(int frames, int segments) {
  if (segments < 1) throw ConfigError("segment count must be >= 1");
  segments = std::min(segments, frames);
  std::vector<std::pair<int, int>> out;
  const int base = frames / segments, extra = frames % segments;
  int start = 0;
  for (int s = 0; s < segments; ++s) {
    const int len = base + (s < extra ? 1 : 0);
    out.emplace_back(start, len);
    start += len;
  }
  return out;
}

VsrModel VsrModel::create(const ModelConfig& config) {
  config.validate();
  VsrModel m;
  m.config_ = config;
  Rng rng(config.seed);
  const DType dt = config.dtype;
  const int C = config.channels;
  if (config.needs_flow_net()) m.flow_net_ = PyramidFlowNet::create(config.flow, rng, dt);

  auto make_branch = [&](Direction d) {
    Branch b;
    b.embed = Conv2d::create(3, C, 3, rng, dt);
    int fuse_in = 2 * C;
    if (config.alignment == AlignmentMode::Image) {
      b.image_embed = Conv2d::create(3, C, 3, rng, dt);
      fuse_in += C;
    }
    if (config.propagation == PropagationMode::Coupled && d == Direction::Forward) fuse_in += C;
    b.fuse = Conv2d::create(fuse_in, C, 3, rng, dt);
    for (int i = 0; i < config.blocks_per_branch; ++i) b.blocks.push_back(ResidualBlock::create(C, rng, dt));
    return b;
  };
  if (config.has_backward_branch()) m.backward_ = make_branch(Direction::Backward);
  m.forward_ = make_branch(Direction::Forward);

  const int head_in = config.head_reads_backward() ? 2 * C : C;
  m.upsampler_.fuse = Conv2d::create(head_in, C, 3, rng, dt);
  m.upsampler_.up1 = Conv2d::create(C, 4 * C, 3, rng, dt);
  m.upsampler_.up2 = Conv2d::create(C, 4 * C, 3, rng, dt);
  m.upsampler_.out = Conv2d::create(C, 3, 3, rng, dt, 0.1);

  // Refill parts come last so the shared weights match a refill-free model of the same seed.
  if (config.refill) {
    if (config.has_backward_branch()) m.backward_.refill_fusion = Conv2d::create(2 * C, C, 3, rng, dt);
    m.forward_.refill_fusion = Conv2d::create(2 * C, C, 3, rng, dt);
    m.extractor_.in = Conv2d::create(9, C, 3, rng, dt);
    for (int i = 0; i < config.extractor_blocks; ++i) m.extractor_.blocks.push_back(ResidualBlock::create(C, rng, dt));
  }
  return m;
}

Tensor VsrModel::estimate_flow(const Tensor& a, const Tensor& b) const {
  if (!config_.needs_flow_net()) throw Error("model has no flow network");
  return flow_net_.estimate(a, b);
}

BranchOutput VsrModel::propagate_branch(Direction direction, const BranchStep& step, const GroundTruthFlow* gt,
                                        int index, int neighbor_index) const {
  const Branch& br = branch(direction);
  if (!br.embed.weight.defined()) throw Error("model has no backward branch");
  const Tensor& x = step.x;
  if (x.ndim() != 4 || x.dim(1) != 3) throw ShapeError("propagate_branch: expected (N,3,H,W), got " + shape_str(x.shape()));
  const std::int64_t N = x.dim(0), H = x.dim(2), W = x.dim(3), C = config_.channels;
  const bool boundary = !step.h_neighbor.defined();
  const Tensor h_nb = boundary ? Tensor::zeros({N, C, H, W}, x.dtype()) : step.h_neighbor;
  if (h_nb.shape() != Shape{N, C, H, W}) {
    throw ShapeError("propagate_branch: hidden state " + shape_str(h_nb.shape()) + " does not match frame " +
                     shape_str(x.shape()));
  }
  const Tensor x_nb = step.x_neighbor.defined() ? step.x_neighbor : x;
  if (x_nb.shape() != x.shape()) {
    throw ShapeError("propagate_branch: neighbor frame " + shape_str(x_nb.shape()) + " vs " + shape_str(x.shape()));
  }

  Tensor flow = step.flow;
  if (config_.uses_flow() && !flow.defined()) {
    if (boundary) {
      flow = Tensor::zeros({N, 2, H, W}, x.dtype());
    } else if (config_.flow_source == FlowSourceKind::GroundTruth) {
      if (!gt) throw Error("ground-truth flow source selected but no motion metadata supplied");
      flow = gt->flow(index, neighbor_index, H, W, x.dtype());
    } else {
      flow = flow_net_.estimate(x, x_nb);
    }
  }

  BranchOutput out;
  std::vector<Tensor> parts{leaky_relu(br.embed(x), kSlope)};
  if (config_.alignment == AlignmentMode::Image) {
    parts.push_back(leaky_relu(br.image_embed(flow_warp(x_nb, flow)), kSlope));
    out.aligned = h_nb;
  } else if (config_.alignment == AlignmentMode::Feature) {
    out.aligned = boundary ? h_nb : flow_warp(h_nb, flow);
  } else {
    out.aligned = h_nb;
  }
  out.refined = out.aligned;
  if (step.refill_feature.defined()) {
    if (!br.refill_fusion.weight.defined()) throw Error("refill feature supplied to a model without refill");
    out.refined = br.refill_fusion(concat_channels({step.refill_feature, out.aligned}));
  }
  parts.push_back(out.refined);
  if (step.backward_feature.defined()) parts.push_back(step.backward_feature);
  if (br.fuse.in_channels() != static_cast<std::int64_t>(parts.size()) * C) {
    throw ShapeError("propagate_branch: branch expects " + std::to_string(br.fuse.in_channels() / C) +
                     " feature groups, got " + std::to_string(parts.size()));
  }
  Tensor h = leaky_relu(br.fuse(concat_channels(parts)), kSlope);
  for (const auto& block : br.blocks) h = block(h);
  out.h = h;
  return out;
}

Tensor VsrModel::upsample(const Tensor& h_forward, const Tensor& h_backward, const Tensor& x) const {
  Tensor h = h_backward.defined() ? concat_channels({h_forward, h_backward}) : h_forward;
  if (h.dim(1) != upsampler_.fuse.in_channels()) {
    throw ShapeError("upsample: expected " + std::to_string(upsampler_.fuse.in_channels()) + " feature channels, got " +
                     std::to_string(h.dim(1)));
  }
  h = leaky_relu(upsampler_.fuse(h), kSlope);
  h = leaky_relu(pixel_shuffle(upsampler_.up1(h), 2), kSlope);
  h = leaky_relu(pixel_shuffle(upsampler_.up2(h), 2), kSlope);
  return add(upsampler_.out(h), bilinear_resize(x, config_.scale));
}

Tensor VsrModel::extract_features(const Tensor& prev, const Tensor& cur, const Tensor& next) const {
  if (!extractor_.in.weight.defined()) throw Error("model has no feature extractor");
  if (prev.shape() != cur.shape() || next.shape() != cur.shape()) {
    throw ShapeError("extract_features: frame shapes differ");
  }
  Tensor h = leaky_relu(extractor_.in(concat_channels({prev, cur, next})), kSlope);
  for (const auto& block : extractor_.blocks) h = block(h);
  return h;
}

std::vector<int> VsrModel::default_keyframes(int frames) const {
  if (!config_.refill) return {};
  return keyframes_by_interval(frames, config_.keyframe_interval);
}

std::vector<Tensor> VsrModel::forward(std::span<const Tensor> frames, const ForwardOptions& options) const {
  if (frames.empty()) throw ShapeError("forward_sequence: empty sequence");
  const auto& s0 = frames[0].shape();
  if (s0.size() != 4 || s0[1] != 3) throw ShapeError("forward_sequence: frames must be (N,3,H,W), got " + shape_str(s0));
  for (const auto& f : frames) {
    if (f.shape() != s0) {
      throw ShapeError("forward_sequence: inconsistent frame shapes " + shape_str(s0) + " vs " + shape_str(f.shape()));
    }
  }
  if (config_.needs_flow_net()) {
    const int m = flow_net_.extent_multiple();
    if (s0[2] % m != 0 || s0[3] % m != 0) {
      throw ShapeError("forward_sequence: extents " + shape_str(s0) + " must be divisible by " + std::to_string(m));
    }
  }
  if (config_.flow_source == FlowSourceKind::GroundTruth && config_.uses_flow()) {
    if (!options.ground_truth) throw Error("ground-truth flow source selected but no motion metadata supplied");
    if (options.ground_truth->frames() != static_cast<int>(frames.size())) {
      throw Error("motion metadata covers " + std::to_string(options.ground_truth->frames()) + " frames, sequence has " +
                  std::to_string(frames.size()));
    }
  }
  if (options.keyframes && !config_.refill && !options.keyframes->empty()) {
    throw Error("keyframes supplied to a model without refill");
  }
  const int T = static_cast<int>(frames.size());
  if (config_.propagation != PropagationMode::Local) return run_segment(frames, options, 0);
  std::vector<Tensor> out;
  for (auto [start, len] : split_segments(T, config_.segments)) {
    auto part = run_segment(frames.subspan(static_cast<std::size_t>(start), static_cast<std::size_t>(len)), options, start);
    for (auto& y : part) out.push_back(std::move(y));
  }
  return out;
}

std::vector<Tensor> VsrModel::run_segment(std::span<const Tensor> x, const ForwardOptions& options, int offset) const {
  const int T = static_cast<int>(x.size());
  std::set<int> keys;
  if (config_.refill) {
    if (options.keyframes) {
      keys.insert(options.keyframes->begin(), options.keyframes->end());
    } else {
      const int total = options.ground_truth ? options.ground_truth->frames() : offset + T;
      for (int k : default_keyframes(std::max(total, offset + T))) keys.insert(k);
    }
  }
  std::vector<Tensor> refill_cache(static_cast<std::size_t>(T));
  auto refill_at = [&](int i) -> Tensor {
    if (!keys.count(offset + i)) return {};
    auto& e = refill_cache[static_cast<std::size_t>(i)];
    if (!e.defined()) {
      e = extract_features(x[static_cast<std::size_t>(std::max(i - 1, 0))], x[static_cast<std::size_t>(i)],
                           x[static_cast<std::size_t>(std::min(i + 1, T - 1))]);
    }
    return e;
  };
  const GroundTruthFlow* gt = options.ground_truth;
  auto at = [&](int i) -> const Tensor& { return x[static_cast<std::size_t>(i)]; };

  std::vector<Tensor> hb(static_cast<std::size_t>(T)), hf(static_cast<std::size_t>(T));
  if (config_.has_backward_branch()) {
    for (int i = T - 1; i >= 0; --i) {
      BranchStep step;
      step.x = at(i);
      if (i + 1 < T) {
        step.x_neighbor = at(i + 1);
        step.h_neighbor = hb[static_cast<std::size_t>(i + 1)];
      }
      step.refill_feature = refill_at(i);
      hb[static_cast<std::size_t>(i)] = propagate_branch(Direction::Backward, step, gt, offset + i, offset + i + 1).h;
    }
  }
  for (int i = 0; i < T; ++i) {
    BranchStep step;
    step.x = at(i);
    if (i > 0) {
      step.x_neighbor = at(i - 1);
      step.h_neighbor = hf[static_cast<std::size_t>(i - 1)];
    }
    if (config_.propagation == PropagationMode::Coupled) step.backward_feature = hb[static_cast<std::size_t>(i)];
    step.refill_feature = refill_at(i);
    hf[static_cast<std::size_t>(i)] = propagate_branch(Direction::Forward, step, gt, offset + i, offset + i - 1).h;
  }
  std::vector<Tensor> y;
  y.reserve(static_cast<std::size_t>(T));
  for (int i = 0; i < T; ++i) {
    const Tensor hb_i = config_.head_reads_backward() ? hb[static_cast<std::size_t>(i)] : Tensor{};
    y.push_back(upsample(hf[static_cast<std::size_t>(i)], hb_i, at(i)));
  }
  return y;
}

std::vector<Tensor> VsrModel::infer(std::span<const Tensor> frames, const ForwardOptions& options) const {
  NoGradGuard guard;
  auto y = forward(frames, options);
  for (auto& t : y) t = clamp(t, 0.0, 1.0);
  return y;
}

void VsrModel::collect_main(ParameterList& out) const {
  auto branch_params = [&](const Branch& b, const std::string& name) {
    if (!b.embed.weight.defined()) return;
    b.embed.collect(name + ".embed", out);
    if (b.image_embed.weight.defined()) b.image_embed.collect(name + ".image_embed", out);
    b.fuse.collect(name + ".fuse", out);
    for (std::size_t i = 0; i < b.blocks.size(); ++i) b.blocks[i].collect(name + ".block" + std::to_string(i), out);
  };
  branch_params(backward_, "backward");
  branch_params(forward_, "forward");
  upsampler_.fuse.collect("upsample.fuse", out);
  upsampler_.up1.collect("upsample.up1", out);
  upsampler_.up2.collect("upsample.up2", out);
  upsampler_.out.collect("upsample.out", out);
  if (backward_.refill_fusion.weight.defined()) backward_.refill_fusion.collect("backward.refill", out);
  if (forward_.refill_fusion.weight.defined()) forward_.refill_fusion.collect("forward.refill", out);
}

ParameterList VsrModel::parameters(ParamGroupKind group) const {
  ParameterList out;
  switch (group) {
    case ParamGroupKind::Flow:
      if (config_.needs_flow_net()) flow_net_.collect("flow", out);
      break;
    case ParamGroupKind::Main:
      collect_main(out);
      break;
    case ParamGroupKind::Extractor:
      if (extractor_.in.weight.defined()) {
        extractor_.in.collect("extractor.in", out);
        for (std::size_t i = 0; i < extractor_.blocks.size(); ++i) {
          extractor_.blocks[i].collect("extractor.block" + std::to_string(i), out);
        }
      }
      break;
  }
  return out;
}

ParameterList VsrModel::parameters() const {
  ParameterList out = parameters(ParamGroupKind::Flow);
  for (auto g : {ParamGroupKind::Main, ParamGroupKind::Extractor}) {
    auto more = parameters(g);
    out.insert(out.end(), more.begin(), more.end());
  }
  return out;
}

ComponentCounts VsrModel::parameter_counts() const {
  return {count_parameters(parameters(ParamGroupKind::Flow)), count_parameters(parameters(ParamGroupKind::Main)),
          count_parameters(parameters(ParamGroupKind::Extractor))};
}

void VsrModel::load_parameters(const std::vector<std::pair<std::string, Tensor>>& named) {
  auto params = parameters();
  std::map<std::string, const Tensor*> lookup;
  for (const auto& [name, t] : named) lookup[name] = &t;
  for (auto& p : params) {
    auto it = lookup.find(p.name);
    if (it == lookup.end()) throw ConfigError("checkpoint is missing parameter '" + p.name + "'");
    const Tensor& src = *it->second;
    if (src.shape() != p.tensor.shape()) {
      throw ConfigError("checkpoint parameter '" + p.name + "' has shape " + shape_str(src.shape()) + ", model expects " +
                        shape_str(p.tensor.shape()));
    }
    const Tensor converted = src.to(p.tensor.dtype());
    dispatch(p.tensor.dtype(), [&]<typename T>() {
      auto s = converted.data<T>();
      std::copy(s.begin(), s.end(), p.tensor.data<T>().begin());
    });
  }
}

}  // namespace vsr
