#include "vsr/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "vsr/ops.hpp"

namespace vsr {

namespace {

Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(static_cast<std::size_t>(numel_of(shape)));
  for (auto& e : v) e = rng.uniform(lo, hi);
  return Tensor::from_data(shape, std::move(v));
}

// Values at least `gap` away from every point in `kinks`.
Tensor random_away_from(const Shape& shape, Rng& rng, std::initializer_list<double> kinks, double gap = 0.05) {
  std::vector<double> v(static_cast<std::size_t>(numel_of(shape)));
  for (auto& e : v) {
    for (;;) {
      e = rng.uniform(-1.0, 1.0);
      bool ok = true;
      for (double k : kinks) ok = ok && std::abs(e - k) >= gap;
      if (ok) break;
    }
  }
  return Tensor::from_data(shape, std::move(v));
}

// Fractional flow so no bilinear tap sits on a cell edge.
Tensor random_flow(const Shape& shape, Rng& rng) {
  std::vector<double> v(static_cast<std::size_t>(numel_of(shape)));
  for (auto& e : v) e = static_cast<double>(static_cast<int>(rng.below(4)) - 2) + 0.15 + 0.7 * rng.uniform();
  return Tensor::from_data(shape, std::move(v));
}

std::int64_t extent(Rng& rng, int lo, int hi) { return lo + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(hi - lo + 1))); }

Shape random_shape(Rng& rng) { return {extent(rng, 1, 2), extent(rng, 1, 3), extent(rng, 1, 4), extent(rng, 1, 4)}; }

std::vector<Tensor> param_tensors(const ParameterList& params) {
  std::vector<Tensor> out;
  for (const auto& p : params) out.push_back(p.tensor);
  return out;
}

std::vector<std::size_t> probe_indices(std::int64_t n, int max_elements, Rng& rng) {
  std::vector<std::size_t> idx;
  if (n <= max_elements) {
    for (std::int64_t k = 0; k < n; ++k) idx.push_back(static_cast<std::size_t>(k));
  } else {
    for (int k = 0; k < max_elements; ++k) idx.push_back(static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(n))));
  }
  return idx;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

constexpr double kRefineThreshold = 1e-5;

}  // namespace

GradcheckStats gradcheck(const std::function<Tensor()>& fn, const std::vector<Tensor>& leaves, Rng& rng, int max_elements) {
  for (auto leaf : leaves) {
    if (leaf.dtype() != DType::F64) throw Error("gradcheck needs 64-bit leaves");
    leaf.set_requires_grad(true);
    leaf.zero_grad();
  }
  Tensor probe;
  {
    NoGradGuard guard;
    probe = fn();
  }
  const Tensor weights = random_tensor(probe.shape(), rng);
  auto objective = [&] { return sum(mul(fn(), weights)); };
  objective().backward();

  GradcheckStats stats;
  for (auto leaf : leaves) {
    const auto analytic = leaf.has_grad() ? leaf.grad().to_vector() : std::vector<double>(static_cast<std::size_t>(leaf.numel()), 0.0);
    auto d = leaf.data<double>();
    for (std::size_t k : probe_indices(leaf.numel(), max_elements, rng)) {
      const double x = d[k];
      const double a = analytic[k];
      NoGradGuard guard;
      auto rel_error = [&](double h) {
        d[k] = x + h;
        const double fp = objective().item();
        d[k] = x - h;
        const double fm = objective().item();
        d[k] = x;
        const double numeric = (fp - fm) / (2 * h);
        return std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-3});
      };
      const double h = 1e-5 * (1.0 + std::abs(x));
      double rel = rel_error(h);
      ++stats.probed;
      if (rel >= kRefineThreshold) {
        // Smooth functions converge as h shrinks; a kink inside the stencil drops out.
        rel = std::min({rel, rel_error(h / 10), rel_error(h / 100)});
        ++stats.kinks;
      }
      stats.max_rel_error = std::max(stats.max_rel_error, rel);
    }
  }
  return stats;
}

void randomize_parameters(const ParameterList& params, Rng& rng, double scale) {
  for (const auto& p : params) {
    Tensor t = p.tensor;
    dispatch(t.dtype(), [&]<typename T>() {
      for (auto& e : t.data<T>()) e = static_cast<T>(scale * rng.normal());
    });
  }
}

void copy_matching_parameters(const VsrModel& src, VsrModel& dst) {
  std::map<std::string, Tensor> lookup;
  for (const auto& p : src.parameters()) lookup[p.name] = p.tensor;
  std::vector<std::pair<std::string, Tensor>> named;
  for (const auto& p : dst.parameters()) {
    auto it = lookup.find(p.name);
    named.emplace_back(p.name, it != lookup.end() ? it->second : p.tensor);
  }
  dst.load_parameters(named);
}

std::vector<GradcheckCase> run_gradcheck_suite(const GradcheckOptions& options) {
  std::vector<GradcheckCase> cases;
  Rng root(options.seed);
  std::uint64_t stream = 0;
  auto run = [&](const std::string& name, int repeats, const std::function<GradcheckStats(Rng&)>& body) {
    GradcheckCase c{name, 0, 0, 0, false};
    for (int r = 0; r < repeats; ++r) {
      Rng rng = root.split(++stream);
      const GradcheckStats s = body(rng);
      c.max_rel_error = std::max(c.max_rel_error, s.max_rel_error);
      c.probed += s.probed;
      c.kinks += s.kinks;
    }
    c.passed = c.max_rel_error < options.tolerance;
    cases.push_back(c);
  };
  const int n = options.shapes;

  auto binary = [&](const std::string& name, Tensor (*op)(const Tensor&, const Tensor&)) {
    run(name, n, [&](Rng& rng) {
      const Shape s = random_shape(rng);
      Tensor a = random_tensor(s, rng), b = random_tensor(s, rng);
      return gradcheck([&] { return op(a, b); }, {a, b}, rng);
    });
  };
  binary("add", &add);
  binary("sub", &sub);
  binary("mul", &mul);
  run("scalar_mul", n, [&](Rng& rng) {
    Tensor a = random_tensor(random_shape(rng), rng);
    return gradcheck([&] { return scalar_mul(a, 1.7); }, {a}, rng);
  });
  run("concat_channels", n, [&](Rng& rng) {
    Shape s = random_shape(rng), t = s;
    t[1] = extent(rng, 1, 3);
    Tensor a = random_tensor(s, rng), b = random_tensor(t, rng);
    return gradcheck([&] { return concat_channels({a, b}); }, {a, b}, rng);
  });
  run("slice", n, [&](Rng& rng) {
    const Shape s = random_shape(rng);
    const int axis = static_cast<int>(rng.below(4));
    const std::int64_t start = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(s[static_cast<std::size_t>(axis)])));
    const std::int64_t len = 1 + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(s[static_cast<std::size_t>(axis)] - start)));
    Tensor a = random_tensor(s, rng);
    return gradcheck([&] { return slice(a, axis, start, len); }, {a}, rng);
  });
  run("reshape", n, [&](Rng& rng) {
    Tensor a = random_tensor(random_shape(rng), rng);
    return gradcheck([&] { return reshape(a, {a.numel()}); }, {a}, rng);
  });
  run("sum", n, [&](Rng& rng) {
    Tensor a = random_tensor(random_shape(rng), rng);
    return gradcheck([&] { return sum(a); }, {a}, rng);
  });
  run("mean", n, [&](Rng& rng) {
    Tensor a = random_tensor(random_shape(rng), rng);
    return gradcheck([&] { return mean(a); }, {a}, rng);
  });
  run("clamp", n, [&](Rng& rng) {
    Tensor a = random_away_from(random_shape(rng), rng, {-0.5, 0.5});
    return gradcheck([&] { return clamp(a, -0.5, 0.5); }, {a}, rng);
  });
  run("leaky_relu", n, [&](Rng& rng) {
    Tensor a = random_away_from(random_shape(rng), rng, {0.0});
    return gradcheck([&] { return leaky_relu(a, 0.1); }, {a}, rng);
  });
  run("relu", n, [&](Rng& rng) {
    Tensor a = random_away_from(random_shape(rng), rng, {0.0});
    return gradcheck([&] { return relu(a); }, {a}, rng);
  });
  run("pixel_shuffle", n, [&](Rng& rng) {
    const int r = 2 + static_cast<int>(rng.below(2));
    Shape s = random_shape(rng);
    s[1] *= r * r;
    Tensor a = random_tensor(s, rng);
    return gradcheck([&] { return pixel_shuffle(a, r); }, {a}, rng);
  });
  run("pixel_unshuffle", n, [&](Rng& rng) {
    Shape s = random_shape(rng);
    s[2] *= 2;
    s[3] *= 2;
    Tensor a = random_tensor(s, rng);
    return gradcheck([&] { return pixel_unshuffle(a, 2); }, {a}, rng);
  });
  run("bilinear_resize", n, [&](Rng& rng) {
    static constexpr double scales[] = {2.0, 4.0, 0.5, 1.5};
    const double scale = scales[rng.below(4)];
    Shape s = random_shape(rng);
    s[2] += 1;
    s[3] += 1;
    Tensor a = random_tensor(s, rng);
    return gradcheck([&] { return bilinear_resize(a, scale); }, {a}, rng);
  });
  run("conv2d", n, [&](Rng& rng) {
    const int k = rng.below(2) ? 3 : 1;
    const int stride = 1 + static_cast<int>(rng.below(2));
    const std::int64_t cin = extent(rng, 1, 3), cout = extent(rng, 1, 3);
    Tensor x = random_tensor({extent(rng, 1, 2), cin, extent(rng, 3, 6), extent(rng, 3, 6)}, rng);
    Tensor w = random_tensor({cout, cin, k, k}, rng), b = random_tensor({cout}, rng);
    return gradcheck([&] { return conv2d(x, w, b, stride, (k - 1) / 2); }, {x, w, b}, rng);
  });
  run("flow_warp/feat", n, [&](Rng& rng) {
    const std::int64_t N = extent(rng, 1, 2), H = extent(rng, 2, 5), W = extent(rng, 2, 5);
    Tensor feat = random_tensor({N, extent(rng, 1, 3), H, W}, rng);
    const Tensor flow = random_flow({N, 2, H, W}, rng);
    return gradcheck([&] { return flow_warp(feat, flow); }, {feat}, rng);
  });
  run("flow_warp/flow", n, [&](Rng& rng) {
    const std::int64_t N = extent(rng, 1, 2), H = extent(rng, 2, 5), W = extent(rng, 2, 5);
    Tensor feat = random_tensor({N, extent(rng, 1, 3), H, W}, rng);
    Tensor flow = random_flow({N, 2, H, W}, rng);
    return gradcheck([&] { return flow_warp(feat, flow); }, {feat, flow}, rng);
  });
  run("residual_block", 3, [&](Rng& rng) {
    ResidualBlock block = ResidualBlock::create(8, rng, DType::F64);
    ParameterList params;
    block.collect("block", params);
    randomize_parameters(params, rng, 0.15);
    Tensor x = random_tensor({1, 8, 6, 6}, rng);
    auto leaves = param_tensors(params);
    leaves.push_back(x);
    return gradcheck([&] { return residual_block_forward(x, block); }, leaves, rng);
  });
  run("charbonnier_loss", n, [&](Rng& rng) {
    const Shape s = random_shape(rng);
    std::vector<Tensor> y{random_tensor(s, rng), random_tensor(s, rng)};
    std::vector<Tensor> z{random_tensor(s, rng), random_tensor(s, rng)};
    std::vector<Tensor> leaves = y;
    leaves.insert(leaves.end(), z.begin(), z.end());
    return gradcheck([&] { return charbonnier_loss(y, z, 1e-8); }, leaves, rng);
  });
  run("pyramid_flow", 2, [&](Rng& rng) {
    PyramidFlowNet net = PyramidFlowNet::create(PyramidFlowConfig{}, rng, DType::F64);
    ParameterList params;
    net.collect("flow", params);
    randomize_parameters(params, rng, 0.1);
    Tensor a = random_tensor({1, 3, 8, 8}, rng, 0, 1), b = random_tensor({1, 3, 8, 8}, rng, 0, 1);
    auto leaves = param_tensors(params);
    leaves.push_back(a);
    leaves.push_back(b);
    return gradcheck([&] { return net.estimate(a, b); }, leaves, rng, 8);
  });

  struct ModelCase {
    std::string name;
    PropagationMode propagation;
    int segments;
    AlignmentMode alignment;
    bool refill;
    FlowSourceKind flow_source = FlowSourceKind::Network;
  };
  const ModelCase model_cases[] = {
      {"model/bidirectional+refill", PropagationMode::Bidirectional, 1, AlignmentMode::Feature, true},
      {"model/coupled+refill", PropagationMode::Coupled, 1, AlignmentMode::Feature, true},
      {"model/unidirectional+image", PropagationMode::Unidirectional, 1, AlignmentMode::Image, false},
      {"model/local2+none", PropagationMode::Local, 2, AlignmentMode::None, false},
      {"model/bidirectional+gt_flow", PropagationMode::Bidirectional, 1, AlignmentMode::Feature, false,
       FlowSourceKind::GroundTruth},
  };
  for (const auto& mc : model_cases) {
    run(mc.name, 2, [&](Rng& rng) {
      ModelConfig cfg;
      cfg.channels = 4;
      cfg.blocks_per_branch = 1;
      cfg.extractor_blocks = 1;
      cfg.propagation = mc.propagation;
      cfg.segments = mc.segments;
      cfg.alignment = mc.alignment;
      cfg.refill = mc.refill;
      cfg.keyframe_interval = 2;
      cfg.flow_source = mc.flow_source;
      cfg.dtype = DType::F64;
      cfg.seed = rng.next_u64();
      VsrModel model = VsrModel::create(cfg);
      randomize_parameters(model.parameters(), rng, 0.1);
      std::vector<Tensor> frames;
      for (int t = 0; t < 4; ++t) frames.push_back(random_tensor({1, 3, 4, 4}, rng, 0, 1));
      GroundTruthFlow gt;
      gt.offsets.emplace_back();
      for (int t = 0; t < 4; ++t) gt.offsets[0].push_back({0.4 * t + 0.3, -0.7 * t + 0.2});
      ForwardOptions opts;
      if (mc.flow_source == FlowSourceKind::GroundTruth) opts.ground_truth = &gt;
      auto leaves = param_tensors(model.parameters());
      leaves.insert(leaves.end(), frames.begin(), frames.end());
      return gradcheck([&] { return concat_channels(model.forward(frames, opts)); }, leaves, rng, 6);
    });
  }
  return cases;
}

Matrix reachability_matrix(const VsrModel& model, std::span<const Tensor> frames, Rng& rng, const ForwardOptions& options) {
  NoGradGuard guard;
  const auto base = model.forward(frames, options);
  const auto T = frames.size();
  Matrix d(T, std::vector<int>(T, 0));
  for (std::size_t j = 0; j < T; ++j) {
    std::vector<Tensor> perturbed(frames.begin(), frames.end());
    std::vector<double> noise(static_cast<std::size_t>(frames[j].numel()));
    for (auto& e : noise) e = rng.uniform(-0.1, 0.1);
    perturbed[j] = add(frames[j], Tensor::from_values(frames[j].shape(), noise, frames[j].dtype()));
    const auto out = model.forward(perturbed, options);
    for (std::size_t i = 0; i < T; ++i) d[i][j] = out[i].same_bits(base[i]) ? 0 : 1;
  }
  return d;
}

Matrix expected_reachability(const ModelConfig& config, int frames) {
  const auto T = static_cast<std::size_t>(frames);
  Matrix d(T, std::vector<int>(T, 0));
  switch (config.propagation) {
    case PropagationMode::Unidirectional:
      for (std::size_t i = 0; i < T; ++i)
        for (std::size_t j = 0; j <= i; ++j) d[i][j] = 1;
      break;
    case PropagationMode::Local:
      for (const auto& [start, len] : split_segments(frames, config.segments))
        for (int i = start; i < start + len; ++i)
          for (int j = start; j < start + len; ++j) d[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = 1;
      break;
    case PropagationMode::Bidirectional:
    case PropagationMode::Coupled:
      for (auto& row : d) std::fill(row.begin(), row.end(), 1);
      break;
  }
  return d;
}

std::string format_matrix(const Matrix& m) {
  std::ostringstream os;
  for (const auto& row : m) {
    for (std::size_t j = 0; j < row.size(); ++j) os << (j ? " " : "") << row[j];
    os << '\n';
  }
  return os.str();
}

std::vector<ReachabilityCase> run_reachability_suite(std::uint64_t seed, int frames) {
  Rng root(seed);
  std::vector<Tensor> x;
  {
    Rng rng = root.split(1);
    for (int t = 0; t < frames; ++t) x.push_back(random_tensor({1, 3, 8, 8}, rng, 0, 1).to(DType::F32));
  }
  struct Mode {
    std::string label;
    PropagationMode mode;
    int segments;
  };
  const Mode modes[] = {{"unidirectional", PropagationMode::Unidirectional, 1},
                        {"local(K=2)", PropagationMode::Local, 2},
                        {"local(K=3)", PropagationMode::Local, 3},
                        {"bidirectional", PropagationMode::Bidirectional, 1},
                        {"coupled", PropagationMode::Coupled, 1}};
  std::vector<ReachabilityCase> out;
  std::uint64_t stream = 100;
  for (const auto& m : modes) {
    ReachabilityCase c;
    c.label = m.label;
    c.config = ModelConfig::desk();
    c.config.blocks_per_branch = 2;
    c.config.propagation = m.mode;
    c.config.segments = m.segments;
    c.config.seed = seed;
    VsrModel model = VsrModel::create(c.config);
    Rng rng = root.split(++stream);
    randomize_parameters(model.parameters(), rng, 0.05);
    c.measured = reachability_matrix(model, x, rng);
    c.expected = expected_reachability(c.config, frames);
    for (const auto& p : model.parameters()) {
      if (p.name == "upsample.fuse.weight") c.head_channels = p.tensor.dim(1);
    }
    c.matches = c.measured == c.expected;
    out.push_back(std::move(c));
  }
  return out;
}

double alignment_output_difference(std::uint64_t seed) {
  SynthSpec spec;
  spec.seed = seed;
  spec.frames = 4;
  spec.motion = {Motion{4, 0}};
  const auto clip = synth_sequence(spec);
  const auto lr = degrade(clip.clean, DegradationSpec::bd());
  std::vector<Tensor> x;
  for (const auto& f : lr.frames) x.push_back(reshape(f, {1, 3, lr.height(), lr.width()}));
  GroundTruthFlow gt{{lr.offsets}};

  ModelConfig cfg = ModelConfig::desk();
  cfg.flow_source = FlowSourceKind::GroundTruth;
  cfg.seed = seed;
  const VsrModel feature = VsrModel::create(cfg);
  cfg.alignment = AlignmentMode::None;
  VsrModel none = VsrModel::create(cfg);
  copy_matching_parameters(feature, none);
  ForwardOptions opts;
  opts.ground_truth = &gt;
  const auto a = feature.infer(x, opts);
  const auto b = none.infer(x, opts);
  double diff = 0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    const auto va = a[t].to_vector(), vb = b[t].to_vector();
    for (std::size_t k = 0; k < va.size(); ++k) diff = std::max(diff, std::abs(va[k] - vb[k]));
  }
  return diff;
}

DegeneracyResult check_refill_degeneracy(std::uint64_t seed, int sequences) {
  Rng root(seed);
  DegeneracyResult result;
  for (int s = 0; s < sequences; ++s) {
    Rng rng = root.split(static_cast<std::uint64_t>(s));
    ModelConfig cfg = ModelConfig::desk();
    cfg.propagation = s % 2 ? PropagationMode::Coupled : PropagationMode::Bidirectional;
    cfg.refill = true;
    cfg.seed = rng.next_u64();
    VsrModel icon = VsrModel::create(cfg);
    randomize_parameters(icon.parameters(), rng, 0.05);
    cfg.refill = false;
    VsrModel plain = VsrModel::create(cfg);
    copy_matching_parameters(icon, plain);

    const int T = 3 + static_cast<int>(rng.below(6));
    std::vector<Tensor> x;
    for (int t = 0; t < T; ++t) x.push_back(random_tensor({1, 3, 8, 8}, rng, 0, 1).to(DType::F32));
    ForwardOptions empty;
    empty.keyframes = std::vector<int>{};
    const auto a = icon.infer(x, empty);
    const auto b = plain.infer(x);
    bool same = true;
    for (int t = 0; t < T; ++t) same = same && a[static_cast<std::size_t>(t)].same_bits(b[static_cast<std::size_t>(t)]);
    ++result.sequences;
    if (same) ++result.bit_identical;
  }
  return result;
}

KeyframeTiming time_keyframes(const ModelConfig& base, int frames, int lr_size, int reps, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Tensor> x;
  for (int t = 0; t < frames; ++t) x.push_back(random_tensor({1, 3, lr_size, lr_size}, rng, 0, 1).to(base.dtype));
  ModelConfig cfg = base;
  cfg.refill = true;
  const VsrModel icon = VsrModel::create(cfg);
  cfg.refill = false;
  const VsrModel plain = VsrModel::create(cfg);

  auto best = [&](const std::function<void()>& body) {
    double t = std::numeric_limits<double>::infinity();
    for (int r = 0; r < reps; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      body();
      t = std::min(t, seconds_since(t0));
    }
    return t;
  };
  ForwardOptions every, fifth;
  every.keyframes = keyframes_by_interval(frames, 1);
  fifth.keyframes = keyframes_by_interval(frames, 5);
  KeyframeTiming out;
  out.frames = frames;
  out.no_refill = best([&] { plain.infer(x); });
  out.interval5 = best([&] { icon.infer(x, fifth); });
  out.interval1 = best([&] { icon.infer(x, every); });
  return out;
}

std::int64_t conv_parameters(int in, int out, int k) {
  return static_cast<std::int64_t>(out) * in * k * k + out;
}

std::int64_t residual_block_parameters(int channels) { return 2 * conv_parameters(channels, channels, 3); }

std::int64_t upsampler_parameters(int channels, bool reads_backward) {
  const int C = channels;
  return conv_parameters(reads_backward ? 2 * C : C, C, 3) + 2 * conv_parameters(C, 4 * C, 3) + conv_parameters(C, 3, 3);
}

std::vector<ParameterReport> parameter_reports(const ModelConfig& preset, const std::string& name) {
  std::vector<ParameterReport> out;
  ModelConfig basic = preset;
  basic.propagation = PropagationMode::Bidirectional;
  basic.refill = false;
  ModelConfig icon = preset;
  icon.propagation = PropagationMode::Coupled;
  icon.refill = true;
  for (const auto& [label, cfg] : {std::pair{name + " basic", basic}, std::pair{name + " refill+coupled", icon}}) {
    ParameterReport r;
    r.preset = label;
    r.counts = VsrModel::create(cfg).parameter_counts();
    r.residual_block = residual_block_parameters(cfg.channels);
    r.upsampler = upsampler_parameters(cfg.channels, cfg.head_reads_backward());
    out.push_back(r);
  }
  return out;
}

std::string format_parameter_table(const std::vector<ParameterReport>& reports) {
  std::ostringstream os;
  os << "preset,flow,main,extractor,total,residual_block,upsampler\n";
  for (const auto& r : reports) {
    os << r.preset << ',' << r.counts.flow << ',' << r.counts.main << ',' << r.counts.extractor << ','
       << r.counts.total() << ',' << r.residual_block << ',' << r.upsampler << '\n';
  }
  return os.str();
}

}  // namespace vsr
