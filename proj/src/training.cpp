#include "vsr/training.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "vsr/config.hpp"
#include "vsr/ops.hpp"

namespace vsr {

namespace {

double parse_double(const std::string& key, const std::string& text) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects a number, got '" + text + "'");
  }
}

int parse_int(const std::string& key, const std::string& text) {
  const double v = parse_double(key, text);
  if (v != std::floor(v)) throw ConfigError("config key '" + key + "' expects an integer, got '" + text + "'");
  return static_cast<int>(v);
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

Tensor crop(const Tensor& frame, std::int64_t y, std::int64_t x, std::int64_t size) {
  return slice(slice(frame, 1, y, size), 2, x, size);
}

Tensor stack_batch(const std::vector<Tensor>& items, DType dtype) {
  const auto& s = items[0].shape();
  const std::int64_t per = items[0].numel();
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(per * static_cast<std::int64_t>(items.size())));
  for (const auto& t : items) {
    auto d = t.to_vector();
    v.insert(v.end(), d.begin(), d.end());
  }
  return Tensor::from_values({static_cast<std::int64_t>(items.size()), s[0], s[1], s[2]}, v, dtype);
}

double grad_norm(const ParameterList& params) {
  double acc = 0;
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad().to_vector()) acc += g * g;
  }
  return std::sqrt(acc);
}

}  // namespace

TrainConfig TrainConfig::paper_scale() {
  TrainConfig c;
  c.total_iters = 300000;
  c.freeze_iters = 5000;
  c.batch = 8;
  c.patch = 64;
  c.seq_len = 15;
  return c;
}

void TrainConfig::validate() const {
  if (total_iters < 1) throw ConfigError("total_iters must be >= 1");
  if (freeze_iters < 0 || freeze_iters >= total_iters) throw ConfigError("freeze_iters must lie in [0, total_iters)");
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (patch < 4 || patch % 4 != 0) throw ConfigError("patch must be a positive multiple of 4");
  if (seq_len < 1) throw ConfigError("seq_len must be >= 1");
  if (!(epsilon > 0)) throw ConfigError("epsilon must be positive");
  if (lr_main < 0 || lr_flow < 0 || lr_extractor < 0) throw ConfigError("learning rates must be non-negative");
  if (checkpoint_interval < 0) throw ConfigError("checkpoint_interval must be >= 0");
}

std::map<std::string, std::string> TrainConfig::to_map() const {
  return {{"total_iters", std::to_string(total_iters)},
          {"lr_main", fmt(lr_main)},
          {"lr_flow", fmt(lr_flow)},
          {"lr_extractor", fmt(lr_extractor)},
          {"freeze_iters", std::to_string(freeze_iters)},
          {"batch", std::to_string(batch)},
          {"patch", std::to_string(patch)},
          {"seq_len", std::to_string(seq_len)},
          {"temporal_flip", temporal_flip ? "true" : "false"},
          {"epsilon", fmt(epsilon)},
          {"seed", std::to_string(seed)},
          {"checkpoint_interval", std::to_string(checkpoint_interval)}};
}

TrainConfig TrainConfig::from_map(const std::map<std::string, std::string>& values) {
  TrainConfig c;
  for (const auto& [key, text] : values) {
    if (key == "total_iters") c.total_iters = parse_int(key, text);
    else if (key == "lr_main") c.lr_main = parse_double(key, text);
    else if (key == "lr_flow") c.lr_flow = parse_double(key, text);
    else if (key == "lr_extractor") c.lr_extractor = parse_double(key, text);
    else if (key == "freeze_iters") c.freeze_iters = parse_int(key, text);
    else if (key == "batch") c.batch = parse_int(key, text);
    else if (key == "patch") c.patch = parse_int(key, text);
    else if (key == "seq_len") c.seq_len = parse_int(key, text);
    else if (key == "temporal_flip") {
      if (text != "true" && text != "false") throw ConfigError("config key 'temporal_flip' expects true or false");
      c.temporal_flip = text == "true";
    } else if (key == "epsilon") c.epsilon = parse_double(key, text);
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_double(key, text));
    else if (key == "checkpoint_interval") c.checkpoint_interval = parse_int(key, text);
    else throw ConfigError("unknown train config key '" + key + "'");
  }
  c.validate();
  return c;
}

Tensor charbonnier_loss(const Tensor& y, const Tensor& z, double epsilon) {
  return charbonnier_loss(std::span<const Tensor>(&y, 1), std::span<const Tensor>(&z, 1), epsilon);
}

Tensor charbonnier_loss(std::span<const Tensor> y, std::span<const Tensor> z, double epsilon) {
  if (y.size() != z.size() || y.empty()) {
    throw ShapeError("charbonnier_loss: " + std::to_string(y.size()) + " outputs vs " + std::to_string(z.size()) + " targets");
  }
  std::int64_t count = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i].shape() != z[i].shape()) {
      throw ShapeError("charbonnier_loss: shape mismatch " + shape_str(y[i].shape()) + " vs " + shape_str(z[i].shape()));
    }
    if (y[i].dtype() != y[0].dtype() || z[i].dtype() != y[0].dtype()) throw Error("charbonnier_loss: dtype mismatch");
    count += y[i].numel();
  }
  return dispatch(y[0].dtype(), [&]<typename T>() {
    const T eps2 = static_cast<T>(epsilon * epsilon);
    double acc = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      auto a = y[i].data<T>();
      auto b = z[i].data<T>();
      for (std::size_t k = 0; k < a.size(); ++k) {
        const T d = a[k] - b[k];
        acc += static_cast<double>(std::sqrt(d * d + eps2));
      }
    }
    auto out = Tensor::from_data({1}, std::vector<T>{static_cast<T>(acc / static_cast<double>(count))});
    std::vector<Tensor> inputs(y.begin(), y.end());
    inputs.insert(inputs.end(), z.begin(), z.end());
    const std::size_t frames = y.size();
    record(out, "charbonnier_loss", inputs, [inputs, frames, eps2, count](const Tensor& g) {
      const T scale = g.data<T>()[0] / static_cast<T>(count);
      for (std::size_t i = 0; i < frames; ++i) {
        const Tensor& yi = inputs[i];
        const Tensor& zi = inputs[frames + i];
        if (!wants_grad(yi) && !wants_grad(zi)) continue;
        auto a = yi.data<T>();
        auto b = zi.data<T>();
        Tensor yt = yi, zt = zi;
        std::span<T> dy, dz;
        if (wants_grad(yi)) dy = yt.mutable_grad<T>();
        if (wants_grad(zi)) dz = zt.mutable_grad<T>();
        for (std::size_t k = 0; k < a.size(); ++k) {
          const T d = a[k] - b[k];
          const T gk = scale * d / std::sqrt(d * d + eps2);
          if (!dy.empty()) dy[k] += gk;
          if (!dz.empty()) dz[k] -= gk;
        }
      }
    });
    return out;
  });
}

double cosine_lr(double base_lr, long t, long total) {
  if (total <= 0) throw ConfigError("cosine_lr: total must be positive");
  if (t < 0 || t > total) {
    throw ConfigError("cosine_lr: step " + std::to_string(t) + " outside [0, " + std::to_string(total) + "]");
  }
  if (t == total) return 0.0;
  const double lr = base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(t) / static_cast<double>(total)));
  return std::max(lr, 0.0);
}

Adam::Adam(std::vector<ParamGroup> groups, AdamOptions options) : groups_(std::move(groups)), options_(options) {
  for (const auto& g : groups_) {
    steps_.push_back(0);
    std::vector<Tensor> m, v;
    for (const auto& p : g.params) {
      m.push_back(Tensor::zeros(p.tensor.shape(), p.tensor.dtype()));
      v.push_back(Tensor::zeros(p.tensor.shape(), p.tensor.dtype()));
    }
    m_.push_back(std::move(m));
    v_.push_back(std::move(v));
  }
}

void Adam::zero_grad() {
  for (auto& g : groups_) {
    for (auto& p : g.params) p.tensor.zero_grad();
  }
}

void Adam::step(std::span<const double> lrs, std::span<const bool> frozen) {
  if (lrs.size() != groups_.size()) throw Error("Adam::step: expected one learning rate per group");
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    if (gi < frozen.size() && frozen[gi]) continue;
    auto& group = groups_[gi];
    for (const auto& p : group.params) {
      if (!p.tensor.has_grad()) throw Error("Adam::step: missing gradient for parameter '" + p.name + "'");
    }
    const long t = ++steps_[gi];
    const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t));
    for (std::size_t pi = 0; pi < group.params.size(); ++pi) {
      Tensor param = group.params[pi].tensor;
      dispatch(param.dtype(), [&]<typename T>() {
        auto w = param.data<T>();
        auto g = param.mutable_grad<T>();
        auto m = m_[gi][pi].data<T>();
        auto v = v_[gi][pi].data<T>();
        const T b1 = static_cast<T>(options_.beta1), b2 = static_cast<T>(options_.beta2);
        const T lr = static_cast<T>(lrs[gi]), eps = static_cast<T>(options_.eps);
        const T c1 = static_cast<T>(bc1), c2 = static_cast<T>(bc2);
        for (std::size_t k = 0; k < w.size(); ++k) {
          m[k] = b1 * m[k] + (1 - b1) * g[k];
          v[k] = b2 * v[k] + (1 - b2) * g[k] * g[k];
          const T mhat = m[k] / c1, vhat = v[k] / c2;
          w[k] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
      });
    }
  }
}

NamedTensors Adam::state() const {
  NamedTensors out;
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    out.emplace_back("adam." + groups_[gi].name + ".step", Tensor::scalar(static_cast<double>(steps_[gi]), DType::F64));
    for (std::size_t pi = 0; pi < groups_[gi].params.size(); ++pi) {
      const auto& name = groups_[gi].params[pi].name;
      out.emplace_back("adam.m." + name, m_[gi][pi].detach());
      out.emplace_back("adam.v." + name, v_[gi][pi].detach());
    }
  }
  return out;
}

void Adam::load_state(const NamedTensors& state) {
  std::map<std::string, const Tensor*> lookup;
  for (const auto& [name, t] : state) lookup[name] = &t;
  auto fetch = [&](const std::string& name) -> const Tensor& {
    auto it = lookup.find(name);
    if (it == lookup.end()) throw ConfigError("optimizer state is missing '" + name + "'");
    return *it->second;
  };
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    steps_[gi] = static_cast<long>(fetch("adam." + groups_[gi].name + ".step").item());
    for (std::size_t pi = 0; pi < groups_[gi].params.size(); ++pi) {
      const auto& name = groups_[gi].params[pi].name;
      const Tensor& m = fetch("adam.m." + name);
      const Tensor& v = fetch("adam.v." + name);
      if (m.shape() != m_[gi][pi].shape() || v.shape() != v_[gi][pi].shape()) {
        throw ConfigError("optimizer state for '" + name + "' has the wrong shape");
      }
      m_[gi][pi] = m.to(m_[gi][pi].dtype());
      v_[gi][pi] = v.to(v_[gi][pi].dtype());
    }
  }
}

Batch sample_batch(const Dataset& data, const TrainConfig& config, Rng& rng, DType dtype) {
  if (data.empty()) throw Error("sample_batch: empty dataset");
  const int need = config.temporal_flip ? (config.seq_len + 1) / 2 : config.seq_len;
  const std::int64_t p = config.patch;
  Batch batch;
  std::vector<std::vector<Tensor>> lr_items(static_cast<std::size_t>(config.seq_len)),
      hr_items(static_cast<std::size_t>(config.seq_len));
  bool with_motion = true;
  for (int n = 0; n < config.batch; ++n) {
    const auto s = static_cast<std::size_t>(rng.below(data.size()));
    const auto& pair = data[s];
    const int available = pair.lr.length();
    if (available < need) {
      throw Error("sample_batch: sequence " + std::to_string(s) + " has " + std::to_string(available) +
                  " frames, need " + std::to_string(need));
    }
    if (pair.hr.length() != available) throw ShapeError("sample_batch: LR/HR frame counts differ");
    const std::int64_t h = pair.lr.height(), w = pair.lr.width();
    if (p > h || p > w) {
      throw ShapeError("sample_batch: patch " + std::to_string(p) + " exceeds LR extents " + std::to_string(h) + "x" +
                       std::to_string(w));
    }
    if (pair.hr.height() != 4 * h || pair.hr.width() != 4 * w) throw ShapeError("sample_batch: HR extents are not 4x LR");
    const int start = static_cast<int>(rng.below(static_cast<std::uint64_t>(available - need + 1)));
    const auto oy = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(h - p + 1)));
    const auto ox = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(w - p + 1)));
    std::vector<int> order;
    for (int k = 0; k < need; ++k) order.push_back(start + k);
    if (config.temporal_flip) {
      for (int k = need - 1; k >= 0; --k) order.push_back(start + k);
    }
    order.resize(static_cast<std::size_t>(config.seq_len));
    std::vector<std::array<double, 2>> offsets;
    for (std::size_t t = 0; t < order.size(); ++t) {
      const auto idx = static_cast<std::size_t>(order[t]);
      lr_items[t].push_back(crop(pair.lr.frames[idx], oy, ox, p));
      hr_items[t].push_back(crop(pair.hr.frames[idx], 4 * oy, 4 * ox, 4 * p));
      if (pair.lr.has_motion()) offsets.push_back(pair.lr.offsets[idx]);
    }
    with_motion = with_motion && pair.lr.has_motion();
    batch.motion.offsets.push_back(std::move(offsets));
    batch.origin.push_back({static_cast<int>(s), start, static_cast<int>(oy), static_cast<int>(ox)});
  }
  if (!with_motion) batch.motion.offsets.clear();
  for (std::size_t t = 0; t < lr_items.size(); ++t) {
    batch.lr.push_back(stack_batch(lr_items[t], dtype));
    batch.hr.push_back(stack_batch(hr_items[t], dtype));
  }
  return batch;
}

std::vector<ParamGroup> make_param_groups(const VsrModel& model) {
  return {{"main", model.parameters(ParamGroupKind::Main)},
          {"flow", model.parameters(ParamGroupKind::Flow)},
          {"extractor", model.parameters(ParamGroupKind::Extractor)}};
}

void save_model(const VsrModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  NamedTensors named;
  for (const auto& p : model.parameters()) named.emplace_back(p.name, p.tensor);
  save_checkpoint(dir / "model.vsrc", named);
  write_config(dir / "model.cfg", {{"model", model.config().to_map()}});
}

VsrModel load_model(const std::filesystem::path& dir) {
  const auto cfg = read_config(dir / "model.cfg");
  require_sections(cfg, {"model"});
  auto it = cfg.find("model");
  if (it == cfg.end()) throw ConfigError((dir / "model.cfg").string() + " has no [model] section");
  VsrModel model = VsrModel::create(ModelConfig::from_map(it->second));
  const auto named = load_checkpoint(dir / "model.vsrc");
  if (named.size() != model.parameters().size()) {
    throw ConfigError("checkpoint holds " + std::to_string(named.size()) + " tensors, config implies " +
                      std::to_string(model.parameters().size()));
  }
  model.load_parameters(named);
  return model;
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<LogRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "iter,loss,lr_main,lr_flow,lr_extractor\n";
  out << std::setprecision(9);
  for (const auto& r : rows) {
    out << r.iter << ',' << r.loss << ',' << r.lr_main << ',' << r.lr_flow << ',' << r.lr_extractor << '\n';
  }
}

namespace {

void save_training_state(const std::filesystem::path& dir, const VsrModel& model, const Adam& adam, int next_iter,
                         const std::vector<LogRow>& log, const TrainConfig& config) {
  save_model(model, dir);
  NamedTensors state = adam.state();
  state.emplace_back("train.iter", Tensor::scalar(next_iter, DType::F64));
  if (!log.empty()) {
    std::vector<double> rows;
    for (const auto& r : log) rows.insert(rows.end(), {double(r.iter), r.loss, r.lr_main, r.lr_flow, r.lr_extractor});
    state.emplace_back("train.log", Tensor::from_data({static_cast<std::int64_t>(log.size()), 5}, std::move(rows)));
  }
  save_checkpoint(dir / "train_state.vsrc", state);
  write_config(dir / "train.cfg", {{"train", config.to_map()}});
}

}  // namespace

TrainResult train(VsrModel& model, const Dataset& data, const TrainConfig& config, const TrainOptions& options) {
  config.validate();
  Adam adam(make_param_groups(model));
  TrainResult result;
  int start = 0;
  if (!options.resume_from.empty()) {
    const VsrModel saved = load_model(options.resume_from);
    NamedTensors named;
    for (const auto& p : saved.parameters()) named.emplace_back(p.name, p.tensor);
    model.load_parameters(named);
    const auto state = load_checkpoint(options.resume_from / "train_state.vsrc");
    adam.load_state(state);
    for (const auto& [name, t] : state) {
      if (name == "train.iter") start = static_cast<int>(t.item());
      if (name == "train.log") {
        const auto v = t.to_vector();
        for (std::size_t r = 0; r + 4 < v.size(); r += 5) {
          result.log.push_back({static_cast<int>(v[r]), v[r + 1], v[r + 2], v[r + 3], v[r + 4]});
        }
      }
    }
  }
  const int end = options.stop_at >= 0 ? std::min(options.stop_at, config.total_iters) : config.total_iters;
  const Rng root = Rng(config.seed).split(0x7472);
  const DType dtype = model.config().dtype;
  const auto total = static_cast<long>(config.total_iters);

  for (int it = start; it < end; ++it) {
    Rng rng = root.split(static_cast<std::uint64_t>(it));
    const Batch batch = sample_batch(data, config, rng, dtype);
    const double lrs[3] = {cosine_lr(config.lr_main, it, total), cosine_lr(config.lr_flow, it, total),
                           cosine_lr(config.lr_extractor, it, total)};
    adam.zero_grad();
    ForwardOptions fwd;
    if (!batch.motion.empty()) fwd.ground_truth = &batch.motion;
    const auto y = model.forward(batch.lr, fwd);
    const Tensor loss = charbonnier_loss(y, batch.hr, config.epsilon);
    const double value = loss.item();
    loss.backward();
    if (!std::isfinite(value)) {
      std::ostringstream msg;
      msg << "non-finite loss at iteration " << it << " (lr_main=" << lrs[0] << ", lr_flow=" << lrs[1]
          << ", lr_extractor=" << lrs[2] << "; grad norms main=" << grad_norm(adam.groups()[0].params)
          << " flow=" << grad_norm(adam.groups()[1].params) << " extractor=" << grad_norm(adam.groups()[2].params) << ")";
      throw TrainingDiverged(msg.str());
    }
    const bool frozen[3] = {false, it < config.freeze_iters, it < config.freeze_iters};
    adam.step(lrs, frozen);
    const LogRow row{it, value, lrs[0], lrs[1], lrs[2]};
    result.log.push_back(row);
    if (options.on_step) options.on_step(row);
    if (!options.output_dir.empty() && config.checkpoint_interval > 0 && (it + 1) % config.checkpoint_interval == 0) {
      save_training_state(options.output_dir / ("checkpoint_" + std::to_string(it + 1)), model, adam, it + 1, result.log,
                          config);
    }
  }
  result.completed_iters = end;
  if (!options.output_dir.empty()) {
    std::filesystem::create_directories(options.output_dir);
    save_training_state(options.output_dir / "final", model, adam, end, result.log, config);
    write_loss_csv(options.output_dir / "loss.csv", result.log);
  }
  return result;
}

}  // namespace vsr
