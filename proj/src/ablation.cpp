#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <set>
#include <tuple>
#include <sstream>

#include "vsr/experiments.hpp"
#include "vsr/ops.hpp"

namespace vsr {

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

int to_int(const std::string& key, const std::string& text) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects an integer, got '" + text + "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& text) {
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' expects a non-negative integer, got '" + text + "'");
  }
}

bool to_bool(const std::string& key, const std::string& text) {
  if (text == "true") return true;
  if (text == "false") return false;
  throw ConfigError("config key '" + key + "' expects true or false, got '" + text + "'");
}

std::vector<Tensor> batch_frames(const VideoSequence& seq) {
  std::vector<Tensor> out;
  for (const auto& f : seq.frames) out.push_back(reshape(f, {1, 3, seq.height(), seq.width()}));
  return out;
}

std::string model_label(const ModelConfig& c, std::uint64_t seed) {
  std::ostringstream os;
  os << to_string(c.propagation) << '-' << to_string(c.alignment) << "-c" << c.channels << "-b" << c.blocks_per_branch
     << (c.refill ? "-refill" : "") << "-seed" << seed;
  return os.str();
}

// What to train and how to evaluate one sweep value.
struct CellPlan {
  ModelConfig train;
  ModelConfig eval;
  std::optional<int> keyframe_count;
};

CellPlan plan_cell(const ExperimentSpec& spec, const std::string& value) {
  CellPlan plan{spec.model, spec.model, std::nullopt};
  switch (spec.study) {
    case Study::Segments: {
      const int k = to_int("values", value);
      if (k < 1) throw ConfigError("segment count must be >= 1, got " + value);
      plan.train.propagation = PropagationMode::Bidirectional;
      plan.eval = plan.train;
      plan.eval.propagation = PropagationMode::Local;
      plan.eval.segments = k;
      break;
    }
    case Study::Propagation:
      plan.train.propagation = parse_propagation(value);
      plan.train.refill = plan.train.refill && plan.train.propagation != PropagationMode::Unidirectional;
      if (plan.train.propagation == PropagationMode::Unidirectional) {
        plan.train.blocks_per_branch = matched_unidirectional_blocks(spec.model);
      }
      plan.eval = plan.train;
      break;
    case Study::Alignment:
      plan.train.alignment = parse_alignment(value);
      plan.eval = plan.train;
      break;
    case Study::Keyframes: {
      const int n = to_int("values", value);
      if (n < 0) throw ConfigError("keyframe count must be >= 0, got " + value);
      plan.train.refill = true;
      if (plan.train.propagation == PropagationMode::Unidirectional) plan.train.propagation = PropagationMode::Bidirectional;
      plan.eval = plan.train;
      plan.keyframe_count = n;
      break;
    }
  }
  plan.train.validate();
  plan.eval.validate();
  return plan;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

std::string to_string(Study study) {
  switch (study) {
    case Study::Segments: return "segments";
    case Study::Propagation: return "propagation";
    case Study::Alignment: return "alignment";
    case Study::Keyframes: return "keyframes";
  }
  return "?";
}

Study parse_study(const std::string& text) {
  if (text == "segments") return Study::Segments;
  if (text == "propagation") return Study::Propagation;
  if (text == "alignment") return Study::Alignment;
  if (text == "keyframes") return Study::Keyframes;
  throw ConfigError("unknown study '" + text + "' (expected segments, propagation, alignment or keyframes)");
}

std::map<std::string, std::string> AblationData::to_map() const {
  return {{"train_clips", std::to_string(train_clips)}, {"train_frames", std::to_string(train_frames)},
          {"test_clips", std::to_string(test_clips)},   {"test_frames", std::to_string(test_frames)},
          {"height", std::to_string(height)},           {"width", std::to_string(width)},
          {"max_motion", std::to_string(max_motion)},   {"max_frequency", fmt(max_frequency)},
          {"occlusion", occlusion ? "true" : "false"}, {"train_occluders", std::to_string(train_occluders)},
          {"degradation", to_string(degradation)}};
}

AblationData AblationData::from_map(const std::map<std::string, std::string>& values) {
  AblationData d;
  for (const auto& [key, text] : values) {
    if (key == "train_clips") d.train_clips = to_int(key, text);
    else if (key == "train_frames") d.train_frames = to_int(key, text);
    else if (key == "test_clips") d.test_clips = to_int(key, text);
    else if (key == "test_frames") d.test_frames = to_int(key, text);
    else if (key == "height") d.height = to_int(key, text);
    else if (key == "width") d.width = to_int(key, text);
    else if (key == "max_motion") d.max_motion = to_int(key, text);
    else if (key == "max_frequency") {
      try {
        d.max_frequency = std::stod(text);
      } catch (const std::exception&) {
        throw ConfigError("config key 'max_frequency' expects a number, got '" + text + "'");
      }
    } else if (key == "occlusion") d.occlusion = to_bool(key, text);
    else if (key == "train_occluders") d.train_occluders = to_int(key, text);
    else if (key == "degradation") d.degradation = parse_degradation(text);
    else throw ConfigError("unknown data config key '" + key + "'");
  }
  if (d.train_clips < 1 || d.test_clips < 1 || d.train_frames < 1 || d.test_frames < 1) {
    throw ConfigError("data section needs at least one clip and one frame per split");
  }
  if (d.height % 4 || d.width % 4 || d.height < 4 || d.width < 4) throw ConfigError("data extents must be positive multiples of 4");
  if (d.train_occluders < 0) throw ConfigError("train_occluders must be >= 0");
  if (d.max_motion < 0 || d.max_motion > 4) throw ConfigError("max_motion must lie in [0, 4]");
  return d;
}

void ExperimentSpec::validate() const {
  if (values.empty()) throw ConfigError("experiment has no sweep values");
  if (seeds.empty()) throw ConfigError("experiment has no seeds");
  model.validate();
  train.validate();
  for (const auto& v : values) plan_cell(*this, v);
  if (train.patch > data.height / 4 || train.patch > data.width / 4) {
    throw ConfigError("training patch " + std::to_string(train.patch) + " exceeds the LR extents of the data");
  }
}

ExperimentSpec ExperimentSpec::from_config(const ConfigFile& file) {
  require_sections(file, {"experiment", "model", "train", "data"});
  auto section = [&](const std::string& name) {
    auto it = file.find(name);
    return it == file.end() ? ConfigSection{} : it->second;
  };
  ExperimentSpec spec;
  bool have_study = false;
  for (const auto& [key, text] : section("experiment")) {
    if (key == "name") spec.name = text;
    else if (key == "study") {
      spec.study = parse_study(text);
      have_study = true;
    } else if (key == "values") spec.values = split_list(text);
    else if (key == "seeds") {
      spec.seeds.clear();
      for (const auto& s : split_list(text)) spec.seeds.push_back(to_u64(key, s));
    } else if (key == "output") spec.output_dir = text;
    else if (key == "reuse_checkpoints") spec.reuse_checkpoints = to_bool(key, text);
    else throw ConfigError("unknown experiment config key '" + key + "'");
  }
  if (!have_study) throw ConfigError("experiment section needs a 'study' key");
  // Sections left out fall back to the study's desk defaults.
  const ExperimentSpec defaults = desk(spec.study);
  if (spec.values.empty()) spec.values = defaults.values;
  spec.model = file.count("model") ? ModelConfig::from_map(section("model")) : defaults.model;
  spec.train = file.count("train") ? TrainConfig::from_map(section("train")) : defaults.train;
  spec.data = file.count("data") ? AblationData::from_map(section("data")) : defaults.data;
  spec.validate();
  return spec;
}

ConfigFile ExperimentSpec::to_config() const {
  std::vector<std::string> seed_text;
  for (auto s : seeds) seed_text.push_back(std::to_string(s));
  ConfigFile file;
  file["experiment"] = {{"name", name},
                        {"study", to_string(study)},
                        {"values", join(values)},
                        {"seeds", join(seed_text)},
                        {"output", output_dir.string()},
                        {"reuse_checkpoints", reuse_checkpoints ? "true" : "false"}};
  file["model"] = model.to_map();
  file["train"] = train.to_map();
  file["data"] = data.to_map();
  return file;
}

ExperimentSpec ExperimentSpec::desk(Study study) {
  ExperimentSpec spec;
  spec.name = to_string(study);
  spec.study = study;
  spec.seeds = {0, 1, 2};
  spec.model = ModelConfig::desk();
  spec.model.flow_source = FlowSourceKind::GroundTruth;
  spec.train = TrainConfig::desk();
  spec.train.total_iters = 2000;
  spec.train.freeze_iters = 100;
  spec.train.patch = 8;
  spec.train.lr_main = 1e-3;
  spec.train.lr_extractor = 5e-4;
  switch (study) {
    case Study::Segments: spec.values = {"1", "2", "4"}; break;
    case Study::Propagation: spec.values = {"bidirectional", "unidirectional"}; break;
    case Study::Alignment: spec.values = {"feature", "none"}; break;
    case Study::Keyframes:
      spec.values = {"0", "2", "5", "10"};
      spec.data.test_frames = 100;
      spec.data.test_clips = 1;
      break;
  }
  return spec;
}

bool AblationResult::all_ok() const {
  return std::all_of(cells.begin(), cells.end(), [](const AblationCell& c) { return c.ok; });
}

std::vector<SyntheticClip> make_clips(const AblationData& data, std::uint64_t seed, bool test, int frames) {
  Rng split = Rng(seed).split(test ? 2 : 1);
  const int count = test ? data.test_clips : data.train_clips;
  std::vector<SyntheticClip> clips;
  for (int c = 0; c < count; ++c) {
    Rng rng = split.split(static_cast<std::uint64_t>(c));
    SynthSpec s;
    s.seed = rng.next_u64();
    s.frames = frames;
    s.height = data.height;
    s.width = data.width;
    s.max_frequency = data.max_frequency;
    const auto span = static_cast<std::uint64_t>(2 * data.max_motion + 1);
    const double u = static_cast<double>(static_cast<int>(rng.below(span)) - data.max_motion);
    const double v = static_cast<double>(static_cast<int>(rng.below(span)) - data.max_motion);
    s.motion = {Motion{u, v}};
    if (data.occlusion && test) {
      // Centered block over the first quarter of the clip.
      const int last = std::max(1, frames / 4);
      for (int t = 0; t < last; ++t)
        s.occluders.push_back({t, data.width / 4, data.height / 4, data.width / 2, data.height / 2, 0.5});
    } else if (data.occlusion) {
      for (int e = 0; e < data.train_occluders; ++e) {
        const int first = static_cast<int>(rng.below(static_cast<std::uint64_t>(frames)));
        const int last = std::min(frames, first + 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, frames / 2)))));
        const int ow = data.width / 4 + static_cast<int>(rng.below(static_cast<std::uint64_t>(data.width / 4 + 1)));
        const int oh = data.height / 4 + static_cast<int>(rng.below(static_cast<std::uint64_t>(data.height / 4 + 1)));
        const int ox = static_cast<int>(rng.below(static_cast<std::uint64_t>(data.width - ow + 1)));
        const int oy = static_cast<int>(rng.below(static_cast<std::uint64_t>(data.height - oh + 1)));
        for (int t = first; t < last; ++t) s.occluders.push_back({t, ox, oy, ow, oh, 0.5});
      }
    }
    clips.push_back(synth_sequence(s));
  }
  return clips;
}

int matched_unidirectional_blocks(const ModelConfig& reference) {
  ModelConfig ref = reference;
  ref.propagation = PropagationMode::Bidirectional;
  ref.refill = false;
  const auto target = static_cast<double>(VsrModel::create(ref).parameter_counts().main);
  int best = 1;
  double best_gap = 1e300;
  for (int b = 1; b <= 4 * std::max(1, reference.blocks_per_branch) + 4; ++b) {
    ModelConfig uni = ref;
    uni.propagation = PropagationMode::Unidirectional;
    uni.blocks_per_branch = b;
    const double gap = std::abs(static_cast<double>(VsrModel::create(uni).parameter_counts().main) - target);
    if (gap < best_gap) {
      best_gap = gap;
      best = b;
    }
  }
  return best;
}

AblationResult run_ablation(const ExperimentSpec& spec, const ProgressFn& progress) {
  spec.validate();
  auto note = [&](const std::string& msg) {
    if (progress) progress(msg);
  };
  const bool write = !spec.output_dir.empty();
  if (write) std::filesystem::create_directories(spec.output_dir / "models");
  AblationResult result;
  std::map<std::string, VsrModel> trained;

  for (const auto seed : spec.seeds) {
    Dataset dataset;
    for (const auto& clip : make_clips(spec.data, seed, false, spec.data.train_frames)) {
      const DegradationSpec deg = spec.data.degradation == DegradationKind::BD ? DegradationSpec::bd() : DegradationSpec::bi();
      dataset.push_back({degrade(clip.observed, deg), clip.clean});
    }
    const auto test = make_clips(spec.data, seed, true, spec.data.test_frames);

    for (const auto& value : spec.values) {
      AblationCell cell{value, seed, false, {}};
      try {
        const CellPlan plan = plan_cell(spec, value);
        ModelConfig train_cfg = plan.train;
        train_cfg.seed = seed;
        const std::string label = model_label(train_cfg, seed);
        auto it = trained.find(label);
        if (it == trained.end()) {
          const auto dir = spec.output_dir / "models" / label;
          std::optional<VsrModel> model;
          TrainConfig tc = spec.train;
          tc.seed = seed;
          const ConfigFile recipe{{"train", tc.to_map()}, {"data", spec.data.to_map()}};
          if (write && spec.reuse_checkpoints && std::filesystem::exists(dir / "recipe.cfg")) {
            VsrModel loaded = load_model(dir);
            if (loaded.config().to_map() == train_cfg.to_map() && read_config(dir / "recipe.cfg") == recipe) {
              note("reusing " + label);
              model = std::move(loaded);
            }
          }
          if (!model) {
            note("training " + label);
            model = VsrModel::create(train_cfg);
            train(*model, dataset, tc);
            if (write) {
              save_model(*model, dir);
              write_config(dir / "recipe.cfg", recipe);
            }
          }
          it = trained.emplace(label, std::move(*model)).first;
        }
        ModelConfig eval_cfg = plan.eval;
        eval_cfg.seed = seed;
        VsrModel eval = VsrModel::create(eval_cfg);
        copy_matching_parameters(it->second, eval);

        for (std::size_t c = 0; c < test.size(); ++c) {
          const DegradationSpec deg = spec.data.degradation == DegradationKind::BD ? DegradationSpec::bd() : DegradationSpec::bi();
          const VideoSequence lr = degrade(test[c].observed, deg);
          const GroundTruthFlow gt{{lr.offsets}};
          ForwardOptions opts;
          if (eval_cfg.flow_source == FlowSourceKind::GroundTruth) opts.ground_truth = &gt;
          if (plan.keyframe_count) opts.keyframes = keyframes_by_count(lr.length(), *plan.keyframe_count);
          const auto y = eval.infer(batch_frames(lr), opts);
          for (int t = 0; t < lr.length(); ++t) {
            const Tensor& hr = test[c].clean.frames[static_cast<std::size_t>(t)];
            const Tensor out = reshape(y[static_cast<std::size_t>(t)], hr.shape());
            result.rows.push_back({to_string(spec.study), value, seed, static_cast<int>(c), t, psnr(out, hr), ssim(out, hr)});
          }
        }
        cell.ok = true;
      } catch (const std::exception& e) {
        cell.error = e.what();
        note("cell " + value + " seed " + std::to_string(seed) + " failed: " + e.what());
      }
      result.cells.push_back(cell);
    }
  }

  if (write) {
    write_ablation_csv(spec.output_dir / "results.csv", result.rows);
    const auto rows = read_ablation_csv(spec.output_dir / "results.csv");
    write_summary_csv(spec.output_dir / "summary.csv", summarize(rows));
    std::ofstream svg(spec.output_dir / "plot.svg");
    svg << render_plot_svg(rows);
    write_config(spec.output_dir / "experiment.cfg", spec.to_config());
    std::ofstream cells(spec.output_dir / "cells.csv");
    cells << "value,seed,status,error\n";
    for (const auto& c : result.cells) cells << c.value << ',' << c.seed << ',' << (c.ok ? "ok" : "failed") << ",\"" << c.error << "\"\n";
  }
  return result;
}

void write_ablation_csv(const std::filesystem::path& path, const std::vector<AblationRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "study,value,seed,clip,frame,psnr_db,ssim\n";
  for (const auto& r : rows) {
    out << r.study << ',' << r.value << ',' << r.seed << ',' << r.clip << ',' << r.frame << ',' << fmt(r.psnr) << ','
        << fmt(r.ssim) << '\n';
  }
}

std::vector<AblationRow> read_ablation_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "study,value,seed,clip,frame,psnr_db,ssim") throw IoError(path.string() + ": unexpected CSV header");
  std::vector<AblationRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(item);
    if (f.size() != 7) throw IoError(path.string() + ": malformed row '" + line + "'");
    rows.push_back({f[0], f[1], std::stoull(f[2]), std::stoi(f[3]), std::stoi(f[4]), std::stod(f[5]), std::stod(f[6])});
  }
  return rows;
}

std::vector<SummaryRow> summarize(const std::vector<AblationRow>& rows) {
  std::vector<std::string> order;
  for (const auto& r : rows) {
    if (std::find(order.begin(), order.end(), r.value) == order.end()) order.push_back(r.value);
  }
  std::map<std::pair<std::uint64_t, int>, int> length;
  for (const auto& r : rows) {
    auto& n = length[{r.seed, r.clip}];
    n = std::max(n, r.frame + 1);
  }
  std::map<std::tuple<std::uint64_t, int, int>, double> reference;
  for (const auto& r : rows) {
    if (!order.empty() && r.value == order.front()) reference[{r.seed, r.clip, r.frame}] = r.psnr;
  }
  std::vector<SummaryRow> out;
  for (const auto& value : order) {
    double total = 0, quarter = 0, delta = 0;
    int n = 0, nq = 0, nd = 0;
    for (const auto& r : rows) {
      if (r.value != value) continue;
      total += r.psnr;
      ++n;
      if (4 * r.frame < length[{r.seed, r.clip}]) {
        quarter += r.psnr;
        ++nq;
      }
      auto it = reference.find({r.seed, r.clip, r.frame});
      if (it != reference.end()) {
        delta += r.psnr - it->second;
        ++nd;
      }
    }
    out.push_back({value, n ? total / n : 0, nq ? quarter / nq : 0, nd ? delta / nd : 0});
  }
  return out;
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "value,mean_psnr_db,first_quarter_psnr_db,delta_to_reference_db\n";
  for (const auto& r : rows) {
    out << r.value << ',' << fmt(r.mean_psnr) << ',' << fmt(r.first_quarter_psnr) << ',' << fmt(r.delta_to_reference) << '\n';
  }
}

namespace {

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

std::string svg_chart(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                      const std::vector<Series>& series) {
  const double W = 640, H = 420, left = 70, right = 150, top = 40, bottom = 60;
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  if (x0 > x1) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
  if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  const double pw = W - left - right, ph = H - top - bottom;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (1 - (y - y0) / (y1 - y0)) * ph; };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double xv = x0 + (x1 - x0) * k / 5, yv = y0 + (y1 - y0) * k / 5;
    os << "<text x=\"" << px(xv) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << std::setprecision(1) << xv
       << "</text>\n";
    os << "<text x=\"" << left - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << std::setprecision(2) << yv
       << "</text>\n";
    os << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << py(yv) << "\" y2=\"" << py(yv)
       << "\" stroke=\"#ddd\"/>\n";
  }
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 18 << "\" text-anchor=\"middle\">" << xlabel << "</text>\n";
  os << "<text transform=\"translate(18," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << ylabel << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = colors[i % 6];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : series[i].points) os << px(x) << ',' << py(y) << ' ';
    os << "\"/>\n";
    for (const auto& [x, y] : series[i].points) os << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
    const double ly = top + 16 + 18 * static_cast<double>(i);
    os << "<line x1=\"" << left + pw + 12 << "\" x2=\"" << left + pw + 32 << "\" y1=\"" << ly << "\" y2=\"" << ly
       << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << left + pw + 38 << "\" y=\"" << ly + 4 << "\">" << series[i].label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace

std::string render_plot_svg(const std::vector<AblationRow>& rows) {
  if (rows.empty()) return svg_chart("no data", "", "", {});
  const std::string study = rows.front().study;
  std::vector<std::string> order;
  for (const auto& r : rows) {
    if (std::find(order.begin(), order.end(), r.value) == order.end()) order.push_back(r.value);
  }
  std::vector<Series> series;
  if (study == "keyframes") {
    Series s{"mean PSNR", {}};
    for (const auto& row : summarize(rows)) s.points.emplace_back(std::stod(row.value), row.mean_psnr);
    std::sort(s.points.begin(), s.points.end());
    series.push_back(s);
    return svg_chart("PSNR vs number of keyframes", "keyframes N", "PSNR (dB)", series);
  }
  std::map<std::tuple<std::uint64_t, int, int>, double> reference;
  for (const auto& r : rows) {
    if (r.value == order.front()) reference[{r.seed, r.clip, r.frame}] = r.psnr;
  }
  const bool diff = study == "segments";
  for (const auto& value : order) {
    std::map<int, std::pair<double, int>> acc;
    for (const auto& r : rows) {
      if (r.value != value) continue;
      double y = r.psnr;
      if (diff) {
        auto it = reference.find({r.seed, r.clip, r.frame});
        if (it == reference.end()) continue;
        y -= it->second;
      }
      acc[r.frame].first += y;
      acc[r.frame].second += 1;
    }
    Series s{diff ? "K=" + value : value, {}};
    for (const auto& [frame, sum_count] : acc) s.points.emplace_back(frame, sum_count.first / sum_count.second);
    series.push_back(s);
  }
  if (diff) return svg_chart("PSNR difference to K=" + order.front(), "frame index", "PSNR difference (dB)", series);
  return svg_chart(study + " study", "frame index", "PSNR (dB)", series);
}

}  // namespace vsr
