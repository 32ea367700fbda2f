#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "vsr/config.hpp"
#include "vsr/data.hpp"
#include "vsr/error.hpp"
#include "vsr/experiments.hpp"
#include "vsr/model.hpp"
#include "vsr/ops.hpp"
#include "vsr/training.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

// Invariant or test failure reported by a subcommand (exit code 1).
class CheckFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Relative output paths are placed under $VSR_OUTPUT_ROOT when it is set.
fs::path output_path(const fs::path& p) {
  const char* root = std::getenv("VSR_OUTPUT_ROOT");
  if (!root || !*root || p.is_absolute()) return p;
  return fs::path(root) / p;
}

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

std::string timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw vsr::IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

std::vector<vsr::Tensor> as_batch(const vsr::VideoSequence& seq) {
  std::vector<vsr::Tensor> out;
  for (const auto& f : seq.frames) out.push_back(vsr::reshape(f, {1, f.dim(0), f.dim(1), f.dim(2)}));
  return out;
}

vsr::DegradationSpec degradation_spec(const std::string& name) {
  return vsr::parse_degradation(name) == vsr::DegradationKind::BD ? vsr::DegradationSpec::bd() : vsr::DegradationSpec::bi();
}

// A checkpoint is a directory holding model.cfg, or a training output directory with final/.
fs::path checkpoint_dir(const fs::path& p) {
  if (fs::exists(p / "model.cfg")) return p;
  if (fs::exists(p / "final" / "model.cfg")) return p / "final";
  throw vsr::IoError("no checkpoint (model.cfg) under " + p.string());
}

// ---- degrade ------------------------------------------------------------------

struct DegradeArgs {
  std::string input, output, deg = "bd";
};

int cmd_degrade(const DegradeArgs& a) {
  const auto hr = vsr::load_frames(a.input);
  const auto spec = degradation_spec(a.deg);
  const auto lr = vsr::degrade(hr, spec);
  const fs::path out = output_path(a.output);
  fs::create_directories(out);
  vsr::save_frames(lr, out);
  json m{{"command", "degrade"},
         {"input", a.input},
         {"output", out.string()},
         {"degradation", vsr::to_string(spec.kind)},
         {"scale", spec.scale},
         {"stride", spec.scale},
         {"frames", lr.length()},
         {"hr_size", {hr.height(), hr.width()}},
         {"lr_size", {lr.height(), lr.width()}},
         {"created", timestamp()}};
  if (spec.kind == vsr::DegradationKind::BD) {
    m["sigma"] = spec.sigma;
    m["kernel_size"] = spec.kernel_size;
  } else {
    m["method"] = "bicubic";
  }
  write_json(out / "manifest.json", m);
  std::cout << "wrote " << lr.length() << " frames " << lr.height() << "x" << lr.width() << " to " << out.string() << '\n';
  return 0;
}

// ---- train --------------------------------------------------------------------

struct TrainArgs {
  std::string config, output, resume;
  int stop_at = -1;
  bool quiet = false;
};

std::vector<fs::path> sequence_dirs(const fs::path& root) {
  if (!fs::is_directory(root)) throw vsr::IoError("not a directory: " + root.string());
  if (fs::exists(root / vsr::frame_filename(0))) return {root};
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw vsr::IoError("no frame sequences under " + root.string());
  return dirs;
}

// [data] either names HR frame directories (hr_dir, degradation) or synthetic clip parameters.
vsr::Dataset load_dataset(const vsr::ConfigSection& section, std::uint64_t seed) {
  vsr::Dataset data;
  if (section.count("hr_dir")) {
    std::string deg = "bd";
    for (const auto& [key, value] : section) {
      if (key == "degradation") deg = value;
      else if (key != "hr_dir") throw vsr::ConfigError("unknown data config key '" + key + "' (frame datasets take hr_dir, degradation)");
    }
    for (const auto& dir : sequence_dirs(section.at("hr_dir"))) {
      auto hr = vsr::load_frames(dir);
      data.push_back({vsr::degrade(hr, degradation_spec(deg)), std::move(hr)});
    }
    return data;
  }
  const auto spec = vsr::AblationData::from_map(section);
  const auto deg = spec.degradation == vsr::DegradationKind::BD ? vsr::DegradationSpec::bd() : vsr::DegradationSpec::bi();
  for (const auto& clip : vsr::make_clips(spec, seed, false, spec.train_frames))
    data.push_back({vsr::degrade(clip.observed, deg), clip.clean});
  return data;
}

int cmd_train(const TrainArgs& a) {
  const auto file = vsr::read_config(a.config);
  vsr::require_sections(file, {"model", "train", "data", "run"});
  auto section = [&](const std::string& name) {
    auto it = file.find(name);
    return it == file.end() ? vsr::ConfigSection{} : it->second;
  };
  const auto model_cfg = vsr::ModelConfig::from_map(section("model"));
  const auto train_cfg = vsr::TrainConfig::from_map(section("train"));
  fs::path out = fs::path(a.config).stem();
  for (const auto& [key, value] : section("run")) {
    if (key == "output") out = value;
    else throw vsr::ConfigError("unknown run config key '" + key + "'");
  }
  if (!a.output.empty()) out = a.output;
  out = output_path(out);
  model_cfg.validate();
  train_cfg.validate();
  const auto data = load_dataset(section("data"), train_cfg.seed);

  auto model = vsr::VsrModel::create(model_cfg);
  vsr::TrainOptions opts;
  opts.output_dir = out;
  if (!a.resume.empty()) opts.resume_from = checkpoint_dir(a.resume);
  opts.stop_at = a.stop_at;
  const int every = std::max(1, train_cfg.total_iters / 20);
  opts.on_step = [&](const vsr::LogRow& r) {
    if (!a.quiet && (r.iter % every == 0 || r.iter + 1 == train_cfg.total_iters))
      std::cout << "iter " << r.iter << " loss " << num(r.loss) << " lr " << num(r.lr_main) << std::endl;
  };
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = vsr::train(model, data, train_cfg, opts);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_json(out / "manifest.json", {{"command", "train"},
                                     {"config", a.config},
                                     {"resume_from", opts.resume_from.string()},
                                     {"completed_iters", result.completed_iters},
                                     {"sequences", data.size()},
                                     {"seconds", seconds},
                                     {"created", timestamp()}});
  std::cout << "checkpoint " << (out / "final").string() << " after " << result.completed_iters << " iterations ("
            << num(seconds) << " s)\n";
  return 0;
}

// ---- infer --------------------------------------------------------------------

struct InferArgs {
  std::string checkpoint, input, output, keyframe_interval, flow_dir;
  bool no_refill = false;
};

int cmd_infer(const InferArgs& a) {
  const fs::path ckpt = checkpoint_dir(a.checkpoint);
  vsr::VsrModel model = vsr::load_model(ckpt);
  if (model.config().flow_source == vsr::FlowSourceKind::GroundTruth)
    throw vsr::ConfigError("checkpoint uses ground-truth flow, which frame directories do not provide");
  if (a.no_refill && model.config().refill) {
    auto cfg = model.config();
    cfg.refill = false;
    auto plain = vsr::VsrModel::create(cfg);
    vsr::copy_matching_parameters(model, plain);
    model = std::move(plain);
  }
  const auto lr = vsr::load_frames(a.input);
  vsr::ForwardOptions opts;
  if (!a.keyframe_interval.empty()) {
    if (!model.config().refill) throw vsr::ConfigError("--keyframe-interval needs a refill checkpoint");
    if (a.keyframe_interval == "inf" || a.keyframe_interval == "0") {
      opts.keyframes = std::vector<int>{};
    } else {
      int n = 0;
      try {
        std::size_t pos = 0;
        n = std::stoi(a.keyframe_interval, &pos);
        if (pos != a.keyframe_interval.size() || n < 0) throw std::invalid_argument("");
      } catch (const std::exception&) {
        throw vsr::ConfigError("--keyframe-interval expects a non-negative integer or 'inf', got '" + a.keyframe_interval + "'");
      }
      opts.keyframes = vsr::keyframes_by_interval(lr.length(), n);
    }
  }
  const std::vector<int> keys = !model.config().refill ? std::vector<int>{}
                                : opts.keyframes       ? *opts.keyframes
                                                       : model.default_keyframes(lr.length());

  const auto t0 = std::chrono::steady_clock::now();
  const auto y = model.infer(as_batch(lr), opts);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  vsr::VideoSequence hr;
  for (const auto& f : y) hr.frames.push_back(vsr::reshape(f, {3, f.dim(2), f.dim(3)}));
  const fs::path out = output_path(a.output);
  fs::create_directories(out);
  vsr::save_frames(hr, out);
  write_json(out / "manifest.json", {{"command", "infer"},
                                     {"checkpoint", ckpt.string()},
                                     {"input", a.input},
                                     {"frames", hr.length()},
                                     {"refill", model.config().refill},
                                     {"keyframes", keys},
                                     {"seconds_total", seconds},
                                     {"seconds_per_frame", seconds / std::max(1, hr.length())},
                                     {"created", timestamp()}});
  std::cout << "wrote " << hr.length() << " frames to " << out.string() << " (" << num(seconds / std::max(1, hr.length()))
            << " s/frame)\n";

  if (!a.flow_dir.empty()) {
    if (!model.config().needs_flow_net()) throw vsr::ConfigError("--flow-dir needs a model with a flow network");
    // flow_i aligns frame i+1 onto frame i.
    const fs::path dir = output_path(a.flow_dir);
    fs::create_directories(dir);
    const auto x = as_batch(lr);
    vsr::NoGradGuard guard;
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
      const auto flow = model.estimate_flow(x[i], x[i + 1]);
      std::ostringstream name;
      name << "flow_" << std::setw(8) << std::setfill('0') << i << ".png";
      vsr::write_png(dir / name.str(), vsr::flow_to_color(flow));
    }
    std::cout << "wrote " << (x.size() ? x.size() - 1 : 0) << " flow images to " << dir.string() << "\n";
  }
  return 0;
}

// ---- eval ---------------------------------------------------------------------

struct EvalArgs {
  std::string pred, gt, mode = "y", sequence_id, output;
};

int cmd_eval(const EvalArgs& a) {
  const auto mode = vsr::parse_metric_mode(a.mode);
  const auto pred = vsr::load_frames(a.pred);
  const auto gt = vsr::load_frames(a.gt);
  if (pred.length() != gt.length())
    throw vsr::ConfigError("frame count mismatch: " + std::to_string(pred.length()) + " predicted vs " +
                           std::to_string(gt.length()) + " ground truth");
  const std::string id = a.sequence_id.empty() ? fs::path(a.gt).filename().string() : a.sequence_id;
  std::ostringstream csv;
  csv << "sequence_id,frame_index,psnr_db,ssim,mode\n";
  double sp = 0, ss = 0;
  for (int t = 0; t < gt.length(); ++t) {
    const double p = vsr::psnr(pred.frames[t], gt.frames[t], mode);
    const double s = vsr::ssim(pred.frames[t], gt.frames[t], mode);
    sp += p;
    ss += s;
    csv << id << ',' << t << ',' << num(p) << ',' << num(s) << ',' << vsr::to_string(mode) << '\n';
  }
  csv << id << ",mean," << num(sp / gt.length()) << ',' << num(ss / gt.length()) << ',' << vsr::to_string(mode) << '\n';
  if (a.output.empty()) {
    std::cout << csv.str();
  } else {
    const fs::path out = output_path(a.output);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    std::ofstream f(out);
    if (!f) throw vsr::IoError("cannot open " + out.string() + " for writing");
    f << csv.str();
    std::cout << "mean psnr " << num(sp / gt.length()) << " dB, ssim " << num(ss / gt.length()) << " -> " << out.string() << '\n';
  }
  return 0;
}

// ---- ablate -------------------------------------------------------------------

struct AblateArgs {
  std::string config, study = "segments", output, seeds, values;
  bool no_reuse = false;
};

int cmd_ablate(const AblateArgs& a) {
  vsr::ExperimentSpec spec = a.config.empty() ? vsr::ExperimentSpec::desk(vsr::parse_study(a.study))
                                              : vsr::ExperimentSpec::from_config(vsr::read_config(a.config));
  auto split = [](const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');)
      if (!item.empty()) out.push_back(item);
    return out;
  };
  if (!a.values.empty()) spec.values = split(a.values);
  if (!a.seeds.empty()) {
    spec.seeds.clear();
    for (const auto& s : split(a.seeds)) {
      try {
        spec.seeds.push_back(std::stoull(s));
      } catch (const std::exception&) {
        throw vsr::ConfigError("--seeds expects integers, got '" + s + "'");
      }
    }
  }
  if (!a.output.empty()) spec.output_dir = a.output;
  if (spec.output_dir.empty()) spec.output_dir = fs::path("ablations") / spec.name;
  spec.output_dir = output_path(spec.output_dir);
  if (a.no_reuse) spec.reuse_checkpoints = false;
  spec.validate();

  const auto t0 = std::chrono::steady_clock::now();
  const auto result = vsr::run_ablation(spec, [](const std::string& msg) { std::cout << msg << std::endl; });
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_json(spec.output_dir / "manifest.json",
             {{"command", "ablate"}, {"study", vsr::to_string(spec.study)}, {"seconds", seconds}, {"created", timestamp()}});

  std::cout << std::left << std::setw(16) << "value" << std::setw(12) << "mean_psnr" << std::setw(14) << "first_quarter"
            << "delta\n";
  for (const auto& r : vsr::summarize(result.rows)) {
    std::cout << std::setw(16) << r.value << std::setw(12) << num(r.mean_psnr) << std::setw(14)
              << num(r.first_quarter_psnr) << num(r.delta_to_reference) << '\n';
  }
  std::cout << "results in " << spec.output_dir.string() << '\n';
  if (!result.all_ok()) {
    int failed = 0;
    for (const auto& c : result.cells) failed += !c.ok;
    throw CheckFailed(std::to_string(failed) + " of " + std::to_string(result.cells.size()) + " cells failed (see cells.csv)");
  }
  return 0;
}

// ---- gradcheck / reachability --------------------------------------------------

struct GradcheckArgs {
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
  int shapes = 20;
  std::string output;
};

int cmd_gradcheck(const GradcheckArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cases = vsr::run_gradcheck_suite({a.seed, a.tolerance, a.shapes});
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ostringstream csv;
  csv << "case,max_rel_error,probed,kinks,passed\n";
  int failed = 0;
  for (const auto& c : cases) {
    failed += !c.passed;
    csv << c.name << ',' << num(c.max_rel_error) << ',' << c.probed << ',' << c.kinks << ',' << (c.passed ? 1 : 0) << '\n';
    std::cout << (c.passed ? "PASS " : "FAIL ") << std::left << std::setw(40) << c.name << " max_rel "
              << std::setprecision(3) << std::scientific << c.max_rel_error << std::defaultfloat << " probed " << c.probed
              << " kinks " << c.kinks << '\n';
  }
  std::cout << cases.size() - failed << "/" << cases.size() << " cases below " << a.tolerance << " in " << num(seconds)
            << " s\n";
  if (!a.output.empty()) {
    const fs::path out = output_path(a.output);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    std::ofstream(out) << csv.str();
  }
  if (failed) throw CheckFailed(std::to_string(failed) + " gradient checks failed");
  return 0;
}

struct ReachabilityArgs {
  std::uint64_t seed = 0;
  int frames = 6;
  std::string output;
};

int cmd_reachability(const ReachabilityArgs& a) {
  const auto cases = vsr::run_reachability_suite(a.seed, a.frames);
  std::ostringstream csv;
  csv << "mode,output_frame,input_frame,measured,expected\n";
  int failed = 0;
  for (const auto& c : cases) {
    failed += !c.matches;
    std::cout << (c.matches ? "PASS " : "FAIL ") << c.label << " (head reads " << c.head_channels << " channels)\n"
              << vsr::format_matrix(c.measured);
    if (!c.matches) std::cout << "expected\n" << vsr::format_matrix(c.expected);
    for (std::size_t i = 0; i < c.measured.size(); ++i)
      for (std::size_t j = 0; j < c.measured[i].size(); ++j)
        csv << c.label << ',' << i << ',' << j << ',' << c.measured[i][j] << ',' << c.expected[i][j] << '\n';
  }
  const double diff = vsr::alignment_output_difference(a.seed);
  std::cout << (diff > 0 ? "PASS " : "FAIL ") << "alignment none vs feature: max abs output difference " << num(diff) << '\n';
  if (!(diff > 0)) ++failed;
  if (!a.output.empty()) {
    const fs::path out = output_path(a.output);
    fs::create_directories(out);
    std::ofstream(out / "reachability.csv") << csv.str();
    std::ofstream(out / "alignment.csv") << "seed,max_abs_difference\n" << a.seed << ',' << num(diff) << '\n';
  }
  if (failed) throw CheckFailed(std::to_string(failed) + " reachability checks failed");
  return 0;
}

// ---- synth ----------------------------------------------------------------------

struct SynthArgs {
  std::string output;
  std::uint64_t seed = 0;
  int frames = 10, size = 64;
  double u = 1, v = 0;
};

int cmd_synth(const SynthArgs& a) {
  vsr::SynthSpec spec;
  spec.seed = a.seed;
  spec.frames = a.frames;
  spec.height = spec.width = a.size;
  spec.motion = {vsr::Motion{a.u, a.v}};
  const auto clip = vsr::synth_sequence(spec);
  const fs::path out = output_path(a.output);
  fs::create_directories(out);
  vsr::save_frames(clip.clean, out);
  write_json(out / "manifest.json", {{"command", "synth"},
                                     {"seed", a.seed},
                                     {"frames", a.frames},
                                     {"size", a.size},
                                     {"motion", {a.u, a.v}},
                                     {"offsets", clip.clean.offsets},
                                     {"created", timestamp()}});
  std::cout << "wrote " << a.frames << " frames to " << out.string() << '\n';
  return 0;
}

// ---- params ---------------------------------------------------------------------

int cmd_params() {
  auto reports = vsr::parameter_reports(vsr::ModelConfig::paper_scale(), "paper");
  for (auto& r : vsr::parameter_reports(vsr::ModelConfig::desk(), "desk")) reports.push_back(r);
  std::cout << vsr::format_parameter_table(reports);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recurrent video super-resolution toolkit"};
  app.require_subcommand(1);
  int rc = 0;

  DegradeArgs degrade;
  auto* sub = app.add_subcommand("degrade", "Degrade an HR frame directory to LR (x4)");
  sub->add_option("input", degrade.input, "HR frame directory")->required();
  sub->add_option("output", degrade.output, "LR output directory")->required();
  sub->add_option("--deg", degrade.deg, "Degradation")->check(CLI::IsMember({"bi", "bd"}));
  sub->callback([&] { rc = cmd_degrade(degrade); });

  TrainArgs train;
  sub = app.add_subcommand("train", "Train a model from a config file");
  sub->add_option("config", train.config, "Config with [model], [train], [data] and optional [run] sections")->required();
  sub->add_option("--output", train.output, "Output directory (checkpoints, loss.csv)");
  sub->add_option("--resume", train.resume, "Checkpoint directory to resume from");
  sub->add_option("--stop-at", train.stop_at, "Stop before this iteration");
  sub->add_flag("--quiet", train.quiet, "Suppress progress lines");
  sub->callback([&] { rc = cmd_train(train); });

  InferArgs infer;
  sub = app.add_subcommand("infer", "Super-resolve an LR frame directory");
  sub->add_option("checkpoint", infer.checkpoint, "Checkpoint directory")->required();
  sub->add_option("input", infer.input, "LR frame directory")->required();
  sub->add_option("output", infer.output, "HR output directory")->required();
  auto* kf = sub->add_option("--keyframe-interval", infer.keyframe_interval, "Keyframe spacing; 0 or inf for none");
  auto* nr = sub->add_flag("--no-refill", infer.no_refill, "Run the refill model without its extractor");
  sub->add_option("--flow-dir", infer.flow_dir, "Also write color-wheel PNGs of the estimated neighbor flows here");
  kf->excludes(nr);
  sub->callback([&] { rc = cmd_infer(infer); });

  EvalArgs eval;
  sub = app.add_subcommand("eval", "PSNR/SSIM of predicted frames against ground truth");
  sub->add_option("pred", eval.pred, "Predicted frame directory")->required();
  sub->add_option("gt", eval.gt, "Ground-truth frame directory")->required();
  sub->add_option("--mode", eval.mode, "Metric channel")->check(CLI::IsMember({"rgb", "y"}));
  sub->add_option("--sequence-id", eval.sequence_id, "Identifier written to the CSV (default: gt directory name)");
  sub->add_option("--output", eval.output, "CSV path (default: stdout)");
  sub->callback([&] { rc = cmd_eval(eval); });

  AblateArgs ablate;
  sub = app.add_subcommand("ablate", "Run an ablation sweep and write CSV + SVG");
  sub->add_option("config", ablate.config, "Experiment config (default: desk preset of --study)");
  sub->add_option("--study", ablate.study, "Desk study when no config is given")
      ->check(CLI::IsMember({"segments", "propagation", "alignment", "keyframes"}));
  sub->add_option("--output", ablate.output, "Output directory");
  sub->add_option("--seeds", ablate.seeds, "Comma-separated seeds");
  sub->add_option("--values", ablate.values, "Comma-separated sweep values");
  sub->add_flag("--no-reuse", ablate.no_reuse, "Retrain even if matching checkpoints exist");
  sub->callback([&] { rc = cmd_ablate(ablate); });

  GradcheckArgs gc;
  sub = app.add_subcommand("gradcheck", "Finite-difference gradient suite (64-bit)");
  sub->add_option("--seed", gc.seed);
  sub->add_option("--tolerance", gc.tolerance);
  sub->add_option("--shapes", gc.shapes, "Random shapes per elementwise op");
  sub->add_option("--output", gc.output, "CSV path");
  sub->callback([&] { rc = cmd_gradcheck(gc); });

  ReachabilityArgs reach;
  sub = app.add_subcommand("reachability", "Perturbation-dependence matrices per propagation mode");
  sub->add_option("--seed", reach.seed);
  sub->add_option("--frames", reach.frames)->check(CLI::Range(2, 64));
  sub->add_option("--output", reach.output, "Output directory for CSVs");
  sub->callback([&] { rc = cmd_reachability(reach); });

  SynthArgs synth;
  sub = app.add_subcommand("synth", "Write a synthetic translating HR clip");
  sub->add_option("output", synth.output, "Frame directory")->required();
  sub->add_option("--seed", synth.seed);
  sub->add_option("--frames", synth.frames)->check(CLI::Range(1, 10000));
  sub->add_option("--size", synth.size, "Square HR extent, multiple of 4")->check(CLI::Range(8, 4096));
  sub->add_option("--u", synth.u, "Horizontal motion per frame (HR px)")->check(CLI::Range(-4.0, 4.0));
  sub->add_option("--v", synth.v, "Vertical motion per frame (HR px)")->check(CLI::Range(-4.0, 4.0));
  sub->callback([&] { rc = cmd_synth(synth); });

  sub = app.add_subcommand("params", "Parameter counts for the paper and desk presets");
  sub->callback([&] { rc = cmd_params(); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const CheckFailed& e) {
    std::cerr << "check failed: " << e.what() << '\n';
    return kExitFailure;
  } catch (const vsr::TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const vsr::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitFailure;
  }
  return rc;
}
