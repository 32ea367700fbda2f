#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "vsr/config.hpp"
#include "vsr/data.hpp"
#include "vsr/model.hpp"
#include "vsr/training.hpp"

namespace vsr {

// ---- finite-difference gradient checks -------------------------------------

struct GradcheckStats {
  double max_rel_error = 0;
  int probed = 0;
  // Probes that disagreed at h and were re-measured at h/10 and h/100 (a ReLU or
  // bilinear kink inside the stencil); the best of the three errors is kept.
  int kinks = 0;
};

// Max relative error |a - n| / max(|a|, |n|, 1e-3) between the autograd gradient and
// central differences (h = 1e-5 (1 + |x|)) of sum(fn() * W) for fixed random W.
// Leaves must be 64-bit; at most max_elements entries per leaf are probed.
GradcheckStats gradcheck(const std::function<Tensor()>& fn, const std::vector<Tensor>& leaves, Rng& rng,
                         int max_elements = 32);

struct GradcheckCase {
  std::string name;
  double max_rel_error = 0;
  int probed = 0;
  int kinks = 0;
  // max_rel_error below tolerance.
  bool passed = false;
};

struct GradcheckOptions {
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
  // Random shapes drawn per elementwise/layout op.
  int shapes = 20;
};

std::vector<GradcheckCase> run_gradcheck_suite(const GradcheckOptions& options = {});

// Overwrites every parameter with scale * N(0,1) draws.
void randomize_parameters(const ParameterList& params, Rng& rng, double scale);
// Copies values of same-named parameters from src into dst.
void copy_matching_parameters(const VsrModel& src, VsrModel& dst);

// ---- reachability --------------------------------------------------------------

using Matrix = std::vector<std::vector<int>>;

// D[i][j] = 1 iff perturbing input frame j changes output frame i (bitwise).
Matrix reachability_matrix(const VsrModel& model, std::span<const Tensor> frames, Rng& rng,
                           const ForwardOptions& options = {});
// Structural prediction from the propagation mode.
Matrix expected_reachability(const ModelConfig& config, int frames);
std::string format_matrix(const Matrix& m);

struct ReachabilityCase {
  std::string label;
  ModelConfig config;
  Matrix measured;
  Matrix expected;
  // Channels feeding the upsampler's first conv: C reads h^f only, 2C reads both.
  std::int64_t head_channels = 0;
  bool matches = false;
};

// Unidirectional, Local(2), Local(3), Bidirectional and Coupled on one random sequence.
std::vector<ReachabilityCase> run_reachability_suite(std::uint64_t seed, int frames = 6);

// Alignment None vs Feature on a translating synthetic clip (identical weights where shared):
// returns the max abs output difference.
double alignment_output_difference(std::uint64_t seed);

// ---- refill degeneracy ------------------------------------------------------------

struct DegeneracyResult {
  int sequences = 0;
  int bit_identical = 0;
};

// Refill model with an empty keyframe set vs the refill-disabled model sharing its weights.
DegeneracyResult check_refill_degeneracy(std::uint64_t seed, int sequences = 5);

// ---- keyframe cost -----------------------------------------------------------------

struct KeyframeTiming {
  int frames = 0;
  double interval1 = 0;   // seconds, min over repetitions
  double interval5 = 0;
  double no_refill = 0;
  bool monotone() const { return interval1 >= interval5 && interval5 >= no_refill; }
};

KeyframeTiming time_keyframes(const ModelConfig& base, int frames = 100, int lr_size = 16, int reps = 3,
                              std::uint64_t seed = 0);

// ---- parameter accounting -----------------------------------------------------------

std::int64_t conv_parameters(int in, int out, int k);
std::int64_t residual_block_parameters(int channels);
std::int64_t upsampler_parameters(int channels, bool reads_backward);

struct ParameterReport {
  std::string preset;
  ComponentCounts counts;
  std::int64_t residual_block = 0;
  std::int64_t upsampler = 0;
};

// Counts for a refill-enabled (IconVSR-style) and a plain model of the preset.
std::vector<ParameterReport> parameter_reports(const ModelConfig& preset, const std::string& name);
std::string format_parameter_table(const std::vector<ParameterReport>& reports);

// ---- ablation harness -----------------------------------------------------------------

enum class Study { Segments, Propagation, Alignment, Keyframes };
std::string to_string(Study study);
Study parse_study(const std::string& text);

// Synthetic data for a study. Extents are HR pixels; motion is a random constant integer
// translation per clip with |u|,|v| <= max_motion HR pixels per step.
struct AblationData {
  int train_clips = 4;
  int train_frames = 10;
  int test_clips = 2;
  int test_frames = 20;
  int height = 64;
  int width = 64;
  int max_motion = 4;
  // Texture bandwidth in cycles per HR pixel.
  double max_frequency = 0.12;
  bool occlusion = true;
  // Occluder events per training clip, each a random box held for 1..frames/2 frames.
  int train_occluders = 4;
  DegradationKind degradation = DegradationKind::BD;

  std::map<std::string, std::string> to_map() const;
  static AblationData from_map(const std::map<std::string, std::string>& values);
};

struct ExperimentSpec {
  std::string name = "ablation";
  Study study = Study::Segments;
  // K for segments, mode names for propagation/alignment, keyframe counts N for keyframes.
  std::vector<std::string> values;
  std::vector<std::uint64_t> seeds{0};
  ModelConfig model;
  TrainConfig train;
  AblationData data;
  std::filesystem::path output_dir;
  // Load model checkpoints already present under output_dir/models instead of retraining.
  bool reuse_checkpoints = true;

  void validate() const;
  static ExperimentSpec from_config(const ConfigFile& file);
  ConfigFile to_config() const;
  // Desk defaults for each study.
  static ExperimentSpec desk(Study study);
};

struct AblationRow {
  std::string study;
  std::string value;
  std::uint64_t seed = 0;
  int clip = 0;
  int frame = 0;
  double psnr = 0;
  double ssim = 0;
};

struct AblationCell {
  std::string value;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
};

struct AblationResult {
  std::vector<AblationRow> rows;
  std::vector<AblationCell> cells;
  bool all_ok() const;
};

using ProgressFn = std::function<void(const std::string&)>;

// Trains (or reloads) one model per distinct architecture and seed, evaluates every
// sweep value on the held-out clips and writes results.csv, summary.csv and plot.svg
// under spec.output_dir (when non-empty).
AblationResult run_ablation(const ExperimentSpec& spec, const ProgressFn& progress = {});

// Deterministic synthetic splits for one seed.
std::vector<SyntheticClip> make_clips(const AblationData& data, std::uint64_t seed, bool test, int frames);

// The unidirectional block count whose main-network size is closest to `reference`.
int matched_unidirectional_blocks(const ModelConfig& reference);

void write_ablation_csv(const std::filesystem::path& path, const std::vector<AblationRow>& rows);
std::vector<AblationRow> read_ablation_csv(const std::filesystem::path& path);

struct SummaryRow {
  std::string value;
  double mean_psnr = 0;
  // Mean over frames with index < T/4.
  double first_quarter_psnr = 0;
  // Mean PSNR minus the first sweep value's mean, paired by seed, clip and frame.
  double delta_to_reference = 0;
};
std::vector<SummaryRow> summarize(const std::vector<AblationRow>& rows);
void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows);

// SVG plot computed only from CSV rows: per-frame PSNR difference to the first value
// (segments), per-frame PSNR (propagation, alignment) or mean PSNR against N (keyframes).
std::string render_plot_svg(const std::vector<AblationRow>& rows);

}  // namespace vsr
