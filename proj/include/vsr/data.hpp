#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vsr/tensor.hpp"

namespace vsr {

// Frames are (3,H,W) tensors with values in [0,1].
struct VideoSequence {
  std::vector<Tensor> frames;
  // Content displacement of each frame in pixels (empty when unknown):
  // frame_t(p) = canvas(p - offsets[t]).
  std::vector<std::array<double, 2>> offsets;

  int length() const { return static_cast<int>(frames.size()); }
  std::int64_t height() const { return frames.at(0).dim(1); }
  std::int64_t width() const { return frames.at(0).dim(2); }
  bool has_motion() const { return !offsets.empty(); }
  // Throws ShapeError unless all frames are (3,H,W) with identical extents.
  void validate() const;
};

// ---- degradations ----------------------------------------------------------

enum class DegradationKind { BI, BD };

struct DegradationSpec {
  DegradationKind kind = DegradationKind::BD;
  int scale = 4;
  double sigma = 1.6;
  int kernel_size = 13;

  static DegradationSpec bi() { return {DegradationKind::BI, 4, 0.0, 0}; }
  static DegradationSpec bd() { return {}; }
};

std::string to_string(DegradationKind kind);
DegradationKind parse_degradation(const std::string& text);

// Normalized 1D Gaussian taps centered on the middle element.
std::vector<double> gaussian_kernel(double sigma, int size);

// Half-sample symmetric boundary index: ... b a | a b c ... c | c b ...
std::int64_t reflect_index(std::int64_t i, std::int64_t n);

// Separable Gaussian blur over the last two axes with symmetric boundary handling.
Tensor gaussian_blur(const Tensor& x, double sigma, int kernel_size);

// Cubic-convolution resize (a = -0.5) over the last two axes. When shrinking, the kernel
// is stretched by 1/scale (antialiasing). Half-pixel coordinate mapping.
Tensor bicubic_resize(const Tensor& x, double scale);

Tensor degrade_frame(const Tensor& hr, const DegradationSpec& spec);
VideoSequence degrade(const VideoSequence& hr, const DegradationSpec& spec);

// ---- synthetic clips ---------------------------------------------------------

struct Motion {
  double u = 0;
  double v = 0;
};

// Rectangle in HR pixel coordinates replaced by a flat value in the observed frame only.
struct Occluder {
  int frame = 0;
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
  double value = 0.5;
};

struct SynthSpec {
  std::uint64_t seed = 0;
  int frames = 5;
  int height = 32;
  int width = 32;
  // One entry (constant motion) or frames-1 entries (per step).
  std::vector<Motion> motion{Motion{}};
  std::vector<Occluder> occluders;
  // Highest spatial frequency of the texture in cycles per pixel.
  double max_frequency = 0.25;
  int components = 24;
  // Largest per-step displacement the canvas margin supports.
  double max_step = 4.0;
};

struct SyntheticClip {
  VideoSequence clean;     // ground truth
  VideoSequence observed;  // ground truth with occluders painted in
};

// Frames sample one random smooth texture translated by the cumulative motion.
SyntheticClip synth_sequence(const SynthSpec& spec);

// ---- metrics -----------------------------------------------------------------

enum class MetricMode { RGB, Y };
std::string to_string(MetricMode mode);
MetricMode parse_metric_mode(const std::string& text);

inline constexpr double kPsnrCap = 100.0;

// BT.601 luma on [0,1] values: (65.481 R + 128.553 G + 24.966 B + 16) / 255.
Tensor rgb_to_y(const Tensor& rgb);

// 10 log10(1 / MSE), capped at 100 dB. No border cropping.
double psnr(const Tensor& a, const Tensor& b, MetricMode mode = MetricMode::RGB);
// Mean SSIM with an 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03, range 1,
// over valid window positions. RGB mode averages the per-channel values.
double ssim(const Tensor& a, const Tensor& b, MetricMode mode = MetricMode::RGB);

// ---- frame directories ---------------------------------------------------------

std::string frame_filename(int index);
// Reads frame_%08d.png files numbered consecutively from 0.
VideoSequence load_frames(const std::filesystem::path& dir);
// Writes 8-bit RGB PNGs, quantized with round-half-up after clamping to [0,1].
void save_frames(const VideoSequence& seq, const std::filesystem::path& dir);

Tensor read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Tensor& frame);

}  // namespace vsr
