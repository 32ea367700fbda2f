#include <algorithm>
#include <cmath>
#include <numbers>

#include "vsr/data.hpp"
#include "vsr/rng.hpp"

namespace vsr {

namespace {

struct Wave {
  double fx, fy, phase;
  std::array<double, 3> amplitude;
};

// Random smooth color texture defined on the whole plane, so translated views are exact
// at any (sub-pixel) offset.
std::vector<Wave> make_texture(const SynthSpec& spec, Rng& rng) {
  std::vector<Wave> waves;
  const double fmin = std::min(0.02, spec.max_frequency);
  double energy = 0;
  for (int k = 0; k < spec.components; ++k) {
    const double f = fmin + (spec.max_frequency - fmin) * rng.uniform();
    const double angle = 2 * std::numbers::pi * rng.uniform();
    Wave w{f * std::cos(angle), f * std::sin(angle), 2 * std::numbers::pi * rng.uniform(), {}};
    const double luma = rng.normal();
    for (auto& a : w.amplitude) {
      a = luma + 0.35 * rng.normal();
      energy += 0.5 * a * a / 3.0;
    }
    waves.push_back(w);
  }
  // Scale to a per-channel RMS contrast of about 0.2 around mid gray.
  const double gain = energy > 0 ? 0.2 / std::sqrt(energy) : 0;
  for (auto& w : waves) {
    for (auto& a : w.amplitude) a *= gain;
  }
  return waves;
}

Tensor render(const std::vector<Wave>& waves, int height, int width, double dx, double dy) {
  std::vector<double> v(static_cast<std::size_t>(3 * height * width), 0.5);
  const std::size_t plane = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double cx = static_cast<double>(x) - dx, cy = static_cast<double>(y) - dy;
      const std::size_t p = static_cast<std::size_t>(y * width + x);
      for (const auto& w : waves) {
        const double c = std::cos(2 * std::numbers::pi * (w.fx * cx + w.fy * cy) + w.phase);
        for (int ch = 0; ch < 3; ++ch) v[static_cast<std::size_t>(ch) * plane + p] += w.amplitude[static_cast<std::size_t>(ch)] * c;
      }
    }
  }
  for (auto& e : v) e = std::clamp(e, 0.0, 1.0);
  return Tensor::from_values({3, height, width}, v, DType::F32);
}

}  // namespace

SyntheticClip synth_sequence(const SynthSpec& spec) {
  if (spec.frames < 1 || spec.height < 1 || spec.width < 1) throw ConfigError("synthetic clip needs positive extents");
  const std::size_t steps = static_cast<std::size_t>(spec.frames - 1);
  if (spec.motion.size() != 1 && spec.motion.size() != steps && !(steps == 0 && spec.motion.empty())) {
    throw ConfigError("motion spec needs 1 or " + std::to_string(steps) + " entries, got " +
                      std::to_string(spec.motion.size()));
  }
  for (const auto& m : spec.motion) {
    if (std::abs(m.u) > spec.max_step || std::abs(m.v) > spec.max_step) {
      throw ConfigError("motion (" + std::to_string(m.u) + ", " + std::to_string(m.v) + ") exceeds the canvas margin of " +
                        std::to_string(spec.max_step) + " px per step");
    }
  }
  Rng rng(spec.seed);
  const auto waves = make_texture(spec, rng);

  SyntheticClip clip;
  std::array<double, 2> offset{0, 0};
  for (int t = 0; t < spec.frames; ++t) {
    if (t > 0) {
      const auto& m = spec.motion.size() == 1 ? spec.motion[0] : spec.motion[static_cast<std::size_t>(t - 1)];
      offset[0] += m.u;
      offset[1] += m.v;
    }
    clip.clean.frames.push_back(render(waves, spec.height, spec.width, offset[0], offset[1]));
    clip.clean.offsets.push_back(offset);
  }
  clip.observed.offsets = clip.clean.offsets;
  for (const auto& f : clip.clean.frames) clip.observed.frames.push_back(f.detach());
  for (const auto& occ : spec.occluders) {
    if (occ.frame < 0 || occ.frame >= spec.frames) throw ConfigError("occluder frame out of range");
    auto d = clip.observed.frames[static_cast<std::size_t>(occ.frame)].data<float>();
    const int y0 = std::max(occ.y, 0), y1 = std::min(occ.y + occ.height, spec.height);
    const int x0 = std::max(occ.x, 0), x1 = std::min(occ.x + occ.width, spec.width);
    for (int c = 0; c < 3; ++c)
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) d[static_cast<std::size_t>((c * spec.height + y) * spec.width + x)] = static_cast<float>(occ.value);
  }
  return clip;
}

}  // namespace vsr
