// Acceptance harness: one PASS/FAIL line per criterion.
// Usage: acceptance [criterion numbers...]; VSR_ACCEPTANCE_DIR sets the ablation work dir.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "vsr/data.hpp"
#include "vsr/experiments.hpp"
#include "vsr/nn.hpp"
#include "vsr/ops.hpp"

using namespace vsr;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fixed(double v, int digits = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

Tensor uniform(const Shape& shape, Rng& rng, DType dtype, double lo = 0, double hi = 1) {
  std::vector<double> v(static_cast<std::size_t>(numel_of(shape)));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from_values(shape, v, dtype);
}

// ---- 1 ----------------------------------------------------------------------------

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cases = run_gradcheck_suite();
  const double seconds = since(t0);
  double worst = 0;
  std::string failed;
  for (const auto& c : cases) {
    worst = std::max(worst, c.max_rel_error);
    if (!c.passed) failed += " " + c.name;
  }
  Outcome o;
  o.pass = failed.empty() && seconds < 60;
  o.detail = std::to_string(cases.size()) + " cases, max rel error " + fixed(worst * 1e6, 3) + "e-6, " + fixed(seconds, 1) +
             " s" + (failed.empty() ? "" : ", failed:" + failed);
  return o;
}

// ---- 2 ----------------------------------------------------------------------------

std::int64_t mirror(std::int64_t i, std::int64_t n) {
  while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - 1 - i;
  return i;
}

bool pixel_shuffle_exact(Rng& rng) {
  const int N = 2, C = 3, r = 4, H = 3, W = 5;
  const auto in = uniform({N, C * r * r, H, W}, rng, DType::F32);
  const auto out = pixel_shuffle(in, r);
  const auto iv = in.data<float>(), ov = out.data<float>();
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w)
          for (int a = 0; a < r; ++a)
            for (int b = 0; b < r; ++b) {
              const float want = iv[static_cast<std::size_t>(((n * C * r * r + c * r * r + a * r + b) * H + h) * W + w)];
              const float got = ov[static_cast<std::size_t>(((n * C + c) * H * r + h * r + a) * W * r + w * r + b)];
              if (std::memcmp(&want, &got, sizeof(float)) != 0) return false;
            }
  return true;
}

bool warp_shift_exact(Rng& rng) {
  const int H = 7, W = 9;
  const auto x = uniform({1, 4, H, W}, rng, DType::F32);
  for (auto [u, v] : {std::pair{2, 0}, {-1, 3}, {0, -2}, {-4, -1}, {0, 0}}) {
    std::vector<double> f(2 * H * W);
    for (int i = 0; i < H * W; ++i) {
      f[static_cast<std::size_t>(i)] = u;
      f[static_cast<std::size_t>(H * W + i)] = v;
    }
    const auto out = flow_warp(x, Tensor::from_values({1, 2, H, W}, f, DType::F32));
    auto want = Tensor::zeros({1, 4, H, W});
    auto wd = want.data<float>();
    const auto xd = x.data<float>();
    for (int c = 0; c < 4; ++c)
      for (int y = 0; y < H; ++y)
        for (int xx = 0; xx < W; ++xx) {
          const int sy = y + v, sx = xx + u;
          if (sy >= 0 && sy < H && sx >= 0 && sx < W) wd[(c * H + y) * W + xx] = xd[(c * H + sy) * W + sx];
        }
    if (!out.same_bits(want)) return false;
  }
  return true;
}

double bd_error(Rng& rng) {
  const std::int64_t C = 3, H = 24, W = 20;
  const auto img = uniform({C, H, W}, rng, DType::F64);
  const double sigma = 1.6;
  const int size = 13, r = 6;
  std::vector<double> g;
  double total = 0;
  for (int i = -r; i <= r; ++i)
    for (int j = -r; j <= r; ++j) total += g.emplace_back(std::exp(-(i * i + j * j) / (2 * sigma * sigma)));
  const auto v = img.to_vector();
  std::vector<double> want;
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t y = 0; y < H; y += 4)
      for (std::int64_t x = 0; x < W; x += 4) {
        double acc = 0;
        for (int i = -r; i <= r; ++i)
          for (int j = -r; j <= r; ++j)
            acc += g[static_cast<std::size_t>((i + r) * size + j + r)] / total *
                   v[static_cast<std::size_t>((c * H + mirror(y + i, H)) * W + mirror(x + j, W))];
        want.push_back(acc);
      }
  const auto got = degrade_frame(img, DegradationSpec::bd()).to_vector();
  if (got.size() != want.size()) return 1e300;
  double worst = 0;
  for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
  return worst;
}

double psnr_error(Rng& rng) {
  double worst = 0;
  for (int trial = 0; trial < 5; ++trial) {
    const auto a = uniform({3, 9, 11}, rng, DType::F64), b = uniform({3, 9, 11}, rng, DType::F64);
    const auto av = a.to_vector(), bv = b.to_vector();
    double se = 0;
    for (std::size_t i = 0; i < av.size(); ++i) se += (av[i] - bv[i]) * (av[i] - bv[i]);
    worst = std::max(worst, std::abs(psnr(a, b) - 10 * std::log10(static_cast<double>(av.size()) / se)));
    double sey = 0;
    for (int i = 0; i < 99; ++i) {
      auto y = [&](const std::vector<double>& p) { return (65.481 * p[i] + 128.553 * p[99 + i] + 24.966 * p[198 + i] + 16) / 255; };
      sey += (y(av) - y(bv)) * (y(av) - y(bv));
    }
    worst = std::max(worst, std::abs(psnr(a, b, MetricMode::Y) - 10 * std::log10(99 / sey)));
  }
  return worst;
}

double ssim_plane(const std::vector<double>& a, const std::vector<double>& b, std::size_t offset, int H, int W) {
  double g[11][11], total = 0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) total += g[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * 1.5 * 1.5));
  const double C1 = 1e-4, C2 = 9e-4;
  double acc = 0;
  int count = 0;
  for (int y = 0; y + 11 <= H; ++y)
    for (int x = 0; x + 11 <= W; ++x, ++count) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const std::size_t k = offset + static_cast<std::size_t>((y + i) * W + x + j);
          const double w = g[i][j] / total;
          ma += w * a[k];
          mb += w * b[k];
          saa += w * a[k] * a[k];
          sbb += w * b[k] * b[k];
          sab += w * a[k] * b[k];
        }
      acc += ((2 * ma * mb + C1) * (2 * (sab - ma * mb) + C2)) /
             ((ma * ma + mb * mb + C1) * (saa - ma * ma + sbb - mb * mb + C2));
    }
  return acc / count;
}

double ssim_error(Rng& rng) {
  const int H = 16, W = 14;
  double worst = 0;
  for (int trial = 0; trial < 3; ++trial) {
    const auto a = uniform({3, H, W}, rng, DType::F64);
    const auto noise = uniform({3, H, W}, rng, DType::F64, -0.2, 0.2);
    const auto b = add(a, noise);
    const auto av = a.to_vector(), bv = b.to_vector();
    double want = 0;
    for (int c = 0; c < 3; ++c) want += ssim_plane(av, bv, static_cast<std::size_t>(c * H * W), H, W) / 3;
    worst = std::max(worst, std::abs(ssim(a, b) - want));
  }
  return worst;
}

Outcome exact_oracles() {
  Rng rng(2);
  const bool shuffle = pixel_shuffle_exact(rng);
  const bool warp = warp_shift_exact(rng);
  const double bd = bd_error(rng), p = psnr_error(rng), s = ssim_error(rng);
  Outcome o;
  o.pass = shuffle && warp && bd < 1e-6 && p < 1e-9 && s < 1e-6;
  std::ostringstream os;
  os << "pixel_shuffle " << (shuffle ? "bit-exact" : "MISMATCH") << ", flow_warp shift " << (warp ? "bit-exact" : "MISMATCH")
     << ", BD " << std::scientific << std::setprecision(1) << bd << ", PSNR " << p << ", SSIM " << s;
  o.detail = os.str();
  return o;
}

// ---- 3 ----------------------------------------------------------------------------

Outcome reachability() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cases = run_reachability_suite(0, 6);
  const double seconds = since(t0);
  Outcome o;
  o.pass = seconds < 120;
  std::string labels;
  for (const auto& c : cases) {
    bool ok = c.matches;
    if (c.config.propagation == PropagationMode::Coupled) ok = ok && c.head_channels == c.config.channels;
    o.pass = o.pass && ok;
    labels += " " + c.label + (ok ? "" : "(MISMATCH)");
  }
  o.detail = std::to_string(cases.size()) + " modes:" + labels + ", " + fixed(seconds, 1) + " s";
  return o;
}

// ---- 4 ----------------------------------------------------------------------------

Outcome degeneracy() {
  const auto r = check_refill_degeneracy(0, 5);
  return {r.sequences == 5 && r.bit_identical == 5,
          std::to_string(r.bit_identical) + "/" + std::to_string(r.sequences) + " sequences bit-identical"};
}

// ---- 5 ----------------------------------------------------------------------------

struct OverfitRun {
  double psnr = 0;
  double seconds = 0;
  ParameterList params;
};

OverfitRun overfit_once() {
  SynthSpec s;
  s.seed = 1;
  s.frames = 5;
  s.height = s.width = 32;
  s.motion = {Motion{1, 0}};
  const auto clip = synth_sequence(s);
  const auto lr = degrade(clip.clean, DegradationSpec::bd());
  const Dataset data{{lr, clip.clean}};
  auto model = VsrModel::create(ModelConfig::desk());
  auto cfg = TrainConfig::desk();
  // The LR frames are 8x8, so the patch covers the whole frame.
  cfg.patch = 8;
  OverfitRun run;
  const auto t0 = std::chrono::steady_clock::now();
  train(model, data, cfg);
  run.seconds = since(t0);
  std::vector<Tensor> x;
  for (const auto& f : lr.frames) x.push_back(reshape(f, {1, 3, 8, 8}));
  const auto y = model.infer(x);
  for (int i = 0; i < 5; ++i) run.psnr += psnr(reshape(y[static_cast<std::size_t>(i)], {3, 32, 32}), clip.clean.frames[static_cast<std::size_t>(i)]) / 5;
  run.params = model.parameters();
  return run;
}

Outcome overfit() {
  const auto a = overfit_once();
  const auto b = overfit_once();
  bool same = a.params.size() == b.params.size() && a.psnr == b.psnr;
  for (std::size_t i = 0; same && i < a.params.size(); ++i) same = a.params[i].tensor.same_bits(b.params[i].tensor);
  Outcome o;
  o.pass = a.psnr >= 35 && same && a.seconds < 600;
  o.detail = "train PSNR " + fixed(a.psnr) + " dB after 2000 iters, " + fixed(a.seconds, 1) + " s, rerun " +
             (same ? "bit-identical" : "DIFFERS");
  return o;
}

// ---- 6 ----------------------------------------------------------------------------

std::map<std::string, SummaryRow> run_study(Study study, const fs::path& base) {
  auto spec = ExperimentSpec::desk(study);
  spec.output_dir = base / to_string(study);
  // Studies share trained models through one cache; reuse is keyed on the full recipe.
  fs::create_directories(base / "models");
  fs::create_directories(spec.output_dir);
  if (!fs::exists(spec.output_dir / "models")) fs::create_directory_symlink(fs::absolute(base / "models"), spec.output_dir / "models");
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = run_ablation(spec, [&](const std::string& line) {
    std::cerr << "[" << fixed(since(t0), 0) << " s] " << to_string(study) << ": " << line << "\n";
  });
  if (!result.all_ok()) throw Error(to_string(study) + " ablation had failing cells");
  std::map<std::string, SummaryRow> out;
  for (const auto& row : summarize(result.rows)) out[row.value] = row;
  return out;
}

Outcome ablation_trends(const fs::path& base) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto seg = run_study(Study::Segments, base);
  const auto prop = run_study(Study::Propagation, base);
  const auto align = run_study(Study::Alignment, base);
  const double a = -seg.at("4").delta_to_reference;
  const double b = prop.at("bidirectional").first_quarter_psnr - prop.at("unidirectional").first_quarter_psnr;
  const double c = align.at("feature").mean_psnr - align.at("none").mean_psnr;
  Outcome o;
  o.pass = a > 0 && b >= 0 && c >= 0;
  o.detail = "(a) K=1 - K=4 " + fixed(a) + " dB, (b) bidirectional - unidirectional first quarter " + fixed(b) +
             " dB, (c) feature - none " + fixed(c) + " dB; 3 seeds, " + fixed(since(t0), 0) + " s";
  return o;
}

// ---- 7 ----------------------------------------------------------------------------

Outcome parameter_accounting() {
  const auto reports = parameter_reports(ModelConfig::paper_scale(), "paper");
  const auto& basic = reports.at(0);
  const double main = static_cast<double>(basic.counts.main);
  const bool within = std::abs(main - 4.9e6) <= 0.2 * 4.9e6;
  const bool block = residual_block_parameters(64) == 73856 && basic.residual_block == 73856;
  Outcome o;
  o.pass = within && block;
  o.detail = "paper main " + std::to_string(basic.counts.main) + " (" + fixed(100 * (main / 4.9e6 - 1), 1) +
             "% vs 4.9M), flow " + std::to_string(basic.counts.flow) + ", refill extractor " +
             std::to_string(reports.at(1).counts.extractor) + ", residual block " + std::to_string(basic.residual_block);
  return o;
}

// ---- 8 ----------------------------------------------------------------------------

Outcome keyframe_cost() {
  const auto t = time_keyframes(ModelConfig::desk(), 100, 16, 3);
  return {t.monotone(), "100 frames: interval 1 " + fixed(t.interval1) + " s, interval 5 " + fixed(t.interval5) +
                            " s, no refill " + fixed(t.no_refill) + " s (min of 3)"};
}

}  // namespace

int main(int argc, char** argv) {
  const char* dir = std::getenv("VSR_ACCEPTANCE_DIR");
  const fs::path base = dir && *dir ? fs::path(dir) : fs::path("acceptance_out");
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient suite", gradient_suite},
      {"exact oracles", exact_oracles},
      {"reachability matrices", reachability},
      {"refill degeneracy", degeneracy},
      {"overfit", overfit},
      {"ablation trends", [&] { return ablation_trends(base); }},
      {"parameter accounting", parameter_accounting},
      {"keyframe cost", keyframe_cost},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  if (selected.empty())
    for (int i = 1; i <= static_cast<int>(criteria.size()); ++i) selected.push_back(i);

  int failures = 0;
  for (int n : selected) {
    if (n < 1 || n > static_cast<int>(criteria.size())) {
      std::cerr << "no criterion " << n << "\n";
      return 2;
    }
    const auto& [name, fn] = criteria[static_cast<std::size_t>(n - 1)];
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << "criterion " << n << " " << name << ": " << (o.pass ? "PASS" : "FAIL") << " - " << o.detail << std::endl;
  }
  return failures ? 1 : 0;
}
