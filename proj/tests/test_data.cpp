#include <doctest.h>

#include <cmath>
#include <fstream>

#include "test_util.hpp"
#include "vsr/data.hpp"
#include "vsr/error.hpp"
#include "vsr/ops.hpp"

using namespace vsr;

namespace {

std::int64_t mirror(std::int64_t i, std::int64_t n) {
  while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - 1 - i;
  return i;
}

// Dense 2D Gaussian convolution with mirrored borders, then every 4th pixel from 0.
std::vector<double> bd_oracle(const Tensor& img, double sigma, int size) {
  const auto C = img.dim(0), H = img.dim(1), W = img.dim(2);
  const int r = size / 2;
  std::vector<double> g;
  double total = 0;
  for (int i = -r; i <= r; ++i)
    for (int j = -r; j <= r; ++j) {
      g.push_back(std::exp(-(i * i + j * j) / (2 * sigma * sigma)));
      total += g.back();
    }
  const auto v = img.to_vector();
  std::vector<double> out;
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t y = 0; y < H; y += 4)
      for (std::int64_t x = 0; x < W; x += 4) {
        double acc = 0;
        for (int i = -r; i <= r; ++i)
          for (int j = -r; j <= r; ++j)
            acc += g[static_cast<std::size_t>((i + r) * size + j + r)] / total *
                   v[static_cast<std::size_t>((c * H + mirror(y + i, H)) * W + mirror(x + j, W))];
        out.push_back(acc);
      }
  return out;
}

double keys(double x) {
  x = std::abs(x);
  if (x <= 1) return 1.5 * x * x * x - 2.5 * x * x + 1;
  if (x < 2) return -0.5 * x * x * x + 2.5 * x * x - 4 * x + 2;
  return 0;
}

// Antialiased cubic resampling of one row by direct summation over every source pixel.
std::vector<double> cubic_row_oracle(const std::vector<double>& src, double scale) {
  const auto n = static_cast<std::int64_t>(src.size());
  const auto m = static_cast<std::int64_t>(std::llround(static_cast<double>(n) * scale));
  std::vector<double> out;
  for (std::int64_t o = 0; o < m; ++o) {
    const double u = (static_cast<double>(o) + 0.5) / scale - 0.5;
    double acc = 0, wsum = 0;
    for (std::int64_t j = -3 * n; j < 4 * n; ++j) {
      const double w = keys((u - static_cast<double>(j)) * std::min(scale, 1.0));
      if (w == 0) continue;
      acc += w * src[static_cast<std::size_t>(mirror(j, n))];
      wsum += w;
    }
    out.push_back(acc / wsum);
  }
  return out;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

// Gaussian-window SSIM of one plane over all valid 11x11 positions.
double ssim_plane_oracle(const std::vector<double>& a, const std::vector<double>& b, int H, int W) {
  double g[11][11], total = 0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) total += g[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * 1.5 * 1.5));
  const double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
  double acc = 0;
  int count = 0;
  for (int y = 0; y + 11 <= H; ++y)
    for (int x = 0; x + 11 <= W; ++x, ++count) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const double w = g[i][j] / total, va = a[(y + i) * W + x + j], vb = b[(y + i) * W + x + j];
          ma += w * va;
          mb += w * vb;
          saa += w * va * va;
          sbb += w * vb * vb;
          sab += w * va * vb;
        }
      const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
      acc += ((2 * ma * mb + C1) * (2 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
    }
  return acc / count;
}

Tensor image(const std::vector<double>& plane, int H, int W) {
  std::vector<double> v;
  for (int c = 0; c < 3; ++c) v.insert(v.end(), plane.begin(), plane.end());
  (void)H;
  (void)W;
  return Tensor::from_data({3, H, W}, std::move(v));
}

}  // namespace

TEST_SUITE("degradation-data") {

TEST_CASE("BD matches dense convolution and subsampling") {
  Rng rng(1);
  auto delta = Tensor::zeros({3, 20, 20}, DType::F64);
  delta.data<double>()[7 * 20 + 9] = 1;
  delta.data<double>()[400 + 0 * 20 + 0] = 1;
  delta.data<double>()[800 + 19 * 20 + 18] = 1;
  for (const auto& img : {delta, test::random_tensor({3, 20, 24}, rng, DType::F64, 0, 1)}) {
    const auto out = degrade_frame(img, DegradationSpec::bd());
    CHECK(out.shape() == Shape{3, img.dim(1) / 4, img.dim(2) / 4});
    CHECK(max_abs_diff(out.to_vector(), bd_oracle(img, 1.6, 13)) < 1e-6);
  }
  const auto spec = DegradationSpec::bd();
  CHECK(spec.sigma == 1.6);
  CHECK(spec.kernel_size == 13);
  CHECK(spec.scale == 4);
}

TEST_CASE("degradations keep constants and are linear") {
  Rng rng(2);
  for (const auto& spec : {DegradationSpec::bd(), DegradationSpec::bi()}) {
    for (double v : degrade_frame(Tensor::full({3, 16, 16}, 0.37, DType::F64), spec).to_vector())
      CHECK(v == doctest::Approx(0.37).epsilon(1e-12));
    const auto x = test::random_tensor({3, 16, 16}, rng), y = test::random_tensor({3, 16, 16}, rng);
    const auto lhs = degrade_frame(add(scalar_mul(x, 0.3), scalar_mul(y, -1.7)), spec).to_vector();
    const auto rhs = add(scalar_mul(degrade_frame(x, spec), 0.3), scalar_mul(degrade_frame(y, spec), -1.7)).to_vector();
    CHECK(max_abs_diff(lhs, rhs) < 1e-6);
    CHECK_THROWS_AS(degrade_frame(Tensor::zeros({3, 18, 16}), spec), ShapeError);
  }
}

TEST_CASE("gaussian kernel and reflection") {
  const auto k = gaussian_kernel(1.6, 13);
  double total = 0;
  for (double v : k) total += v;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(k[6] > k[5]);
  CHECK(k[0] == doctest::Approx(k[12]));
  for (std::int64_t i = -9; i < 15; ++i) CHECK(reflect_index(i, 5) == mirror(i, 5));
}

TEST_CASE("bicubic resize") {
  Rng rng(3);
  const auto x = test::random_tensor({3, 6, 7}, rng);
  CHECK(bicubic_resize(x, 1).same_bits(x));
  for (double v : bicubic_resize(Tensor::full({1, 8, 8}, 0.6, DType::F64), 0.25).to_vector())
    CHECK(v == doctest::Approx(0.6).epsilon(1e-12));
  for (double v : bicubic_resize(Tensor::full({1, 4, 4}, 0.6, DType::F64), 4).to_vector())
    CHECK(v == doctest::Approx(0.6).epsilon(1e-12));

  std::vector<double> ramp;
  for (int i = 0; i < 16; ++i) ramp.push_back(i / 15.0);
  const auto half = bicubic_resize(Tensor::from_data({1, 1, 16}, ramp), 0.5).to_vector();
  CHECK(max_abs_diff(half, cubic_row_oracle(ramp, 0.5)) < 1e-6);

  std::vector<double> noise;
  for (int i = 0; i < 24; ++i) noise.push_back(rng.uniform());
  // Identical rows reduce the separable resize to the row oracle.
  std::vector<double> rows;
  for (int r = 0; r < 4; ++r) rows.insert(rows.end(), noise.begin(), noise.end());
  for (double s : {0.25, 4.0}) {
    const auto out = bicubic_resize(Tensor::from_data({1, 4, 24}, rows), s);
    const auto want = cubic_row_oracle(noise, s);
    const auto got = out.to_vector();
    for (std::int64_t r = 0; r < out.dim(1); ++r)
      CHECK(max_abs_diff({got.begin() + r * out.dim(2), got.begin() + (r + 1) * out.dim(2)}, want) < 1e-6);
  }
}

TEST_CASE("BI degradation is a quarter-scale bicubic") {
  Rng rng(4);
  const auto x = test::random_tensor({3, 16, 12}, rng, DType::F64, 0, 1);
  const auto lr = degrade_frame(x, DegradationSpec::bi());
  CHECK(lr.shape() == Shape{3, 4, 3});
  CHECK(lr.same_bits(bicubic_resize(x, 0.25)));
}

TEST_CASE("degrade carries motion metadata to LR pixels") {
  SynthSpec s;
  s.frames = 3;
  s.height = s.width = 16;
  s.motion = {Motion{4, -2}};
  const auto lr = degrade(synth_sequence(s).clean, DegradationSpec::bd());
  REQUIRE(lr.offsets.size() == 3);
  CHECK(lr.offsets[1][0] - lr.offsets[0][0] == 1.0);
  CHECK(lr.offsets[1][1] - lr.offsets[0][1] == -0.5);
}

TEST_CASE("psnr") {
  Rng rng(5);
  const auto a = test::random_tensor({3, 8, 8}, rng, DType::F64, 0.2, 0.8);
  CHECK(psnr(a, a) == kPsnrCap);
  CHECK(psnr(a, add(a, Tensor::full({3, 8, 8}, 0.1, DType::F64))) == doctest::Approx(20.0).epsilon(1e-9));
  std::vector<double> q, q2;
  for (int i = 0; i < 3 * 64; ++i) {
    q.push_back(std::floor(rng.uniform() * 200) / 255.0);
    q2.push_back(q.back() + 16 / 255.0);
  }
  const auto qa = Tensor::from_data({3, 8, 8}, q), qb = Tensor::from_data({3, 8, 8}, q2);
  CHECK(std::abs(psnr(qa, qb) - 20 * std::log10(255.0 / 16)) < 1e-9);
  CHECK(psnr(qa, qb) == doctest::Approx(24.05).epsilon(1e-3));
  const auto b = test::random_tensor({3, 8, 8}, rng, DType::F64, 0, 1);
  CHECK(psnr(a, b) == psnr(b, a));
  CHECK_THROWS_AS(psnr(a, Tensor::zeros({3, 8, 4}, DType::F64)), ShapeError);

  double previous = kPsnrCap;
  for (double amp : {0.01, 0.02, 0.05, 0.1, 0.2}) {
    Rng noise(6);
    const auto n = add(a, test::random_tensor({3, 8, 8}, noise, DType::F64, -amp, amp));
    const double p = psnr(a, n);
    CHECK(p < previous);
    previous = p;
  }
}

TEST_CASE("Y-channel psnr follows BT.601") {
  Rng rng(7);
  const auto a = test::random_tensor({3, 6, 6}, rng, DType::F64, 0, 1);
  const auto b = test::random_tensor({3, 6, 6}, rng, DType::F64, 0, 1);
  const auto av = a.to_vector(), bv = b.to_vector();
  double se = 0;
  for (int i = 0; i < 36; ++i) {
    auto y = [&](const std::vector<double>& v) {
      return (65.481 * v[i] + 128.553 * v[36 + i] + 24.966 * v[72 + i] + 16) / 255;
    };
    se += (y(av) - y(bv)) * (y(av) - y(bv));
  }
  CHECK(std::abs(psnr(a, b, MetricMode::Y) - 10 * std::log10(36 / se)) < 1e-9);
  const auto ya = rgb_to_y(a).to_vector();
  CHECK(ya[0] == doctest::Approx((65.481 * av[0] + 128.553 * av[36] + 24.966 * av[72] + 16) / 255).epsilon(1e-12));
  CHECK(parse_metric_mode("y") == MetricMode::Y);
  CHECK(parse_metric_mode("rgb") == MetricMode::RGB);
  CHECK_THROWS_AS(parse_metric_mode("lab"), ConfigError);
}

TEST_CASE("ssim") {
  Rng rng(8);
  const auto a = test::random_tensor({3, 16, 16}, rng, DType::F64, 0, 1);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<double> checker, inverse;
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      checker.push_back(((x / 2 + y) % 2) ? 1.0 : 0.0);
      inverse.push_back(1.0 - checker.back());
    }
  const double want = ssim_plane_oracle(checker, inverse, 16, 16);
  CHECK(std::abs(ssim(image(checker, 16, 16), image(inverse, 16, 16)) - want) < 1e-6);
  CHECK(want < 0);

  const double m1 = 0.3, m2 = 0.7, C1 = 1e-4;
  const double closed = (2 * m1 * m2 + C1) / (m1 * m1 + m2 * m2 + C1);
  const auto c1 = Tensor::full({3, 12, 12}, m1, DType::F64), c2 = Tensor::full({3, 12, 12}, m2, DType::F64);
  CHECK(std::abs(ssim(c1, c2) - closed) < 1e-6);

  std::vector<double> pa, pb;
  for (int i = 0; i < 14 * 13; ++i) {
    pa.push_back(rng.uniform());
    pb.push_back(0.5 * pa.back() + 0.5 * rng.uniform());
  }
  const auto ta = Tensor::from_data({1, 14, 13}, pa), tb = Tensor::from_data({1, 14, 13}, pb);
  CHECK(std::abs(ssim(ta, tb) - ssim_plane_oracle(pa, pb, 14, 13)) < 1e-6);
  CHECK_THROWS_AS(ssim(a, Tensor::zeros({3, 16, 12}, DType::F64)), ShapeError);
}

TEST_CASE("frame directories") {
  const auto dir = test::scratch_dir("frames");
  Rng rng(9);
  VideoSequence seq;
  for (int i = 0; i < 3; ++i) seq.frames.push_back(test::random_tensor({3, 8, 6}, rng, DType::F32, -0.1, 1.1));
  save_frames(seq, dir / "a");
  CHECK(std::filesystem::exists(dir / "a" / "frame_00000000.png"));
  CHECK(frame_filename(12) == "frame_00000012.png");
  const auto once = load_frames(dir / "a");
  save_frames(once, dir / "b");
  const auto twice = load_frames(dir / "b");
  REQUIRE(twice.length() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(twice.frames[i].same_bits(once.frames[i]));
    for (double v : once.frames[i].to_vector()) {
      CHECK(v >= 0);
      CHECK(v <= 1);
      CHECK(std::abs(v * 255 - std::round(v * 255)) < 1e-4);
    }
  }
  // Round half up on quantization.
  write_png(dir / "half.png", Tensor::full({3, 1, 2}, 0.5 / 255 + 100.0 / 255));
  CHECK(read_png(dir / "half.png").to_vector()[0] * 255 == doctest::Approx(101));

  SUBCASE("gap in numbering") {
    std::filesystem::remove(dir / "a" / "frame_00000001.png");
    std::filesystem::copy_file(dir / "b" / "frame_00000001.png", dir / "a" / "frame_00000003.png");
    std::filesystem::remove(dir / "a" / "frame_00000002.png");
    std::filesystem::copy_file(dir / "b" / "frame_00000001.png", dir / "a" / "frame_00000001.png");
    try {
      load_frames(dir / "a");
      FAIL("expected MissingFrameError");
    } catch (const MissingFrameError& e) {
      CHECK(e.index() == 2);
    }
  }
  SUBCASE("mixed extents") {
    write_png(dir / "b" / "frame_00000003.png", Tensor::zeros({3, 8, 5}));
    CHECK_THROWS_AS(load_frames(dir / "b"), ShapeError);
  }
  SUBCASE("unreadable file") {
    std::ofstream(dir / "b" / "frame_00000003.png") << "not a png";
    CHECK_THROWS_AS(load_frames(dir / "b"), IoError);
  }
  SUBCASE("missing directory") { CHECK_THROWS_AS(load_frames(dir / "nope"), IoError); }
}

TEST_CASE("synthetic sequences") {
  SynthSpec s;
  s.seed = 10;
  s.frames = 4;
  s.height = s.width = 16;
  s.motion = {Motion{0, 0}};
  auto still = synth_sequence(s);
  for (int i = 1; i < 4; ++i) CHECK(still.clean.frames[i].same_bits(still.clean.frames[0]));

  s.motion = {Motion{1, 0}};
  s.occluders = {Occluder{2, 4, 4, 6, 5, 0.5}};
  const auto moving = synth_sequence(s);
  for (int i = 0; i + 1 < 4; ++i) {
    const auto a = moving.clean.frames[i].to_vector(), b = moving.clean.frames[i + 1].to_vector();
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 16; ++y)
        for (int x = 0; x + 1 < 16; ++x) CHECK(b[(c * 16 + y) * 16 + x + 1] == a[(c * 16 + y) * 16 + x]);
  }
  const auto obs = moving.observed.frames[2].to_vector();
  CHECK(obs[5 * 16 + 6] == doctest::Approx(0.5));
  CHECK(moving.observed.frames[1].same_bits(moving.clean.frames[1]));
  CHECK_FALSE(moving.observed.frames[2].same_bits(moving.clean.frames[2]));
  CHECK(moving.clean.offsets[3][0] - moving.clean.offsets[0][0] == 3.0);
  for (double v : moving.clean.frames[0].to_vector()) {
    CHECK(v >= 0);
    CHECK(v <= 1);
  }

  s.motion = {Motion{5, 0}};
  CHECK_THROWS_AS(synth_sequence(s), ConfigError);
  s.motion = {Motion{1, 0}};
  s.occluders = {Occluder{4, 0, 0, 2, 2, 0.5}};
  CHECK_THROWS_AS(synth_sequence(s), ConfigError);
}

}
