#include <doctest.h>

#include <cmath>
#include <map>

#include "test_util.hpp"
#include "vsr/data.hpp"
#include "vsr/error.hpp"
#include "vsr/flow.hpp"
#include "vsr/ops.hpp"
#include "vsr/training.hpp"

using namespace vsr;

namespace {

Tensor batched(const Tensor& frame) { return reshape(frame, {1, frame.dim(0), frame.dim(1), frame.dim(2)}); }

double mse(const Tensor& a, const Tensor& b) {
  const auto d = sub(a, b);
  return mean(d * d).item();
}

// Pairs (frame t, frame t+1) from clips translating by (2, 0) per step.
std::vector<std::pair<Tensor, Tensor>> translation_pairs(std::uint64_t seed, int clips, int size) {
  std::vector<std::pair<Tensor, Tensor>> out;
  for (int c = 0; c < clips; ++c) {
    SynthSpec s;
    s.seed = seed + static_cast<std::uint64_t>(c);
    s.frames = 2;
    s.height = s.width = size;
    s.motion = {Motion{2, 0}};
    s.max_frequency = 0.15;
    const auto clip = synth_sequence(s);
    out.emplace_back(batched(clip.clean.frames[0]), batched(clip.clean.frames[1]));
  }
  return out;
}

}  // namespace

TEST_SUITE("flow-estimation") {

TEST_CASE("pyramid flow net contract") {
  Rng rng(1);
  auto net = PyramidFlowNet::create({}, rng, DType::F32);
  CHECK(net.levels() == 3);
  CHECK(net.extent_multiple() == 4);
  Rng data(2);
  const auto a = test::random_tensor({1, 3, 64, 64}, data, DType::F32, 0, 1);
  const auto b = test::random_tensor({1, 3, 64, 64}, data, DType::F32, 0, 1);
  CHECK(estimate_flow(net, a, b).shape() == Shape{1, 2, 64, 64});
  CHECK_THROWS_AS(net.estimate(slice(a, 2, 0, 30), slice(b, 2, 0, 30)), ShapeError);
  CHECK_THROWS_AS(net.estimate(a, slice(b, 2, 0, 60)), ShapeError);
  CHECK(estimate_flow(net, a, b).same_bits(estimate_flow(net, a, b)));

  // Zeroing the last conv of every level makes each residual, and so the flow, zero.
  ParameterList params;
  net.collect("flow", params);
  std::map<std::string, int> last;
  for (const auto& p : params) {
    const auto level = p.name.substr(0, p.name.find(".conv"));
    const int idx = std::stoi(p.name.substr(p.name.find(".conv") + 5));
    last[level] = std::max(last[level], idx);
  }
  for (auto& p : params) {
    const auto level = p.name.substr(0, p.name.find(".conv"));
    if (std::stoi(p.name.substr(p.name.find(".conv") + 5)) == last[level])
      for (auto& v : p.tensor.data<float>()) v = 0;
  }
  for (double v : net.estimate(a, a).to_vector()) CHECK(v == 0.0);
}

TEST_CASE("gradient reaches the flow net through warping") {
  Rng rng(3);
  auto net = PyramidFlowNet::create({}, rng, DType::F64);
  ParameterList params;
  net.collect("flow", params);
  for (auto& p : params) p.tensor.set_requires_grad(true);
  const auto a = test::random_tensor({1, 3, 16, 16}, rng, DType::F64, 0, 1);
  const auto b = test::random_tensor({1, 3, 16, 16}, rng, DType::F64, 0, 1);
  const auto h = test::random_tensor({1, 4, 16, 16}, rng);
  const auto warped = flow_warp(h, net.estimate(a, b));
  mean(warped * warped).backward();
  int nonzero = 0;
  for (const auto& p : params)
    if (p.tensor.has_grad())
      for (double g : p.tensor.grad().to_vector()) nonzero += g != 0;
  CHECK(nonzero > 0);
}

TEST_CASE("ground-truth flow") {
  SynthSpec s;
  s.seed = 4;
  s.frames = 4;
  s.height = s.width = 24;
  s.motion = {Motion{1, 0}};
  const auto clip = synth_sequence(s);
  const GroundTruthFlow gt{{clip.clean.offsets}};
  for (double v : ground_truth_flow(gt, 2, 2, 24, 24).to_vector()) CHECK(v == 0.0);
  const auto f = ground_truth_flow(gt, 1, 2, 24, 24, DType::F64).to_vector();
  for (int i = 0; i < 24 * 24; ++i) {
    CHECK(f[static_cast<std::size_t>(i)] == 1.0);
    CHECK(f[static_cast<std::size_t>(24 * 24 + i)] == 0.0);
  }
  CHECK_THROWS_AS(ground_truth_flow(gt, 0, 4, 24, 24), Error);
  CHECK_THROWS_AS(ground_truth_flow(GroundTruthFlow{}, 0, 1, 24, 24), Error);
}

TEST_CASE("ground-truth flow round trip on integer motion") {
  SynthSpec s;
  s.seed = 9;
  s.frames = 5;
  s.height = s.width = 32;
  s.motion = {Motion{2, -1}, Motion{-3, 0}, Motion{1, 4}, Motion{0, -2}};
  const auto clip = synth_sequence(s);
  const GroundTruthFlow gt{{clip.clean.offsets}};
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      const auto flow = gt.flow(i, j, 32, 32, DType::F32);
      const auto warped = flow_warp(batched(clip.clean.frames[j]), flow).to_vector();
      const auto want = clip.clean.frames[i].to_vector();
      const int du = static_cast<int>(clip.clean.offsets[j][0] - clip.clean.offsets[i][0]);
      const int dv = static_cast<int>(clip.clean.offsets[j][1] - clip.clean.offsets[i][1]);
      double worst = 0;
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 32; ++y)
          for (int x = 0; x < 32; ++x) {
            if (x + du < 0 || x + du >= 32 || y + dv < 0 || y + dv >= 32) continue;
            const auto k = static_cast<std::size_t>((c * 32 + y) * 32 + x);
            worst = std::max(worst, std::abs(warped[k] - want[k]));
          }
      CHECK(worst < 1e-5);
    }
}

TEST_CASE("trained pyramid net recovers a global translation") {
  Rng rng(5);
  auto net = PyramidFlowNet::create({}, rng, DType::F32);
  ParameterList params;
  net.collect("flow", params);
  for (auto& p : params) p.tensor.set_requires_grad(true);
  Adam adam({{"flow", params}});
  const auto train = translation_pairs(100, 8, 32);
  const double lr = 2e-3;
  for (int it = 0; it < 300; ++it) {
    const auto& [a, b] = train[static_cast<std::size_t>(it) % train.size()];
    adam.zero_grad();
    const auto flow = net.estimate(a, b);
    auto target = Tensor::full(flow.shape(), 0.0);
    auto td = target.data<float>();
    std::fill(td.begin(), td.begin() + 32 * 32, 2.0f);
    charbonnier_loss(flow, target, 1e-3).backward();
    const double lrs[1] = {cosine_lr(lr, it, 300)};
    adam.step(lrs);
  }
  NoGradGuard guard;
  double epe = 0;
  int count = 0;
  double warped_mse = 0, raw_mse = 0;
  for (const auto& [a, b] : translation_pairs(900, 4, 32)) {
    const auto f = net.estimate(a, b).to_vector();
    for (int i = 0; i < 32 * 32; ++i, ++count) {
      epe += std::hypot(f[static_cast<std::size_t>(i)] - 2.0, f[static_cast<std::size_t>(32 * 32 + i)]);
    }
    // Compare away from the right edge, where zero padding enters.
    const auto crop = [](const Tensor& t) { return slice(t, 3, 0, 28); };
    warped_mse += mse(crop(flow_warp(b, net.estimate(a, b))), crop(a));
    raw_mse += mse(crop(b), crop(a));
  }
  MESSAGE("mean end-point error " << epe / count);
  CHECK(epe / count < 0.5);
  CHECK(warped_mse < raw_mse);
}

TEST_CASE("sign convention of the ground-truth source") {
  SynthSpec s;
  s.seed = 12;
  s.frames = 3;
  s.height = s.width = 32;
  s.motion = {Motion{1.5, -0.5}};
  const auto clip = synth_sequence(s);
  const GroundTruthFlow gt{{clip.clean.offsets}};
  for (int i = 0; i + 1 < 3; ++i) {
    const auto cur = batched(clip.clean.frames[i]);
    const auto next = batched(clip.clean.frames[i + 1]);
    const auto warped = flow_warp(next, gt.flow(i, i + 1, 32, 32, DType::F32));
    const auto inner = [](const Tensor& t) { return slice(slice(t, 2, 2, 28), 3, 2, 28); };
    CHECK(mse(inner(warped), inner(cur)) < mse(inner(next), inner(cur)));
  }
}

TEST_CASE("flow color wheel") {
  const auto flow = Tensor::from_data({2, 1, 4}, std::vector<double>{0, 2, 0, -1, 0, 0, 1, 0});
  const auto rgb = flow_to_color(flow, 1.0).to_vector();
  // Pixels: zero, +x (clipped), +y, -x.
  const auto px = [&](int i) { return std::array<double, 3>{rgb[i], rgb[4 + i], rgb[8 + i]}; };
  CHECK(px(0) == std::array<double, 3>{1, 1, 1});
  CHECK(px(1) == std::array<double, 3>{1, 0, 0});
  CHECK(px(3)[0] == doctest::Approx(0.0));
  CHECK(px(3)[1] == doctest::Approx(1.0));
  CHECK(px(3)[2] == doctest::Approx(1.0));
  CHECK(px(2)[2] == doctest::Approx(0.0));
  // Auto scale saturates the largest vector.
  CHECK(flow_to_color(reshape(flow, {1, 2, 1, 4})).to_vector()[4 + 1] == doctest::Approx(0.0));
  CHECK_THROWS_AS(flow_to_color(Tensor::zeros({3, 2, 2})), ShapeError);
}

}
