#include <doctest.h>

#include "test_util.hpp"
#include "vsr/error.hpp"
#include "vsr/experiments.hpp"
#include "vsr/model.hpp"
#include "vsr/ops.hpp"
#include "vsr/training.hpp"

using namespace vsr;

namespace {

ModelConfig tiny(PropagationMode mode = PropagationMode::Bidirectional) {
  ModelConfig c;
  c.channels = 4;
  c.blocks_per_branch = 1;
  c.extractor_blocks = 1;
  c.propagation = mode;
  return c;
}

std::vector<Tensor> frames(Rng& rng, int t, int h = 8, int w = 8) {
  std::vector<Tensor> out;
  for (int i = 0; i < t; ++i) out.push_back(test::random_tensor({1, 3, h, w}, rng, DType::F32, 0, 1));
  return out;
}

bool outputs_equal(const std::vector<Tensor>& a, const std::vector<Tensor>& b, int i) {
  return a[static_cast<std::size_t>(i)].same_bits(b[static_cast<std::size_t>(i)]);
}

}  // namespace

TEST_SUITE("vsr-models") {

TEST_CASE("single frame in every mode") {
  Rng rng(1);
  const auto x = frames(rng, 1);
  for (auto mode : {PropagationMode::Local, PropagationMode::Unidirectional, PropagationMode::Bidirectional,
                    PropagationMode::Coupled}) {
    for (auto align : {AlignmentMode::None, AlignmentMode::Image, AlignmentMode::Feature}) {
      auto cfg = tiny(mode);
      cfg.alignment = align;
      const auto y = VsrModel::create(cfg).infer(x);
      REQUIRE(y.size() == 1);
      CHECK(y[0].shape() == Shape{1, 3, 32, 32});
      for (double v : y[0].to_vector()) {
        CHECK(v >= 0);
        CHECK(v <= 1);
      }
    }
  }
}

TEST_CASE("outputs are four times the input extents") {
  Rng rng(2);
  const auto x = frames(rng, 3, 8, 12);
  auto cfg = tiny();
  cfg.refill = true;
  for (const auto& y : VsrModel::create(cfg).forward(x)) CHECK(y.shape() == Shape{1, 3, 32, 48});
  CHECK_THROWS(VsrModel::create(cfg).forward(std::vector<Tensor>{}));
  auto bad = x;
  bad[1] = test::random_tensor({1, 3, 8, 8}, rng, DType::F32);
  CHECK_THROWS_AS(VsrModel::create(cfg).forward(bad), ShapeError);
}

TEST_CASE("unidirectional outputs ignore future frames") {
  Rng rng(3);
  const auto model = VsrModel::create(tiny(PropagationMode::Unidirectional));
  const auto x = frames(rng, 5);
  const auto base = model.infer(x);
  auto perturbed = x;
  perturbed[3] = test::random_tensor({1, 3, 8, 8}, rng, DType::F32, 0, 1);
  const auto y = model.infer(perturbed);
  for (int i = 0; i < 3; ++i) CHECK(outputs_equal(base, y, i));
  CHECK_FALSE(outputs_equal(base, y, 3));
}

TEST_CASE("local segments are isolated") {
  Rng rng(4);
  auto cfg = tiny(PropagationMode::Local);
  cfg.segments = 2;
  const auto model = VsrModel::create(cfg);
  const auto x = frames(rng, 10);
  const auto base = model.infer(x);
  auto perturbed = x;
  perturbed[7] = test::random_tensor({1, 3, 8, 8}, rng, DType::F32, 0, 1);
  const auto y = model.infer(perturbed);
  for (int i = 0; i < 5; ++i) CHECK(outputs_equal(base, y, i));
  CHECK_FALSE(outputs_equal(base, y, 7));
  CHECK(split_segments(10, 2) == std::vector<std::pair<int, int>>{{0, 5}, {5, 5}});
  CHECK(split_segments(7, 3) == std::vector<std::pair<int, int>>{{0, 3}, {3, 2}, {5, 2}});
}

TEST_CASE("reachability structure") {
  for (const auto& c : run_reachability_suite(5, 6)) {
    INFO(c.label);
    CHECK(c.matches);
  }
  auto cfg = tiny(PropagationMode::Local);
  cfg.segments = 3;
  const auto e = expected_reachability(cfg, 6);
  CHECK(e[1][0] == 1);
  CHECK(e[1][2] == 0);
  CHECK(e[5][4] == 1);
  const auto u = expected_reachability(tiny(PropagationMode::Unidirectional), 4);
  CHECK(u[3][0] == 1);
  CHECK(u[0][3] == 0);
}

TEST_CASE("keyframes") {
  CHECK(keyframes_by_interval(12, 5) == std::vector<int>{0, 5, 10});
  CHECK(keyframes_by_interval(3, 1) == std::vector<int>{0, 1, 2});
  CHECK(keyframes_by_count(100, 5) == std::vector<int>{0, 20, 40, 60, 80});
  CHECK(keyframes_by_count(10, 0).empty());
  auto cfg = tiny();
  cfg.refill = true;
  cfg.keyframe_interval = 5;
  CHECK(VsrModel::create(cfg).default_keyframes(12) == std::vector<int>{0, 5, 10});
}

TEST_CASE("refill degeneracy and keyframe influence") {
  const auto r = check_refill_degeneracy(6, 3);
  CHECK(r.bit_identical == r.sequences);

  Rng rng(7);
  auto cfg = tiny();
  cfg.refill = true;
  auto refill = VsrModel::create(cfg);
  randomize_parameters(refill.parameters(ParamGroupKind::Extractor), rng, 0.2);
  cfg.refill = false;
  auto plain = VsrModel::create(cfg);
  copy_matching_parameters(refill, plain);
  const auto x = frames(rng, 4);
  ForwardOptions opts;
  opts.keyframes = std::vector<int>{2};
  const auto a = refill.infer(x, opts);
  const auto b = plain.infer(x);
  CHECK_FALSE(outputs_equal(a, b, 2));
  opts.keyframes = std::vector<int>{};
  const auto c = refill.infer(x, opts);
  for (int i = 0; i < 4; ++i) CHECK(outputs_equal(c, b, i));
}

TEST_CASE("boundary step depends on the current frame only") {
  Rng rng(8);
  const auto model = VsrModel::create(tiny());
  BranchStep step;
  step.x = test::random_tensor({1, 3, 8, 8}, rng, DType::F32, 0, 1);
  step.h_neighbor = Tensor::zeros({1, 4, 8, 8});
  step.x_neighbor = test::random_tensor({1, 3, 8, 8}, rng, DType::F32, 0, 1);
  const auto a = model.propagate_branch(Direction::Backward, step);
  step.x_neighbor = test::random_tensor({1, 3, 8, 8}, rng, DType::F32, 0, 1);
  const auto b = model.propagate_branch(Direction::Backward, step);
  CHECK(a.h.same_bits(b.h));
  for (double v : a.aligned.to_vector()) CHECK(v == 0.0);
}

TEST_CASE("ground-truth alignment shifts the hidden state") {
  Rng rng(9);
  auto cfg = tiny();
  cfg.flow_source = FlowSourceKind::GroundTruth;
  const auto model = VsrModel::create(cfg);
  const GroundTruthFlow gt{{{{0, 0}, {2, -1}}}};
  BranchStep step;
  step.x = test::random_tensor({1, 3, 8, 8}, rng, DType::F32, 0, 1);
  step.x_neighbor = test::random_tensor({1, 3, 8, 8}, rng, DType::F32, 0, 1);
  step.h_neighbor = test::random_tensor({1, 4, 8, 8}, rng, DType::F32);
  const auto out = model.propagate_branch(Direction::Backward, step, &gt, 0, 1);
  auto want = Tensor::zeros({1, 4, 8, 8});
  auto wd = want.data<float>();
  const auto hd = step.h_neighbor.data<float>();
  for (int c = 0; c < 4; ++c)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        const int sx = x + 2, sy = y - 1;
        if (sx < 8 && sy >= 0) wd[(c * 8 + y) * 8 + x] = hd[(c * 8 + sy) * 8 + sx];
      }
  CHECK(out.aligned.same_bits(want));
  CHECK_THROWS(model.propagate_branch(Direction::Backward, step, nullptr, 0, 1));
}

TEST_CASE("alignment none differs from feature alignment") { CHECK(alignment_output_difference(3) > 0); }

TEST_CASE("upsampler skip path") {
  Rng rng(10);
  const auto model = VsrModel::create(tiny());
  ParameterList params = model.parameters(ParamGroupKind::Main);
  for (auto& p : params)
    if (p.name.rfind("upsample.", 0) == 0)
      for (auto& v : p.tensor.data<float>()) v = 0;
  const auto x = test::random_tensor({1, 3, 8, 8}, rng, DType::F32, 0, 1);
  const auto zeros = Tensor::zeros({1, 4, 8, 8});
  CHECK(model.upsample(zeros, zeros, x).same_bits(bilinear_resize(x, 4)));
}

TEST_CASE("feature extractor shape") {
  Rng rng(11);
  auto cfg = tiny();
  cfg.refill = true;
  const auto model = VsrModel::create(cfg);
  const auto x = test::random_tensor({1, 3, 8, 8}, rng, DType::F32, 0, 1);
  CHECK(model.extract_features(x, x, x).shape() == Shape{1, 4, 8, 8});
}

TEST_CASE("parameter accounting") {
  CHECK(conv_parameters(64, 64, 3) == 36928);
  CHECK(residual_block_parameters(64) == 73856);
  // fuse 2C->C, two (C->4C, shuffle) stages, C->3.
  CHECK(upsampler_parameters(64, true) == conv_parameters(128, 64, 3) + 2 * conv_parameters(64, 256, 3) +
                                               conv_parameters(64, 3, 3));
  CHECK(upsampler_parameters(64, false) == conv_parameters(64, 64, 3) + 2 * conv_parameters(64, 256, 3) +
                                                conv_parameters(64, 3, 3));

  const auto paper = VsrModel::create(ModelConfig::paper_scale()).parameter_counts();
  const auto branch = conv_parameters(3, 64, 3) + conv_parameters(128, 64, 3) + 30 * residual_block_parameters(64);
  CHECK(paper.main == 2 * branch + upsampler_parameters(64, true));
  CHECK(paper.main > 0.8 * 4.9e6);
  CHECK(paper.main < 1.2 * 4.9e6);

  // Regression constants for the desk preset.
  const auto desk = VsrModel::create(ModelConfig::desk()).parameter_counts();
  CHECK(desk.flow == 14382);
  CHECK(desk.main == 70883);
  CHECK(desk.extractor == 0);
  auto icon = ModelConfig::desk();
  icon.refill = true;
  icon.propagation = PropagationMode::Coupled;
  const auto ic = VsrModel::create(icon).parameter_counts();
  CHECK(ic.main == 80131);
  CHECK(ic.extractor == 15232);
  CHECK(ic.total() == ic.flow + ic.main + ic.extractor);
  CHECK(count_parameters(VsrModel::create(icon).parameters()) == ic.total());
}

TEST_CASE("config validation and round trip") {
  auto cfg = ModelConfig::desk();
  cfg.propagation = PropagationMode::Local;
  cfg.segments = 3;
  cfg.refill = true;
  CHECK(ModelConfig::from_map(cfg.to_map()).to_map() == cfg.to_map());
  CHECK_THROWS_AS(ModelConfig::from_map({{"colour", "blue"}}), ConfigError);
  CHECK_THROWS_AS(ModelConfig::from_map({{"channels", "x"}}), ConfigError);
  CHECK_THROWS_AS(ModelConfig::from_map({{"propagation", "sideways"}}), ConfigError);
  auto bad = ModelConfig::desk();
  bad.keyframe_interval = 0;
  bad.refill = true;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = ModelConfig::desk();
  bad.segments = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("checkpoint round trip") {
  const auto dir = test::scratch_dir("model_ckpt");
  Rng rng(12);
  auto cfg = tiny(PropagationMode::Coupled);
  cfg.refill = true;
  auto model = VsrModel::create(cfg);
  randomize_parameters(model.parameters(), rng, 0.1);
  save_model(model, dir);
  const auto back = load_model(dir);
  CHECK(back.config().to_map() == cfg.to_map());
  const auto x = frames(rng, 3);
  const auto a = model.infer(x), b = back.infer(x);
  for (int i = 0; i < 3; ++i) CHECK(outputs_equal(a, b, i));

  // A sidecar config that disagrees with the stored tensors is rejected.
  auto other = tiny(PropagationMode::Coupled);
  other.channels = 8;
  const auto other_dir = test::scratch_dir("model_ckpt_other");
  save_model(VsrModel::create(other), other_dir);
  std::filesystem::copy_file(other_dir / "model.cfg", dir / "model.cfg", std::filesystem::copy_options::overwrite_existing);
  CHECK_THROWS_AS(load_model(dir), Error);
}

}
