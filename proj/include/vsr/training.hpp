#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vsr/data.hpp"
#include "vsr/flow.hpp"
#include "vsr/model.hpp"
#include "vsr/serialize.hpp"

namespace vsr {

struct TrainConfig {
  int total_iters = 2000;
  double lr_main = 2e-4;
  double lr_flow = 2.5e-5;
  double lr_extractor = 1e-4;
  int freeze_iters = 100;
  int batch = 2;
  // LR patch side; HR patches are 4x.
  int patch = 32;
  int seq_len = 5;
  // Append the reversed window (a,b,c -> a,b,c,c,b,a).
  bool temporal_flip = false;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  int checkpoint_interval = 0;

  static TrainConfig desk() { return TrainConfig{}; }
  // Published constants; stored for documentation, not exercised at desk scale.
  static TrainConfig paper_scale();

  void validate() const;
  std::map<std::string, std::string> to_map() const;
  static TrainConfig from_map(const std::map<std::string, std::string>& values);
};

// Mean over every element of every frame of sqrt(d^2 + eps^2).
Tensor charbonnier_loss(std::span<const Tensor> y, std::span<const Tensor> z, double epsilon = 1e-8);
Tensor charbonnier_loss(const Tensor& y, const Tensor& z, double epsilon = 1e-8);

// base_lr * (1 + cos(pi t / total)) / 2 for 0 <= t <= total.
double cosine_lr(double base_lr, long t, long total);

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct ParamGroup {
  std::string name;
  ParameterList params;
};

class Adam {
 public:
  explicit Adam(std::vector<ParamGroup> groups, AdamOptions options = {});

  // One update; lrs[i] applies to group i. Groups flagged frozen are skipped entirely.
  void step(std::span<const double> lrs, std::span<const bool> frozen = {});
  void zero_grad();

  const std::vector<ParamGroup>& groups() const { return groups_; }
  long group_steps(std::size_t group) const { return steps_.at(group); }

  // Moments and step counters as named tensors for checkpointing.
  NamedTensors state() const;
  void load_state(const NamedTensors& state);

 private:
  std::vector<ParamGroup> groups_;
  AdamOptions options_;
  std::vector<long> steps_;
  std::vector<std::vector<Tensor>> m_;
  std::vector<std::vector<Tensor>> v_;
};

struct TrainingPair {
  VideoSequence lr;
  VideoSequence hr;
};
using Dataset = std::vector<TrainingPair>;

struct Batch {
  std::vector<Tensor> lr;  // seq_len x (N,3,p,p)
  std::vector<Tensor> hr;  // seq_len x (N,3,4p,4p)
  GroundTruthFlow motion;  // LR-pixel offsets per item, empty if the data has none
  // Provenance for tests: sequence, start frame, LR crop offsets.
  std::vector<std::array<int, 4>> origin;
};

Batch sample_batch(const Dataset& data, const TrainConfig& config, Rng& rng, DType dtype = DType::F32);

struct LogRow {
  int iter;
  double loss;
  double lr_main;
  double lr_flow;
  double lr_extractor;
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

struct TrainOptions {
  // Where loss.csv and checkpoints go; empty disables file output.
  std::filesystem::path output_dir;
  // Resume from this checkpoint directory when set.
  std::filesystem::path resume_from;
  // Stop after this iteration (exclusive) even if total_iters is larger; -1 = run to the end.
  int stop_at = -1;
  std::function<void(const LogRow&)> on_step;
};

struct TrainResult {
  std::vector<LogRow> log;
  int completed_iters = 0;
};

// Trains in place. Flow and extractor groups receive no updates for the first
// freeze_iters iterations (gradients still flow through them).
TrainResult train(VsrModel& model, const Dataset& data, const TrainConfig& config, const TrainOptions& options = {});

std::vector<ParamGroup> make_param_groups(const VsrModel& model);

// Checkpoint directory: model.vsrc + model.cfg (+ train_state.vsrc written by train()).
void save_model(const VsrModel& model, const std::filesystem::path& dir);
VsrModel load_model(const std::filesystem::path& dir);

void write_loss_csv(const std::filesystem::path& path, const std::vector<LogRow>& rows);

}  // namespace vsr
