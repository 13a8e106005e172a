#pragma once

#include <functional>
#include <optional>

#include "inti/bench/dataset.hpp"
#include "inti/vit/video_model.hpp"

namespace inti::bench {

struct OptimizerConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;  // applied to matrices and kernels only
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  std::size_t warmup_steps = 0;
  double grad_clip = 0.0;      // global L2 norm; 0 disables
  // Learning-rate multiplier for compression-stage parameters ("stages.*").
  double stage_lr_scale = 1.0;
};

void to_json(nlohmann::json& j, const OptimizerConfig& o);
void from_json(const nlohmann::json& j, OptimizerConfig& o);

// Everything a run depends on. Two runs from equal configs are bit-identical.
struct ExperimentConfig {
  std::string name = "run";
  vit::ViTConfig model;
  std::vector<compress::StageSpec> stages;
  OptimizerConfig optimizer;
  ShapesSpec train_data;
  ShapesSpec test_data;
  std::uint64_t seed = 0;      // model init and minibatch order
  std::uint64_t data_seed = 0;
  bool check_simplex = true;   // assert the convex-combination invariant every forward

  std::size_t frames() const { return train_data.frames; }
  // Throws ConfigError if the pieces disagree.
  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);
ExperimentConfig load_experiment(const std::filesystem::path& file);

struct EpochMetrics {
  std::size_t epoch;
  double learning_rate;
  double train_loss;
  double train_accuracy;
  double test_accuracy;
};

void to_json(nlohmann::json& j, const EpochMetrics& m);

struct TrainResult {
  vit::VideoModel model;
  std::vector<EpochMetrics> history;
};

// Optional per-epoch observer; sees the model as trained so far.
using EpochCallback = std::function<void(const EpochMetrics&, const vit::VideoModel&)>;

// Momentum SGD with cosine decay on mean cross-entropy. Throws NumericError
// with the step and parameter name if the loss or a gradient goes non-finite.
TrainResult train(const ExperimentConfig& config, const ClipDataset& train_set,
                  const ClipDataset& test_set, const EpochCallback& on_epoch = {});

// As above, generating both splits from the config.
TrainResult train(const ExperimentConfig& config, const EpochCallback& on_epoch = {});

// Learning rate at `step` of `total` steps.
double cosine_lr(const OptimizerConfig& o, std::size_t step, std::size_t total);

// Top-1 accuracy in percent, one clip and one crop each. `threads` > 1 shards
// clips over a frozen model.
double evaluate(const vit::VideoModel& model, const ClipDataset& data, std::size_t threads = 1);

// Predicted class of every clip.
std::vector<std::size_t> predict(const vit::VideoModel& model, const ClipDataset& data,
                                 std::size_t threads = 1);

// Accuracy of arbitrary predictions against the labels.
double accuracy(const std::vector<std::size_t>& predictions, const std::vector<std::size_t>& labels);

}  // namespace inti::bench
