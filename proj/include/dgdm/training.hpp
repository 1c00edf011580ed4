// Copyright 2026 The DGDM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dgdm/model.hpp"

namespace dgdm {

struct TrainConfig {
  std::int64_t batch_size = 8;
  double lr_db = 1e-3;
  double lr_pb = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 0.0;
  double ema_decay = 0.995;
  std::int64_t ema_start = 30000;
  std::int64_t ema_every = 8;
  double plateau_factor = 0.5;
  /// Patience and cooldown are counted in training steps and converted to
  /// validation rounds with eval_every.
  std::int64_t plateau_patience = 3000;
  std::int64_t plateau_cooldown = 3000;
  double plateau_threshold = 1e-4;
  double min_lr = 5e-6;
  std::int64_t eval_every = 500;
  std::int64_t val_batches = 4;
  std::int64_t epochs = 1;
  /// When positive, overrides epochs.
  std::int64_t max_steps = 0;
  std::int64_t checkpoint_every = 1000;
  /// Max global gradient norm; 0 disables clipping.
  double grad_clip = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Losses {
  torch::Tensor total;
  torch::Tensor db;
  torch::Tensor pb;
};

/// Raised before backprop when a loss term is NaN or infinite.
class NonFiniteLoss : public std::runtime_error {
 public:
  NonFiniteLoss(std::string term, double value);
  const std::string& term() const { return term_; }

 private:
  std::string term_;
};

using DenoiseFn =
    std::function<torch::Tensor(const torch::Tensor& x_t, const torch::Tensor& steps, const torch::Tensor& z)>;

/// t_i = max(1, ceil(u * T_i)) for one uniform u per sample: [B] -> [B, L_hat].
torch::Tensor draw_train_steps(const FrameSchedule& schedule, const torch::Tensor& u);

/// Joint objective for one batch. All randomness comes from `gen`. When
/// `denoiser` is set it stands in for the probabilistic branch.
Losses compute_losses(const ModelConfig& config, Networks& nets, const FrameSchedule& schedule,
                      const torch::Tensor& x, const torch::Tensor& y, at::Generator gen,
                      const DenoiseFn& denoiser = nullptr);

/// ema <- decay * ema + (1 - decay) * live, elementwise.
void ema_update(std::vector<torch::Tensor>& ema, const std::vector<torch::Tensor>& live, double decay);
void ema_update(torch::nn::Module& ema, const torch::nn::Module& live, double decay);

struct PlateauOptions {
  double factor = 0.5;
  std::int64_t patience = 6;
  std::int64_t cooldown = 6;
  double threshold = 1e-4;
  double min_lr = 5e-6;
};

struct PlateauState {
  double best = std::numeric_limits<double>::infinity();
  std::int64_t num_bad = 0;
  std::int64_t cooldown_left = 0;
  /// History entries already observed.
  std::size_t consumed = 0;
};

/// Feeds one validation value; true when the learning rate should drop.
/// A value counts as an improvement when it beats best * (1 - threshold).
bool plateau_observe(PlateauState& state, double metric, const PlateauOptions& options);

/// Consumes the unseen tail of `history` and returns the resulting rate.
double plateau_step(double current_lr, const std::vector<double>& history, PlateauState& state,
                    const PlateauOptions& options);

/// Owns live and EMA weights, the optimizer, the noise stream and scheduler
/// state. Every step is a deterministic function of that state and the batch.
class Trainer {
 public:
  Trainer(ModelConfig model, DiffusionConfig diffusion, TrainConfig train, std::string config_json = "");

  Losses step(const torch::Tensor& x, const torch::Tensor& y);

  /// Mean loss_total over the batches, with a fixed noise stream and no grad.
  double validation_loss(const std::vector<std::pair<torch::Tensor, torch::Tensor>>& batches);
  /// Returns true when the learning rates were reduced.
  bool on_validation(double metric);

  void save(const std::string& path) const;
  void load(const std::string& path);

  std::int64_t global_step() const { return step_; }
  double lr_db() const;
  double lr_pb() const;
  /// The rate written to the training log.
  double logged_lr() const { return nets_.pb ? lr_pb() : lr_db(); }

  Networks& live() { return nets_; }
  Networks& ema() { return ema_; }
  const ModelConfig& model_config() const { return model_; }
  const FrameSchedule& schedule() const { return schedule_; }
  const PlateauState& plateau() const { return plateau_; }

 private:
  void scale_lrs(double factor);
  PlateauOptions plateau_options() const;

  ModelConfig model_;
  DiffusionConfig diffusion_;
  TrainConfig train_;
  std::string config_json_;
  FrameSchedule schedule_;
  Networks nets_;
  Networks ema_;
  std::unique_ptr<torch::optim::Adam> optimizer_;
  at::Generator gen_;
  PlateauState plateau_;
  std::vector<double> val_history_;
  std::int64_t step_ = 0;
};

inline constexpr std::int64_t kCheckpointFormat = 1;

/// Config snapshot stored in a checkpoint.
std::string read_checkpoint_config(const std::string& path);
/// Live or EMA networks from a checkpoint, frozen in eval mode.
Networks load_networks(const std::string& path, const ModelConfig& config, bool use_ema);

}  // namespace dgdm
