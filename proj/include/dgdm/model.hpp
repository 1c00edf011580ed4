// Copyright 2026 The DGDM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <optional>

#include "dgdm/bridge.hpp"
#include "dgdm/denoiser.hpp"
#include "dgdm/deterministic_branch.hpp"

namespace dgdm {

/// Diffusion-time settings shared by training and sampling.
struct DiffusionConfig {
  std::int64_t T = 1000;
  std::int64_t reverse_steps = 200;
  double eta = 1.0;
  double truncation_fraction = 0.5;
  bool svs_enabled = true;
  /// Negative selects default_svs_step(T, L_hat).
  std::int64_t svs_step = -1;
  SvsMode svs_mode = SvsMode::Cap;

  void validate() const;
};

SvsConfig make_svs(const DiffusionConfig& diffusion, std::int64_t forecast_length);
FrameSchedule make_frame_schedule(const DiffusionConfig& diffusion, std::int64_t forecast_length);

/// Which components are active. The switches mirror the component ablation:
/// `bridge` off replaces the far endpoint with Gaussian noise, `last_frame`
/// off uses the observed clip itself as the endpoint (needs L == L_hat).
struct ModelConfig {
  DBConfig db;
  DenoiserConfig pb;
  bool use_db = true;
  bool use_pb = true;
  bool bridge = true;
  bool last_frame = true;

  /// Also syncs pb.in_channels and pb.cond_channels with the DB.
  void validate();
};

/// The two branches. Either may be null when ablated.
struct Networks {
  DeterministicBranch db{nullptr};
  ProbabilisticBranch pb{nullptr};

  static Networks create(const ModelConfig& config);
  std::vector<torch::Tensor> parameters() const;
  void train(bool on);
  void to(torch::ScalarType dtype);
};

/// Copies every parameter and buffer of `src` into `dst` (same architecture).
void copy_weights(torch::nn::Module& dst, const torch::nn::Module& src);
Networks clone_networks(const ModelConfig& config, const Networks& src);

/// x: [B, C, L, H, W] -> [B, C, L_hat, H, W], every frame a copy of x's last.
torch::Tensor replicate_last_frame(const torch::Tensor& x, std::int64_t forecast_length);

/// Far endpoint x_T of the bridge for a batch of inputs.
torch::Tensor bridge_endpoint(const ModelConfig& config, const torch::Tensor& x, std::optional<at::Generator> gen);

/// DB output, or zeros for z (and an undefined y_hat) without a DB.
DBOutput guidance(const ModelConfig& config, Networks& nets, const torch::Tensor& x);

}  // namespace dgdm
