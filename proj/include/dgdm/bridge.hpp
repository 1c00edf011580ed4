// Copyright 2026 The DGDM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <vector>

#include "dgdm/schedule.hpp"

namespace dgdm {

// Video tensors are batched clips laid out [B, C, L, H, W]. Per-frame diffusion
// steps are int64 tensors of shape [B, L] (one step per sample and lead time).

/// How a frame with a shortened bridge (SVS) reads the schedule.
enum class SvsMode {
  /// Frame i lives on the global m/delta table, truncated at T_i.
  Cap,
  /// Frame i gets its own bridge, m = t / T_i.
  Rescale,
};

/// The global bridge plus each lead time's horizon. Immutable once built.
class FrameSchedule {
 public:
  FrameSchedule(BridgeSchedule bridge, std::vector<std::int64_t> frame_horizons,
                SvsMode mode = SvsMode::Cap);
  FrameSchedule(BridgeSchedule bridge, const SvsConfig& svs, SvsMode mode = SvsMode::Cap);

  const BridgeSchedule& bridge() const { return bridge_; }
  std::int64_t T() const { return bridge_.T; }
  SvsMode mode() const { return mode_; }
  std::int64_t frames() const { return static_cast<std::int64_t>(horizons_.size()); }
  const std::vector<std::int64_t>& horizons() const { return horizons_; }
  std::int64_t horizon(std::int64_t frame) const { return horizons_.at(static_cast<std::size_t>(frame)); }

  double m(std::int64_t frame, std::int64_t t) const;
  double delta(std::int64_t frame, std::int64_t t) const;

  /// Throws unless `steps` is an integer [B, frames()] tensor with every
  /// entry in [0, horizon(frame)].
  void check_steps(const torch::Tensor& steps) const;

  struct Coefficients {
    torch::Tensor m;      // [B, 1, L, 1, 1]
    torch::Tensor delta;  // [B, 1, L, 1, 1]
  };
  /// Broadcastable m_t and delta_t for a [B, L] step tensor.
  Coefficients coefficients(const torch::Tensor& steps, torch::ScalarType dtype) const;

  /// Steps tensor [batch, frames()] filled with each frame's horizon.
  torch::Tensor horizon_steps(std::int64_t batch) const;

 private:
  BridgeSchedule bridge_;
  std::vector<std::int64_t> horizons_;
  SvsMode mode_;
};

/// Broadcast a per-frame step list to a [batch, L] tensor.
torch::Tensor frame_steps(const std::vector<std::int64_t>& per_frame, std::int64_t batch = 1);
/// Same step for every sample and frame.
torch::Tensor uniform_steps(std::int64_t t, std::int64_t batch, std::int64_t frames);

/// x_t = (1 - m_t) x0 + m_t xT + sqrt(delta_t) noise, frame-wise.
torch::Tensor forward_sample(const torch::Tensor& x0, const torch::Tensor& xT,
                             const torch::Tensor& steps, const FrameSchedule& schedule,
                             const torch::Tensor& noise);

/// m_t (xT - x0) + sqrt(delta_t) noise: the quantity the denoiser regresses.
/// Equal to x_t - x0 for the x_t built from the same noise.
torch::Tensor training_target(const torch::Tensor& x0, const torch::Tensor& xT,
                              const torch::Tensor& steps, const FrameSchedule& schedule,
                              const torch::Tensor& noise);

/// x_t - eps_hat.
torch::Tensor reconstruct_x0(const torch::Tensor& x_t, const torch::Tensor& eps_hat);

/// One non-Markovian reverse transition t -> t_prev (both [B, L], elementwise
/// t_prev < t). The residual direction d = (x_t - bridge mean at t) / sqrt(delta_t)
/// is re-bridged at t_prev with sigma = eta sqrt(delta_{t_prev}) of fresh noise:
///   x_prev = (1 - m_p) x0_hat + m_p xT + sqrt(delta_p - sigma^2) d + sigma noise.
/// d is taken as 0 where delta_t = 0.
torch::Tensor reverse_step(const torch::Tensor& x_t, const torch::Tensor& x0_hat,
                           const torch::Tensor& xT, const torch::Tensor& t,
                           const torch::Tensor& t_prev, const FrameSchedule& schedule,
                           double eta, const torch::Tensor& fresh_noise);

/// Sampler state: the clip and each frame's current step.
struct BridgeState {
  torch::Tensor x_t;
  torch::Tensor steps;
};

/// Intermediate start built from the deterministic forecast y_hat in place of x0.
BridgeState truncated_start(const torch::Tensor& y_hat, const torch::Tensor& xT,
                            const torch::Tensor& t_start, const FrameSchedule& schedule,
                            const torch::Tensor& noise);

}  // namespace dgdm
