// Copyright 2026 The DGDM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>
#include <vector>

#include "dgdm/metrics.hpp"
#include "dgdm/model.hpp"
#include "dgdm/training.hpp"

namespace dgdm {

struct SamplerOptions {
  std::int64_t reverse_steps = 200;
  double eta = 1.0;
  double truncation_fraction = 0.5;
  std::int64_t n_samples = 20;
  std::uint64_t seed = 0;
  /// Draw all members as one network batch. Noise is per member either way.
  bool batched = true;

  void validate() const;
};

struct SamplingStats {
  /// Network evaluations per member (the longest frame grid).
  std::int64_t network_calls = 0;
  /// Reverse transitions executed per frame, per member.
  std::vector<std::int64_t> frame_updates;
  std::int64_t total_frame_updates() const;
};

struct Provenance {
  std::uint64_t seed = 0;
  double eta = 1.0;
  double truncation_fraction = 0.0;
  std::int64_t T = 0;
  std::int64_t reverse_steps = 0;
  bool svs_enabled = false;
  std::int64_t svs_step = 0;
  std::string svs_mode;
  std::vector<std::int64_t> frame_horizons;
  std::vector<std::int64_t> grid_sizes;
  std::vector<std::int64_t> start_steps;
};

struct ForecastEnsemble {
  /// [N, B, C, L_hat, H, W]; empty (N = 0) without a probabilistic branch.
  torch::Tensor samples;
  /// [B, C, L_hat, H, W]; undefined without a deterministic branch.
  torch::Tensor deterministic;
  Provenance provenance;
  SamplingStats stats;

  std::int64_t size() const { return samples.defined() ? samples.size(0) : 0; }
};

/// Per-frame reverse grids for a schedule.
std::vector<ReverseGrid> frame_grids(const FrameSchedule& schedule, std::int64_t reverse_steps, double eta,
                                     double truncation_fraction);

/// Chain start: frames whose grid begins at their horizon start exactly at x_T,
/// the rest at the truncated state built from y_hat.
BridgeState chain_start(const torch::Tensor& y_hat, const torch::Tensor& xT, const std::vector<ReverseGrid>& grids,
                        const FrameSchedule& schedule, const torch::Tensor& noise);

/// Runs every frame down its grid with a shared outer loop. Frames whose grid
/// is exhausted are held fixed at step 0. `noise_source` yields the fresh noise
/// for each transition.
torch::Tensor reverse_chain(BridgeState state, const torch::Tensor& xT, const torch::Tensor& z,
                            const std::vector<ReverseGrid>& grids, const FrameSchedule& schedule, double eta,
                            const DenoiseFn& denoiser, const std::function<torch::Tensor()>& noise_source,
                            SamplingStats* stats = nullptr);

/// splitmix64 of (seed, member): the member's private stream.
std::uint64_t member_seed(std::uint64_t seed, std::uint64_t member);

/// x: [B, C, L, H, W]. When `denoiser` is set it replaces the probabilistic branch.
ForecastEnsemble sample_forecast(const ModelConfig& config, Networks& nets, const FrameSchedule& schedule,
                                 const torch::Tensor& x, const SamplerOptions& options,
                                 const DenoiseFn& denoiser = nullptr);

/// Elementwise mean over members, [B, C, L_hat, H, W].
torch::Tensor ensemble_average(const ForecastEnsemble& ens);

struct BestSelection {
  /// Member chosen for each clip.
  std::vector<std::int64_t> index;
  torch::Tensor forecast;  // [B, C, L_hat, H, W]
};

/// Per clip, the member optimising `metric` against y (lowest index on ties).
/// Metrics are computed on the tensors as given, with `data_range` for PSNR/SSIM.
BestSelection ensemble_best(const ForecastEnsemble& ens, const torch::Tensor& y, Metric metric,
                            double data_range = 1.0);

}  // namespace dgdm
