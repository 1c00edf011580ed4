// Copyright 2026 The DGDM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

namespace dgdm {

/// Linear Brownian-bridge bookkeeping over integer steps t = 0..T.
///
/// m[t] = t/T is the interpolation weight toward the far endpoint and
/// delta[t] = 2(m[t] - m[t]^2) the bridge variance. Both are evaluated in
/// closed form per index, so there is no accumulated rounding along t.
struct BridgeSchedule {
  std::int64_t T = 0;
  std::vector<double> m;
  std::vector<double> delta;
};

/// Throws std::invalid_argument for T < 2.
BridgeSchedule make_bridge_schedule(std::int64_t T);

/// Per-lead-time bridge lengths: frame i (1-based) gets T - (L_hat - i) * S.
/// `frame_steps` is stored 0-based, so frame_steps.back() == T.
struct SvsConfig {
  std::int64_t T = 0;
  std::int64_t step_size = 0;
  std::int64_t forecast_length = 0;
  std::vector<std::int64_t> frame_steps;
};

SvsConfig make_svs(std::int64_t T, std::int64_t forecast_length, std::int64_t step_size);

/// Every frame gets the full T steps.
SvsConfig make_uniform_svs(std::int64_t T, std::int64_t forecast_length);

/// floor(T / (2 L_hat)): keeps the earliest lead time above T/2 steps.
std::int64_t default_svs_step(std::int64_t T, std::int64_t forecast_length);

/// Descending sequence of integer steps ending at 0. `full` is the untruncated
/// grid; `steps` is the suffix actually executed after truncation.
struct ReverseGrid {
  std::vector<std::int64_t> full;
  std::vector<std::int64_t> steps;
  double eta = 1.0;
  double truncation_fraction = 0.0;

  std::int64_t start() const { return steps.front(); }
  /// Number of reverse transitions (one denoiser evaluation each).
  std::size_t transitions() const { return steps.size() - 1; }
  std::size_t full_transitions() const { return full.size() - 1; }
};

/// Grid for a frame whose bridge is capped at `frame_T` within a global
/// schedule of `global_T` steps. The frame receives
/// max(1, round(n_steps * frame_T / global_T)) evenly spaced transitions
/// over (0, frame_T]; truncation drops the first
/// floor(truncation_fraction * transitions) entries.
ReverseGrid make_reverse_grid(std::int64_t frame_T, std::int64_t n_steps, double eta,
                              double truncation_fraction, std::int64_t global_T);

/// Same, with the frame occupying the whole schedule.
inline ReverseGrid make_reverse_grid(std::int64_t T, std::int64_t n_steps, double eta,
                                     double truncation_fraction) {
  return make_reverse_grid(T, n_steps, eta, truncation_fraction, T);
}

}  // namespace dgdm
