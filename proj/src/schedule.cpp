// Copyright 2026 The DGDM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dgdm/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dgdm {

BridgeSchedule make_bridge_schedule(std::int64_t T) {
  if (T < 2) {
    throw std::invalid_argument("bridge schedule needs T >= 2, got " + std::to_string(T));
  }
  BridgeSchedule s;
  s.T = T;
  s.m.resize(static_cast<std::size_t>(T + 1));
  s.delta.resize(static_cast<std::size_t>(T + 1));
  const auto denom = static_cast<double>(T);
  for (std::int64_t t = 0; t <= T; ++t) {
    const double m = static_cast<double>(t) / denom;
    s.m[static_cast<std::size_t>(t)] = m;
    s.delta[static_cast<std::size_t>(t)] = 2.0 * (m - m * m);
  }
  // Pin the endpoints; 2(m - m^2) is exact there anyway but m[T] must be 1.
  s.m.back() = 1.0;
  s.delta.front() = 0.0;
  s.delta.back() = 0.0;
  return s;
}

SvsConfig make_svs(std::int64_t T, std::int64_t forecast_length, std::int64_t step_size) {
  if (T < 1 || forecast_length < 1) {
    throw std::invalid_argument("SVS needs T >= 1 and forecast length >= 1");
  }
  if (step_size < 0) {
    throw std::invalid_argument("SVS step size must be non-negative");
  }
  const std::int64_t earliest = T - (forecast_length - 1) * step_size;
  if (earliest < 1) {
    throw std::invalid_argument("SVS step size " + std::to_string(step_size) +
                                " leaves the first lead time with " + std::to_string(earliest) +
                                " steps (T=" + std::to_string(T) +
                                ", L_hat=" + std::to_string(forecast_length) + ")");
  }
  SvsConfig svs;
  svs.T = T;
  svs.step_size = step_size;
  svs.forecast_length = forecast_length;
  svs.frame_steps.reserve(static_cast<std::size_t>(forecast_length));
  for (std::int64_t i = 1; i <= forecast_length; ++i) {
    svs.frame_steps.push_back(T - (forecast_length - i) * step_size);
  }
  return svs;
}

SvsConfig make_uniform_svs(std::int64_t T, std::int64_t forecast_length) {
  return make_svs(T, forecast_length, 0);
}

std::int64_t default_svs_step(std::int64_t T, std::int64_t forecast_length) {
  if (forecast_length < 1) {
    throw std::invalid_argument("forecast length must be >= 1");
  }
  return T / (2 * forecast_length);
}

namespace {

// round(num / den) with ties away from zero, for non-negative operands.
std::int64_t round_div(std::int64_t num, std::int64_t den) { return (2 * num + den) / (2 * den); }

}  // namespace

ReverseGrid make_reverse_grid(std::int64_t frame_T, std::int64_t n_steps, double eta,
                              double truncation_fraction, std::int64_t global_T) {
  if (frame_T < 1 || global_T < frame_T) {
    throw std::invalid_argument("frame horizon must lie in [1, T]");
  }
  if (n_steps < 1 || n_steps > global_T) {
    throw std::invalid_argument("reverse steps must lie in [1, T], got " + std::to_string(n_steps));
  }
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw std::invalid_argument("eta must lie in [0, 1]");
  }
  if (!(truncation_fraction >= 0.0 && truncation_fraction < 1.0)) {
    throw std::invalid_argument("truncation fraction must lie in [0, 1)");
  }

  const std::int64_t n = std::max<std::int64_t>(1, round_div(n_steps * frame_T, global_T));
  ReverseGrid grid;
  grid.eta = eta;
  grid.truncation_fraction = truncation_fraction;
  grid.full.reserve(static_cast<std::size_t>(n + 1));
  // Spacing frame_T / n >= 1, so the rounded points stay strictly decreasing.
  for (std::int64_t k = 0; k <= n; ++k) {
    grid.full.push_back(round_div(frame_T * (n - k), n));
  }
  const auto drop = static_cast<std::size_t>(std::floor(truncation_fraction * static_cast<double>(n)));
  grid.steps.assign(grid.full.begin() + static_cast<std::ptrdiff_t>(drop), grid.full.end());
  return grid;
}

}  // namespace dgdm
