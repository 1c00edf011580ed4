// Copyright 2026 The DGDM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dgdm/bridge.hpp"

#include <stdexcept>
#include <string>
#include <utility>

namespace dgdm {

namespace {

void check_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (a.sizes() != b.sizes()) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " +
                                c10::str(a.sizes()) + " vs " + c10::str(b.sizes()));
  }
}

void check_video(const torch::Tensor& x, const char* what) {
  if (x.dim() != 5) {
    throw std::invalid_argument(std::string(what) + ": expected a [B, C, L, H, W] clip, got " +
                                c10::str(x.sizes()));
  }
}

void check_steps_match(const torch::Tensor& x, const torch::Tensor& steps, const char* what) {
  if (steps.dim() != 2 || steps.size(0) != x.size(0) || steps.size(1) != x.size(2)) {
    throw std::invalid_argument(std::string(what) + ": steps " + c10::str(steps.sizes()) +
                                " do not match clip " + c10::str(x.sizes()));
  }
}

}  // namespace

FrameSchedule::FrameSchedule(BridgeSchedule bridge, std::vector<std::int64_t> frame_horizons,
                             SvsMode mode)
    : bridge_(std::move(bridge)), horizons_(std::move(frame_horizons)), mode_(mode) {
  if (horizons_.empty()) {
    throw std::invalid_argument("frame schedule needs at least one frame");
  }
  for (auto h : horizons_) {
    if (h < 1 || h > bridge_.T) {
      throw std::invalid_argument("frame horizon " + std::to_string(h) + " outside [1, " +
                                  std::to_string(bridge_.T) + "]");
    }
  }
  if (mode_ == SvsMode::Rescale) {
    for (auto h : horizons_) {
      if (h < 2) {
        throw std::invalid_argument("rescaled frame bridges need at least 2 steps");
      }
    }
  }
}

FrameSchedule::FrameSchedule(BridgeSchedule bridge, const SvsConfig& svs, SvsMode mode)
    : FrameSchedule(std::move(bridge), svs.frame_steps, mode) {
  if (svs.T != bridge_.T) {
    throw std::invalid_argument("SVS was built for a different T");
  }
}

double FrameSchedule::m(std::int64_t frame, std::int64_t t) const {
  const auto h = horizon(frame);
  if (t < 0 || t > h) {
    throw std::out_of_range("step " + std::to_string(t) + " outside frame horizon");
  }
  if (mode_ == SvsMode::Cap) {
    return bridge_.m[static_cast<std::size_t>(t)];
  }
  return static_cast<double>(t) / static_cast<double>(h);
}

double FrameSchedule::delta(std::int64_t frame, std::int64_t t) const {
  if (mode_ == SvsMode::Cap) {
    (void)m(frame, t);
    return bridge_.delta[static_cast<std::size_t>(t)];
  }
  const double mt = m(frame, t);
  return 2.0 * (mt - mt * mt);
}

void FrameSchedule::check_steps(const torch::Tensor& steps) const {
  if (!steps.defined() || steps.dim() != 2 || steps.size(1) != frames()) {
    throw std::invalid_argument("steps must be a [B, " + std::to_string(frames()) + "] tensor");
  }
  if (at::isFloatingType(steps.scalar_type())) {
    throw std::invalid_argument("steps must be integral");
  }
  auto limits = torch::tensor(horizons_, torch::kLong).unsqueeze(0);
  auto s = steps.to(torch::kLong);
  if ((s < 0).any().item<bool>() || (s > limits).any().item<bool>()) {
    throw std::out_of_range("diffusion step outside [0, T_i] for some frame");
  }
}

FrameSchedule::Coefficients FrameSchedule::coefficients(const torch::Tensor& steps,
                                                        torch::ScalarType dtype) const {
  check_steps(steps);
  auto t = steps.to(torch::kDouble);
  torch::Tensor denom;
  if (mode_ == SvsMode::Cap) {
    denom = torch::full({1, frames()}, static_cast<double>(bridge_.T), torch::kDouble);
  } else {
    denom = torch::tensor(horizons_, torch::kLong).to(torch::kDouble).unsqueeze(0);
  }
  // Same closed form as make_bridge_schedule, so values match the table bit-for-bit.
  auto m = t / denom;
  auto delta = 2.0 * (m - m * m);
  auto shape = std::vector<std::int64_t>{steps.size(0), 1, steps.size(1), 1, 1};
  return {m.to(dtype).view(shape), delta.to(dtype).view(shape)};
}

torch::Tensor FrameSchedule::horizon_steps(std::int64_t batch) const {
  return frame_steps(horizons_, batch);
}

torch::Tensor frame_steps(const std::vector<std::int64_t>& per_frame, std::int64_t batch) {
  return torch::tensor(per_frame, torch::kLong).unsqueeze(0).repeat({batch, 1});
}

torch::Tensor uniform_steps(std::int64_t t, std::int64_t batch, std::int64_t frames) {
  return torch::full({batch, frames}, t, torch::kLong);
}

torch::Tensor forward_sample(const torch::Tensor& x0, const torch::Tensor& xT,
                             const torch::Tensor& steps, const FrameSchedule& schedule,
                             const torch::Tensor& noise) {
  check_video(x0, "forward_sample");
  check_same_shape(x0, xT, "forward_sample");
  check_same_shape(x0, noise, "forward_sample");
  check_steps_match(x0, steps, "forward_sample");
  auto c = schedule.coefficients(steps, x0.scalar_type());
  return (1.0 - c.m) * x0 + c.m * xT + c.delta.sqrt() * noise;
}

torch::Tensor training_target(const torch::Tensor& x0, const torch::Tensor& xT,
                              const torch::Tensor& steps, const FrameSchedule& schedule,
                              const torch::Tensor& noise) {
  check_video(x0, "training_target");
  check_same_shape(x0, xT, "training_target");
  check_same_shape(x0, noise, "training_target");
  check_steps_match(x0, steps, "training_target");
  auto c = schedule.coefficients(steps, x0.scalar_type());
  return c.m * (xT - x0) + c.delta.sqrt() * noise;
}

torch::Tensor reconstruct_x0(const torch::Tensor& x_t, const torch::Tensor& eps_hat) {
  check_same_shape(x_t, eps_hat, "reconstruct_x0");
  return x_t - eps_hat;
}

torch::Tensor reverse_step(const torch::Tensor& x_t, const torch::Tensor& x0_hat,
                           const torch::Tensor& xT, const torch::Tensor& t,
                           const torch::Tensor& t_prev, const FrameSchedule& schedule,
                           double eta, const torch::Tensor& fresh_noise) {
  check_video(x_t, "reverse_step");
  check_same_shape(x_t, x0_hat, "reverse_step");
  check_same_shape(x_t, xT, "reverse_step");
  check_same_shape(x_t, fresh_noise, "reverse_step");
  check_steps_match(x_t, t, "reverse_step");
  check_steps_match(x_t, t_prev, "reverse_step");
  if (!(eta >= 0.0 && eta <= 1.0)) {
    throw std::invalid_argument("eta must lie in [0, 1]");
  }
  if ((t_prev.to(torch::kLong) >= t.to(torch::kLong)).any().item<bool>()) {
    throw std::invalid_argument("reverse_step needs t_prev < t for every frame");
  }
  const auto dtype = x_t.scalar_type();
  auto cur = schedule.coefficients(t, dtype);
  auto prev = schedule.coefficients(t_prev, dtype);

  auto inv_std = torch::where(cur.delta > 0, cur.delta.clamp_min(1e-300).rsqrt(),
                              torch::zeros_like(cur.delta));
  auto direction = (x_t - (1.0 - cur.m) * x0_hat - cur.m * xT) * inv_std;

  auto sigma = eta * prev.delta.sqrt();
  auto keep = (prev.delta * (1.0 - eta * eta)).clamp_min(0.0).sqrt();
  return (1.0 - prev.m) * x0_hat + prev.m * xT + keep * direction + sigma * fresh_noise;
}

BridgeState truncated_start(const torch::Tensor& y_hat, const torch::Tensor& xT,
                            const torch::Tensor& t_start, const FrameSchedule& schedule,
                            const torch::Tensor& noise) {
  check_video(y_hat, "truncated_start");
  check_same_shape(y_hat, xT, "truncated_start");
  check_same_shape(y_hat, noise, "truncated_start");
  check_steps_match(y_hat, t_start, "truncated_start");
  auto c = schedule.coefficients(t_start, y_hat.scalar_type());
  return {(1.0 - c.m) * y_hat + c.m * xT + c.delta.sqrt() * noise, t_start.to(torch::kLong)};
}

}  // namespace dgdm
