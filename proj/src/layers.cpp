// Copyright 2026 The DGDM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dgdm/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dgdm::layers {

namespace nn = torch::nn;

ChannelLayerNormImpl::ChannelLayerNormImpl(std::int64_t channels)
    : norm_(register_module("norm", nn::LayerNorm(nn::LayerNormOptions({channels})))) {}

torch::Tensor ChannelLayerNormImpl::forward(const torch::Tensor& x) {
  return norm_(x.permute({0, 2, 3, 1})).permute({0, 3, 1, 2});
}

ConvNormActImpl::ConvNormActImpl(std::int64_t in, std::int64_t out, std::int64_t stride)
    : conv_(register_module("conv", nn::Conv2d(nn::Conv2dOptions(in, out, 3).stride(stride).padding(1)))),
      norm_(register_module("norm", ChannelLayerNorm(out))) {}

torch::Tensor ConvNormActImpl::forward(const torch::Tensor& x) {
  return torch::silu(norm_(conv_(x)));
}

ConvNeXtBlockImpl::ConvNeXtBlockImpl(std::int64_t channels, std::int64_t kernel,
                                     std::int64_t expansion)
    : depthwise_(register_module(
          "depthwise",
          nn::Conv2d(nn::Conv2dOptions(channels, channels, kernel).padding(kernel / 2).groups(channels)))),
      norm_(register_module("norm", nn::LayerNorm(nn::LayerNormOptions({channels})))),
      expand_(register_module("expand", nn::Linear(channels, expansion * channels))),
      contract_(register_module("contract", nn::Linear(expansion * channels, channels))) {}

torch::Tensor ConvNeXtBlockImpl::forward(const torch::Tensor& x) {
  auto h = depthwise_(x).permute({0, 2, 3, 1});
  h = contract_(torch::gelu(expand_(norm_(h))));
  return x + h.permute({0, 3, 1, 2});
}

torch::Tensor sinusoidal_embedding(const torch::Tensor& steps, std::int64_t dim,
                                   torch::ScalarType dtype) {
  if (dim < 2 || dim % 2 != 0) {
    throw std::invalid_argument("sinusoidal embedding width must be even and >= 2");
  }
  const auto half = dim / 2;
  auto t = steps.to(torch::kDouble).reshape({-1, 1});
  auto k = torch::arange(half, torch::kDouble).unsqueeze(0);
  auto freqs = torch::exp(-std::log(10000.0) * k / static_cast<double>(half));
  auto angles = t * freqs;
  return torch::cat({angles.sin(), angles.cos()}, 1).to(dtype);
}

nn::GroupNorm group_norm(std::int64_t groups, std::int64_t channels) {
  const auto g = std::min(groups, channels);
  if (channels % g != 0) {
    throw std::invalid_argument("GroupNorm: " + std::to_string(channels) +
                                " channels not divisible into " + std::to_string(g) + " groups");
  }
  return nn::GroupNorm(nn::GroupNormOptions(g, channels));
}

}  // namespace dgdm::layers
