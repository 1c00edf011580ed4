// Copyright 2026 The DGDM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include <cstdint>

namespace dgdm::layers {

// Shared building blocks. Spatial tensors are [N, C, H, W]; video tensors fold
// time into N where a block is frame-local.

/// Layer normalization over the channel axis of an [N, C, H, W] map.
class ChannelLayerNormImpl : public torch::nn::Module {
 public:
  explicit ChannelLayerNormImpl(std::int64_t channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::LayerNorm norm_{nullptr};
};
TORCH_MODULE(ChannelLayerNorm);

/// Conv3x3 -> channel LayerNorm -> SiLU.
class ConvNormActImpl : public torch::nn::Module {
 public:
  ConvNormActImpl(std::int64_t in, std::int64_t out, std::int64_t stride = 1);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv_{nullptr};
  ChannelLayerNorm norm_{nullptr};
};
TORCH_MODULE(ConvNormAct);

/// Depthwise large-kernel conv, LayerNorm, pointwise expand/GELU/contract, residual.
class ConvNeXtBlockImpl : public torch::nn::Module {
 public:
  ConvNeXtBlockImpl(std::int64_t channels, std::int64_t kernel, std::int64_t expansion);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d depthwise_{nullptr};
  torch::nn::LayerNorm norm_{nullptr};
  torch::nn::Linear expand_{nullptr};
  torch::nn::Linear contract_{nullptr};
};
TORCH_MODULE(ConvNeXtBlock);

/// Classic transformer sinusoids of an integer step, width `dim` (even).
torch::Tensor sinusoidal_embedding(const torch::Tensor& steps, std::int64_t dim,
                                   torch::ScalarType dtype);

/// GroupNorm with min(groups, channels) groups; channels must divide evenly.
torch::nn::GroupNorm group_norm(std::int64_t groups, std::int64_t channels);

}  // namespace dgdm::layers
