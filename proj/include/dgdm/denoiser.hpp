// Copyright 2026 The DGDM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <vector>

namespace dgdm {

/// 3D-UNet noise estimator. Every convolution has a 1xkxk kernel, so it runs as
/// a 2D convolution with frames folded into the batch.
struct DenoiserConfig {
  std::int64_t in_channels = 1;
  std::int64_t base = 64;
  std::vector<std::int64_t> mults{1, 2, 4, 8};
  std::int64_t time_dim = 256;
  /// Channels of the conditioning latent (the DB hidden width).
  std::int64_t cond_channels = 64;
  std::int64_t heads = 4;
  std::int64_t groups = 8;
  /// Longest clip the temporal position bias covers.
  std::int64_t max_frames = 32;
  bool spatial_attention = true;
  bool temporal_attention = true;

  void validate() const;
  std::int64_t downsample() const { return std::int64_t{1} << (mults.size() - 1); }
  void validate_frame(std::int64_t height, std::int64_t width) const;
};

class ResBlockImpl : public torch::nn::Module {
 public:
  ResBlockImpl(std::int64_t in, std::int64_t out, std::int64_t time_dim, std::int64_t groups);
  /// x: [N, in, H, W], temb: [N, time_dim] (one row per frame).
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& temb);

 private:
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr};
  torch::nn::GroupNorm norm1_{nullptr}, norm2_{nullptr};
  torch::nn::Linear time_proj_{nullptr};
  torch::nn::Conv2d skip_{nullptr};
};
TORCH_MODULE(ResBlock);

/// Per-frame cross-attention from feature map queries to conditioning tokens.
class SpatialCrossAttentionImpl : public torch::nn::Module {
 public:
  SpatialCrossAttentionImpl(std::int64_t channels, std::int64_t cond_channels, std::int64_t heads,
                            std::int64_t groups);
  /// x: [N, C, H, W], cond: [N, Cc, h, w] with the same N.
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& cond);

 private:
  std::int64_t heads_;
  torch::nn::GroupNorm norm_{nullptr};
  torch::nn::LayerNorm cond_norm_{nullptr};
  torch::nn::Linear q_{nullptr}, k_{nullptr}, v_{nullptr}, out_{nullptr};
};
TORCH_MODULE(SpatialCrossAttention);

/// Self-attention along the frame axis at every pixel, with a learned
/// relative-position bias per head. Identity when disabled.
class TemporalAttentionImpl : public torch::nn::Module {
 public:
  TemporalAttentionImpl(std::int64_t channels, std::int64_t heads, std::int64_t groups,
                        std::int64_t max_frames, bool enabled);
  /// x: [B*L, C, H, W] with frames contiguous per sample.
  torch::Tensor forward(const torch::Tensor& x, std::int64_t frames);

 private:
  bool enabled_;
  std::int64_t heads_;
  std::int64_t max_frames_;
  torch::nn::GroupNorm norm_{nullptr};
  torch::nn::Linear qkv_{nullptr}, out_{nullptr};
  torch::Tensor rel_bias_;  // [heads, 2*max_frames - 1]
};
TORCH_MODULE(TemporalAttention);

class ProbabilisticBranchImpl : public torch::nn::Module {
 public:
  explicit ProbabilisticBranchImpl(DenoiserConfig config);

  /// x_t: [B, C, L, H, W]; steps: [B, L]; z: [B, L, cond_channels, H/4, W/4].
  /// Returns eps_hat with the shape of x_t.
  torch::Tensor forward(const torch::Tensor& x_t, const torch::Tensor& steps, const torch::Tensor& z);

  /// Per-frame time embedding, [B*L, time_dim].
  torch::Tensor embed_steps(const torch::Tensor& steps, torch::ScalarType dtype);

  const DenoiserConfig& config() const { return config_; }

 private:
  struct Level {
    ResBlock res1{nullptr}, res2{nullptr};
    SpatialCrossAttention spatial{nullptr};
    TemporalAttention temporal{nullptr};
    torch::nn::Conv2d down{nullptr};         // 4x4, stride 2
    torch::nn::ConvTranspose2d up{nullptr};  // 4x4, stride 2
  };

  torch::Tensor attend(Level& level, torch::Tensor h, const torch::Tensor& cond, std::int64_t frames);

  DenoiserConfig config_;
  torch::nn::Conv2d init_conv_{nullptr};
  TemporalAttention init_temporal_{nullptr};
  torch::nn::Linear time_in_{nullptr}, time_out_{nullptr};
  torch::nn::Sequential cond_block_{nullptr};
  std::vector<Level> down_;
  ResBlock mid1_{nullptr}, mid2_{nullptr};
  SpatialCrossAttention mid_spatial_{nullptr};
  TemporalAttention mid_temporal_{nullptr};
  std::vector<Level> up_;
  ResBlock out_res_{nullptr};
  torch::nn::Conv2d out_conv_{nullptr};
};
TORCH_MODULE(ProbabilisticBranch);

/// eps_theta(x_t, t, z).
inline torch::Tensor denoise(ProbabilisticBranch& pb, const torch::Tensor& x_t,
                             const torch::Tensor& steps, const torch::Tensor& z) {
  return pb->forward(x_t, steps, z);
}

}  // namespace dgdm
