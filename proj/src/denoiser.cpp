// Copyright 2026 The DGDM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dgdm/denoiser.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "dgdm/layers.hpp"

namespace dgdm {

namespace nn = torch::nn;

void DenoiserConfig::validate() const {
  if (in_channels < 1 || base < 1 || time_dim < 1 || cond_channels < 1) {
    throw std::invalid_argument("denoiser config: widths must be positive");
  }
  if (base % 2 != 0) {
    throw std::invalid_argument("denoiser config: base width must be even (sinusoidal embedding)");
  }
  if (mults.empty()) {
    throw std::invalid_argument("denoiser config: need at least one resolution level");
  }
  for (std::size_t i = 0; i < mults.size(); ++i) {
    if (mults[i] < 1 || (i > 0 && mults[i] < mults[i - 1])) {
      throw std::invalid_argument("denoiser config: channel multipliers must be positive and non-decreasing");
    }
    if ((base * mults[i]) % heads != 0) {
      throw std::invalid_argument("denoiser config: width " + std::to_string(base * mults[i]) +
                                  " not divisible by " + std::to_string(heads) + " heads");
    }
    if (groups > 0 && (base * mults[i]) % groups != 0) {
      throw std::invalid_argument("denoiser config: width " + std::to_string(base * mults[i]) +
                                  " not divisible by " + std::to_string(groups) + " norm groups");
    }
  }
  if (heads < 1 || groups < 1 || max_frames < 1) {
    throw std::invalid_argument("denoiser config: heads, groups and max_frames must be positive");
  }
}

void DenoiserConfig::validate_frame(std::int64_t height, std::int64_t width) const {
  const auto f = std::max<std::int64_t>(downsample(), 4);
  if (height % f != 0 || width % f != 0) {
    throw std::invalid_argument("denoiser: frame " + std::to_string(height) + "x" + std::to_string(width) +
                                " not divisible by " + std::to_string(f));
  }
}

ResBlockImpl::ResBlockImpl(std::int64_t in, std::int64_t out, std::int64_t time_dim, std::int64_t groups)
    : conv1_(register_module("conv1", nn::Conv2d(nn::Conv2dOptions(in, out, 3).padding(1)))),
      conv2_(register_module("conv2", nn::Conv2d(nn::Conv2dOptions(out, out, 3).padding(1)))),
      norm1_(register_module("norm1", layers::group_norm(groups, out))),
      norm2_(register_module("norm2", layers::group_norm(groups, out))),
      time_proj_(register_module("time_proj", nn::Linear(time_dim, out))) {
  if (in != out) {
    skip_ = register_module("skip", nn::Conv2d(nn::Conv2dOptions(in, out, 1)));
  }
}

torch::Tensor ResBlockImpl::forward(const torch::Tensor& x, const torch::Tensor& temb) {
  auto h = torch::silu(norm1_(conv1_(x)));
  h = h + torch::silu(time_proj_(temb)).unsqueeze(-1).unsqueeze(-1);
  h = torch::silu(norm2_(conv2_(h)));
  return h + (skip_ ? skip_(x) : x);
}

SpatialCrossAttentionImpl::SpatialCrossAttentionImpl(std::int64_t channels, std::int64_t cond_channels,
                                                     std::int64_t heads, std::int64_t groups)
    : heads_(heads),
      norm_(register_module("norm", layers::group_norm(groups, channels))),
      cond_norm_(register_module("cond_norm", nn::LayerNorm(nn::LayerNormOptions({cond_channels})))),
      q_(register_module("q", nn::Linear(nn::LinearOptions(channels, channels).bias(false)))),
      k_(register_module("k", nn::Linear(nn::LinearOptions(cond_channels, channels).bias(false)))),
      v_(register_module("v", nn::Linear(nn::LinearOptions(cond_channels, channels).bias(false)))),
      out_(register_module("out", nn::Linear(channels, channels))) {}

torch::Tensor SpatialCrossAttentionImpl::forward(const torch::Tensor& x, const torch::Tensor& cond) {
  const auto N = x.size(0);
  const auto C = x.size(1);
  const auto H = x.size(2);
  const auto W = x.size(3);
  const auto d = C / heads_;
  auto split = [&](const torch::Tensor& t) { return t.view({N, -1, heads_, d}).transpose(1, 2); };

  auto tokens = norm_(x).flatten(2).transpose(1, 2);             // [N, HW, C]
  auto ctx = cond_norm_(cond.flatten(2).transpose(1, 2));         // [N, hw, Cc]
  auto a = at::scaled_dot_product_attention(split(q_(tokens)), split(k_(ctx)), split(v_(ctx)));
  a = out_(a.transpose(1, 2).reshape({N, H * W, C}));
  return x + a.transpose(1, 2).reshape({N, C, H, W});
}

TemporalAttentionImpl::TemporalAttentionImpl(std::int64_t channels, std::int64_t heads, std::int64_t groups,
                                             std::int64_t max_frames, bool enabled)
    : enabled_(enabled), heads_(heads), max_frames_(max_frames) {
  if (!enabled_) {
    return;
  }
  norm_ = register_module("norm", layers::group_norm(groups, channels));
  qkv_ = register_module("qkv", nn::Linear(nn::LinearOptions(channels, 3 * channels).bias(false)));
  out_ = register_module("out", nn::Linear(channels, channels));
  rel_bias_ = register_parameter("rel_bias", torch::zeros({heads, 2 * max_frames - 1}));
}

torch::Tensor TemporalAttentionImpl::forward(const torch::Tensor& x, std::int64_t frames) {
  if (!enabled_) {
    return x;
  }
  if (frames > max_frames_) {
    throw std::invalid_argument("temporal attention: " + std::to_string(frames) +
                                " frames exceed max_frames " + std::to_string(max_frames_));
  }
  const auto NL = x.size(0);
  const auto C = x.size(1);
  const auto H = x.size(2);
  const auto W = x.size(3);
  const auto L = frames;
  const auto B = NL / L;
  const auto d = C / heads_;

  auto tokens = norm_(x).view({B, L, C, H, W}).permute({0, 3, 4, 1, 2}).reshape({B * H * W, L, C});
  auto qkv = qkv_(tokens).chunk(3, -1);
  auto split = [&](const torch::Tensor& t) { return t.reshape({B * H * W, L, heads_, d}).transpose(1, 2); };

  auto pos = torch::arange(L, torch::kLong);
  auto rel = (pos.unsqueeze(0) - pos.unsqueeze(1)) + (max_frames_ - 1);  // [L, L], key - query
  auto bias = rel_bias_.index_select(1, rel.flatten()).view({heads_, L, L}).unsqueeze(0).to(x.scalar_type());

  auto a = at::scaled_dot_product_attention(split(qkv[0]), split(qkv[1]), split(qkv[2]), bias);
  a = out_(a.transpose(1, 2).reshape({B * H * W, L, C}));
  a = a.view({B, H, W, L, C}).permute({0, 3, 4, 1, 2}).reshape({NL, C, H, W});
  return x + a;
}

ProbabilisticBranchImpl::ProbabilisticBranchImpl(DenoiserConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto& c = config_;
  const auto n = static_cast<std::int64_t>(c.mults.size());
  auto width = [&](std::int64_t level) { return c.base * c.mults[static_cast<std::size_t>(level)]; };
  auto temporal = [&](std::int64_t ch) {
    return TemporalAttention(ch, c.heads, c.groups, c.max_frames, c.temporal_attention);
  };
  auto spatial = [&](std::int64_t ch) {
    return c.spatial_attention ? SpatialCrossAttention(ch, c.base, c.heads, c.groups)
                               : SpatialCrossAttention(nullptr);
  };

  init_conv_ = register_module("init_conv", nn::Conv2d(nn::Conv2dOptions(c.in_channels, c.base, 7).padding(3)));
  init_temporal_ = register_module("init_temporal", temporal(c.base));
  time_in_ = register_module("time_in", nn::Linear(c.base, c.time_dim));
  time_out_ = register_module("time_out", nn::Linear(c.time_dim, c.time_dim));
  cond_block_ = register_module(
      "cond_block",
      nn::Sequential(nn::Conv2d(nn::Conv2dOptions(c.cond_channels, c.base, 3).padding(1)),
                     layers::group_norm(c.groups, c.base), nn::SiLU(),
                     nn::Conv2d(nn::Conv2dOptions(c.base, c.base, 3).padding(1)),
                     layers::group_norm(c.groups, c.base), nn::SiLU()));

  for (std::int64_t i = 0; i < n; ++i) {
    const auto prefix = "down" + std::to_string(i) + "_";
    const auto in = i == 0 ? c.base : width(i - 1);
    const auto ch = width(i);
    Level level;
    level.res1 = register_module(prefix + "res1", ResBlock(in, ch, c.time_dim, c.groups));
    level.res2 = register_module(prefix + "res2", ResBlock(ch, ch, c.time_dim, c.groups));
    level.spatial = spatial(ch);
    if (level.spatial) {
      register_module(prefix + "spatial", level.spatial);
    }
    level.temporal = register_module(prefix + "temporal", temporal(ch));
    if (i < n - 1) {
      level.down = register_module(prefix + "downsample",
                                   nn::Conv2d(nn::Conv2dOptions(ch, ch, 4).stride(2).padding(1)));
    }
    down_.push_back(level);
  }

  const auto mid = width(n - 1);
  mid1_ = register_module("mid_res1", ResBlock(mid, mid, c.time_dim, c.groups));
  mid_spatial_ = spatial(mid);
  if (mid_spatial_) {
    register_module("mid_spatial", mid_spatial_);
  }
  mid_temporal_ = register_module("mid_temporal", temporal(mid));
  mid2_ = register_module("mid_res2", ResBlock(mid, mid, c.time_dim, c.groups));

  for (std::int64_t i = n - 1; i >= 0; --i) {
    const auto prefix = "up" + std::to_string(i) + "_";
    const auto prev = i == n - 1 ? mid : width(i);
    const auto out = width(std::max<std::int64_t>(i - 1, 0));
    Level level;
    level.res1 = register_module(prefix + "res1", ResBlock(prev + width(i), out, c.time_dim, c.groups));
    level.res2 = register_module(prefix + "res2", ResBlock(out, out, c.time_dim, c.groups));
    level.spatial = spatial(out);
    if (level.spatial) {
      register_module(prefix + "spatial", level.spatial);
    }
    level.temporal = register_module(prefix + "temporal", temporal(out));
    if (i > 0) {
      level.up = register_module(prefix + "upsample",
                                 nn::ConvTranspose2d(nn::ConvTranspose2dOptions(out, out, 4).stride(2).padding(1)));
    }
    up_.push_back(level);
  }

  // Up path output, initial features and upsampled conditioning features.
  out_res_ = register_module("out_res", ResBlock(3 * c.base, c.base, c.time_dim, c.groups));
  out_conv_ = register_module("out_conv", nn::Conv2d(nn::Conv2dOptions(c.base, c.in_channels, 1)));
}

torch::Tensor ProbabilisticBranchImpl::embed_steps(const torch::Tensor& steps, torch::ScalarType dtype) {
  auto base = layers::sinusoidal_embedding(steps.flatten(), config_.base, dtype);
  return time_out_(torch::gelu(time_in_(base)));
}

torch::Tensor ProbabilisticBranchImpl::attend(Level& level, torch::Tensor h, const torch::Tensor& cond,
                                              std::int64_t frames) {
  if (level.spatial) {
    h = level.spatial(h, cond);
  }
  return level.temporal(h, frames);
}

torch::Tensor ProbabilisticBranchImpl::forward(const torch::Tensor& x_t, const torch::Tensor& steps,
                                               const torch::Tensor& z) {
  const auto& c = config_;
  if (x_t.dim() != 5 || x_t.size(1) != c.in_channels) {
    throw std::invalid_argument("denoiser: expected x_t [B, " + std::to_string(c.in_channels) +
                                ", L, H, W], got " + c10::str(x_t.sizes()));
  }
  const auto B = x_t.size(0);
  const auto C = x_t.size(1);
  const auto L = x_t.size(2);
  const auto H = x_t.size(3);
  const auto W = x_t.size(4);
  c.validate_frame(H, W);
  if (steps.dim() != 2 || steps.size(0) != B || steps.size(1) != L) {
    throw std::invalid_argument("denoiser: steps must be [B, L], got " + c10::str(steps.sizes()));
  }
  if (z.dim() != 5 || z.size(0) != B || z.size(1) != L || z.size(2) != c.cond_channels ||
      z.size(3) != H / 4 || z.size(4) != W / 4) {
    throw std::invalid_argument("denoiser: conditioning latent must be [B, L, " +
                                std::to_string(c.cond_channels) + ", H/4, W/4], got " + c10::str(z.sizes()));
  }

  auto frames = x_t.permute({0, 2, 1, 3, 4}).reshape({B * L, C, H, W});
  auto temb = embed_steps(steps, x_t.scalar_type());
  auto cond = cond_block_->forward(z.reshape({B * L, c.cond_channels, H / 4, W / 4}));

  auto h = init_temporal_(init_conv_(frames), L);
  const auto init_features = h;

  std::vector<torch::Tensor> skips;
  for (auto& level : down_) {
    h = level.res1(h, temb);
    h = level.res2(h, temb);
    h = attend(level, h, cond, L);
    skips.push_back(h);
    if (level.down) {
      h = level.down(h);
    }
  }

  h = mid1_(h, temb);
  if (mid_spatial_) {
    h = mid_spatial_(h, cond);
  }
  h = mid_temporal_(h, L);
  h = mid2_(h, temb);

  for (auto& level : up_) {
    h = torch::cat({h, skips.back()}, 1);
    skips.pop_back();
    h = level.res1(h, temb);
    h = level.res2(h, temb);
    h = attend(level, h, cond, L);
    if (level.up) {
      h = level.up(h);
    }
  }

  auto cond_full = torch::nn::functional::interpolate(
      cond, torch::nn::functional::InterpolateFuncOptions().size(std::vector<std::int64_t>{H, W}).mode(torch::kNearest));
  h = out_res_(torch::cat({h, init_features, cond_full}, 1), temb);
  auto eps = out_conv_(h);
  return eps.reshape({B, L, C, H, W}).permute({0, 2, 1, 3, 4}).contiguous();
}

}  // namespace dgdm
