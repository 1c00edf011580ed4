// Copyright 2026 The DGDM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dgdm/deterministic_branch.hpp"

#include <stdexcept>
#include <string>

namespace dgdm {

namespace nn = torch::nn;

void DBConfig::validate() const {
  if (in_channels < 1 || input_length < 1 || forecast_length < 1) {
    throw std::invalid_argument("DB config: channels and lengths must be positive");
  }
  if (hidden < 1 || translator_depth < 0 || translator_expansion < 1) {
    throw std::invalid_argument("DB config: hidden width must be >= 1");
  }
  if (translator_kernel < 1 || translator_kernel % 2 == 0) {
    throw std::invalid_argument("DB config: translator kernel must be odd");
  }
}

void DBConfig::validate_frame(std::int64_t height, std::int64_t width) const {
  if (height % kDownsample != 0 || width % kDownsample != 0 || height < kDownsample ||
      width < kDownsample) {
    throw std::invalid_argument("DB: frame " + std::to_string(height) + "x" + std::to_string(width) +
                                " is not divisible by 4");
  }
}

DeterministicBranchImpl::DeterministicBranchImpl(DBConfig config) : config_(config) {
  config_.validate();
  const auto c = config_.in_channels;
  const auto h = config_.hidden;

  // Time is folded into the batch; two of the four stages stride by 2.
  encoder_ = register_module("encoder", nn::Sequential(layers::ConvNormAct(c, h, 1),
                                                       layers::ConvNormAct(h, h, 2),
                                                       layers::ConvNormAct(h, h, 1),
                                                       layers::ConvNormAct(h, h, 2)));

  const auto in_width = h * config_.input_length;
  const auto out_width = h * config_.forecast_length;
  if (in_width != out_width) {
    retime_ = register_module("retime", nn::Conv2d(nn::Conv2dOptions(in_width, out_width, 1)));
  }
  translator_ = register_module("translator", nn::Sequential());
  for (std::int64_t i = 0; i < config_.translator_depth; ++i) {
    translator_->push_back(
        layers::ConvNeXtBlock(out_width, config_.translator_kernel, config_.translator_expansion));
  }

  decoder_ = register_module("decoder", nn::Sequential(layers::ConvNormAct(h, 4 * h),
                                                       nn::PixelShuffle(2),
                                                       layers::ConvNormAct(h, h),
                                                       layers::ConvNormAct(h, 4 * h),
                                                       nn::PixelShuffle(2),
                                                       layers::ConvNormAct(h, h)));
  readout_ = register_module(
      "readout", nn::Conv2d(nn::Conv2dOptions(out_width, c * config_.forecast_length, 3).padding(1)));
}

DBOutput DeterministicBranchImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 5 || x.size(1) != config_.in_channels || x.size(2) != config_.input_length) {
    throw std::invalid_argument("DB: expected input [B, " + std::to_string(config_.in_channels) + ", " +
                                std::to_string(config_.input_length) + ", H, W], got " +
                                c10::str(x.sizes()));
  }
  config_.validate_frame(x.size(3), x.size(4));
  if (!torch::isfinite(x).all().item<bool>()) {
    throw std::invalid_argument("DB: input contains non-finite values");
  }
  const auto B = x.size(0);
  const auto C = config_.in_channels;
  const auto L = config_.input_length;
  const auto Lh = config_.forecast_length;
  const auto H = x.size(3);
  const auto W = x.size(4);
  const auto hid = config_.hidden;
  const auto h4 = H / DBConfig::kDownsample;
  const auto w4 = W / DBConfig::kDownsample;

  auto frames = x.permute({0, 2, 1, 3, 4}).reshape({B * L, C, H, W});
  auto enc = encoder_->forward(frames);  // [B*L, hid, H/4, W/4]

  auto t = enc.reshape({B, L * hid, h4, w4});
  if (retime_) {
    t = retime_(t);
  }
  t = translator_->forward(t);  // [B, L_hat*hid, H/4, W/4]
  auto z = t.reshape({B, Lh, hid, h4, w4});

  auto dec = decoder_->forward(z.reshape({B * Lh, hid, h4, w4}));  // [B*L_hat, hid, H, W]
  auto out = readout_(dec.reshape({B, Lh * hid, H, W}));
  auto y_hat = out.reshape({B, Lh, C, H, W}).permute({0, 2, 1, 3, 4}).contiguous();
  return {y_hat, z};
}

torch::Tensor db_loss(const torch::Tensor& y_hat, const torch::Tensor& y) {
  if (y_hat.sizes() != y.sizes()) {
    throw std::invalid_argument("db_loss: shape mismatch " + c10::str(y_hat.sizes()) + " vs " +
                                c10::str(y.sizes()));
  }
  return torch::mse_loss(y_hat, y);
}

}  // namespace dgdm
