// Copyright 2026 The DGDM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <vector>

#include "dgdm/layers.hpp"

namespace dgdm {

/// Encoder/translator/decoder forecaster. Spatial resolution is reduced by a
/// fixed factor of 4 in the encoder.
struct DBConfig {
  std::int64_t in_channels = 1;
  std::int64_t input_length = 10;
  std::int64_t forecast_length = 10;
  std::int64_t hidden = 64;
  std::int64_t translator_depth = 8;
  std::int64_t translator_kernel = 7;
  std::int64_t translator_expansion = 4;

  static constexpr std::int64_t kDownsample = 4;

  void validate() const;
  /// Throws unless H and W are divisible by the downsample factor.
  void validate_frame(std::int64_t height, std::int64_t width) const;
};

struct DBOutput {
  torch::Tensor y_hat;  // [B, C, L_hat, H, W]
  torch::Tensor z;      // [B, L_hat, hidden, H/4, W/4]
};

class DeterministicBranchImpl : public torch::nn::Module {
 public:
  explicit DeterministicBranchImpl(DBConfig config);

  /// x: [B, C, L, H, W]. Throws on shape mismatch or non-finite input.
  DBOutput forward(const torch::Tensor& x);

  const DBConfig& config() const { return config_; }

 private:
  DBConfig config_;
  torch::nn::Sequential encoder_{nullptr};
  torch::nn::Conv2d retime_{nullptr};  // only when L != L_hat
  torch::nn::Sequential translator_{nullptr};
  torch::nn::Sequential decoder_{nullptr};
  torch::nn::Conv2d readout_{nullptr};
};
TORCH_MODULE(DeterministicBranch);

inline DBOutput db_forward(DeterministicBranch& db, const torch::Tensor& x) { return db->forward(x); }

/// Mean squared error over all elements.
torch::Tensor db_loss(const torch::Tensor& y_hat, const torch::Tensor& y);

}  // namespace dgdm
