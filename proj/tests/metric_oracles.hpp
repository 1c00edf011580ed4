// Copyright 2026 The DGDM Authors
// SPDX-License-Identifier: Apache-2.0

// Reference computations shared by the metric tests and the acceptance suite.

#pragma once

#include <torch/torch.h>

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

namespace dgdm::testing {

/// Direct windowed sums, no convolution.
inline double brute_force_ssim(const torch::Tensor& a2, const torch::Tensor& b2, double range, int win = 11,
                        double sigma = 1.5) {
  auto a = a2.to(torch::kDouble).contiguous(), b = b2.to(torch::kDouble).contiguous();
  const auto H = a.size(0), W = a.size(1);
  auto A = a.accessor<double, 2>(), B = b.accessor<double, 2>();
  const int r = win / 2;
  std::vector<double> w(static_cast<std::size_t>(win * win));
  double total = 0;
  for (int i = 0; i < win; ++i) {
    for (int j = 0; j < win; ++j) {
      const double v = std::exp(-((i - r) * (i - r) + (j - r) * (j - r)) / (2 * sigma * sigma));
      w[static_cast<std::size_t>(i * win + j)] = v;
      total += v;
    }
  }
  for (auto& v : w) v /= total;
  const double c1 = (0.01 * range) * (0.01 * range), c2 = (0.03 * range) * (0.03 * range);
  double sum = 0;
  int count = 0;
  for (std::int64_t y = 0; y + win <= H; ++y) {
    for (std::int64_t x = 0; x + win <= W; ++x) {
      double ma = 0, mb = 0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          const double k = w[static_cast<std::size_t>(i * win + j)];
          ma += k * A[y + i][x + j];
          mb += k * B[y + i][x + j];
        }
      double va = 0, vb = 0, cov = 0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          const double k = w[static_cast<std::size_t>(i * win + j)];
          const double da = A[y + i][x + j] - ma, db = B[y + i][x + j] - mb;
          va += k * da * da;
          vb += k * db * db;
          cov += k * da * db;
        }
      sum += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return sum / count;
}

/// Deterministic pseudo-random image identical to the reference script's.
inline std::pair<torch::Tensor, torch::Tensor> formula_pair() {
  const int H = 24, W = 20;
  auto a = torch::empty({H, W}, torch::kDouble), b = torch::empty({H, W}, torch::kDouble);
  auto A = a.accessor<double, 2>(), B = b.accessor<double, 2>();
  for (int i = 0; i < H; ++i) {
    for (int j = 0; j < W; ++j) {
      double v = std::sin(i * 12.9898 + j * 78.233) * 43758.5453;
      v -= std::floor(v);
      A[i][j] = v;
      B[i][j] = std::clamp(v + 0.2 * std::cos(i * 0.7 + j * 1.3), 0.0, 1.0);
    }
  }
  return {a, b};
}

}  // namespace dgdm::testing
