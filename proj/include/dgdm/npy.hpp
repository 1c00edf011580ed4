// Copyright 2026 The DGDM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include <string>

namespace dgdm::npy {

/// Writes a C-ordered little-endian .npy (float32, float64, uint8 or int64).
void write(const std::string& path, const torch::Tensor& tensor);

/// Reads the dtypes `write` produces. Throws std::runtime_error on anything else.
torch::Tensor read(const std::string& path);

}  // namespace dgdm::npy
