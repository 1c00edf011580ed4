// Copyright 2026 The DGDM Authors
// SPDX-License-Identifier: Apache-2.0

// Small configurations shared by the unit and acceptance tests.

#pragma once

#include "dgdm/model.hpp"

namespace dgdm::testing {

inline ModelConfig tiny_model(std::int64_t C = 1, std::int64_t L = 2, std::int64_t L_hat = 3) {
  ModelConfig m;
  m.db.in_channels = C;
  m.db.input_length = L;
  m.db.forecast_length = L_hat;
  m.db.hidden = 8;
  m.db.translator_depth = 2;
  m.db.translator_kernel = 3;
  m.db.translator_expansion = 2;
  m.pb.base = 16;
  m.pb.mults = {1, 2};
  m.pb.time_dim = 32;
  m.pb.heads = 2;
  m.pb.groups = 4;
  m.validate();
  return m;
}

inline DiffusionConfig tiny_diffusion(std::int64_t T = 100, std::int64_t reverse_steps = 20) {
  DiffusionConfig d;
  d.T = T;
  d.reverse_steps = reverse_steps;
  return d;
}

}  // namespace dgdm::testing
