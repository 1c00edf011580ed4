// Copyright 2026 The DGDM Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "dgdm/schedule.hpp"

using dgdm::make_bridge_schedule;
using dgdm::make_reverse_grid;
using dgdm::make_svs;

TEST(BridgeSchedule, MidpointAndEndpoints) {
  auto s = make_bridge_schedule(1000);
  EXPECT_EQ(s.m[500], 0.5);
  EXPECT_EQ(s.delta[500], 0.5);
  EXPECT_EQ(s.m[0], 0.0);
  EXPECT_EQ(s.delta[0], 0.0);
  EXPECT_EQ(s.m[1000], 1.0);
  EXPECT_EQ(s.delta[1000], 0.0);
}

TEST(BridgeSchedule, FourSteps) {
  auto s = make_bridge_schedule(4);
  const std::vector<double> expected{0.0, 0.375, 0.5, 0.375, 0.0};
  EXPECT_EQ(s.delta, expected);
}

TEST(BridgeSchedule, RejectsTooShort) {
  EXPECT_THROW(make_bridge_schedule(1), std::invalid_argument);
  EXPECT_THROW(make_bridge_schedule(0), std::invalid_argument);
}

TEST(BridgeSchedule, InvariantsOverManyLengths) {
  std::mt19937 rng(7);
  std::uniform_int_distribution<std::int64_t> pick(2, 5000);
  for (int trial = 0; trial < 200; ++trial) {
    const auto T = trial < 10 ? trial + 2 : pick(rng);
    auto s = make_bridge_schedule(T);
    ASSERT_EQ(s.m.size(), static_cast<std::size_t>(T + 1));
    EXPECT_EQ(s.m.front(), 0.0);
    EXPECT_EQ(s.m.back(), 1.0);
    EXPECT_EQ(s.delta.front(), 0.0);
    EXPECT_EQ(s.delta.back(), 0.0);
    for (std::int64_t t = 1; t <= T; ++t) {
      ASSERT_LT(s.m[t - 1], s.m[t]);
    }
    for (std::int64_t t = 1; t < T; ++t) {
      ASSERT_GT(s.delta[t], 0.0);
      ASSERT_TRUE(std::isfinite(std::sqrt(s.delta[t])));
      ASSERT_NEAR(s.delta[t], s.delta[T - t], 1e-15);
      ASSERT_EQ(s.m[t], static_cast<double>(t) / static_cast<double>(T));
    }
  }
}

TEST(BridgeSchedule, Deterministic) {
  auto a = make_bridge_schedule(777);
  auto b = make_bridge_schedule(777);
  EXPECT_EQ(a.m, b.m);
  EXPECT_EQ(a.delta, b.delta);
}

TEST(Svs, TenLeadTimes) {
  auto svs = make_svs(1000, 10, 50);
  const std::vector<std::int64_t> expected{550, 600, 650, 700, 750, 800, 850, 900, 950, 1000};
  EXPECT_EQ(svs.frame_steps, expected);
}

TEST(Svs, ZeroStepDisables) {
  auto svs = make_svs(1000, 10, 0);
  EXPECT_EQ(svs.frame_steps, std::vector<std::int64_t>(10, 1000));
}

TEST(Svs, RejectsStepLeavingFirstFrameEmpty) {
  EXPECT_THROW(make_svs(100, 10, 20), std::invalid_argument);
  EXPECT_THROW(make_svs(100, 10, 12), std::invalid_argument);
  EXPECT_NO_THROW(make_svs(100, 10, 11));
}

TEST(Svs, BoundaryStepAccepted) {
  // T - (L_hat - 1) S = 1 is the smallest admissible first horizon.
  auto svs = make_svs(10, 10, 1);
  EXPECT_EQ(svs.frame_steps.front(), 1);
  EXPECT_EQ(svs.frame_steps.back(), 10);
}

TEST(Svs, MonotoneForPositiveStep) {
  for (std::int64_t L = 2; L <= 24; ++L) {
    for (std::int64_t S = 1; (L - 1) * S < 1000; S += 7) {
      auto svs = make_svs(1000, L, S);
      ASSERT_EQ(svs.frame_steps.back(), 1000);
      for (std::size_t i = 1; i < svs.frame_steps.size(); ++i) {
        ASSERT_LT(svs.frame_steps[i - 1], svs.frame_steps[i]);
      }
    }
  }
}

TEST(Svs, DefaultStepKeepsFirstFrameAboveHalf) {
  EXPECT_EQ(dgdm::default_svs_step(1000, 10), 50);
  auto svs = make_svs(1000, 10, dgdm::default_svs_step(1000, 10));
  EXPECT_GT(svs.frame_steps.front(), 500);
  EXPECT_EQ(dgdm::default_svs_step(1000, 12), 41);
}

TEST(ReverseGrid, TruncatedHalf) {
  auto g = make_reverse_grid(1000, 200, 1.0, 0.5);
  EXPECT_EQ(g.full_transitions(), 200u);
  EXPECT_EQ(g.transitions(), 100u);
  EXPECT_EQ(g.start(), 500);
  EXPECT_EQ(g.steps.back(), 0);
}

TEST(ReverseGrid, Untruncated) {
  auto g = make_reverse_grid(1000, 200, 1.0, 0.0);
  EXPECT_EQ(g.transitions(), 200u);
  EXPECT_EQ(g.start(), 1000);
  EXPECT_EQ(g.steps, g.full);
  for (std::size_t k = 0; k < g.full.size(); ++k) {
    EXPECT_EQ(g.full[k], 1000 - 5 * static_cast<std::int64_t>(k));
  }
}

TEST(ReverseGrid, ShortFrameGetsProportionalGrid) {
  // Oracle: the integer closest to 200 * 550 / 1000, found by enumeration.
  std::int64_t best = 0;
  double best_gap = 1e9;
  for (std::int64_t n = 1; n <= 200; ++n) {
    const double gap = std::abs(static_cast<double>(n) - 200.0 * 550.0 / 1000.0);
    if (gap < best_gap) {
      best_gap = gap;
      best = n;
    }
  }
  auto g = make_reverse_grid(550, 200, 1.0, 0.0, 1000);
  EXPECT_EQ(static_cast<std::int64_t>(g.transitions()), best);
  EXPECT_EQ(g.transitions(), 110u);
  EXPECT_EQ(g.start(), 550);
  EXPECT_EQ(g.steps.back(), 0);
}

TEST(ReverseGrid, RejectsBadKnobs) {
  EXPECT_THROW(make_reverse_grid(1000, 200, -0.1, 0.5), std::invalid_argument);
  EXPECT_THROW(make_reverse_grid(1000, 200, 1.1, 0.5), std::invalid_argument);
  EXPECT_THROW(make_reverse_grid(1000, 200, 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(make_reverse_grid(1000, 200, 1.0, -0.01), std::invalid_argument);
  EXPECT_THROW(make_reverse_grid(1000, 0, 1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(make_reverse_grid(1000, 1001, 1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(make_reverse_grid(1200, 10, 1.0, 0.0, 1000), std::invalid_argument);
}

TEST(ReverseGrid, SuffixAndOrderingProperties) {
  std::mt19937 rng(11);
  std::uniform_int_distribution<std::int64_t> pickT(2, 2000);
  std::uniform_real_distribution<double> pickF(0.0, 0.999);
  for (int trial = 0; trial < 500; ++trial) {
    const auto T = pickT(rng);
    std::uniform_int_distribution<std::int64_t> pickTi(1, T);
    std::uniform_int_distribution<std::int64_t> pickN(1, T);
    const auto Ti = pickTi(rng);
    const auto n = pickN(rng);
    const double f = trial % 5 == 0 ? 0.0 : pickF(rng);
    auto g = make_reverse_grid(Ti, n, 0.5, f, T);

    ASSERT_EQ(g.full.front(), Ti);
    ASSERT_EQ(g.full.back(), 0);
    ASSERT_EQ(g.steps.back(), 0);
    ASSERT_GE(g.transitions(), 1u);
    for (std::size_t k = 1; k < g.full.size(); ++k) {
      ASSERT_LT(g.full[k], g.full[k - 1]);
    }
    const auto drop = g.full.size() - g.steps.size();
    ASSERT_EQ(drop, static_cast<std::size_t>(std::floor(f * static_cast<double>(g.full_transitions()))));
    for (std::size_t k = 0; k < g.steps.size(); ++k) {
      ASSERT_EQ(g.steps[k], g.full[k + drop]);
      ASSERT_LE(g.steps[k], Ti);
    }
  }
}
