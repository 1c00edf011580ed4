// Copyright 2026 The DGDM Authors
// SPDX-License-Identifier: Apache-2.0

#include <ATen/CPUGeneratorImpl.h>
#include <gtest/gtest.h>
#include <json.hpp>
#include <torch/torch.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "dgdm/inference.hpp"
#include "dgdm/metrics.hpp"
#include "metric_oracles.hpp"

using namespace dgdm;
using dgdm::testing::brute_force_ssim;
using dgdm::testing::formula_pair;

namespace {

at::Generator gen(std::uint64_t seed) { return at::make_generator<at::CPUGeneratorImpl>(seed); }

ForecastEnsemble ensemble_of(std::vector<torch::Tensor> members, torch::Tensor det = {}) {
  ForecastEnsemble ens;
  ens.samples = torch::stack(members);
  ens.deterministic = det;
  return ens;
}

}  // namespace

TEST(PointMetrics, IdenticalPairIsZeroError) {
  auto a = torch::rand({2, 3, 4});
  EXPECT_EQ(mae(a, a), 0.0);
  EXPECT_EQ(mse(a, a), 0.0);
}

TEST(PointMetrics, ConstantOffset) {
  auto a = torch::rand({5, 6});
  EXPECT_NEAR(mae(a + 2, a), 2.0, 1e-6);
  EXPECT_NEAR(mse(a + 2, a), 4.0, 1e-5);
}

TEST(PointMetrics, MatchBruteForceLoop) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    auto g = gen(rng());
    auto a = torch::randn({3, 7, 5}, g, torch::kDouble) * 40, b = torch::randn({3, 7, 5}, g, torch::kDouble) * 40;
    auto fa = a.view({-1}), fb = b.view({-1});
    double abs_sum = 0, sq_sum = 0;
    for (std::int64_t i = 0; i < fa.numel(); ++i) {
      const double d = fa[i].item<double>() - fb[i].item<double>();
      abs_sum += std::abs(d);
      sq_sum += d * d;
    }
    const double n = static_cast<double>(fa.numel());
    EXPECT_NEAR(mae(a, b), abs_sum / n, 1e-6);
    EXPECT_NEAR(mse(a, b), sq_sum / n, 1e-6);
  }
}

TEST(PointMetrics, SymmetricInArguments) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    auto g = gen(rng());
    auto a = torch::rand({2, 12, 12}, g), b = torch::rand({2, 12, 12}, g);
    EXPECT_DOUBLE_EQ(mae(a, b), mae(b, a));
    EXPECT_DOUBLE_EQ(mse(a, b), mse(b, a));
    EXPECT_NEAR(ssim(a, b, 1.0), ssim(b, a, 1.0), 1e-12);
  }
}

TEST(PointMetrics, ShapeMismatchThrows) {
  EXPECT_THROW(mae(torch::zeros({2}), torch::zeros({3})), std::invalid_argument);
  EXPECT_THROW(mse(torch::zeros({2, 2}), torch::zeros({4})), std::invalid_argument);
}

TEST(PointMetrics, NoiseAmplitudeIncreasesError) {
  auto g = gen(9);
  auto gt = torch::rand({4, 32, 32}, g, torch::kDouble);
  double last_mae = -1, last_mse = -1;
  for (double amp : {0.05, 0.2, 0.8}) {
    double m1 = 0, m2 = 0;
    for (int rep = 0; rep < 20; ++rep) {
      auto pred = gt + amp * torch::randn(gt.sizes(), g, torch::kDouble);
      m1 += mae(pred, gt);
      m2 += mse(pred, gt);
    }
    EXPECT_GT(m1, last_mae);
    EXPECT_GT(m2, last_mse);
    last_mae = m1;
    last_mse = m2;
  }
}

TEST(Psnr, SpotValue) { EXPECT_NEAR(psnr_from_mse(100.0, 255.0), 28.13, 0.01); }

TEST(Psnr, UnitRange) { EXPECT_NEAR(psnr_from_mse(0.01, 1.0), 20.0, 1e-12); }

TEST(Psnr, IdenticalPairIsCapped) {
  auto a = torch::rand({3, 8, 8});
  EXPECT_EQ(psnr(a, a, 1.0), kPsnrCap);
  EXPECT_EQ(psnr_from_mse(1e-30, 1.0), kPsnrCap);
}

TEST(Psnr, NonPositiveRangeThrows) {
  EXPECT_THROW(psnr_from_mse(1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(psnr_from_mse(1.0, -1.0), std::invalid_argument);
}

TEST(Ssim, IdenticalIsOne) {
  auto a = torch::rand({2, 16, 16});
  EXPECT_NEAR(ssim(a, a, 1.0), 1.0, 1e-12);
}

TEST(Ssim, ConstantImagesWithFullRangeOffset) {
  const double c = 0.2, range = 1.0;
  auto gt = torch::full({16, 16}, c, torch::kDouble), pred = torch::full({16, 16}, c + range, torch::kDouble);
  const double value = ssim(pred, gt, range);
  // Constant images: only the luminance term survives.
  const double c1 = 1e-4;
  const double closed_form = (2 * c * (c + range) + c1) / (c * c + (c + range) * (c + range) + c1);
  EXPECT_NEAR(value, closed_form, 1e-9);
  // gt = 0, pred = range: luminance term ~ c1 / (range^2 + c1).
  auto dark = torch::zeros({16, 16}, torch::kDouble);
  EXPECT_LT(ssim(torch::ones({16, 16}, torch::kDouble), dark, 1.0), 0.1);
}

TEST(Ssim, MatchesBruteForceWindowedSums) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    auto g = gen(rng());
    auto a = torch::rand({14, 17}, g, torch::kDouble);
    auto b = (a + 0.3 * torch::randn({14, 17}, g, torch::kDouble)).clamp(0, 1);
    EXPECT_NEAR(ssim(a, b, 1.0), brute_force_ssim(a, b, 1.0), 1e-10);
    EXPECT_NEAR(ssim(a * 255, b * 255, 255.0), brute_force_ssim(a * 255, b * 255, 255.0), 1e-10);
  }
}

TEST(Ssim, MatchesReferenceImplementation) {
  // structural_similarity(a, b, data_range=1, gaussian_weights=True, sigma=1.5,
  // use_sample_covariance=False) from scikit-image 0.25.
  auto [a, b] = formula_pair();
  EXPECT_NEAR(ssim(a, b, 1.0), 0.8876299162314855, 1e-4);
  EXPECT_NEAR(ssim(a * 255, b * 255, 255.0), 0.8876299162314853, 1e-4);
}

TEST(Ssim, AveragesOverLeadingDimensions) {
  auto g = gen(3);
  auto a = torch::rand({2, 3, 12, 12}, g, torch::kDouble), b = torch::rand({2, 3, 12, 12}, g, torch::kDouble);
  double sum = 0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) sum += brute_force_ssim(a[i][j], b[i][j], 1.0);
  EXPECT_NEAR(ssim(a, b, 1.0), sum / 6, 1e-10);
}

TEST(Ssim, RejectsSmallImages) {
  EXPECT_THROW(ssim(torch::zeros({10, 10}), torch::zeros({10, 10}), 1.0), std::invalid_argument);
}

TEST(Ssim, BoundedByOne) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto g = gen(rng());
    auto a = torch::rand({12, 12}, g), b = torch::rand({12, 12}, g);
    const double s = ssim(a, b, 1.0);
    EXPECT_LE(s, 1.0 + 1e-12);
    EXPECT_GE(s, -1.0 - 1e-12);
  }
}

TEST(FrameScores, ShapesAndPerFrameValues) {
  auto g = gen(5);
  auto pred = torch::rand({2, 2, 3, 12, 12}, g, torch::kDouble), gt = torch::rand({2, 2, 3, 12, 12}, g, torch::kDouble);
  for (auto m : {Metric::Mae, Metric::Mse, Metric::Psnr, Metric::Ssim}) {
    auto s = frame_scores(m, pred, gt, 1.0);
    EXPECT_EQ(s.sizes(), (std::vector<std::int64_t>{2, 3}));
  }
  auto p = pred.select(2, 1).select(0, 1), q = gt.select(2, 1).select(0, 1);
  EXPECT_NEAR(frame_mae(pred, gt)[1][1].item<double>(), mae(p, q), 1e-12);
  EXPECT_NEAR(frame_psnr(pred, gt, 1.0)[1][1].item<double>(), psnr(p, q, 1.0), 1e-9);
  EXPECT_NEAR(frame_ssim(pred, gt, 1.0)[1][1].item<double>(), ssim(p, q, 1.0), 1e-12);
}

TEST(MetricNames, RoundTrip) {
  for (auto m : {Metric::Mae, Metric::Mse, Metric::Psnr, Metric::Ssim}) EXPECT_EQ(parse_metric(metric_name(m)), m);
  EXPECT_THROW(parse_metric("fvd"), std::invalid_argument);
}

TEST(Report, SingleExactSampleScoresPerfectlyEverywhere) {
  auto y = torch::rand({1, 1, 2, 12, 12});
  auto report = evaluate_report(ensemble_of({y.clone()}, y.clone()), y, ReportOptions{});
  for (const auto& row : report.rows) {
    EXPECT_EQ(row.mae, 0.0) << row.identity;
    EXPECT_EQ(row.mse, 0.0);
    EXPECT_EQ(row.psnr, kPsnrCap);
    EXPECT_NEAR(row.ssim, 1.0, 1e-12);
  }
  EXPECT_EQ(report.identities(), (std::vector<std::string>{"deterministic", "sample-0", "average", "best"}));
}

TEST(Report, BestRowNeverWorseThanAnySample) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 8; ++trial) {
    auto g = gen(rng());
    auto y = torch::rand({3, 1, 2, 12, 12}, g);
    std::vector<torch::Tensor> m;
    for (int n = 0; n < 4; ++n) m.push_back(y + 0.2 * (n + 1) * torch::randn(y.sizes(), g));
    auto report = evaluate_report(ensemble_of(m), y, ReportOptions{});
    const auto* best = report.aggregate("best");
    ASSERT_NE(best, nullptr);
    for (int n = 0; n < 4; ++n) {
      const auto* s = report.aggregate("sample-" + std::to_string(n));
      EXPECT_LE(best->mse, s->mse + 1e-12);
      EXPECT_LE(best->mae, s->mae + 1e-12);
      EXPECT_GE(best->ssim, s->ssim - 1e-12);
    }
  }
}

TEST(Report, AggregatesRecomputedFromPerFrameRows) {
  auto g = gen(21);
  auto y = torch::rand({2, 2, 3, 12, 12}, g) * 255;
  std::vector<torch::Tensor> m{y + 10 * torch::randn(y.sizes(), g), y + 20 * torch::randn(y.sizes(), g)};
  for (bool frame_sum : {false, true}) {
    ReportOptions o;
    o.data_range = 255;
    o.frame_sum = frame_sum;
    o.variables = {"a", "b"};
    auto report = evaluate_report(ensemble_of(m, y + 5), y, o);
    // Independent pass: group per-frame rows by (identity, variable).
    std::map<std::pair<std::string, std::string>, std::vector<const MetricRow*>> frames;
    std::map<std::pair<std::string, std::string>, const MetricRow*> aggregates;
    for (const auto& r : report.rows) {
      if (r.frame < 0) {
        aggregates[{r.identity, r.variable}] = &r;
      } else {
        frames[{r.identity, r.variable}].push_back(&r);
      }
    }
    ASSERT_EQ(aggregates.size(), frames.size());
    ASSERT_EQ(aggregates.size(), 5u * 3u);  // 5 identities x {all, a, b}
    for (const auto& [key, list] : frames) {
      ASSERT_EQ(list.size(), 3u);
      double s[4] = {0, 0, 0, 0};
      for (std::size_t i = 0; i < list.size(); ++i) {
        s[0] += list[i]->mae;
        s[1] += list[i]->mse;
        s[2] += list[i]->psnr;
        s[3] += list[i]->ssim;
      }
      const auto* agg = aggregates[key];
      const double div = frame_sum ? 1.0 : 3.0;
      EXPECT_NEAR(agg->mae, s[0] / div, 1e-9 * std::max(1.0, s[0]));
      EXPECT_NEAR(agg->mse, s[1] / div, 1e-9 * std::max(1.0, s[1]));
      EXPECT_NEAR(agg->psnr, s[2] / 3.0, 1e-9 * std::max(1.0, s[2]));
      EXPECT_NEAR(agg->ssim, s[3] / 3.0, 1e-12);
    }
  }
}

TEST(Report, PerFrameValuesMatchDirectComputation) {
  auto g = gen(22);
  auto y = torch::rand({2, 1, 2, 12, 12}, g, torch::kDouble);
  auto s = y + 0.1 * torch::randn(y.sizes(), g, torch::kDouble);
  auto report = evaluate_report(ensemble_of({s}), y, ReportOptions{});
  for (const auto& r : report.rows) {
    if (r.identity != "sample-0" || r.frame < 0) continue;
    double expected = 0;
    for (int b = 0; b < 2; ++b) expected += mse(s[b].select(1, r.frame), y[b].select(1, r.frame)) / 2;
    EXPECT_NEAR(r.mse, expected, 1e-12);
  }
}

TEST(Report, DenormalizeAppliesBeforeScoring) {
  auto y = torch::zeros({1, 1, 1, 12, 12});
  ReportOptions o;
  o.data_range = 255;
  o.denormalize = [](const torch::Tensor& t) { return t * 255; };
  auto report = evaluate_report(ensemble_of({y + 0.1}), y, o);
  EXPECT_NEAR(report.aggregate("sample-0")->mae, 25.5, 1e-4);
}

TEST(Report, MissingTruthDegradesGracefully) {
  auto g = gen(30);
  std::vector<torch::Tensor> m{torch::rand({1, 1, 2, 12, 12}, g), torch::rand({1, 1, 2, 12, 12}, g)};
  auto report = evaluate_report(ensemble_of(m, m[0]), std::nullopt, ReportOptions{});
  EXPECT_EQ(report.reference, "ensemble_mean");
  EXPECT_EQ(report.identities(), (std::vector<std::string>{"deterministic", "sample-0", "sample-1"}));
  EXPECT_FALSE(report.notices.empty());
  EXPECT_TRUE(report.ensemble_pixel_std.has_value());
}

TEST(Report, DeterministicOnlyEnsemble) {
  auto y = torch::rand({1, 1, 2, 12, 12});
  ForecastEnsemble ens;
  ens.deterministic = y + 0.1;
  auto report = evaluate_report(ens, y, ReportOptions{});
  EXPECT_EQ(report.identities(), std::vector<std::string>{"deterministic"});
  EXPECT_FALSE(report.ensemble_pixel_std.has_value());
}

TEST(Report, ShapeMismatchThrows) {
  auto y = torch::rand({1, 1, 3, 12, 12});
  EXPECT_THROW(evaluate_report(ensemble_of({torch::rand({1, 1, 2, 12, 12})}), y, ReportOptions{}),
               std::invalid_argument);
}

TEST(Report, CsvAndJsonCarrySchema) {
  auto y = torch::rand({1, 1, 2, 12, 12});
  auto report = evaluate_report(ensemble_of({y + 0.05}), y, ReportOptions{});
  std::istringstream csv(report.to_csv());
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "identity,variable,frame,reference,mae,mse,psnr,ssim,fvd");
  std::size_t lines = 0;
  for (std::string line; std::getline(csv, line);) {
    ++lines;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 8);
  }
  EXPECT_EQ(lines, report.rows.size());
  auto j = nlohmann::json::parse(report.to_json());
  EXPECT_EQ(j["schema"], "dgdm.metrics/1");
  EXPECT_EQ(j["rows"].size(), report.rows.size());
  EXPECT_TRUE(j["rows"][0]["fvd"].is_null());
}
