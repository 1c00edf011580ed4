// Copyright 2026 The DGDM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace dgdm {

struct ForecastEnsemble;

/// Reported PSNR when prediction and truth coincide.
inline constexpr double kPsnrCap = 100.0;

double mae(const torch::Tensor& pred, const torch::Tensor& gt);
double mse(const torch::Tensor& pred, const torch::Tensor& gt);
/// 10 log10(range^2 / mse), capped at kPsnrCap.
double psnr_from_mse(double mse, double data_range);
double psnr(const torch::Tensor& pred, const torch::Tensor& gt, double data_range);

struct SsimOptions {
  std::int64_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Gaussian-windowed SSIM over the valid region, averaged over all leading
/// dimensions. Inputs are [..., H, W].
double ssim(const torch::Tensor& pred, const torch::Tensor& gt, double data_range, const SsimOptions& options = {});

enum class Metric { Mae, Mse, Psnr, Ssim };
Metric parse_metric(const std::string& name);
std::string metric_name(Metric metric);
/// Whether larger values are better.
bool higher_is_better(Metric metric);

/// Per clip and frame scores for [B, C, L, H, W] clips, as [B, L] doubles.
torch::Tensor frame_mae(const torch::Tensor& pred, const torch::Tensor& gt);
torch::Tensor frame_mse(const torch::Tensor& pred, const torch::Tensor& gt);
torch::Tensor frame_psnr(const torch::Tensor& pred, const torch::Tensor& gt, double data_range);
torch::Tensor frame_ssim(const torch::Tensor& pred, const torch::Tensor& gt, double data_range,
                         const SsimOptions& options = {});
torch::Tensor frame_scores(Metric metric, const torch::Tensor& pred, const torch::Tensor& gt, double data_range);

struct MetricRow {
  std::string identity;   // deterministic, sample-k, average, best
  std::string variable;   // channel name or "all"
  std::int64_t frame = -1;  // -1 for the aggregate row
  double mae = 0, mse = 0, psnr = 0, ssim = 0;
};

struct ReportOptions {
  double data_range = 1.0;
  /// MAE/MSE aggregates sum over frames instead of averaging.
  bool frame_sum = false;
  /// Oracle best-of-N rows (needs ground truth).
  bool include_best = true;
  std::vector<std::string> variables;
  /// Maps model-space tensors to physical units before scoring.
  std::function<torch::Tensor(const torch::Tensor&)> denormalize;
};

struct MetricsReport {
  std::vector<MetricRow> rows;
  double data_range = 1.0;
  bool frame_sum = false;
  /// "truth" or, without ground truth, "ensemble_mean".
  std::string reference = "truth";
  /// Mean over pixels of the per-pixel standard deviation across members.
  std::optional<double> ensemble_pixel_std;
  std::vector<std::string> notices;

  /// Aggregate row for (identity, "all"), if present.
  const MetricRow* aggregate(const std::string& identity) const;
  std::vector<std::string> identities() const;

  std::string to_csv() const;
  std::string to_json() const;
};

/// Rows for the deterministic forecast, every member, the ensemble average and
/// the per-metric best member. Without `y` the members are scored against the
/// ensemble mean and the average/best rows are dropped with a notice.
MetricsReport evaluate_report(const ForecastEnsemble& ens, const std::optional<torch::Tensor>& y,
                              const ReportOptions& options);

}  // namespace dgdm
