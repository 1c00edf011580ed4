// Copyright 2026 The DGDM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dgdm/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <json.hpp>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "dgdm/inference.hpp"

namespace dgdm {

namespace {

void check_pair(const torch::Tensor& pred, const torch::Tensor& gt, const char* what) {
  if (pred.sizes() != gt.sizes()) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + c10::str(pred.sizes()) + " vs " +
                                c10::str(gt.sizes()));
  }
}

void check_range(double data_range) {
  if (!(data_range > 0)) {
    throw std::invalid_argument("data range must be positive");
  }
}

void check_clip(const torch::Tensor& t, const char* what) {
  if (t.dim() != 5) {
    throw std::invalid_argument(std::string(what) + ": expected [B, C, L, H, W], got " + c10::str(t.sizes()));
  }
}

torch::Tensor gaussian_window(const SsimOptions& o) {
  const auto r = (o.window - 1) / 2;
  auto i = torch::arange(o.window, torch::kDouble) - static_cast<double>(r);
  auto g = torch::exp(-(i * i) / (2 * o.sigma * o.sigma));
  g = g / g.sum();
  return torch::outer(g, g).view({1, 1, o.window, o.window});
}

/// SSIM of each [H, W] image in the flattened leading dimensions.
torch::Tensor ssim_per_image(const torch::Tensor& pred, const torch::Tensor& gt, double data_range,
                             const SsimOptions& o) {
  check_pair(pred, gt, "ssim");
  check_range(data_range);
  if (pred.dim() < 2) {
    throw std::invalid_argument("ssim: need at least [H, W]");
  }
  const auto H = pred.size(-2), W = pred.size(-1);
  if (o.window < 1 || o.window % 2 == 0) {
    throw std::invalid_argument("ssim: window must be odd");
  }
  if (H < o.window || W < o.window) {
    throw std::invalid_argument("ssim: image " + std::to_string(H) + "x" + std::to_string(W) +
                                " smaller than window " + std::to_string(o.window));
  }
  auto x = pred.to(torch::kDouble).reshape({-1, 1, H, W});
  auto y = gt.to(torch::kDouble).reshape({-1, 1, H, W});
  auto k = gaussian_window(o);
  auto f = [&](const torch::Tensor& t) { return torch::conv2d(t, k); };
  auto mx = f(x), my = f(y);
  auto sxx = f(x * x) - mx * mx;
  auto syy = f(y * y) - my * my;
  auto sxy = f(x * y) - mx * my;
  const double c1 = std::pow(o.k1 * data_range, 2), c2 = std::pow(o.k2 * data_range, 2);
  auto map = ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2));
  return map.mean({1, 2, 3});
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

double mae(const torch::Tensor& pred, const torch::Tensor& gt) {
  check_pair(pred, gt, "mae");
  return (pred.to(torch::kDouble) - gt.to(torch::kDouble)).abs().mean().item<double>();
}

double mse(const torch::Tensor& pred, const torch::Tensor& gt) {
  check_pair(pred, gt, "mse");
  return (pred.to(torch::kDouble) - gt.to(torch::kDouble)).square().mean().item<double>();
}

double psnr_from_mse(double mse_value, double data_range) {
  check_range(data_range);
  if (mse_value <= 0) {
    return kPsnrCap;
  }
  return std::min(kPsnrCap, 10.0 * std::log10(data_range * data_range / mse_value));
}

double psnr(const torch::Tensor& pred, const torch::Tensor& gt, double data_range) {
  return psnr_from_mse(mse(pred, gt), data_range);
}

double ssim(const torch::Tensor& pred, const torch::Tensor& gt, double data_range, const SsimOptions& options) {
  return ssim_per_image(pred, gt, data_range, options).mean().item<double>();
}

Metric parse_metric(const std::string& name) {
  if (name == "mae") return Metric::Mae;
  if (name == "mse") return Metric::Mse;
  if (name == "psnr") return Metric::Psnr;
  if (name == "ssim") return Metric::Ssim;
  throw std::invalid_argument("unknown metric '" + name + "' (mae, mse, psnr, ssim)");
}

std::string metric_name(Metric metric) {
  switch (metric) {
    case Metric::Mae: return "mae";
    case Metric::Mse: return "mse";
    case Metric::Psnr: return "psnr";
    case Metric::Ssim: return "ssim";
  }
  return "?";
}

bool higher_is_better(Metric metric) { return metric == Metric::Psnr || metric == Metric::Ssim; }

torch::Tensor frame_mae(const torch::Tensor& pred, const torch::Tensor& gt) {
  check_pair(pred, gt, "mae");
  check_clip(pred, "mae");
  return (pred.to(torch::kDouble) - gt.to(torch::kDouble)).abs().mean({1, 3, 4});
}

torch::Tensor frame_mse(const torch::Tensor& pred, const torch::Tensor& gt) {
  check_pair(pred, gt, "mse");
  check_clip(pred, "mse");
  return (pred.to(torch::kDouble) - gt.to(torch::kDouble)).square().mean({1, 3, 4});
}

torch::Tensor frame_psnr(const torch::Tensor& pred, const torch::Tensor& gt, double data_range) {
  check_range(data_range);
  auto m = frame_mse(pred, gt);
  auto p = 10.0 * torch::log10(data_range * data_range / m);
  return torch::where(m > 0, p.clamp_max(kPsnrCap), torch::full_like(p, kPsnrCap));
}

torch::Tensor frame_ssim(const torch::Tensor& pred, const torch::Tensor& gt, double data_range,
                         const SsimOptions& options) {
  check_clip(pred, "ssim");
  const auto B = pred.size(0), C = pred.size(1), L = pred.size(2);
  return ssim_per_image(pred, gt, data_range, options).view({B, C, L}).mean(1);
}

torch::Tensor frame_scores(Metric metric, const torch::Tensor& pred, const torch::Tensor& gt, double data_range) {
  switch (metric) {
    case Metric::Mae: return frame_mae(pred, gt);
    case Metric::Mse: return frame_mse(pred, gt);
    case Metric::Psnr: return frame_psnr(pred, gt, data_range);
    case Metric::Ssim: return frame_ssim(pred, gt, data_range);
  }
  throw std::logic_error("unreachable");
}

const MetricRow* MetricsReport::aggregate(const std::string& identity) const {
  for (const auto& r : rows) {
    if (r.identity == identity && r.variable == "all" && r.frame < 0) {
      return &r;
    }
  }
  return nullptr;
}

std::vector<std::string> MetricsReport::identities() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& r : rows) {
    if (seen.insert(r.identity).second) {
      out.push_back(r.identity);
    }
  }
  return out;
}

std::string MetricsReport::to_csv() const {
  std::ostringstream os;
  os << "identity,variable,frame,reference,mae,mse,psnr,ssim,fvd\n";
  for (const auto& r : rows) {
    os << r.identity << ',' << r.variable << ',' << (r.frame < 0 ? std::string("all") : std::to_string(r.frame))
       << ',' << reference << ',' << fmt(r.mae) << ',' << fmt(r.mse) << ',' << fmt(r.psnr) << ',' << fmt(r.ssim)
       << ",\n";
  }
  return os.str();
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["schema"] = "dgdm.metrics/1";
  j["data_range"] = data_range;
  j["frame_sum"] = frame_sum;
  j["reference"] = reference;
  j["ensemble_pixel_std"] = ensemble_pixel_std ? nlohmann::ordered_json(*ensemble_pixel_std) : nullptr;
  j["notices"] = notices;
  j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    j["rows"].push_back({{"identity", r.identity},
                         {"variable", r.variable},
                         {"frame", r.frame < 0 ? nlohmann::ordered_json("all") : nlohmann::ordered_json(r.frame)},
                         {"mae", r.mae},
                         {"mse", r.mse},
                         {"psnr", r.psnr},
                         {"ssim", r.ssim},
                         {"fvd", nullptr}});
  }
  return j.dump(2);
}

namespace {

constexpr Metric kMetrics[] = {Metric::Mae, Metric::Mse, Metric::Psnr, Metric::Ssim};

/// [B, L] scores for each metric, for one candidate against the reference.
struct Scores {
  torch::Tensor by_metric[4];
};

Scores score(const torch::Tensor& pred, const torch::Tensor& ref, double range) {
  Scores s;
  for (int k = 0; k < 4; ++k) {
    s.by_metric[k] = frame_scores(kMetrics[k], pred, ref, range);
  }
  return s;
}

void set_metric(MetricRow& row, int k, double v) {
  switch (k) {
    case 0: row.mae = v; break;
    case 1: row.mse = v; break;
    case 2: row.psnr = v; break;
    default: row.ssim = v; break;
  }
}

/// Per-frame rows (mean over clips) and the aggregate row.
void emit(std::vector<MetricRow>& rows, const std::string& identity, const std::string& variable,
          const torch::Tensor (&frame_values)[4], bool frame_sum) {
  const auto L = frame_values[0].size(0);
  MetricRow agg{identity, variable, -1};
  for (std::int64_t l = 0; l < L; ++l) {
    MetricRow row{identity, variable, l};
    for (int k = 0; k < 4; ++k) {
      set_metric(row, k, frame_values[k][l].item<double>());
    }
    rows.push_back(row);
  }
  for (int k = 0; k < 4; ++k) {
    const bool sum = frame_sum && k < 2;
    set_metric(agg, k, sum ? frame_values[k].sum().item<double>() : frame_values[k].mean().item<double>());
  }
  rows.push_back(agg);
}

}  // namespace

MetricsReport evaluate_report(const ForecastEnsemble& ens, const std::optional<torch::Tensor>& y,
                              const ReportOptions& options) {
  auto den = [&](const torch::Tensor& t) {
    return (options.denormalize ? options.denormalize(t) : t).to(torch::kDouble);
  };
  MetricsReport report;
  report.data_range = options.data_range;
  report.frame_sum = options.frame_sum;

  const auto N = ens.size();
  std::vector<torch::Tensor> members;
  for (std::int64_t n = 0; n < N; ++n) {
    members.push_back(den(ens.samples[n]));
  }
  torch::Tensor det = ens.deterministic.defined() ? den(ens.deterministic) : torch::Tensor();
  if (members.empty() && !det.defined()) {
    throw std::invalid_argument("evaluate_report: ensemble has neither samples nor a deterministic forecast");
  }
  if (N >= 2) {
    report.ensemble_pixel_std = torch::stack(members).std(0, /*unbiased=*/true).mean().item<double>();
  }

  torch::Tensor ref;
  torch::Tensor average;
  if (N > 0) {
    average = torch::stack(members).mean(0);
  }
  if (y) {
    ref = den(*y);
  } else {
    report.reference = "ensemble_mean";
    ref = N > 0 ? average : det;
    report.notices.push_back("no ground truth: rows are scored against the ensemble mean; average and best rows omitted");
  }
  const auto shape = members.empty() ? det.sizes() : members.front().sizes();
  if (ref.sizes() != shape) {
    throw std::invalid_argument("evaluate_report: ground truth shape " + c10::str(ref.sizes()) +
                                " does not match forecasts " + c10::str(shape));
  }
  const auto C = ref.size(1);
  std::vector<std::pair<std::string, std::int64_t>> variables{{"all", -1}};
  if (C > 1) {
    for (std::int64_t c = 0; c < C; ++c) {
      const auto i = static_cast<std::size_t>(c);
      variables.emplace_back(i < options.variables.size() ? options.variables[i] : "ch" + std::to_string(c), c);
    }
  }
  auto slice = [](const torch::Tensor& t, std::int64_t c) { return c < 0 ? t : t.narrow(1, c, 1); };

  auto candidate_rows = [&](const std::string& identity, const torch::Tensor& pred) {
    for (const auto& [name, c] : variables) {
      auto s = score(slice(pred, c), slice(ref, c), options.data_range);
      torch::Tensor per_frame[4];
      for (int k = 0; k < 4; ++k) per_frame[k] = s.by_metric[k].mean(0);
      emit(report.rows, identity, name, per_frame, options.frame_sum);
    }
  };

  if (det.defined()) {
    candidate_rows("deterministic", det);
  }
  for (std::int64_t n = 0; n < N; ++n) {
    candidate_rows("sample-" + std::to_string(n), members[static_cast<std::size_t>(n)]);
  }
  if (y && N > 0) {
    candidate_rows("average", average);
    if (options.include_best) {
      // scores[var][member] over all metrics.
      std::vector<std::vector<Scores>> scores(variables.size());
      for (std::size_t v = 0; v < variables.size(); ++v) {
        for (const auto& m : members) {
          scores[v].push_back(score(slice(m, variables[v].second), slice(ref, variables[v].second), options.data_range));
        }
      }
      const auto B = ref.size(0);
      for (std::size_t v = 0; v < variables.size(); ++v) {
        torch::Tensor per_frame[4];
        for (int k = 0; k < 4; ++k) {
          std::vector<torch::Tensor> chosen;
          for (std::int64_t b = 0; b < B; ++b) {
            // Selection always uses the all-channel clip score of this metric.
            std::int64_t best = 0;
            double best_value = 0;
            for (std::int64_t n = 0; n < N; ++n) {
              const double value = scores[0][static_cast<std::size_t>(n)].by_metric[k][b].mean().item<double>();
              const bool better = higher_is_better(kMetrics[k]) ? value > best_value : value < best_value;
              if (n == 0 || better) {
                best = n;
                best_value = value;
              }
            }
            chosen.push_back(scores[v][static_cast<std::size_t>(best)].by_metric[k][b]);
          }
          per_frame[k] = torch::stack(chosen).mean(0);
        }
        emit(report.rows, "best", variables[v].first, per_frame, options.frame_sum);
      }
    }
  }
  return report;
}

}  // namespace dgdm
