// Copyright 2026 The DGDM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dgdm/inference.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <algorithm>
#include <stdexcept>

namespace dgdm {

void SamplerOptions::validate() const {
  if (reverse_steps < 1) throw std::invalid_argument("sampler: reverse_steps must be >= 1");
  if (!(eta >= 0 && eta <= 1)) throw std::invalid_argument("sampler: eta must lie in [0, 1]");
  if (!(truncation_fraction >= 0 && truncation_fraction < 1)) {
    throw std::invalid_argument("sampler: truncation fraction must lie in [0, 1)");
  }
  if (n_samples < 1) throw std::invalid_argument("sampler: n_samples must be >= 1");
}

std::int64_t SamplingStats::total_frame_updates() const {
  std::int64_t sum = 0;
  for (auto n : frame_updates) sum += n;
  return sum;
}

std::vector<ReverseGrid> frame_grids(const FrameSchedule& schedule, std::int64_t reverse_steps, double eta,
                                     double truncation_fraction) {
  std::vector<ReverseGrid> grids;
  for (std::int64_t i = 0; i < schedule.frames(); ++i) {
    grids.push_back(make_reverse_grid(schedule.horizon(i), reverse_steps, eta, truncation_fraction, schedule.T()));
  }
  return grids;
}

namespace {

std::vector<std::int64_t> starts(const std::vector<ReverseGrid>& grids) {
  std::vector<std::int64_t> out;
  for (const auto& g : grids) out.push_back(g.start());
  return out;
}

/// [1, 1, L, 1, 1] boolean mask from per-frame flags.
torch::Tensor frame_mask(const std::vector<bool>& flags) {
  std::vector<std::int64_t> v(flags.begin(), flags.end());
  return torch::tensor(v, torch::kLong).gt(0).view({1, 1, -1, 1, 1});
}

}  // namespace

BridgeState chain_start(const torch::Tensor& y_hat, const torch::Tensor& xT, const std::vector<ReverseGrid>& grids,
                        const FrameSchedule& schedule, const torch::Tensor& noise) {
  if (static_cast<std::int64_t>(grids.size()) != schedule.frames() || xT.size(2) != schedule.frames()) {
    throw std::invalid_argument("chain_start: grid count must match the frame count");
  }
  const auto B = xT.size(0);
  auto t0 = starts(grids);
  std::vector<bool> at_endpoint;
  bool any_truncated = false;
  for (std::int64_t i = 0; i < schedule.frames(); ++i) {
    at_endpoint.push_back(t0[static_cast<std::size_t>(i)] == schedule.horizon(i));
    any_truncated = any_truncated || !at_endpoint.back();
  }
  auto steps = frame_steps(t0, B);
  if (!any_truncated) {
    return {xT.clone(), steps};
  }
  if (!y_hat.defined()) {
    throw std::invalid_argument("chain_start: truncated sampling needs a deterministic forecast");
  }
  auto truncated = truncated_start(y_hat, xT, steps, schedule, noise);
  return {torch::where(frame_mask(at_endpoint), xT, truncated.x_t), steps};
}

torch::Tensor reverse_chain(BridgeState state, const torch::Tensor& xT, const torch::Tensor& z,
                            const std::vector<ReverseGrid>& grids, const FrameSchedule& schedule, double eta,
                            const DenoiseFn& denoiser, const std::function<torch::Tensor()>& noise_source,
                            SamplingStats* stats) {
  const auto L = schedule.frames();
  const auto B = state.x_t.size(0);
  std::size_t K = 0;
  for (const auto& g : grids) K = std::max(K, g.transitions());
  auto x = state.x_t;
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<std::int64_t> cur(L), t(L), t_prev(L);
    std::vector<bool> active(L);
    for (std::int64_t i = 0; i < L; ++i) {
      const auto& g = grids[static_cast<std::size_t>(i)];
      const auto idx = static_cast<std::size_t>(i);
      active[idx] = k < g.transitions();
      cur[idx] = active[idx] ? g.steps[k] : 0;
      // Finished frames take a placeholder 1 -> 0 transition that is masked out.
      t[idx] = active[idx] ? g.steps[k] : 1;
      t_prev[idx] = active[idx] ? g.steps[k + 1] : 0;
    }
    auto eps_hat = denoiser(x, frame_steps(cur, B), z);
    auto x0_hat = reconstruct_x0(x, eps_hat);
    auto next = reverse_step(x, x0_hat, xT, frame_steps(t, B), frame_steps(t_prev, B), schedule, eta, noise_source());
    x = torch::where(frame_mask(active), next, x);
  }
  if (stats != nullptr) {
    stats->network_calls = static_cast<std::int64_t>(K);
    stats->frame_updates.clear();
    for (const auto& g : grids) stats->frame_updates.push_back(static_cast<std::int64_t>(g.transitions()));
  }
  return x;
}

std::uint64_t member_seed(std::uint64_t seed, std::uint64_t member) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (member + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

ForecastEnsemble sample_forecast(const ModelConfig& config, Networks& nets, const FrameSchedule& schedule,
                                 const torch::Tensor& x, const SamplerOptions& options, const DenoiseFn& denoiser) {
  options.validate();
  torch::NoGradGuard ng;
  ForecastEnsemble ens;
  const auto g = guidance(config, nets, x);
  ens.deterministic = g.y_hat;

  auto& p = ens.provenance;
  p.seed = options.seed;
  p.eta = options.eta;
  // Without a deterministic forecast there is nothing to truncate towards.
  p.truncation_fraction = nets.db ? options.truncation_fraction : 0.0;
  p.T = schedule.T();
  p.reverse_steps = options.reverse_steps;
  p.frame_horizons = schedule.horizons();
  p.svs_mode = schedule.mode() == SvsMode::Cap ? "cap" : "rescale";
  p.svs_enabled = schedule.frames() > 1 && schedule.horizon(0) != schedule.T();
  p.svs_step = schedule.frames() > 1 ? schedule.horizon(1) - schedule.horizon(0) : 0;

  if (!config.use_pb && !denoiser) {
    return ens;
  }
  auto grids = frame_grids(schedule, options.reverse_steps, options.eta, p.truncation_fraction);
  for (const auto& grid : grids) {
    p.grid_sizes.push_back(static_cast<std::int64_t>(grid.transitions()));
    p.start_steps.push_back(grid.start());
  }
  DenoiseFn eps = denoiser ? denoiser : DenoiseFn([&](const torch::Tensor& a, const torch::Tensor& s, const torch::Tensor& c) {
    return nets.pb->forward(a, s, c);
  });

  const auto N = options.n_samples;
  const auto shape = std::vector<std::int64_t>{x.size(0), x.size(1), config.db.forecast_length, x.size(3), x.size(4)};
  std::vector<at::Generator> gens;
  for (std::int64_t n = 0; n < N; ++n) {
    gens.push_back(at::make_generator<at::CPUGeneratorImpl>(member_seed(options.seed, static_cast<std::uint64_t>(n))));
  }
  auto draw = [&](std::int64_t lo, std::int64_t hi) {
    std::vector<torch::Tensor> parts;
    for (auto n = lo; n < hi; ++n) parts.push_back(torch::randn(shape, gens[static_cast<std::size_t>(n)], x.options()));
    return torch::cat(parts, 0);
  };
  auto run = [&](std::int64_t lo, std::int64_t hi) {
    const auto k = hi - lo;
    std::vector<torch::Tensor> ends;
    for (auto n = lo; n < hi; ++n) ends.push_back(bridge_endpoint(config, x, gens[static_cast<std::size_t>(n)]));
    auto xT = torch::cat(ends, 0);
    auto y_hat = g.y_hat.defined() ? g.y_hat.repeat({k, 1, 1, 1, 1}) : torch::Tensor();
    auto z = g.z.repeat({k, 1, 1, 1, 1});
    auto state = chain_start(y_hat, xT, grids, schedule, draw(lo, hi));
    return reverse_chain(state, xT, z, grids, schedule, options.eta, eps, [&] { return draw(lo, hi); }, &ens.stats);
  };

  if (options.batched) {
    ens.samples = run(0, N).view({N, shape[0], shape[1], shape[2], shape[3], shape[4]});
  } else {
    std::vector<torch::Tensor> members;
    for (std::int64_t n = 0; n < N; ++n) members.push_back(run(n, n + 1));
    ens.samples = torch::stack(members);
  }
  return ens;
}

torch::Tensor ensemble_average(const ForecastEnsemble& ens) {
  if (ens.size() == 0) {
    throw std::invalid_argument("ensemble_average: empty ensemble");
  }
  return ens.samples.mean(0);
}

BestSelection ensemble_best(const ForecastEnsemble& ens, const torch::Tensor& y, Metric metric, double data_range) {
  if (ens.size() == 0) {
    throw std::invalid_argument("ensemble_best: empty ensemble");
  }
  if (ens.samples[0].sizes() != y.sizes()) {
    throw std::invalid_argument("ensemble_best: ground truth shape " + c10::str(y.sizes()) + " does not match " +
                                c10::str(ens.samples[0].sizes()));
  }
  const auto N = ens.size();
  const auto B = y.size(0);
  std::vector<torch::Tensor> clip_scores;
  for (std::int64_t n = 0; n < N; ++n) {
    clip_scores.push_back(frame_scores(metric, ens.samples[n], y, data_range).mean(1));
  }
  BestSelection out;
  std::vector<torch::Tensor> picked;
  for (std::int64_t b = 0; b < B; ++b) {
    std::int64_t best = 0;
    double best_value = clip_scores[0][b].item<double>();
    for (std::int64_t n = 1; n < N; ++n) {
      const double v = clip_scores[static_cast<std::size_t>(n)][b].item<double>();
      if (higher_is_better(metric) ? v > best_value : v < best_value) {
        best = n;
        best_value = v;
      }
    }
    out.index.push_back(best);
    picked.push_back(ens.samples[best][b]);
  }
  out.forecast = torch::stack(picked);
  return out;
}

}  // namespace dgdm
