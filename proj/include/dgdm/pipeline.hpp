// Copyright 2026 The DGDM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <json.hpp>
#include <ostream>
#include <string>
#include <vector>

#include "dgdm/data.hpp"
#include "dgdm/experiment.hpp"
#include "dgdm/metrics.hpp"

namespace dgdm {

/// Writes the configured dataset under dataset.dir. Refuses with ConfigError
/// when a manifest is already there, unless `force`.
void generate_dataset(const ExperimentConfig& config, bool force, std::ostream& progress);

/// Loads dataset.dir and checks it against the config (lengths, frame size,
/// variables). Mismatches raise ConfigError; a missing dataset raises
/// std::runtime_error.
ClipDataset open_dataset(const ExperimentConfig& config);

struct TrainResult {
  std::int64_t start_step = 0;
  std::int64_t steps = 0;
  double first_loss = 0.0;
  double last_loss = 0.0;
  std::string final_checkpoint;
};

/// Runs training into output.dir: train_log.csv, val_log.csv, config.json and
/// checkpoints/{step_N,last,final}.pt. `resume` is empty, a checkpoint path or
/// "auto" (checkpoints/last.pt). Resuming drops log rows past the checkpoint.
TrainResult train_experiment(const ExperimentConfig& config, const std::string& resume, std::ostream& progress);

/// Config stored in a checkpoint, with `overrides` applied on top.
ExperimentConfig checkpoint_config(const std::string& checkpoint, const std::vector<std::string>& overrides);

struct SampleRequest {
  std::string checkpoint;
  std::string out_dir;
  std::string split = "test";
  /// Clip indices within the split; empty takes the first inference.max_clips.
  std::vector<std::int64_t> clips;
  /// Observed frames in physical units, [B, C, L, H, W] or [C, L, H, W].
  /// When set, the split is ignored and no truth is written.
  std::string input_path;
  std::uint64_t seed = 0;
};

struct SampleResult {
  std::string dir;
  std::int64_t members = 0;
  std::int64_t clips = 0;
  nlohmann::ordered_json provenance;
};

/// Writes samples.npy [N, B, C, L_hat, H, W], deterministic.npy, input.npy,
/// truth.npy (all physical units) and provenance.json.
SampleResult sample_experiment(const ExperimentConfig& config, const SampleRequest& request);

struct EvalRequest {
  /// One directory per seed, as written by sample_experiment.
  std::vector<std::string> forecast_dirs;
  /// Overrides truth.npy of every forecast directory.
  std::string truth_path;
  /// Score against nothing even when truth.npy exists.
  bool ignore_truth = false;
  std::string out_dir;
  bool frame_sum = false;
  bool best = true;
  bool plots = true;
  std::int64_t plot_clips = 1;
  std::string description;
};

struct EvalResult {
  std::vector<MetricsReport> reports;
  nlohmann::ordered_json summary;
};

/// Per-seed report.csv/report.json under out_dir/<seed dir>, plus
/// summary.csv/summary.json (mean and STD over seeds), table.csv and plots.
EvalResult evaluate_forecasts(const EvalRequest& request, std::ostream& progress);

/// JSON Schema of report.json.
nlohmann::ordered_json report_schema();
/// Violations of `schema` by `doc` (empty when valid). Covers the subset of
/// JSON Schema the published schemas use.
std::vector<std::string> schema_violations(const nlohmann::json& schema, const nlohmann::json& doc);

/// 64-bit FNV-1a of a file's bytes, as 16 hex digits.
std::string file_digest(const std::string& path);

/// 8-bit grayscale PNG, row-major pixels.
void write_png_gray(const std::string& path, const std::vector<std::uint8_t>& pixels, std::int64_t width,
                    std::int64_t height);

struct RunOptions {
  bool force_data = false;
  std::string resume;
};

/// gen-data (when missing), train, sample every inference seed, eval.
EvalResult run_experiment(const ExperimentConfig& config, const RunOptions& options, std::ostream& progress);

}  // namespace dgdm
