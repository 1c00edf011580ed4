// Copyright 2026 The DGDM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "dgdm/data.hpp"
#include "dgdm/inference.hpp"
#include "dgdm/model.hpp"
#include "dgdm/training.hpp"

namespace dgdm {

/// Bad configuration or usage; the CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetSection {
  /// moving_mnist, synthetic_weather, synthetic_pnw, or directory (pre-existing).
  std::string kind = "moving_mnist";
  std::string dir = "data/moving_mnist";
  /// Variables to load; empty loads all.
  std::vector<std::string> variables;
  std::int64_t input_length = 10;
  std::int64_t forecast_length = 10;
  std::int64_t n_clips = 10000;
  std::int64_t n_digits = 2;
  std::int64_t height = 64;
  std::int64_t width = 64;
  std::int64_t digit_size = 28;
  double speed = 3.0;
  std::string digit_source;
  std::int64_t channels = 3;
  double train_fraction = 0.8;
  double val_fraction = 0.1;
  std::vector<std::string> weather_variables{"t2m"};
  std::string start = "1979-01-01T00:00";
  std::int64_t n_steps = 2000;
  std::int64_t step_hours = 1;
  std::vector<std::int64_t> train_years{1979, 2015};
  std::vector<std::int64_t> val_years{2016, 2016};
  std::vector<std::int64_t> test_years{2017, 2018};
};

struct InferenceSection {
  std::int64_t n_samples = 20;
  std::vector<std::int64_t> seeds{0};
  bool use_ema = true;
  bool batched = true;
  std::string split = "test";
  /// Clips drawn from the split; 0 takes all of them.
  std::int64_t max_clips = 8;
};

struct EvalSection {
  bool frame_sum = false;
  /// Oracle best-of-N rows; needs ground truth.
  bool best = false;
  bool plots = true;
  std::int64_t plot_clips = 1;
};

struct ExperimentConfig {
  std::string description;
  std::uint64_t seed = 0;
  DatasetSection dataset;
  ModelConfig model;
  DiffusionConfig diffusion;
  TrainConfig train;
  InferenceSection inference;
  EvalSection eval;
  std::string output_dir = "runs/default";

  /// Model config with the data-dependent fields (channels, lengths) filled in.
  /// A non-positive `channels` is inferred from the dataset block.
  ModelConfig model_config(std::int64_t channels = 0) const;
  TrainConfig train_config() const;
  SamplerOptions sampler_options(std::uint64_t seed) const;
  MovingMnistOptions moving_mnist_options() const;
  SyntheticWeatherOptions weather_options() const;
  SyntheticPnwOptions pnw_options() const;

  /// Throws ConfigError naming the offending key.
  void validate() const;
};

/// Every key with its type, default and description.
nlohmann::ordered_json config_schema();
/// Flat {"key": value} document covering every key.
nlohmann::ordered_json to_flat_json(const ExperimentConfig& config);

/// Applies a config document. Nested objects are flattened with dots; unknown
/// keys and ill-typed values raise ConfigError.
void apply_json(ExperimentConfig& config, const nlohmann::json& doc, const std::string& source);
/// "key=value"; the value is parsed as JSON when it parses, else taken as a string.
void apply_override(ExperimentConfig& config, const std::string& assignment);

/// Defaults, then each file in order, then the overrides; validated.
ExperimentConfig load_config(const std::vector<std::string>& files, const std::vector<std::string>& overrides);

/// Keys whose values must agree between a checkpoint and a resumed run.
bool affects_training(const std::string& key);

}  // namespace dgdm
