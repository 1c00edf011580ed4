// Copyright 2026 The DGDM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace dgdm {

/// Per-channel affine map: normalized = (value - shift) / scale.
struct Normalization {
  std::vector<double> shift;
  std::vector<double> scale;

  /// Channel axis is dim 1 ([B, C, ...]) or dim 0 for unbatched [C, ...].
  torch::Tensor normalize(const torch::Tensor& v, std::int64_t channel_dim = 1) const;
  torch::Tensor denormalize(const torch::Tensor& v, std::int64_t channel_dim = 1) const;
};

/// Fixed-length forecasting clips. Either a stack of independent clips
/// ([N, C, L + L_hat, H, W]) or one long series ([C, T, H, W]) read through
/// sliding windows. Values are stored normalized.
class ClipDataset {
 public:
  enum class Kind { Clips, Series };

  ClipDataset() = default;
  ClipDataset(Kind kind, torch::Tensor source, std::int64_t input_length, std::int64_t forecast_length,
              Normalization norm, std::vector<std::string> variables);

  Kind kind() const { return kind_; }
  std::int64_t size() const;
  std::int64_t input_length() const { return L_; }
  std::int64_t forecast_length() const { return L_hat_; }
  std::int64_t channels() const { return source_.size(kind_ == Kind::Clips ? 1 : 0); }
  std::int64_t height() const { return source_.size(-2); }
  std::int64_t width() const { return source_.size(-1); }
  const Normalization& normalization() const { return norm_; }
  const std::vector<std::string>& variables() const { return variables_; }
  const torch::Tensor& source() const { return source_; }

  /// Clip i, [C, L + L_hat, H, W].
  torch::Tensor clip(std::int64_t i) const;
  /// (x, y) for the listed clips: [B, C, L, H, W] and [B, C, L_hat, H, W].
  std::pair<torch::Tensor, torch::Tensor> batch(const std::vector<std::int64_t>& indices) const;

  /// Series windows: first time index of each clip.
  std::vector<std::int64_t> window_starts;
  std::vector<std::int64_t> train, val, test;
  /// Declared range of the normalized values.
  double value_min = 0.0, value_max = 1.0;
  /// Range of the physical values, used for PSNR/SSIM.
  double data_range = 1.0;
  std::vector<std::string> warnings;

  const std::vector<std::int64_t>& split(const std::string& name) const;
  /// Throws std::logic_error when splits overlap or values leave the declared range.
  void check_invariants() const;

 private:
  Kind kind_ = Kind::Clips;
  torch::Tensor source_;
  std::int64_t L_ = 0, L_hat_ = 0;
  Normalization norm_;
  std::vector<std::string> variables_;
};

/// Deterministic shuffled mini-batches: the batch for global step `step`
/// (0-based) depends only on (pool, batch_size, seed, step).
std::vector<std::int64_t> batch_indices(const std::vector<std::int64_t>& pool, std::int64_t batch_size,
                                        std::uint64_t seed, std::int64_t step);
std::int64_t steps_per_epoch(std::int64_t pool_size, std::int64_t batch_size);

// Moving MNIST ---------------------------------------------------------------

/// Digit glyph bank, 0..255 intensities, [n, size, size] uint8.
struct GlyphBank {
  torch::Tensor images;
  std::vector<std::int64_t> labels;
};

/// Built-in rasterized digits scaled to `size` pixels.
GlyphBank builtin_glyphs(std::int64_t size);
/// Digits from an MNIST idx3-ubyte archive, resized to `size` when needed.
GlyphBank load_idx_glyphs(const std::string& path, std::int64_t size, std::int64_t limit = 0);

struct MovingMnistOptions {
  std::int64_t n_clips = 10000;
  std::int64_t n_digits = 2;
  std::int64_t height = 64;
  std::int64_t width = 64;
  std::int64_t input_length = 10;
  std::int64_t forecast_length = 10;
  std::int64_t digit_size = 28;
  /// Pixels per frame; the direction is drawn at random.
  double speed = 3.0;
  /// MNIST idx archive; empty selects the built-in glyphs.
  std::string digit_source;
  double train_fraction = 0.8;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;

  std::int64_t length() const { return input_length + forecast_length; }
  void validate() const;
};

/// One digit's path: top-left corner per frame.
struct DigitTrack {
  std::vector<std::array<std::int64_t, 2>> corners;  // (row, col)
  std::array<double, 2> start;
  std::array<double, 2> velocity;
  std::int64_t glyph = 0;
};

/// Position update: p += v, then reflect off [0, limit].
void reflect_step(double& p, double& v, double limit);

/// Frames as 0..255 floats [length, H, W]; `tracks` receives each digit's path.
torch::Tensor render_moving_mnist_clip(const MovingMnistOptions& options, const GlyphBank& glyphs, std::mt19937_64& rng,
                                       std::vector<DigitTrack>* tracks = nullptr);

/// Raw 0..255 clips [N, length, H, W] (deterministic in options.seed).
torch::Tensor generate_moving_mnist_raw(const MovingMnistOptions& options);
ClipDataset generate_moving_mnist(const MovingMnistOptions& options);

// Gridded series ---------------------------------------------------------------

struct YearRange {
  int first = 0;
  int last = 0;
  bool contains(int year) const { return year >= first && year <= last; }
};

/// Minutes since 1970-01-01T00:00 for "YYYY-MM-DDTHH[:MM[:SS]]".
std::int64_t parse_timestamp(const std::string& iso);
std::string format_timestamp(std::int64_t minutes);
int timestamp_year(std::int64_t minutes);

/// Loads a series directory (manifest.json plus one .npy [time, H, W] per
/// variable). Windows of L + L_hat consecutive steps are split by year range;
/// windows that cross a gap or a split boundary are dropped. Standardization
/// uses train-split time steps only.
ClipDataset load_gridded_dataset(const std::string& dir, const std::vector<std::string>& variables,
                                 std::int64_t input_length, std::int64_t forecast_length);

struct SyntheticWeatherOptions {
  std::vector<std::string> variables{"t2m"};
  std::int64_t height = 32;
  std::int64_t width = 64;
  std::string start = "1979-01-01T00:00";
  std::int64_t n_steps = 2000;
  std::int64_t step_hours = 1;
  /// Time indices removed from the series to emulate missing records.
  std::vector<std::int64_t> drop;
  /// Variables held constant in space and time.
  std::vector<std::string> constant;
  YearRange train{1979, 2015}, val{2016, 2016}, test{2017, 2018};
  std::uint64_t seed = 0;
};

/// Writes a WeatherBench-like series directory: smooth advected fields with a
/// diurnal cycle, in kelvin-like units.
void write_synthetic_weather(const std::string& dir, const SyntheticWeatherOptions& options);

struct SyntheticPnwOptions {
  std::int64_t n_clips = 64;
  std::int64_t channels = 3;
  std::int64_t height = 128;
  std::int64_t width = 128;
  std::int64_t input_length = 10;
  std::int64_t forecast_length = 10;
  double train_fraction = 0.8;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
};

/// Raw clips [N, C, length, H, W] of drifting, rotating cloud-like blobs.
torch::Tensor generate_synthetic_pnw_raw(const SyntheticPnwOptions& options);

// Directory layout ---------------------------------------------------------------

/// Writes a clip-stack directory: manifest.json plus one .npy [N, T, H, W]
/// per variable, holding raw (physical) values.
void write_clip_directory(const std::string& dir, const torch::Tensor& raw, const std::vector<std::string>& variables,
                          std::int64_t input_length, std::int64_t forecast_length, double train_fraction,
                          double val_fraction, const Normalization& norm, double data_min, double data_max,
                          const std::string& generator_json);

/// Loads either layout. For clip stacks the lengths come from the manifest
/// unless overridden with positive values.
ClipDataset load_dataset(const std::string& dir, const std::vector<std::string>& variables = {},
                         std::int64_t input_length = 0, std::int64_t forecast_length = 0);

}  // namespace dgdm
