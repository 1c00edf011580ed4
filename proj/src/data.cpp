// Copyright 2026 The DGDM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dgdm/data.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <numbers>
#include <stdexcept>

#include "dgdm/npy.hpp"

namespace dgdm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

torch::Tensor channel_view(const std::vector<double>& v, std::int64_t dims, std::int64_t channel_dim) {
  std::vector<std::int64_t> shape(static_cast<std::size_t>(dims), 1);
  shape[static_cast<std::size_t>(channel_dim)] = static_cast<std::int64_t>(v.size());
  return torch::tensor(v, torch::kDouble).view(shape);
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("missing manifest: " + path.string());
  }
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed manifest " + path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::vector<std::int64_t> iota(std::int64_t lo, std::int64_t hi) {
  std::vector<std::int64_t> v;
  for (auto i = lo; i < hi; ++i) v.push_back(i);
  return v;
}

/// Fraction-based contiguous split of [0, n).
void fraction_splits(ClipDataset& ds, std::int64_t n, double train_fraction, double val_fraction) {
  const auto n_train = static_cast<std::int64_t>(std::floor(static_cast<double>(n) * train_fraction));
  const auto n_val = static_cast<std::int64_t>(std::floor(static_cast<double>(n) * val_fraction));
  ds.train = iota(0, n_train);
  ds.val = iota(n_train, std::min(n, n_train + n_val));
  ds.test = iota(std::min(n, n_train + n_val), n);
}

// 5x7 bitmaps, one row per byte, most significant of the low five bits on the left.
constexpr std::uint8_t kFont[10][7] = {
    {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}, {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E},
    {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}, {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E},
    {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}, {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E},
    {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}, {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},
    {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}, {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C},
};

torch::Tensor resize(const torch::Tensor& img, std::int64_t size) {
  namespace F = torch::nn::functional;
  return F::interpolate(img.to(torch::kFloat).view({1, 1, img.size(-2), img.size(-1)}),
                        F::InterpolateFuncOptions()
                            .size(std::vector<std::int64_t>{size, size})
                            .mode(torch::kBilinear)
                            .align_corners(false))
      .view({size, size});
}

torch::Tensor to_u8(const torch::Tensor& unit) { return (unit.clamp(0, 1) * 255).round().to(torch::kUInt8); }

}  // namespace

torch::Tensor Normalization::normalize(const torch::Tensor& v, std::int64_t channel_dim) const {
  auto s = channel_view(shift, v.dim(), channel_dim);
  auto k = channel_view(scale, v.dim(), channel_dim);
  return ((v.to(torch::kDouble) - s) / k).to(v.scalar_type());
}

torch::Tensor Normalization::denormalize(const torch::Tensor& v, std::int64_t channel_dim) const {
  auto s = channel_view(shift, v.dim(), channel_dim);
  auto k = channel_view(scale, v.dim(), channel_dim);
  return (v.to(torch::kDouble) * k + s).to(v.scalar_type());
}

ClipDataset::ClipDataset(Kind kind, torch::Tensor source, std::int64_t input_length, std::int64_t forecast_length,
                         Normalization norm, std::vector<std::string> variables)
    : kind_(kind),
      source_(std::move(source)),
      L_(input_length),
      L_hat_(forecast_length),
      norm_(std::move(norm)),
      variables_(std::move(variables)) {
  if (L_ < 1 || L_hat_ < 1) {
    throw std::invalid_argument("dataset: input and forecast lengths must be >= 1");
  }
  const auto expected_dims = kind_ == Kind::Clips ? 5 : 4;
  if (source_.dim() != expected_dims) {
    throw std::invalid_argument("dataset: unexpected source shape " + c10::str(source_.sizes()));
  }
  if (kind_ == Kind::Clips && source_.size(2) != L_ + L_hat_) {
    throw std::invalid_argument("dataset: clips have " + std::to_string(source_.size(2)) + " frames, config needs " +
                                std::to_string(L_ + L_hat_));
  }
}

std::int64_t ClipDataset::size() const {
  return kind_ == Kind::Clips ? source_.size(0) : static_cast<std::int64_t>(window_starts.size());
}

torch::Tensor ClipDataset::clip(std::int64_t i) const {
  if (i < 0 || i >= size()) {
    throw std::out_of_range("dataset: clip " + std::to_string(i) + " of " + std::to_string(size()));
  }
  if (kind_ == Kind::Clips) {
    return source_[i];
  }
  return source_.narrow(1, window_starts[static_cast<std::size_t>(i)], L_ + L_hat_);
}

std::pair<torch::Tensor, torch::Tensor> ClipDataset::batch(const std::vector<std::int64_t>& indices) const {
  if (indices.empty()) {
    throw std::invalid_argument("dataset: empty batch");
  }
  std::vector<torch::Tensor> clips;
  for (auto i : indices) clips.push_back(clip(i));
  auto b = torch::stack(clips);
  return {b.narrow(2, 0, L_).contiguous(), b.narrow(2, L_, L_hat_).contiguous()};
}

const std::vector<std::int64_t>& ClipDataset::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  throw std::invalid_argument("unknown split '" + name + "' (train, val, test)");
}

void ClipDataset::check_invariants() const {
  std::vector<int> owner(static_cast<std::size_t>(size()), -1);
  const std::vector<const std::vector<std::int64_t>*> splits{&train, &val, &test};
  for (int s = 0; s < 3; ++s) {
    for (auto i : *splits[static_cast<std::size_t>(s)]) {
      if (i < 0 || i >= size()) throw std::logic_error("dataset: split index out of range");
      if (owner[static_cast<std::size_t>(i)] != -1) throw std::logic_error("dataset: clip in two splits");
      owner[static_cast<std::size_t>(i)] = s;
    }
  }
  if (kind_ == Kind::Series) {
    // Windows from different splits must not share a time step.
    std::vector<int> time_owner(static_cast<std::size_t>(source_.size(1)), -1);
    for (std::int64_t i = 0; i < size(); ++i) {
      const int s = owner[static_cast<std::size_t>(i)];
      if (s < 0) continue;
      for (auto t = window_starts[static_cast<std::size_t>(i)]; t < window_starts[static_cast<std::size_t>(i)] + L_ + L_hat_; ++t) {
        auto& o = time_owner[static_cast<std::size_t>(t)];
        if (o != -1 && o != s) throw std::logic_error("dataset: train/val/test windows overlap in time");
        o = s;
      }
    }
  }
  const double lo = source_.min().item<double>(), hi = source_.max().item<double>();
  if (!std::isfinite(lo) || !std::isfinite(hi)) throw std::logic_error("dataset: non-finite normalized values");
  const double tol = 1e-5 * std::max(1.0, value_max - value_min);
  if (lo < value_min - tol || hi > value_max + tol) {
    throw std::logic_error("dataset: values outside the declared range");
  }
}

std::int64_t steps_per_epoch(std::int64_t pool_size, std::int64_t batch_size) {
  return std::max<std::int64_t>(1, pool_size / batch_size);
}

std::vector<std::int64_t> batch_indices(const std::vector<std::int64_t>& pool, std::int64_t batch_size,
                                        std::uint64_t seed, std::int64_t step) {
  if (pool.empty()) throw std::invalid_argument("batch_indices: empty pool");
  const auto n = static_cast<std::int64_t>(pool.size());
  const auto per_epoch = steps_per_epoch(n, batch_size);
  const auto epoch = step / per_epoch;
  const auto k = step % per_epoch;
  auto perm = pool;
  std::mt19937_64 rng(mix(seed, static_cast<std::uint64_t>(epoch)));
  std::shuffle(perm.begin(), perm.end(), rng);
  if (n <= batch_size) return perm;
  return {perm.begin() + k * batch_size, perm.begin() + (k + 1) * batch_size};
}

GlyphBank builtin_glyphs(std::int64_t size) {
  if (size < 3) throw std::invalid_argument("glyphs: size must be >= 3");
  GlyphBank bank;
  std::vector<torch::Tensor> images;
  for (int d = 0; d < 10; ++d) {
    // 9x9 canvas with the 5x7 glyph centred.
    auto canvas = torch::zeros({9, 9});
    for (int r = 0; r < 7; ++r) {
      for (int c = 0; c < 5; ++c) {
        if (kFont[d][r] & (0x10 >> c)) canvas[r + 1][c + 2] = 1.0;
      }
    }
    auto regular = resize(canvas, size);
    const auto shift = std::max<std::int64_t>(1, size / 14);
    auto bold = torch::maximum(regular, torch::roll(regular, {shift}, {1}));
    // Slant: shift each row right in proportion to its distance from the bottom.
    auto slanted = torch::zeros_like(regular);
    for (std::int64_t r = 0; r < size; ++r) {
      const auto offset = (size - 1 - r) * shift / std::max<std::int64_t>(1, size / 4);
      slanted[r] = torch::roll(regular[r], {offset / 2}, {0});
    }
    for (const auto& img : {regular, bold, slanted}) {
      images.push_back(to_u8(img * 1.15));
      bank.labels.push_back(d);
    }
  }
  bank.images = torch::stack(images);
  return bank;
}

GlyphBank load_idx_glyphs(const std::string& path, std::int64_t size, std::int64_t limit) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("digit archive not found: " + path);
  auto be32 = [&] {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return (static_cast<std::uint32_t>(b[0]) << 24) | (b[1] << 16) | (b[2] << 8) | b[3];
  };
  if (be32() != 2051) throw std::runtime_error("not an idx3-ubyte image archive: " + path);
  std::int64_t n = be32(), rows = be32(), cols = be32();
  if (limit > 0) n = std::min(n, limit);
  auto raw = torch::empty({n, rows, cols}, torch::kUInt8);
  in.read(reinterpret_cast<char*>(raw.data_ptr<std::uint8_t>()), static_cast<std::streamsize>(raw.nbytes()));
  if (!in) throw std::runtime_error("truncated digit archive: " + path);
  GlyphBank bank;
  if (rows == size && cols == size) {
    bank.images = raw;
  } else {
    std::vector<torch::Tensor> images;
    for (std::int64_t i = 0; i < n; ++i) images.push_back(to_u8(resize(raw[i].to(torch::kFloat) / 255.0, size)));
    bank.images = torch::stack(images);
  }
  bank.labels.assign(static_cast<std::size_t>(n), -1);
  return bank;
}

void MovingMnistOptions::validate() const {
  if (n_clips < 1 || n_digits < 1) throw std::invalid_argument("moving mnist: need n_clips >= 1 and n_digits >= 1");
  if (height < 1 || width < 1) throw std::invalid_argument("moving mnist: invalid frame size");
  if (digit_size < 3 || digit_size > height || digit_size > width) {
    throw std::invalid_argument("moving mnist: digit size " + std::to_string(digit_size) + " does not fit a " +
                                std::to_string(height) + "x" + std::to_string(width) + " frame");
  }
  if (input_length < 1 || forecast_length < 1) throw std::invalid_argument("moving mnist: lengths must be >= 1");
  if (speed < 0) throw std::invalid_argument("moving mnist: speed must be non-negative");
  if (train_fraction < 0 || val_fraction < 0 || train_fraction + val_fraction > 1) {
    throw std::invalid_argument("moving mnist: split fractions must be non-negative and sum to <= 1");
  }
}

void reflect_step(double& p, double& v, double limit) {
  if (limit <= 0) {
    p = 0;
    return;
  }
  p += v;
  while (p < 0 || p > limit) {
    if (p < 0) p = -p;
    if (p > limit) p = 2 * limit - p;
    v = -v;
  }
}

torch::Tensor render_moving_mnist_clip(const MovingMnistOptions& o, const GlyphBank& glyphs, std::mt19937_64& rng,
                                       std::vector<DigitTrack>* tracks) {
  const auto T = o.length();
  const auto ds = o.digit_size;
  const double lim[2] = {static_cast<double>(o.height - ds), static_cast<double>(o.width - ds)};
  std::uniform_int_distribution<std::int64_t> pick_glyph(0, glyphs.images.size(0) - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto frames = torch::zeros({T, o.height, o.width});
  std::vector<DigitTrack> local;
  for (std::int64_t d = 0; d < o.n_digits; ++d) {
    DigitTrack tr;
    tr.glyph = pick_glyph(rng);
    const double angle = 2 * std::numbers::pi * unit(rng);
    tr.start = {unit(rng) * lim[0], unit(rng) * lim[1]};
    tr.velocity = {o.speed * std::sin(angle), o.speed * std::cos(angle)};
    double p[2] = {tr.start[0], tr.start[1]};
    double v[2] = {tr.velocity[0], tr.velocity[1]};
    auto glyph = glyphs.images[tr.glyph].to(torch::kFloat);
    for (std::int64_t k = 0; k < T; ++k) {
      if (k > 0) {
        for (int a = 0; a < 2; ++a) reflect_step(p[a], v[a], lim[a]);
      }
      std::array<std::int64_t, 2> corner{};
      for (int a = 0; a < 2; ++a) {
        corner[static_cast<std::size_t>(a)] =
            std::clamp<std::int64_t>(std::lround(p[a]), 0, static_cast<std::int64_t>(lim[a]));
      }
      tr.corners.push_back(corner);
      auto region = frames[k].narrow(0, corner[0], ds).narrow(1, corner[1], ds);
      region.copy_(torch::maximum(region, glyph));
    }
    local.push_back(std::move(tr));
  }
  if (tracks != nullptr) *tracks = std::move(local);
  return frames;
}

torch::Tensor generate_moving_mnist_raw(const MovingMnistOptions& options) {
  options.validate();
  auto glyphs = options.digit_source.empty() ? builtin_glyphs(options.digit_size)
                                             : load_idx_glyphs(options.digit_source, options.digit_size);
  std::vector<torch::Tensor> clips;
  for (std::int64_t n = 0; n < options.n_clips; ++n) {
    // Per-clip streams keep clip n independent of how many clips are generated.
    std::mt19937_64 rng(mix(options.seed, static_cast<std::uint64_t>(n)));
    clips.push_back(render_moving_mnist_clip(options, glyphs, rng));
  }
  return torch::stack(clips);
}

ClipDataset generate_moving_mnist(const MovingMnistOptions& options) {
  auto raw = generate_moving_mnist_raw(options).unsqueeze(1);
  Normalization norm{{0.0}, {255.0}};
  ClipDataset ds(ClipDataset::Kind::Clips, norm.normalize(raw), options.input_length, options.forecast_length, norm,
                 {"digits"});
  fraction_splits(ds, options.n_clips, options.train_fraction, options.val_fraction);
  ds.value_min = 0.0;
  ds.value_max = 1.0;
  ds.data_range = 255.0;
  ds.check_invariants();
  return ds;
}

std::int64_t parse_timestamp(const std::string& iso) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  const int n = std::sscanf(iso.c_str(), "%d-%d-%dT%d:%d:%d", &y, &mo, &d, &h, &mi, &s);
  if (n < 4 || mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi < 0 || mi > 59) {
    throw std::invalid_argument("bad timestamp '" + iso + "' (want YYYY-MM-DDTHH:MM)");
  }
  using namespace std::chrono;
  const year_month_day ymd{year{y} / month{static_cast<unsigned>(mo)} / day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw std::invalid_argument("bad calendar date '" + iso + "'");
  return static_cast<std::int64_t>(sys_days{ymd}.time_since_epoch().count()) * 1440 + h * 60 + mi;
}

std::string format_timestamp(std::int64_t minutes) {
  using namespace std::chrono;
  const auto days_since = minutes >= 0 ? minutes / 1440 : -((-minutes + 1439) / 1440);
  const auto rem = minutes - days_since * 1440;
  const year_month_day ymd{sys_days{days{days_since}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(rem / 60),
                static_cast<int>(rem % 60));
  return buf;
}

int timestamp_year(std::int64_t minutes) {
  using namespace std::chrono;
  const auto days_since = minutes >= 0 ? minutes / 1440 : -((-minutes + 1439) / 1440);
  return static_cast<int>(year_month_day{sys_days{days{days_since}}}.year());
}

namespace {

YearRange read_years(const json& j, const std::string& name) {
  if (!j.contains(name)) return {1, 0};  // empty range
  const auto& r = j.at(name);
  if (!r.is_array() || r.size() != 2) throw std::runtime_error("manifest: split '" + name + "' must be [first, last]");
  return {r[0].get<int>(), r[1].get<int>()};
}

std::vector<json> selected_variables(const json& manifest, const std::vector<std::string>& wanted) {
  if (!manifest.contains("variables")) throw std::runtime_error("manifest: no variables");
  std::vector<json> out;
  if (wanted.empty()) {
    for (const auto& v : manifest["variables"]) out.push_back(v);
    return out;
  }
  for (const auto& name : wanted) {
    bool found = false;
    for (const auto& v : manifest["variables"]) {
      if (v.at("name").get<std::string>() == name) {
        out.push_back(v);
        found = true;
      }
    }
    if (!found) throw std::runtime_error("manifest: unknown variable '" + name + "'");
  }
  return out;
}

}  // namespace

ClipDataset load_gridded_dataset(const std::string& dir, const std::vector<std::string>& variables,
                                 std::int64_t input_length, std::int64_t forecast_length) {
  const auto manifest = read_json(fs::path(dir) / "manifest.json");
  if (manifest.value("kind", "series") != "series") throw std::runtime_error("manifest: not a series dataset");
  if (input_length < 1 || forecast_length < 1) throw std::invalid_argument("gridded: lengths must be >= 1");
  const auto vars = selected_variables(manifest, variables);
  const auto stamps = manifest.at("timestamps").get<std::vector<std::string>>();
  const auto step_minutes = static_cast<std::int64_t>(std::llround(manifest.at("step_hours").get<double>() * 60));
  if (step_minutes <= 0) throw std::runtime_error("manifest: step_hours must be positive");
  const auto& splits = manifest.at("splits");
  const YearRange ranges[3] = {read_years(splits, "train"), read_years(splits, "val"), read_years(splits, "test")};

  std::vector<torch::Tensor> fields;
  std::vector<std::string> names;
  for (const auto& v : vars) {
    auto a = npy::read((fs::path(dir) / v.at("file").get<std::string>()).string()).to(torch::kFloat);
    if (a.dim() != 3) throw std::runtime_error("gridded: " + v.at("file").get<std::string>() + " must be [time, H, W]");
    if (a.size(0) != static_cast<std::int64_t>(stamps.size())) {
      throw std::runtime_error("gridded: " + v.at("file").get<std::string>() + " has " + std::to_string(a.size(0)) +
                               " steps but the manifest lists " + std::to_string(stamps.size()) + " timestamps");
    }
    if (!fields.empty() && a.sizes() != fields.front().sizes()) {
      throw std::runtime_error("gridded: variables disagree in shape");
    }
    fields.push_back(a);
    names.push_back(v.at("name").get<std::string>());
  }
  auto raw = torch::stack(fields);  // [C, T, H, W]
  const auto T = raw.size(1);

  std::vector<std::int64_t> minutes;
  for (const auto& s : stamps) minutes.push_back(parse_timestamp(s));
  std::vector<int> gap_before(static_cast<std::size_t>(T), 0);
  std::int64_t gaps = 0;
  for (std::int64_t t = 1; t < T; ++t) {
    const auto dt = minutes[static_cast<std::size_t>(t)] - minutes[static_cast<std::size_t>(t - 1)];
    if (dt <= 0) throw std::runtime_error("gridded: timestamps must increase (" + stamps[static_cast<std::size_t>(t)] + ")");
    if (dt != step_minutes) {
      gap_before[static_cast<std::size_t>(t)] = 1;
      ++gaps;
    }
  }

  std::vector<int> split_of(static_cast<std::size_t>(T), -1);
  std::vector<std::int64_t> train_times;
  for (std::int64_t t = 0; t < T; ++t) {
    const int y = timestamp_year(minutes[static_cast<std::size_t>(t)]);
    for (int s = 0; s < 3; ++s) {
      if (ranges[s].contains(y)) {
        if (split_of[static_cast<std::size_t>(t)] != -1) throw std::runtime_error("gridded: split year ranges overlap");
        split_of[static_cast<std::size_t>(t)] = s;
      }
    }
    if (split_of[static_cast<std::size_t>(t)] == 0) train_times.push_back(t);
  }
  if (train_times.empty()) throw std::runtime_error("gridded: no time steps fall in the train years");

  std::vector<std::string> warnings;
  if (gaps > 0) {
    warnings.push_back(std::to_string(gaps) + " gap(s) in the timestamps; windows spanning them were dropped");
  }
  auto train_raw = raw.index_select(1, torch::tensor(train_times, torch::kLong)).to(torch::kDouble);
  Normalization norm;
  for (std::int64_t c = 0; c < raw.size(0); ++c) {
    const double mean = train_raw[c].mean().item<double>();
    double sd = train_raw[c].std(/*unbiased=*/false).item<double>();
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
      warnings.push_back("variable '" + names[static_cast<std::size_t>(c)] +
                         "' has zero variance on the train split; scale clamped to 1");
      sd = 1.0;
    }
    norm.shift.push_back(mean);
    norm.scale.push_back(sd);
  }
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";

  auto source = norm.normalize(raw, 0);
  ClipDataset ds(ClipDataset::Kind::Series, source, input_length, forecast_length, norm, names);
  const auto W = input_length + forecast_length;
  std::vector<std::int64_t> prefix(static_cast<std::size_t>(T + 1), 0);
  for (std::int64_t t = 0; t < T; ++t) prefix[static_cast<std::size_t>(t + 1)] = prefix[static_cast<std::size_t>(t)] + gap_before[static_cast<std::size_t>(t)];
  for (std::int64_t s = 0; s + W <= T; ++s) {
    // Gaps strictly inside the window (between s and s + W - 1).
    if (prefix[static_cast<std::size_t>(s + W)] - prefix[static_cast<std::size_t>(s + 1)] != 0) continue;
    const int first = split_of[static_cast<std::size_t>(s)];
    if (first < 0 || split_of[static_cast<std::size_t>(s + W - 1)] != first) continue;
    const auto idx = static_cast<std::int64_t>(ds.window_starts.size());
    ds.window_starts.push_back(s);
    (first == 0 ? ds.train : first == 1 ? ds.val : ds.test).push_back(idx);
  }
  if (ds.window_starts.empty()) throw std::runtime_error("gridded: no complete windows of length " + std::to_string(W));
  ds.value_min = source.min().item<double>();
  ds.value_max = source.max().item<double>();
  const double range = (train_raw.max() - train_raw.min()).item<double>();
  ds.data_range = range > 0 ? range : 1.0;
  ds.warnings = warnings;
  ds.check_invariants();
  return ds;
}

void write_synthetic_weather(const std::string& dir, const SyntheticWeatherOptions& o) {
  fs::create_directories(dir);
  const auto H = o.height, W = o.width;
  const auto t0 = parse_timestamp(o.start);
  std::vector<std::int64_t> keep;
  for (std::int64_t t = 0; t < o.n_steps; ++t) {
    if (std::find(o.drop.begin(), o.drop.end(), t) == o.drop.end()) keep.push_back(t);
  }
  json stamps = json::array();
  for (auto t : keep) stamps.push_back(format_timestamp(t0 + t * o.step_hours * 60));

  auto lat = torch::linspace(-std::numbers::pi / 2, std::numbers::pi / 2, H, torch::kDouble).view({1, H, 1});
  auto lon = torch::linspace(0, 2 * std::numbers::pi, W + 1, torch::kDouble).narrow(0, 0, W).view({1, 1, W});
  auto hours = torch::tensor(keep, torch::kDouble).view({-1, 1, 1}) * static_cast<double>(o.step_hours);
  json vars = json::array();
  for (std::size_t v = 0; v < o.variables.size(); ++v) {
    const auto& name = o.variables[v];
    torch::Tensor field;
    if (std::find(o.constant.begin(), o.constant.end(), name) != o.constant.end()) {
      field = torch::full({static_cast<std::int64_t>(keep.size()), H, W}, 5.0, torch::kDouble);
    } else {
      auto gen = at::make_generator<at::CPUGeneratorImpl>(mix(o.seed, v));
      const double phase = 2 * std::numbers::pi * torch::rand({1}, gen, torch::kDouble).item<double>();
      const double drift = 2 * std::numbers::pi / (24.0 * 5);  // one lap per five days
      field = 273.0 + 25.0 * torch::cos(lat) + 4.0 * torch::sin(2 * lon - drift * hours + phase) * torch::cos(lat) +
              3.0 * torch::sin(2 * std::numbers::pi * hours / 24.0 + lon) +
              0.3 * torch::randn({static_cast<std::int64_t>(keep.size()), H, W}, gen, torch::kDouble);
    }
    const auto file = name + ".npy";
    npy::write((fs::path(dir) / file).string(), field.to(torch::kFloat));
    vars.push_back({{"name", name}, {"file", file}, {"units", "K"}});
  }
  json manifest = {{"format", "dgdm.dataset/1"},
                   {"kind", "series"},
                   {"variables", vars},
                   {"step_hours", o.step_hours},
                   {"timestamps", stamps},
                   {"splits",
                    {{"train", {o.train.first, o.train.last}},
                     {"val", {o.val.first, o.val.last}},
                     {"test", {o.test.first, o.test.last}}}},
                   {"generator", {{"name", "synthetic_weather"}, {"seed", o.seed}}}};
  write_text(fs::path(dir) / "manifest.json", manifest.dump(2));
}

torch::Tensor generate_synthetic_pnw_raw(const SyntheticPnwOptions& o) {
  const auto T = o.input_length + o.forecast_length;
  auto rows = torch::arange(o.height, torch::kDouble).view({o.height, 1});
  auto cols = torch::arange(o.width, torch::kDouble).view({1, o.width});
  std::vector<torch::Tensor> clips;
  for (std::int64_t n = 0; n < o.n_clips; ++n) {
    auto gen = at::make_generator<at::CPUGeneratorImpl>(mix(o.seed, static_cast<std::uint64_t>(n)));
    auto clip = torch::zeros({o.channels, T, o.height, o.width}, torch::kDouble);
    for (int b = 0; b < 4; ++b) {
      auto r = torch::rand({6}, gen, torch::kDouble);
      const double r0 = r[0].item<double>() * o.height, c0 = r[1].item<double>() * o.width;
      const double vr = (r[2].item<double>() - 0.5) * 0.04 * o.height, vc = (r[3].item<double>() - 0.5) * 0.04 * o.width;
      const double sigma = (0.06 + 0.1 * r[4].item<double>()) * std::min(o.height, o.width);
      const double amp = 0.5 + 0.5 * r[5].item<double>();
      for (std::int64_t t = 0; t < T; ++t) {
        const double s = sigma * (1.0 + 0.02 * static_cast<double>(t));
        auto d2 = (rows - (r0 + vr * t)).square() + (cols - (c0 + vc * t)).square();
        auto blob = amp * torch::exp(-d2 / (2 * s * s));
        for (std::int64_t c = 0; c < o.channels; ++c) {
          clip[c][t] += blob * (1.0 - 0.2 * static_cast<double>(c));
        }
      }
    }
    // Brightness temperature: cold cloud tops over a warm background.
    clips.push_back(300.0 - 90.0 * clip.clamp(0, 1));
  }
  return torch::stack(clips).to(torch::kFloat);
}

void write_clip_directory(const std::string& dir, const torch::Tensor& raw, const std::vector<std::string>& variables,
                          std::int64_t input_length, std::int64_t forecast_length, double train_fraction,
                          double val_fraction, const Normalization& norm, double data_min, double data_max,
                          const std::string& generator_json) {
  if (raw.dim() != 5 || raw.size(1) != static_cast<std::int64_t>(variables.size())) {
    throw std::invalid_argument("write_clip_directory: expected [N, C, T, H, W] with one name per channel");
  }
  fs::create_directories(dir);
  json vars = json::array();
  for (std::size_t c = 0; c < variables.size(); ++c) {
    const auto file = variables[c] + ".npy";
    npy::write((fs::path(dir) / file).string(), raw.select(1, static_cast<std::int64_t>(c)).to(torch::kFloat).contiguous());
    vars.push_back({{"name", variables[c]}, {"file", file}});
  }
  ClipDataset probe;
  fraction_splits(probe, raw.size(0), train_fraction, val_fraction);
  auto range = [](const std::vector<std::int64_t>& v) {
    return v.empty() ? json::array({0, 0}) : json::array({v.front(), v.back() + 1});
  };
  json manifest = {{"format", "dgdm.dataset/1"},
                   {"kind", "clips"},
                   {"variables", vars},
                   {"input_length", input_length},
                   {"forecast_length", forecast_length},
                   {"splits", {{"train", range(probe.train)}, {"val", range(probe.val)}, {"test", range(probe.test)}}},
                   {"normalization", {{"shift", norm.shift}, {"scale", norm.scale}}},
                   {"value_range", {data_min, data_max}},
                   {"generator", generator_json.empty() ? json::object() : json::parse(generator_json)}};
  write_text(fs::path(dir) / "manifest.json", manifest.dump(2));
}

ClipDataset load_dataset(const std::string& dir, const std::vector<std::string>& variables, std::int64_t input_length,
                         std::int64_t forecast_length) {
  const auto manifest = read_json(fs::path(dir) / "manifest.json");
  const auto kind = manifest.value("kind", "");
  if (kind == "series") {
    return load_gridded_dataset(dir, variables, input_length, forecast_length);
  }
  if (kind != "clips") throw std::runtime_error("manifest: unknown dataset kind '" + kind + "'");
  const auto L = input_length > 0 ? input_length : manifest.at("input_length").get<std::int64_t>();
  const auto L_hat = forecast_length > 0 ? forecast_length : manifest.at("forecast_length").get<std::int64_t>();

  const auto vars = selected_variables(manifest, variables);
  const auto& all = manifest.at("variables");
  const auto shift = manifest.at("normalization").at("shift").get<std::vector<double>>();
  const auto scale = manifest.at("normalization").at("scale").get<std::vector<double>>();
  Normalization norm;
  std::vector<torch::Tensor> fields;
  std::vector<std::string> names;
  for (const auto& v : vars) {
    std::size_t c = 0;
    while (c < all.size() && all[c].at("name") != v.at("name")) ++c;
    norm.shift.push_back(shift.at(c));
    norm.scale.push_back(scale.at(c));
    fields.push_back(npy::read((fs::path(dir) / v.at("file").get<std::string>()).string()).to(torch::kFloat));
    names.push_back(v.at("name").get<std::string>());
  }
  auto raw = torch::stack(fields, 1);  // [N, C, T, H, W]
  ClipDataset ds(ClipDataset::Kind::Clips, norm.normalize(raw), L, L_hat, norm, names);
  const auto& splits = manifest.at("splits");
  auto span = [&](const char* name) {
    const auto r = splits.at(name).get<std::vector<std::int64_t>>();
    return iota(r.at(0), r.at(1));
  };
  ds.train = span("train");
  ds.val = span("val");
  ds.test = span("test");
  const auto vr = manifest.at("value_range").get<std::vector<double>>();
  ds.data_range = vr.at(1) - vr.at(0) > 0 ? vr.at(1) - vr.at(0) : 1.0;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t c = 0; c < norm.shift.size(); ++c) {
    const double a = (vr[0] - norm.shift[c]) / norm.scale[c], b = (vr[1] - norm.shift[c]) / norm.scale[c];
    lo = std::min({lo, a, b});
    hi = std::max({hi, a, b});
  }
  ds.value_min = lo;
  ds.value_max = hi;
  ds.check_invariants();
  return ds;
}

}  // namespace dgdm
