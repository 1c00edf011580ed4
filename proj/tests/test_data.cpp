// Copyright 2026 The DGDM Authors
// SPDX-License-Identifier: Apache-2.0

#include <ATen/CPUGeneratorImpl.h>
#include <gtest/gtest.h>
#include <json.hpp>
#include <torch/torch.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "dgdm/data.hpp"
#include "dgdm/model.hpp"
#include "dgdm/npy.hpp"

using namespace dgdm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "dgdm_test_data" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

MovingMnistOptions small_mnist(std::int64_t n = 6) {
  MovingMnistOptions o;
  o.n_clips = n;
  o.height = 24;
  o.width = 24;
  o.digit_size = 10;
  o.speed = 2.5;
  o.seed = 3;
  return o;
}

/// Reflected trajectory in closed form: a triangle wave of period 2 * limit.
double folded(double p0, double v, std::int64_t k, double limit) {
  if (limit <= 0) return 0;
  double q = std::fmod(p0 + static_cast<double>(k) * v, 2 * limit);
  if (q < 0) q += 2 * limit;
  return q > limit ? 2 * limit - q : q;
}

SyntheticWeatherOptions small_weather() {
  SyntheticWeatherOptions o;
  o.n_steps = 4 * 365 + 1;
  o.step_hours = 24;
  o.train = {1979, 1980};
  o.val = {1981, 1981};
  o.test = {1982, 1982};
  return o;
}

}  // namespace

TEST(MovingMnist, SplitsClipIntoInputAndForecast) {
  auto ds = generate_moving_mnist(small_mnist());
  auto [x, y] = ds.batch({0, 1, 2});
  EXPECT_EQ(x.sizes(), (std::vector<std::int64_t>{3, 1, 10, 24, 24}));
  EXPECT_EQ(y.sizes(), (std::vector<std::int64_t>{3, 1, 10, 24, 24}));
  auto clip = ds.clip(1);
  EXPECT_TRUE(torch::equal(x[1], clip.narrow(1, 0, 10)));
  EXPECT_TRUE(torch::equal(y[1], clip.narrow(1, 10, 10)));
}

TEST(MovingMnist, DefaultRegimeShapes) {
  MovingMnistOptions o;
  o.n_clips = 2;
  auto ds = generate_moving_mnist(o);
  EXPECT_EQ(ds.source().sizes(), (std::vector<std::int64_t>{2, 1, 20, 64, 64}));
  EXPECT_DOUBLE_EQ(ds.data_range, 255.0);
}

TEST(MovingMnist, ValuesInUnitRange) {
  auto ds = generate_moving_mnist(small_mnist());
  EXPECT_GE(ds.source().min().item<float>(), 0.0f);
  EXPECT_LE(ds.source().max().item<float>(), 1.0f);
  EXPECT_GT(ds.source().max().item<float>(), 0.5f);
  EXPECT_NO_THROW(ds.check_invariants());
}

TEST(MovingMnist, ZeroVelocityFreezesFrames) {
  auto o = small_mnist(3);
  o.speed = 0;
  auto raw = generate_moving_mnist_raw(o);
  for (std::int64_t n = 0; n < 3; ++n) {
    for (std::int64_t k = 1; k < o.length(); ++k) EXPECT_TRUE(torch::equal(raw[n][k], raw[n][0]));
  }
}

TEST(MovingMnist, CornersFollowClosedFormReflection) {
  std::mt19937_64 seeds(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto o = small_mnist();
    o.speed = std::uniform_real_distribution<double>(0.5, 9.0)(seeds);
    o.input_length = 15;
    o.forecast_length = 15;
    auto glyphs = builtin_glyphs(o.digit_size);
    std::mt19937_64 rng(seeds());
    std::vector<DigitTrack> tracks;
    auto frames = render_moving_mnist_clip(o, glyphs, rng, &tracks);
    ASSERT_EQ(tracks.size(), 2u);
    const double lim[2] = {static_cast<double>(o.height - o.digit_size), static_cast<double>(o.width - o.digit_size)};
    for (const auto& tr : tracks) {
      ASSERT_EQ(tr.corners.size(), static_cast<std::size_t>(o.length()));
      for (std::int64_t k = 0; k < o.length(); ++k) {
        for (int a = 0; a < 2; ++a) {
          const auto expected = std::lround(folded(tr.start[static_cast<std::size_t>(a)],
                                                   tr.velocity[static_cast<std::size_t>(a)], k, lim[a]));
          EXPECT_EQ(tr.corners[static_cast<std::size_t>(k)][static_cast<std::size_t>(a)], expected)
              << "frame " << k << " axis " << a;
        }
        // The glyph is present at its corner (max compositing never dims it).
        const auto& c = tr.corners[static_cast<std::size_t>(k)];
        auto region = frames[k].narrow(0, c[0], o.digit_size).narrow(1, c[1], o.digit_size);
        EXPECT_TRUE(torch::all(region >= glyphs.images[tr.glyph].to(torch::kFloat)).item<bool>());
      }
    }
  }
}

TEST(MovingMnist, OverlapsCompositeByMaximum) {
  auto o = small_mnist();
  o.n_digits = 3;
  auto glyphs = builtin_glyphs(o.digit_size);
  std::mt19937_64 rng(8);
  std::vector<DigitTrack> tracks;
  auto frames = render_moving_mnist_clip(o, glyphs, rng, &tracks);
  auto expected = torch::zeros_like(frames);
  for (const auto& tr : tracks) {
    for (std::int64_t k = 0; k < o.length(); ++k) {
      const auto& c = tr.corners[static_cast<std::size_t>(k)];
      auto layer = torch::zeros({o.height, o.width});
      layer.narrow(0, c[0], o.digit_size).narrow(1, c[1], o.digit_size).copy_(glyphs.images[tr.glyph]);
      expected[k] = torch::maximum(expected[k], layer);
    }
  }
  EXPECT_TRUE(torch::equal(frames, expected));
}

TEST(MovingMnist, SameSeedSameDataset) {
  auto a = generate_moving_mnist_raw(small_mnist());
  auto b = generate_moving_mnist_raw(small_mnist());
  EXPECT_TRUE(torch::equal(a, b));
  auto o = small_mnist();
  o.seed = 4;
  EXPECT_FALSE(torch::equal(a, generate_moving_mnist_raw(o)));
}

TEST(MovingMnist, ClipsIndependentOfCount) {
  auto a = generate_moving_mnist_raw(small_mnist(3));
  auto b = generate_moving_mnist_raw(small_mnist(6));
  EXPECT_TRUE(torch::equal(a, b.narrow(0, 0, 3)));
}

TEST(MovingMnist, SplitsDisjointAndComplete) {
  auto ds = generate_moving_mnist(small_mnist(20));
  std::set<std::int64_t> all;
  for (const auto* s : {&ds.train, &ds.val, &ds.test}) all.insert(s->begin(), s->end());
  EXPECT_EQ(all.size(), 20u);
  EXPECT_EQ(ds.train.size(), 16u);
  EXPECT_EQ(ds.val.size(), 2u);
}

TEST(MovingMnist, InvalidFrameSizeThrows) {
  auto o = small_mnist();
  o.digit_size = 30;
  EXPECT_THROW(generate_moving_mnist(o), std::invalid_argument);
  o = small_mnist();
  o.height = 0;
  EXPECT_THROW(generate_moving_mnist(o), std::invalid_argument);
}

TEST(MovingMnist, IdxArchiveHook) {
  const auto dir = scratch("idx");
  const auto path = (dir / "images-idx3-ubyte").string();
  {
    std::ofstream out(path, std::ios::binary);
    auto be = [&](std::uint32_t v) {
      const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                         static_cast<char>(v)};
      out.write(b, 4);
    };
    be(2051);
    be(3);
    be(28);
    be(28);
    for (int n = 0; n < 3; ++n)
      for (int i = 0; i < 28 * 28; ++i) out.put(static_cast<char>((i * (n + 1)) % 256));
  }
  auto bank = load_idx_glyphs(path, 28);
  EXPECT_EQ(bank.images.sizes(), (std::vector<std::int64_t>{3, 28, 28}));
  EXPECT_EQ(bank.images[1][0][5].item<std::uint8_t>(), 10);
  auto resized = load_idx_glyphs(path, 10, 2);
  EXPECT_EQ(resized.images.sizes(), (std::vector<std::int64_t>{2, 10, 10}));
  auto o = small_mnist(2);
  o.digit_source = path;
  EXPECT_EQ(generate_moving_mnist_raw(o).sizes(), (std::vector<std::int64_t>{2, 20, 24, 24}));
  EXPECT_THROW(load_idx_glyphs((dir / "missing").string(), 28), std::runtime_error);
}

TEST(BuiltinGlyphs, TenDigitsInSeveralStyles) {
  auto bank = builtin_glyphs(28);
  EXPECT_EQ(bank.images.size(0) % 10, 0);
  EXPECT_GE(bank.images.size(0), 20);
  std::set<std::int64_t> labels(bank.labels.begin(), bank.labels.end());
  EXPECT_EQ(labels.size(), 10u);
  for (std::int64_t i = 0; i < bank.images.size(0); ++i) EXPECT_GT(bank.images[i].max().item<std::uint8_t>(), 200);
}

TEST(Reflection, StepExamples) {
  double p = 9, v = 3;
  reflect_step(p, v, 10);
  EXPECT_DOUBLE_EQ(p, 8);
  EXPECT_DOUBLE_EQ(v, -3);
  p = 1, v = -3;
  reflect_step(p, v, 10);
  EXPECT_DOUBLE_EQ(p, 2);
  EXPECT_DOUBLE_EQ(v, 3);
  p = 5, v = 25;  // several bounces in one step
  reflect_step(p, v, 10);
  EXPECT_DOUBLE_EQ(p, folded(5, 25, 1, 10));
  p = 0, v = 2;
  reflect_step(p, v, 0);
  EXPECT_DOUBLE_EQ(p, 0);
}

TEST(Batches, DeterministicAndWithinPool) {
  std::vector<std::int64_t> pool{3, 5, 7, 9, 11, 13, 15};
  for (std::int64_t step = 0; step < 20; ++step) {
    auto a = batch_indices(pool, 3, 42, step), b = batch_indices(pool, 3, 42, step);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.size(), 3u);
    for (auto i : a) EXPECT_NE(std::find(pool.begin(), pool.end(), i), pool.end());
  }
}

TEST(Batches, EpochVisitsDistinctClips) {
  std::vector<std::int64_t> pool(10);
  std::iota(pool.begin(), pool.end(), 0);
  EXPECT_EQ(steps_per_epoch(10, 3), 3);
  std::set<std::int64_t> seen;
  for (std::int64_t step = 0; step < 3; ++step) {
    for (auto i : batch_indices(pool, 3, 1, step)) EXPECT_TRUE(seen.insert(i).second);
  }
  EXPECT_NE(batch_indices(pool, 3, 1, 0), batch_indices(pool, 3, 1, 3));
}

TEST(Batches, SmallPoolUsesEverything) {
  std::vector<std::int64_t> pool{4, 2};
  auto b = batch_indices(pool, 8, 0, 5);
  std::sort(b.begin(), b.end());
  EXPECT_EQ(b, (std::vector<std::int64_t>{2, 4}));
  EXPECT_THROW(batch_indices({}, 2, 0, 0), std::invalid_argument);
}

TEST(Normalization, RoundTripWithinRelativeTolerance) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto C = std::uniform_int_distribution<std::int64_t>(1, 4)(rng);
    Normalization n;
    for (std::int64_t c = 0; c < C; ++c) {
      n.shift.push_back(std::uniform_real_distribution<double>(-300, 300)(rng));
      n.scale.push_back(std::uniform_real_distribution<double>(0.01, 100)(rng));
    }
    auto g = at::make_generator<at::CPUGeneratorImpl>(rng());
    auto v = torch::randn({2, C, 3, 5, 5}, g) * 50 + 280;
    auto back = n.denormalize(n.normalize(v));
    auto rel = ((back - v).abs() / v.abs().clamp_min(1e-6)).max().item<double>();
    EXPECT_LE(rel, 1e-5);
  }
}

TEST(ReplicateLastFrame, CopiesFinalFrame) {
  auto x = torch::rand({2, 3, 4, 5, 5});
  for (std::int64_t L_hat : {1, 10}) {
    auto r = replicate_last_frame(x, L_hat);
    EXPECT_EQ(r.size(2), L_hat);
    for (std::int64_t j = 0; j < L_hat; ++j) EXPECT_TRUE(torch::equal(r.select(2, j), x.select(2, 3)));
  }
  EXPECT_THROW(replicate_last_frame(torch::rand({1, 1, 0, 4, 4}), 2), std::invalid_argument);
}

TEST(Timestamps, ParseAndFormat) {
  EXPECT_EQ(parse_timestamp("1970-01-01T00:00"), 0);
  EXPECT_EQ(parse_timestamp("1970-01-02T01:30"), 1440 + 90);
  EXPECT_EQ(format_timestamp(parse_timestamp("2016-02-29T23:00")), "2016-02-29T23:00");
  EXPECT_EQ(timestamp_year(parse_timestamp("1979-12-31T23:00")), 1979);
  EXPECT_EQ(timestamp_year(parse_timestamp("1969-06-01T00:00")), 1969);
  EXPECT_THROW(parse_timestamp("2017-02-30T00:00"), std::invalid_argument);
  EXPECT_THROW(parse_timestamp("noon"), std::invalid_argument);
}

TEST(Gridded, WeatherBenchLikeShapes) {
  const auto dir = scratch("weather");
  write_synthetic_weather(dir.string(), small_weather());
  auto ds = load_gridded_dataset(dir.string(), {"t2m"}, 12, 12);
  auto [x, y] = ds.batch({0, 1});
  EXPECT_EQ(ds.clip(0).sizes(), (std::vector<std::int64_t>{1, 24, 32, 64}));
  EXPECT_EQ(x.sizes(), (std::vector<std::int64_t>{2, 1, 12, 32, 64}));
  EXPECT_EQ(y.sizes(), (std::vector<std::int64_t>{2, 1, 12, 32, 64}));
  EXPECT_FALSE(ds.train.empty());
  EXPECT_FALSE(ds.val.empty());
  EXPECT_FALSE(ds.test.empty());
  EXPECT_TRUE(ds.warnings.empty());
}

TEST(Gridded, StandardizationUsesTrainYearsOnly) {
  const auto dir = scratch("weather_std");
  write_synthetic_weather(dir.string(), small_weather());
  auto ds = load_gridded_dataset(dir.string(), {}, 4, 4);
  auto raw = npy::read((dir / "t2m.npy").string()).to(torch::kDouble);
  auto train = raw.narrow(0, 0, 731);  // 1979 and 1980 at daily steps
  EXPECT_NEAR(ds.normalization().shift[0], train.mean().item<double>(), 1e-6);
  EXPECT_NEAR(ds.normalization().scale[0], train.std(false).item<double>(), 1e-6);
  // Train windows are standardized.
  auto train_values = ds.source().narrow(1, 0, 731);
  EXPECT_NEAR(train_values.mean().item<double>(), 0.0, 1e-4);
}

TEST(Gridded, SplitWindowsNeverShareTime) {
  const auto dir = scratch("weather_split");
  write_synthetic_weather(dir.string(), small_weather());
  auto ds = load_gridded_dataset(dir.string(), {}, 6, 6);
  auto manifest = nlohmann::json::parse(std::ifstream(dir / "manifest.json"));
  auto stamps = manifest["timestamps"].get<std::vector<std::string>>();
  auto year_of = [&](std::int64_t t) { return timestamp_year(parse_timestamp(stamps[static_cast<std::size_t>(t)])); };
  auto check = [&](const std::vector<std::int64_t>& split, YearRange years) {
    for (auto i : split) {
      const auto s = ds.window_starts[static_cast<std::size_t>(i)];
      EXPECT_TRUE(years.contains(year_of(s)));
      EXPECT_TRUE(years.contains(year_of(s + 11)));
    }
  };
  check(ds.train, {1979, 1980});
  check(ds.val, {1981, 1981});
  check(ds.test, {1982, 1982});
  EXPECT_NO_THROW(ds.check_invariants());
}

TEST(Gridded, GapsAreReportedAndWindowsDropped) {
  const auto dir = scratch("weather_gap");
  auto o = small_weather();
  o.drop = {100, 101, 500};
  write_synthetic_weather(dir.string(), o);
  auto ds = load_gridded_dataset(dir.string(), {}, 3, 3);
  ASSERT_FALSE(ds.warnings.empty());
  EXPECT_NE(ds.warnings.front().find("2 gap"), std::string::npos);
  auto manifest = nlohmann::json::parse(std::ifstream(dir / "manifest.json"));
  auto stamps = manifest["timestamps"].get<std::vector<std::string>>();
  for (auto s : ds.window_starts) {
    for (std::int64_t k = 1; k < 6; ++k) {
      EXPECT_EQ(parse_timestamp(stamps[static_cast<std::size_t>(s + k)]) -
                    parse_timestamp(stamps[static_cast<std::size_t>(s + k - 1)]),
                24 * 60);
    }
  }
}

TEST(Gridded, ConstantFieldClampsScaleAndWarns) {
  const auto dir = scratch("weather_const");
  auto o = small_weather();
  o.variables = {"t2m", "lsm"};
  o.constant = {"lsm"};
  write_synthetic_weather(dir.string(), o);
  auto ds = load_gridded_dataset(dir.string(), {"t2m", "lsm"}, 2, 2);
  EXPECT_EQ(ds.channels(), 2);
  EXPECT_DOUBLE_EQ(ds.normalization().scale[1], 1.0);
  bool warned = false;
  for (const auto& w : ds.warnings) warned = warned || w.find("lsm") != std::string::npos;
  EXPECT_TRUE(warned);
  EXPECT_TRUE(torch::isfinite(ds.source()).all().item<bool>());
}

TEST(Gridded, RoundTripThroughNormalization) {
  const auto dir = scratch("weather_rt");
  write_synthetic_weather(dir.string(), small_weather());
  auto ds = load_gridded_dataset(dir.string(), {}, 2, 2);
  auto raw = npy::read((dir / "t2m.npy").string()).unsqueeze(0);
  auto back = ds.normalization().denormalize(ds.source(), 0);
  EXPECT_LE(((back - raw).abs() / raw.abs()).max().item<double>(), 1e-5);
}

TEST(Gridded, MissingManifestOrVariableFails) {
  const auto dir = scratch("weather_missing");
  EXPECT_THROW(load_gridded_dataset(dir.string(), {}, 2, 2), std::runtime_error);
  write_synthetic_weather(dir.string(), small_weather());
  EXPECT_THROW(load_gridded_dataset(dir.string(), {"z500"}, 2, 2), std::runtime_error);
}

TEST(ClipDirectory, RoundTripMatchesGenerator) {
  const auto dir = scratch("mnist_dir");
  auto o = small_mnist(10);
  auto raw = generate_moving_mnist_raw(o).unsqueeze(1);
  Normalization norm{{0.0}, {255.0}};
  write_clip_directory(dir.string(), raw, {"digits"}, 10, 10, 0.8, 0.1, norm, 0, 255, R"({"name":"moving_mnist"})");
  auto loaded = load_dataset(dir.string());
  auto direct = generate_moving_mnist(o);
  EXPECT_TRUE(torch::equal(loaded.source(), direct.source()));
  EXPECT_EQ(loaded.train, direct.train);
  EXPECT_EQ(loaded.val, direct.val);
  EXPECT_EQ(loaded.test, direct.test);
  EXPECT_DOUBLE_EQ(loaded.data_range, 255.0);
  EXPECT_EQ(loaded.variables(), std::vector<std::string>{"digits"});
}

TEST(ClipDirectory, LengthMismatchRejected) {
  const auto dir = scratch("mnist_len");
  auto raw = generate_moving_mnist_raw(small_mnist(2)).unsqueeze(1);
  write_clip_directory(dir.string(), raw, {"digits"}, 10, 10, 0.5, 0.0, {{0.0}, {255.0}}, 0, 255, "");
  EXPECT_THROW(load_dataset(dir.string(), {}, 12, 12), std::invalid_argument);
}

TEST(SyntheticPnw, ThreeChannelRegime) {
  SyntheticPnwOptions o;
  o.n_clips = 2;
  auto raw = generate_synthetic_pnw_raw(o);
  EXPECT_EQ(raw.sizes(), (std::vector<std::int64_t>{2, 3, 20, 128, 128}));
  EXPECT_TRUE(torch::isfinite(raw).all().item<bool>());
  EXPECT_TRUE(torch::equal(raw, generate_synthetic_pnw_raw(o)));
  const auto dir = scratch("pnw");
  write_clip_directory(dir.string(), raw, {"ir105", "sw038", "wv063"}, 10, 10, 0.5, 0.0,
                       {{250, 250, 250}, {30, 30, 30}}, 210, 300, "");
  auto ds = load_dataset(dir.string());
  auto [x, y] = ds.batch({0});
  EXPECT_EQ(x.sizes(), (std::vector<std::int64_t>{1, 3, 10, 128, 128}));
  auto only = load_dataset(dir.string(), {"wv063"});
  EXPECT_EQ(only.channels(), 1);
  EXPECT_TRUE(torch::allclose(only.source().select(1, 0), ds.source().select(1, 2)));
}

TEST(Npy, RoundTripAllDtypes) {
  const auto dir = scratch("npy");
  for (auto dtype : {torch::kFloat, torch::kDouble, torch::kUInt8, torch::kLong}) {
    auto t = (torch::rand({3, 4, 5}) * 100).to(dtype);
    const auto path = (dir / "a.npy").string();
    npy::write(path, t);
    auto back = npy::read(path);
    EXPECT_EQ(back.scalar_type(), dtype);
    EXPECT_TRUE(torch::equal(back, t));
    EXPECT_EQ((fs::file_size(path) - static_cast<std::uintmax_t>(t.nbytes())) % 64, 0u);
  }
  npy::write((dir / "v.npy").string(), torch::arange(4, torch::kLong));
  EXPECT_EQ(npy::read((dir / "v.npy").string()).sizes(), (std::vector<std::int64_t>{4}));
}

TEST(Npy, ReadsNumpyWrittenFile) {
  // numpy.save of [[1.5, -2, 3], [0.25, 7, -8]] as little-endian float32.
  const std::string hex =
      "934e554d5059010076007b276465736372273a20273c6634272c2027666f727472616e5f6f72646572273a2046616c73652c"
      "20277368617065273a2028322c2033292c207d20202020202020202020202020202020202020202020202020202020202020"
      "2020202020202020202020202020202020202020202020202020200a0000c03f000000c0000040400000803e0000e0400000"
      "00c1";
  const auto path = (scratch("npy_ref") / "ref.npy").string();
  {
    std::ofstream out(path, std::ios::binary);
    for (std::size_t i = 0; i < hex.size(); i += 2) out.put(static_cast<char>(std::stoi(hex.substr(i, 2), nullptr, 16)));
  }
  auto t = npy::read(path);
  EXPECT_TRUE(torch::equal(t, torch::tensor({{1.5f, -2.0f, 3.0f}, {0.25f, 7.0f, -8.0f}})));
}

TEST(Npy, RejectsGarbage) {
  const auto path = (scratch("npy_bad") / "bad.npy").string();
  std::ofstream(path) << "not an array";
  EXPECT_THROW(npy::read(path), std::runtime_error);
  EXPECT_THROW(npy::read(path + ".missing"), std::runtime_error);
}
