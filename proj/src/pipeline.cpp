// Copyright 2026 The DGDM Authors
// SPDX-License-Identifier: Apache-2.0

#include "dgdm/pipeline.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "dgdm/inference.hpp"
#include "dgdm/npy.hpp"
#include "dgdm/training.hpp"

namespace dgdm {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw std::runtime_error(path.string() + ": not valid JSON");
  return doc;
}

std::string fmt9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

/// Keeps the header and rows whose leading step is <= `step`.
void truncate_log(const fs::path& path, std::int64_t step) {
  std::ifstream in(path);
  if (!in) return;
  std::string line, kept;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      kept += line + "\n";
      header = false;
      continue;
    }
    if (line.empty()) continue;
    if (std::stoll(line.substr(0, line.find(','))) <= step) kept += line + "\n";
  }
  in.close();
  write_text(path, kept);
}

template <class F>
auto as_config_error(const std::string& what, F&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

/// Physical [lo, hi] per channel of the dataset's declared range.
ordered_json value_ranges(const ClipDataset& ds) {
  ordered_json out = ordered_json::array();
  const auto& n = ds.normalization();
  for (std::size_t c = 0; c < n.shift.size(); ++c) {
    const double a = ds.value_min * n.scale[c] + n.shift[c], b = ds.value_max * n.scale[c] + n.shift[c];
    out.push_back({std::min(a, b), std::max(a, b)});
  }
  return out;
}

}  // namespace

// Dataset -----------------------------------------------------------------------

void generate_dataset(const ExperimentConfig& config, bool force, std::ostream& progress) {
  const fs::path dir = config.dataset.dir;
  if (config.dataset.kind == "directory")
    throw ConfigError("config key 'dataset.kind': \"directory\" datasets are provided, not generated");
  if (fs::exists(dir / "manifest.json") && !force)
    throw ConfigError("dataset already exists at " + dir.string() + " (pass --force to regenerate)");
  fs::create_directories(dir);
  const auto& d = config.dataset;
  if (d.kind == "moving_mnist") {
    const auto o = config.moving_mnist_options();
    as_config_error("dataset", [&] {
      o.validate();
      return 0;
    });
    auto raw = generate_moving_mnist_raw(o).unsqueeze(1);
    ordered_json gen = {{"name", "moving_mnist"},     {"seed", o.seed},   {"n_digits", o.n_digits},
                        {"digit_size", o.digit_size}, {"speed", o.speed}, {"digit_source", o.digit_source}};
    write_clip_directory(dir.string(), raw, {"digits"}, o.input_length, o.forecast_length, o.train_fraction,
                         o.val_fraction, Normalization{{0.0}, {255.0}}, 0.0, 255.0, gen.dump());
  } else if (d.kind == "synthetic_pnw") {
    const auto o = config.pnw_options();
    auto raw = generate_synthetic_pnw_raw(o);
    // Standardize each channel over the train clips.
    const auto n_train = static_cast<std::int64_t>(std::floor(static_cast<double>(o.n_clips) * o.train_fraction));
    auto train = raw.narrow(0, 0, std::max<std::int64_t>(n_train, 1)).to(torch::kDouble);
    Normalization norm;
    std::vector<std::string> names;
    for (std::int64_t c = 0; c < o.channels; ++c) {
      auto ch = train.select(1, c);
      norm.shift.push_back(ch.mean().item<double>());
      const double s = ch.std(false).item<double>();
      norm.scale.push_back(s > 0 ? s : 1.0);
      names.push_back("band" + std::to_string(c));
    }
    ordered_json gen = {{"name", "synthetic_pnw"}, {"seed", o.seed}};
    write_clip_directory(dir.string(), raw, names, o.input_length, o.forecast_length, o.train_fraction, o.val_fraction,
                         norm, raw.min().item<double>(), raw.max().item<double>(), gen.dump());
  } else {
    write_synthetic_weather(dir.string(), config.weather_options());
  }
  progress << "wrote " << d.kind << " dataset to " << dir.string() << "\n";
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".npy")
      progress << "  " << entry.path().filename().string() << " fnv1a64=" << file_digest(entry.path().string()) << "\n";
  }
}

ClipDataset open_dataset(const ExperimentConfig& config) {
  const auto& d = config.dataset;
  if (!fs::exists(fs::path(d.dir) / "manifest.json"))
    throw std::runtime_error("no dataset at " + d.dir + " (run gen-data first)");
  auto ds = as_config_error("dataset " + d.dir, [&] {
    try {
      return load_dataset(d.dir, d.variables, d.input_length, d.forecast_length);
    } catch (const std::runtime_error& e) {
      // Unknown variables and similar manifest disagreements are config errors.
      const std::string what = e.what();
      if (what.find("unknown variable") != std::string::npos) throw ConfigError("config key 'dataset.variables': " + what);
      throw;
    }
  });
  if (ds.height() != d.height || ds.width() != d.width)
    throw ConfigError("dataset " + d.dir + " holds " + std::to_string(ds.height()) + "x" + std::to_string(ds.width()) +
                      " frames but the config declares dataset.height=" + std::to_string(d.height) +
                      ", dataset.width=" + std::to_string(d.width));
  return ds;
}

// Training ----------------------------------------------------------------------

ExperimentConfig checkpoint_config(const std::string& checkpoint, const std::vector<std::string>& overrides) {
  if (!fs::exists(checkpoint)) throw std::runtime_error("no checkpoint at " + checkpoint);
  const auto snapshot = read_checkpoint_config(checkpoint);
  json doc = json::parse(snapshot, nullptr, false);
  if (doc.is_discarded() || !doc.is_object())
    throw std::runtime_error(checkpoint + ": checkpoint carries no experiment config");
  ExperimentConfig config;
  apply_json(config, doc, checkpoint);
  for (const auto& o : overrides) apply_override(config, o);
  config.validate();
  return config;
}

TrainResult train_experiment(const ExperimentConfig& config, const std::string& resume, std::ostream& progress) {
  auto ds = open_dataset(config);
  if (ds.train.empty()) throw ConfigError("config key 'dataset.train_fraction': the train split is empty");
  const auto model = config.model_config(ds.channels());
  const auto tc = config.train_config();
  const auto snapshot = to_flat_json(config);

  const fs::path out = config.output_dir;
  const fs::path ckpt_dir = out / "checkpoints";
  fs::create_directories(ckpt_dir);
  const fs::path train_log = out / "train_log.csv", val_log = out / "val_log.csv";

  Trainer trainer(model, config.diffusion, tc, snapshot.dump());
  TrainResult result;
  if (!resume.empty()) {
    const fs::path from = resume == "auto" ? ckpt_dir / "last.pt" : fs::path(resume);
    if (!fs::exists(from)) throw std::runtime_error("no checkpoint to resume from at " + from.string());
    const auto saved = json::parse(read_checkpoint_config(from.string()), nullptr, false);
    if (saved.is_discarded() || !saved.is_object()) throw std::runtime_error(from.string() + ": no config snapshot");
    for (const auto& [key, value] : snapshot.items()) {
      if (!affects_training(key)) continue;
      if (!saved.contains(key) || saved[key] != json(value))
        throw ConfigError("config key '" + key + "' differs from checkpoint " + from.string() + " (" +
                          (saved.contains(key) ? saved[key].dump() : std::string("missing")) + " vs " + value.dump() +
                          ")");
    }
    trainer.load(from.string());
    if (!fs::exists(train_log)) write_text(train_log, "step,loss_total,loss_db,loss_pb,lr\n");
    if (!fs::exists(val_log)) write_text(val_log, "step,val_loss,lr_db,lr_pb,reduced\n");
    truncate_log(train_log, trainer.global_step());
    truncate_log(val_log, trainer.global_step());
    progress << "resumed from " << from.string() << " at step " << trainer.global_step() << "\n";
  } else {
    write_text(train_log, "step,loss_total,loss_db,loss_pb,lr\n");
    write_text(val_log, "step,val_loss,lr_db,lr_pb,reduced\n");
  }
  write_text(out / "config.json", snapshot.dump(2) + "\n");

  const auto total = tc.max_steps > 0 ? tc.max_steps : tc.epochs * steps_per_epoch(
                                                                     static_cast<std::int64_t>(ds.train.size()),
                                                                     tc.batch_size);
  std::vector<std::pair<torch::Tensor, torch::Tensor>> val_batches;
  for (std::int64_t b = 0; b < tc.val_batches; ++b) {
    const auto lo = b * tc.batch_size;
    if (lo >= static_cast<std::int64_t>(ds.val.size())) break;
    const auto hi = std::min<std::int64_t>(lo + tc.batch_size, static_cast<std::int64_t>(ds.val.size()));
    val_batches.push_back(ds.batch(std::vector<std::int64_t>(ds.val.begin() + lo, ds.val.begin() + hi)));
  }
  if (val_batches.empty()) progress << "warning: empty validation split; learning-rate plateaus are not tracked\n";

  std::ofstream tlog(train_log, std::ios::app), vlog(val_log, std::ios::app);
  result.start_step = trainer.global_step();
  const auto report_every = std::max<std::int64_t>(1, total / 20);
  bool first = true;
  while (trainer.global_step() < total) {
    const auto s = trainer.global_step();
    auto [x, y] = ds.batch(batch_indices(ds.train, tc.batch_size, tc.seed, s));
    Losses l;
    try {
      l = trainer.step(x, y);
    } catch (const NonFiniteLoss& e) {
      throw std::runtime_error("training aborted at step " + std::to_string(s + 1) + ": " + e.what() +
                               "; weights were not updated");
    }
    const auto k = trainer.global_step();
    const double total_loss = l.total.item<double>();
    if (first) result.first_loss = total_loss;
    first = false;
    result.last_loss = total_loss;
    tlog << k << ',' << fmt9(total_loss) << ',' << fmt9(l.db.item<double>()) << ',' << fmt9(l.pb.item<double>()) << ','
         << fmt9(trainer.logged_lr()) << '\n'
         << std::flush;
    if (!val_batches.empty() && k % tc.eval_every == 0) {
      const double v = trainer.validation_loss(val_batches);
      const bool reduced = trainer.on_validation(v);
      vlog << k << ',' << fmt9(v) << ',' << fmt9(trainer.lr_db()) << ',' << fmt9(trainer.lr_pb()) << ','
           << (reduced ? 1 : 0) << '\n'
           << std::flush;
    }
    if (k % tc.checkpoint_every == 0) {
      trainer.save((ckpt_dir / ("step_" + std::to_string(k) + ".pt")).string());
      trainer.save((ckpt_dir / "last.pt").string());
    }
    if (k % report_every == 0 || k == total)
      progress << "step " << k << "/" << total << " loss " << fmt9(total_loss) << "\n" << std::flush;
  }
  result.steps = trainer.global_step();
  result.final_checkpoint = (ckpt_dir / "final.pt").string();
  trainer.save(result.final_checkpoint);
  trainer.save((ckpt_dir / "last.pt").string());
  return result;
}

// Sampling ----------------------------------------------------------------------

SampleResult sample_experiment(const ExperimentConfig& config, const SampleRequest& request) {
  auto ds = open_dataset(config);
  const auto model = config.model_config(ds.channels());
  auto nets = load_networks(request.checkpoint, model, config.inference.use_ema);
  const auto schedule = make_frame_schedule(config.diffusion, ds.forecast_length());
  const auto& norm = ds.normalization();

  torch::Tensor x, y;
  ordered_json clips = nullptr;
  if (!request.input_path.empty()) {
    auto raw = npy::read(request.input_path).to(torch::kFloat);
    if (raw.dim() == 4) raw = raw.unsqueeze(0);
    if (raw.dim() != 5 || raw.size(1) != ds.channels() || raw.size(2) != ds.input_length() ||
        raw.size(3) != ds.height() || raw.size(4) != ds.width())
      throw ConfigError("--input: expected [B, " + std::to_string(ds.channels()) + ", " +
                        std::to_string(ds.input_length()) + ", " + std::to_string(ds.height()) + ", " +
                        std::to_string(ds.width()) + "], got " + c10::str(raw.sizes()));
    x = norm.normalize(raw);
  } else {
    const auto& pool = as_config_error("--split", [&]() -> const std::vector<std::int64_t>& {
      return ds.split(request.split);
    });
    std::vector<std::int64_t> picked;
    if (request.clips.empty()) {
      const auto n = config.inference.max_clips > 0
                         ? std::min<std::int64_t>(config.inference.max_clips, static_cast<std::int64_t>(pool.size()))
                         : static_cast<std::int64_t>(pool.size());
      picked.assign(pool.begin(), pool.begin() + n);
    } else {
      for (auto c : request.clips) {
        if (c < 0 || c >= static_cast<std::int64_t>(pool.size()))
          throw ConfigError("--clips: index " + std::to_string(c) + " outside the " + request.split + " split (size " +
                            std::to_string(pool.size()) + ")");
        picked.push_back(pool[static_cast<std::size_t>(c)]);
      }
    }
    if (picked.empty()) throw ConfigError("the " + request.split + " split is empty");
    std::tie(x, y) = ds.batch(picked);
    clips = picked;
  }

  const auto options = config.sampler_options(request.seed);
  auto ens = as_config_error("sampler", [&] { return sample_forecast(model, nets, schedule, x, options); });

  const fs::path out = request.out_dir;
  fs::create_directories(out);
  for (const char* f : {"samples.npy", "deterministic.npy", "truth.npy", "input.npy"}) fs::remove(out / f);
  ordered_json files = ordered_json::object();
  auto put = [&](const char* name, const torch::Tensor& t, std::int64_t channel_dim) {
    const auto path = out / name;
    npy::write(path.string(), norm.denormalize(t, channel_dim).to(torch::kFloat).contiguous());
    files[name] = file_digest(path.string());
  };
  put("input.npy", x, 1);
  if (ens.size() > 0) put("samples.npy", ens.samples, 2);
  if (ens.deterministic.defined()) put("deterministic.npy", ens.deterministic, 1);
  if (y.defined()) put("truth.npy", y, 1);

  const auto& p = ens.provenance;
  ordered_json prov;
  prov["schema"] = "dgdm.forecast/1";
  prov["description"] = config.description;
  prov["checkpoint"] = request.checkpoint;
  prov["weights"] = config.inference.use_ema ? "ema" : "live";
  prov["dataset"] = config.dataset.dir;
  prov["split"] = request.input_path.empty() ? ordered_json(request.split) : ordered_json(nullptr);
  prov["clips"] = clips;
  prov["input"] = request.input_path.empty() ? ordered_json(nullptr) : ordered_json(request.input_path);
  prov["variables"] = ds.variables();
  prov["data_range"] = ds.data_range;
  prov["value_range"] = value_ranges(ds);
  prov["model"] = {{"use_db", model.use_db},
                   {"use_pb", model.use_pb},
                   {"bridge", model.bridge},
                   {"last_frame", model.last_frame}};
  prov["n_samples"] = ens.size();
  prov["sampler"] = {{"seed", p.seed},
                     {"eta", p.eta},
                     {"truncation_fraction", p.truncation_fraction},
                     {"T", p.T},
                     {"reverse_steps", p.reverse_steps},
                     {"svs_enabled", p.svs_enabled},
                     {"svs_step", p.svs_step},
                     {"svs_mode", p.svs_mode},
                     {"frame_horizons", p.frame_horizons},
                     {"grid_sizes", p.grid_sizes},
                     {"start_steps", p.start_steps},
                     {"batched", options.batched}};
  prov["network_calls"] = ens.stats.network_calls;
  prov["frame_updates"] = ens.stats.frame_updates;
  prov["files"] = files;
  write_text(out / "provenance.json", prov.dump(2) + "\n");

  SampleResult r;
  r.dir = out.string();
  r.members = ens.size();
  r.clips = x.size(0);
  r.provenance = prov;
  return r;
}

// Evaluation --------------------------------------------------------------------

namespace {

constexpr const char* kColumns[] = {"deterministic", "probabilistic", "average", "best"};
constexpr const char* kMetricNames[] = {"mae", "mse", "psnr", "ssim"};

ordered_json metric_object(const MetricRow& r) {
  return {{"mae", r.mae}, {"mse", r.mse}, {"psnr", r.psnr}, {"ssim", r.ssim}};
}

/// Table-style columns: the deterministic forecast, a single member (mean over
/// members), the ensemble average and the oracle best. Absent ones are null.
ordered_json report_columns(const MetricsReport& rep) {
  ordered_json cols = ordered_json::object();
  auto agg = [&](const std::string& id) -> ordered_json {
    const auto* r = rep.aggregate(id);
    return r ? metric_object(*r) : ordered_json(nullptr);
  };
  cols["deterministic"] = agg("deterministic");
  MetricRow mean;
  std::int64_t n = 0;
  for (const auto& r : rep.rows) {
    if (r.frame >= 0 || r.variable != "all" || r.identity.rfind("sample-", 0) != 0) continue;
    mean.mae += r.mae;
    mean.mse += r.mse;
    mean.psnr += r.psnr;
    mean.ssim += r.ssim;
    ++n;
  }
  if (n > 0) {
    mean.mae /= static_cast<double>(n);
    mean.mse /= static_cast<double>(n);
    mean.psnr /= static_cast<double>(n);
    mean.ssim /= static_cast<double>(n);
    cols["probabilistic"] = metric_object(mean);
  } else {
    cols["probabilistic"] = nullptr;
  }
  cols["average"] = agg("average");
  cols["best"] = agg("best");
  return cols;
}

std::optional<torch::Tensor> read_optional(const fs::path& path) {
  if (!fs::exists(path)) return std::nullopt;
  return npy::read(path.string()).to(torch::kDouble);
}

std::uint8_t to_byte(double v, double lo, double hi) {
  const double u = hi > lo ? (v - lo) / (hi - lo) : 0.0;
  return static_cast<std::uint8_t>(std::lround(std::clamp(u, 0.0, 1.0) * 255.0));
}

/// Rows of frames ([L, H, W] each) tiled into one image with 2-pixel gutters.
void write_strip_grid(const fs::path& path, const std::vector<torch::Tensor>& strips, double lo, double hi) {
  constexpr std::int64_t gap = 2;
  std::int64_t cols = 0;
  for (const auto& s : strips) cols = std::max(cols, s.size(0));
  const auto H = strips.front().size(1), W = strips.front().size(2);
  const auto width = cols * W + (cols + 1) * gap, height = static_cast<std::int64_t>(strips.size()) * H +
                                                           (static_cast<std::int64_t>(strips.size()) + 1) * gap;
  std::vector<std::uint8_t> px(static_cast<std::size_t>(width * height), 96);
  for (std::size_t r = 0; r < strips.size(); ++r) {
    auto s = strips[r].to(torch::kDouble).contiguous();
    auto a = s.accessor<double, 3>();
    for (std::int64_t f = 0; f < s.size(0); ++f) {
      const auto oy = gap + static_cast<std::int64_t>(r) * (H + gap), ox = gap + f * (W + gap);
      for (std::int64_t i = 0; i < H; ++i)
        for (std::int64_t j = 0; j < W; ++j)
          px[static_cast<std::size_t>((oy + i) * width + ox + j)] = to_byte(a[f][i][j], lo, hi);
    }
  }
  write_png_gray(path.string(), px, width, height);
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = 0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

EvalResult evaluate_forecasts(const EvalRequest& request, std::ostream& progress) {
  if (request.forecast_dirs.empty()) throw ConfigError("eval: no forecast directories given");
  const fs::path out = request.out_dir;
  fs::create_directories(out);
  EvalResult result;
  std::vector<ordered_json> columns;
  std::vector<std::optional<double>> pixel_std;
  std::map<std::string, int> used_names;
  const auto schema = report_schema();

  for (std::size_t i = 0; i < request.forecast_dirs.size(); ++i) {
    const fs::path dir = request.forecast_dirs[i];
    if (!fs::is_directory(dir)) throw std::runtime_error("no forecast directory at " + dir.string());
    json prov = fs::exists(dir / "provenance.json") ? read_json_file(dir / "provenance.json") : json::object();

    ForecastEnsemble ens;
    if (auto s = read_optional(dir / "samples.npy")) ens.samples = *s;
    if (auto d = read_optional(dir / "deterministic.npy")) ens.deterministic = *d;
    if (!ens.samples.defined() && !ens.deterministic.defined())
      throw std::runtime_error(dir.string() + ": neither samples.npy nor deterministic.npy");
    std::optional<torch::Tensor> y;
    if (!request.ignore_truth) y = request.truth_path.empty() ? read_optional(dir / "truth.npy")
                                                              : read_optional(request.truth_path);
    if (!request.truth_path.empty() && !y) throw std::runtime_error("no truth file at " + request.truth_path);

    ReportOptions ro;
    ro.data_range = prov.value("data_range", 1.0);
    ro.frame_sum = request.frame_sum;
    ro.include_best = request.best;
    if (prov.contains("variables")) ro.variables = prov["variables"].get<std::vector<std::string>>();
    auto rep = as_config_error("eval " + dir.string(), [&] { return evaluate_report(ens, y, ro); });

    std::string name = dir.filename().string();
    if (name.empty()) name = dir.parent_path().filename().string();
    if (used_names[name]++ > 0) name += "_" + std::to_string(i);
    const fs::path seed_dir = out / name;
    fs::create_directories(seed_dir);

    ordered_json doc = ordered_json::parse(rep.to_json());
    ordered_json full;
    for (auto it = doc.begin(); it != doc.end(); ++it) {
      if (it.key() == "rows") continue;
      full[it.key()] = it.value();
      if (it.key() == "schema") {
        full["description"] = request.description.empty() ? prov.value("description", "") : request.description;
        full["source"] = dir.string();
      }
    }
    full["provenance"] = prov.empty() ? ordered_json(nullptr) : ordered_json::parse(prov.dump());
    full["columns"] = report_columns(rep);
    full["rows"] = doc["rows"];
    if (auto bad = schema_violations(schema, json::parse(full.dump())); !bad.empty())
      throw std::logic_error("report for " + dir.string() + " violates its schema: " + bad.front());
    write_text(seed_dir / "report.json", full.dump(2) + "\n");
    write_text(seed_dir / "report.csv", rep.to_csv());
    for (const auto& n : rep.notices) progress << "notice (" << name << "): " << n << "\n";
    columns.push_back(full["columns"]);
    pixel_std.push_back(rep.ensemble_pixel_std);

    if (request.plots && request.plot_clips > 0) {
      const fs::path plots = out / "plots";
      fs::create_directories(plots);
      auto input = read_optional(dir / "input.npy");
      const torch::Tensor ref = ens.samples.defined() ? ens.samples[0] : ens.deterministic;
      const auto B = std::min<std::int64_t>(request.plot_clips, ref.size(0));
      for (std::int64_t b = 0; b < B; ++b) {
        for (std::int64_t c = 0; c < ref.size(1); ++c) {
          std::vector<torch::Tensor> strips;
          if (input) strips.push_back((*input)[b][c]);
          if (y) strips.push_back((*y)[b][c]);
          if (ens.deterministic.defined()) strips.push_back(ens.deterministic[b][c]);
          for (std::int64_t k = 0; k < std::min<std::int64_t>(ens.size(), 8); ++k)
            strips.push_back(ens.samples[k][b][c]);
          double lo, hi;
          if (prov.contains("value_range") && prov["value_range"].size() > static_cast<std::size_t>(c)) {
            lo = prov["value_range"][static_cast<std::size_t>(c)][0].get<double>();
            hi = prov["value_range"][static_cast<std::size_t>(c)][1].get<double>();
          } else {
            auto all = torch::stack(strips);
            lo = all.min().item<double>();
            hi = all.max().item<double>();
          }
          const std::string var = c < static_cast<std::int64_t>(ro.variables.size())
                                      ? ro.variables[static_cast<std::size_t>(c)]
                                      : "c" + std::to_string(c);
          write_strip_grid(plots / (name + "_clip" + std::to_string(b) + "_" + var + ".png"), strips, lo, hi);
        }
      }
    }
    result.reports.push_back(std::move(rep));
  }

  // Mean and STD over seeds.
  ordered_json summary;
  summary["schema"] = "dgdm.summary/1";
  summary["description"] = request.description;
  summary["n_seeds"] = columns.size();
  summary["sources"] = request.forecast_dirs;
  std::ostringstream csv;
  csv << "column,metric,mean,std,n_seeds\n";
  ordered_json stats = ordered_json::object();
  for (const char* col : kColumns) {
    if (columns.front()[col].is_null()) {
      stats[col] = nullptr;
      continue;
    }
    ordered_json entry = ordered_json::object();
    for (const char* m : kMetricNames) {
      std::vector<double> v;
      for (const auto& c : columns)
        if (!c[col].is_null()) v.push_back(c[col][m].get<double>());
      double mean = 0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      const double sd = sample_std(v);
      entry[m] = {{"mean", mean}, {"std", sd}};
      csv << col << ',' << m << ',' << fmt9(mean) << ',' << fmt9(sd) << ',' << v.size() << '\n';
    }
    stats[col] = entry;
  }
  summary["columns"] = stats;
  std::vector<double> ps;
  for (const auto& p : pixel_std)
    if (p) ps.push_back(*p);
  if (!ps.empty()) {
    double mean = 0;
    for (double x : ps) mean += x;
    mean /= static_cast<double>(ps.size());
    summary["ensemble_pixel_std"] = {{"mean", mean}, {"std", sample_std(ps)}};
    csv << "ensemble,pixel_std," << fmt9(mean) << ',' << fmt9(sample_std(ps)) << ',' << ps.size() << '\n';
  } else {
    summary["ensemble_pixel_std"] = nullptr;
  }
  write_text(out / "summary.json", summary.dump(2) + "\n");
  write_text(out / "summary.csv", csv.str());

  // One row in the layout of a component-ablation table; "-" marks a column
  // the configuration does not produce.
  std::ostringstream table;
  table << "description";
  for (const char* col : kColumns)
    for (const char* m : kMetricNames) table << ',' << col << '_' << m;
  table << "\n\"" << request.description << '"';
  for (const char* col : kColumns)
    for (const char* m : kMetricNames)
      table << ',' << (stats[col].is_null() ? std::string("-") : fmt9(stats[col][m]["mean"].get<double>()));
  table << '\n';
  write_text(out / "table.csv", table.str());
  result.summary = summary;
  return result;
}

ordered_json report_schema() {
  const ordered_json number = {{"type", "number"}};
  ordered_json metrics = {{"type", ordered_json::array({"object", "null"})},
                          {"required", {"mae", "mse", "psnr", "ssim"}},
                          {"properties", {{"mae", number}, {"mse", number}, {"psnr", number}, {"ssim", number}}},
                          {"additionalProperties", false}};
  ordered_json row = {
      {"type", "object"},
      {"required", {"identity", "variable", "frame", "mae", "mse", "psnr", "ssim", "fvd"}},
      {"properties",
       {{"identity", {{"type", "string"}}},
        {"variable", {{"type", "string"}}},
        {"frame", {{"type", ordered_json::array({"integer", "string"})}}},
        {"mae", number},
        {"mse", number},
        {"psnr", number},
        {"ssim", number},
        {"fvd", {{"type", "null"}}}}},
      {"additionalProperties", false}};
  ordered_json s;
  s["$schema"] = "https://json-schema.org/draft/2020-12/schema";
  s["$id"] = "dgdm.metrics/1";
  s["title"] = "DGDM forecast metrics report";
  s["type"] = "object";
  s["required"] = {"schema",   "description", "source",  "data_range", "frame_sum", "reference", "ensemble_pixel_std",
                   "notices", "provenance",  "columns", "rows"};
  s["properties"] = {
      {"schema", {{"const", "dgdm.metrics/1"}}},
      {"description", {{"type", "string"}}},
      {"source", {{"type", "string"}}},
      {"data_range", {{"type", "number"}, {"exclusiveMinimum", 0}}},
      {"frame_sum", {{"type", "boolean"}}},
      {"reference", {{"enum", {"truth", "ensemble_mean"}}}},
      {"ensemble_pixel_std", {{"type", ordered_json::array({"number", "null"})}}},
      {"notices", {{"type", "array"}, {"items", {{"type", "string"}}}}},
      {"provenance", {{"type", ordered_json::array({"object", "null"})}}},
      {"columns",
       {{"type", "object"},
        {"required", {"deterministic", "probabilistic", "average", "best"}},
        {"properties", {{"deterministic", metrics}, {"probabilistic", metrics}, {"average", metrics}, {"best", metrics}}},
        {"additionalProperties", false}}},
      {"rows", {{"type", "array"}, {"items", row}}}};
  s["additionalProperties"] = false;
  return s;
}

namespace {

bool has_type(const json& v, const std::string& t) {
  if (t == "object") return v.is_object();
  if (t == "array") return v.is_array();
  if (t == "string") return v.is_string();
  if (t == "boolean") return v.is_boolean();
  if (t == "null") return v.is_null();
  if (t == "integer") return v.is_number_integer();
  if (t == "number") return v.is_number();
  return false;
}

void check(const json& schema, const json& v, const std::string& at, std::vector<std::string>& out) {
  if (schema.contains("type")) {
    const auto& t = schema["type"];
    bool ok = false;
    if (t.is_string()) ok = has_type(v, t);
    else
      for (const auto& e : t) ok = ok || has_type(v, e);
    if (!ok) {
      out.push_back(at + ": expected type " + t.dump() + ", got " + v.type_name());
      return;
    }
  }
  if (schema.contains("const") && v != schema["const"]) out.push_back(at + ": must equal " + schema["const"].dump());
  if (schema.contains("enum") && std::find(schema["enum"].begin(), schema["enum"].end(), v) == schema["enum"].end())
    out.push_back(at + ": " + v.dump() + " not in " + schema["enum"].dump());
  if (v.is_number()) {
    if (schema.contains("minimum") && v.get<double>() < schema["minimum"].get<double>())
      out.push_back(at + ": below minimum");
    if (schema.contains("exclusiveMinimum") && v.get<double>() <= schema["exclusiveMinimum"].get<double>())
      out.push_back(at + ": not above exclusiveMinimum");
  }
  if (v.is_object()) {
    if (schema.contains("required"))
      for (const auto& k : schema["required"])
        if (!v.contains(k.get<std::string>())) out.push_back(at + ": missing '" + k.get<std::string>() + "'");
    for (auto it = v.begin(); it != v.end(); ++it) {
      if (schema.contains("properties") && schema["properties"].contains(it.key())) {
        check(schema["properties"][it.key()], it.value(), at + "." + it.key(), out);
      } else if (schema.contains("additionalProperties") && schema["additionalProperties"] == false) {
        out.push_back(at + ": unexpected key '" + it.key() + "'");
      }
    }
  }
  if (v.is_array() && schema.contains("items"))
    for (std::size_t i = 0; i < v.size(); ++i) check(schema["items"], v[i], at + "[" + std::to_string(i) + "]", out);
}

}  // namespace

std::vector<std::string> schema_violations(const json& schema, const json& doc) {
  std::vector<std::string> out;
  check(schema, doc, "$", out);
  return out;
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016" PRIx64, h);
  return hex;
}

// Whole pipeline ------------------------------------------------------------------

EvalResult run_experiment(const ExperimentConfig& config, const RunOptions& options, std::ostream& progress) {
  const bool have_data = fs::exists(fs::path(config.dataset.dir) / "manifest.json");
  if (options.force_data || (!have_data && config.dataset.kind != "directory"))
    generate_dataset(config, options.force_data, progress);
  const auto trained = train_experiment(config, options.resume, progress);
  const fs::path out = config.output_dir;
  EvalRequest eval;
  for (auto seed : config.inference.seeds) {
    SampleRequest req;
    req.checkpoint = trained.final_checkpoint;
    req.out_dir = (out / "forecasts" / ("seed_" + std::to_string(seed))).string();
    req.split = config.inference.split;
    req.seed = static_cast<std::uint64_t>(seed);
    const auto s = sample_experiment(config, req);
    progress << "sampled " << s.members << " member(s) for " << s.clips << " clip(s) into " << s.dir << "\n";
    eval.forecast_dirs.push_back(s.dir);
  }
  eval.out_dir = (out / "eval").string();
  eval.frame_sum = config.eval.frame_sum;
  eval.best = config.eval.best;
  eval.plots = config.eval.plots;
  eval.plot_clips = config.eval.plot_clips;
  eval.description = config.description;
  return evaluate_forecasts(eval, progress);
}

}  // namespace dgdm
